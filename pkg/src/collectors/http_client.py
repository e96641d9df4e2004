"""
HTTP client shared by external ASR and LLM providers.
"""
from typing import Any, Dict, Optional

import httpx
import structlog

from config.settings import settings
from src.errors import ProviderError, ProviderUnavailableError
from src.utils.rate_limiter import AdaptiveRateLimiter

logger = structlog.get_logger()


class ProviderHttpClient:
    """Rate-limited JSON client for an OpenAI-compatible endpoint."""

    def __init__(
        self,
        provider_id: str,
        base_url: str,
        api_key: str,
        timeout: Optional[float] = None,
        requests_per_minute: Optional[int] = None,
    ):
        """
        Initialize client.

        Args:
            provider_id: Provider id used in logs
            base_url: Endpoint base URL, e.g. https://api.openai.com/v1
            api_key: Bearer token (may be empty for local endpoints)
            timeout: Request timeout in seconds
            requests_per_minute: Rate limit, 0 for unlimited
        """
        self.provider_id = provider_id
        self.base_url = base_url.rstrip("/")
        headers = {"Authorization": f"Bearer {api_key}"} if api_key else {}
        self.client = httpx.AsyncClient(
            timeout=timeout if timeout is not None else settings.request_timeout_seconds,
            headers=headers,
        )
        self.rate_limiter = AdaptiveRateLimiter(
            requests_per_minute if requests_per_minute is not None else settings.provider_requests_per_minute,
            name=provider_id,
        )

        logger.info("provider_client_initialized", provider=provider_id, base_url=self.base_url)

    async def post(self, path: str, **kwargs: Any) -> Dict[str, Any]:
        """
        POST and decode a JSON response.

        Raises:
            ProviderUnavailableError: Timeout, connection failure, 429 or 5xx
            ProviderError: Other HTTP errors or a non-JSON body
        """
        await self.rate_limiter.acquire()
        url = f"{self.base_url}{path}"

        try:
            response = await self.client.post(url, **kwargs)
        except (httpx.TimeoutException, httpx.TransportError) as e:
            logger.warning("provider_request_failed", provider=self.provider_id, error=str(e))
            raise ProviderUnavailableError(f"{self.provider_id}: {type(e).__name__}: {e}") from e

        if response.status_code == 429:
            await self.rate_limiter.report_rate_limit_hit()
            raise ProviderUnavailableError(f"{self.provider_id}: rate limited (429)")
        if response.status_code >= 500:
            raise ProviderUnavailableError(f"{self.provider_id}: server error {response.status_code}")
        if response.status_code >= 400:
            raise ProviderError(
                f"{self.provider_id}: HTTP {response.status_code}: {response.text[:200]}"
            )

        await self.rate_limiter.report_success()
        try:
            return response.json()
        except ValueError as e:
            raise ProviderError(f"{self.provider_id}: response is not JSON") from e

    async def close(self):
        """Close HTTP client."""
        await self.client.aclose()
