"""
Request rate limiting for external transcription and LLM endpoints.
"""
import asyncio
import time

import structlog

logger = structlog.get_logger()


class RateLimiter:
    """Token bucket limiting provider requests per minute. 0 disables limiting."""

    def __init__(self, requests_per_minute: int, name: str = "provider"):
        """
        Initialize rate limiter.

        Args:
            requests_per_minute: Maximum requests per minute, 0 for unlimited
            name: Provider id used in log events
        """
        self.name = name
        self.lock = asyncio.Lock()
        self._set_rate(requests_per_minute)
        self.tokens = float(requests_per_minute)
        self.updated_at = time.monotonic()

        logger.debug(
            "rate_limiter_initialized",
            provider=name,
            requests_per_minute=requests_per_minute,
        )

    def _set_rate(self, requests_per_minute: int):
        self.requests_per_minute = requests_per_minute
        self.refill_rate = requests_per_minute / 60.0

    @property
    def unlimited(self) -> bool:
        return self.requests_per_minute <= 0

    def _refill(self):
        now = time.monotonic()
        self.tokens = min(
            float(self.requests_per_minute),
            self.tokens + (now - self.updated_at) * self.refill_rate,
        )
        self.updated_at = now

    async def acquire(self, tokens: int = 1):
        """Wait until a request may be sent."""
        if self.unlimited:
            return

        async with self.lock:
            while True:
                self._refill()
                if self.tokens >= tokens:
                    self.tokens -= tokens
                    return

                wait_time = (tokens - self.tokens) / self.refill_rate
                logger.debug("rate_limit_wait", provider=self.name, wait_seconds=round(wait_time, 3))
                await asyncio.sleep(wait_time)

    async def try_acquire(self, tokens: int = 1) -> bool:
        """Take tokens if available without waiting."""
        if self.unlimited:
            return True

        async with self.lock:
            self._refill()
            if self.tokens >= tokens:
                self.tokens -= tokens
                return True
            return False


class AdaptiveRateLimiter(RateLimiter):
    """Rate limiter that slows down when the endpoint answers 429."""

    def __init__(self, requests_per_minute: int, name: str = "provider"):
        super().__init__(requests_per_minute, name)
        self.base_rpm = requests_per_minute
        self.backoff_factor = 1.0

    async def report_rate_limit_hit(self):
        """Cut the request rate to 70%, never below 10% of the base rate."""
        if self.unlimited:
            return

        async with self.lock:
            self.backoff_factor = max(0.1, self.backoff_factor * 0.7)
            new_rpm = max(1, int(self.base_rpm * self.backoff_factor))
            logger.warning(
                "provider_rate_limit_hit",
                provider=self.name,
                old_rpm=self.requests_per_minute,
                new_rpm=new_rpm,
            )
            self._set_rate(new_rpm)
            self.tokens = min(self.tokens, float(new_rpm))

    async def report_success(self):
        """Recover 1% of the base rate per successful request."""
        if self.unlimited:
            return

        async with self.lock:
            self.backoff_factor = min(1.0, self.backoff_factor * 1.01)
            new_rpm = max(1, int(self.base_rpm * self.backoff_factor))
            if new_rpm != self.requests_per_minute:
                self._set_rate(new_rpm)
