"""
Retry with exponential backoff for flaky provider calls.
"""
import asyncio
from typing import Awaitable, Callable, TypeVar

import structlog

from src.errors import ProviderError

logger = structlog.get_logger()

T = TypeVar("T")


async def retry_async(
    fn: Callable[[], Awaitable[T]],
    attempts: int = 3,
    base_delay: float = 0.5,
    name: str = "provider_call",
) -> T:
    """
    Await fn, retrying retryable provider errors.

    Args:
        fn: Zero-argument coroutine factory
        attempts: Total attempts including the first
        base_delay: Delay before the second attempt; doubles each retry
        name: Prefix for log events

    Returns:
        Result of the first successful call

    Raises:
        ProviderError: Non-retryable error, or the last retryable one
    """
    for attempt in range(attempts):
        try:
            return await fn()
        except ProviderError as e:
            if not e.retryable or attempt == attempts - 1:
                raise
            delay = base_delay * (2 ** attempt)
            logger.warning(
                f"{name}_retry",
                attempt=attempt + 1,
                max_attempts=attempts,
                delay_seconds=delay,
                error=str(e),
            )
            await asyncio.sleep(delay)
    raise AssertionError("unreachable")
