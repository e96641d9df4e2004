"""Utility modules."""
from .logger import setup_logging
from .rate_limiter import RateLimiter, AdaptiveRateLimiter
from .retry import retry_async
from .hashing import derive_seed, safe_name, sha256_file, sha256_tree

__all__ = [
    "setup_logging",
    "RateLimiter",
    "AdaptiveRateLimiter",
    "retry_async",
    "derive_seed",
    "safe_name",
    "sha256_file",
    "sha256_tree",
]
