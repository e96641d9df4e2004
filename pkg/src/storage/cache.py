"""
File-per-key text cache for transcripts and extracted features.

Each entry is one UTF-8 file under the cache root; writes go to a temporary
file in the same directory and are renamed into place, so readers never see a
partial entry. Writers of the same key are serialized within a process.
"""
import asyncio
import os
import uuid
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, Optional, Union

import aiofiles
import aiofiles.os
import structlog

logger = structlog.get_logger()


class ArtifactCache:
    """Persistent text cache keyed by relative path."""

    def __init__(self, root: Union[str, Path]):
        """
        Initialize cache.

        Args:
            root: Cache root directory
        """
        self.root = Path(root)
        self._locks: Dict[str, asyncio.Lock] = {}
        self.hits = 0
        self.misses = 0

    def path_for(self, key: str) -> Path:
        return self.root / key

    def _lock(self, key: str) -> asyncio.Lock:
        if key not in self._locks:
            self._locks[key] = asyncio.Lock()
        return self._locks[key]

    async def get(self, key: str) -> Optional[str]:
        """Return the cached text, or None."""
        path = self.path_for(key)
        try:
            async with aiofiles.open(path, "r", encoding="utf-8", newline="") as f:
                text = await f.read()
        except FileNotFoundError:
            self.misses += 1
            return None

        self.hits += 1
        return text

    async def put(self, key: str, text: str) -> Path:
        """Atomically store text under key."""
        path = self.path_for(key)
        async with self._lock(key):
            await aiofiles.os.makedirs(path.parent, exist_ok=True)
            tmp = path.with_name(f".{path.name}.{os.getpid()}.{uuid.uuid4().hex}.tmp")
            try:
                async with aiofiles.open(tmp, "w", encoding="utf-8", newline="") as f:
                    await f.write(text)
                await aiofiles.os.replace(tmp, path)
            except BaseException:
                # no stray temp files on failure
                try:
                    await aiofiles.os.remove(tmp)
                except FileNotFoundError:
                    pass
                raise

        logger.debug("cache_entry_written", key=key, chars=len(text))
        return path

    async def invalidate(self, key: str) -> bool:
        """Delete an entry; returns whether it existed."""
        path = self.path_for(key)
        async with self._lock(key):
            try:
                await aiofiles.os.remove(path)
            except FileNotFoundError:
                return False

        logger.info("cache_entry_invalidated", key=key)
        return True

    def created_at(self, key: str) -> Optional[datetime]:
        path = self.path_for(key)
        if not path.exists():
            return None
        return datetime.fromtimestamp(path.stat().st_mtime, tz=timezone.utc)
