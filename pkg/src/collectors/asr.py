"""
ASR gateway: turns recordings into Chinese transcripts through pluggable
providers, with a persistent per-entry cache.

Providers are selected by ``provider_id``; ``config["kind"]`` overrides the
implementation so several external services can share one kind:

- ``file``: reads the transcript stored next to the recording (.txt sibling)
- ``mock``: returns a configured fixed text; records call and concurrency counts
- ``openai-audio``: OpenAI-compatible ``/audio/transcriptions`` endpoint
"""
import asyncio
from abc import ABC, abstractmethod
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import aiofiles
import structlog
from pydantic import BaseModel, ConfigDict, Field

from config.settings import settings
from src.collectors.http_client import ProviderHttpClient
from src.domain.models import (
    DatasetManifest,
    FailureRecord,
    RecordingRef,
    TaskKind,
    Transcript,
)
from src.errors import (
    EmptyProviderOutputError,
    MissingTranscriptError,
    ProviderError,
    ProviderUnavailableError,
    UnknownProviderError,
)
from src.storage.cache import ArtifactCache
from src.utils.hashing import safe_name
from src.utils.retry import retry_async

logger = structlog.get_logger()


class AsrProviderDescriptor(BaseModel):
    model_config = ConfigDict(frozen=True)

    provider_id: str = Field(min_length=1)
    config: Dict[str, Any] = {}

    @property
    def kind(self) -> str:
        return str(self.config.get("kind", self.provider_id))


class AsrCacheEntry(BaseModel):
    key: str
    transcript: Transcript
    created_at: datetime


class TranscriptionBatch(BaseModel):
    """Transcripts in manifest order plus per-item failures."""
    transcripts: List[Transcript] = []
    failures: List[FailureRecord] = []
    provider_calls: int = 0


class AsrProvider(ABC):
    """Provider contract: audio in, Chinese text out."""

    def __init__(self, provider_id: str):
        self.provider_id = provider_id
        self.calls = 0

    @abstractmethod
    async def transcribe_audio(self, recording: RecordingRef, audio_path: Path) -> str:
        """Return the raw transcript text of one recording."""

    async def close(self):
        pass


class FileAsrProvider(AsrProvider):
    """Precomputed transcripts stored as <audio path>.txt."""

    async def transcribe_audio(self, recording: RecordingRef, audio_path: Path) -> str:
        self.calls += 1
        transcript_path = audio_path.with_suffix(".txt")
        try:
            async with aiofiles.open(transcript_path, "r", encoding="utf-8", newline="") as f:
                return await f.read()
        except FileNotFoundError as e:
            raise MissingTranscriptError(
                f"no transcript file {transcript_path} for {recording.subject_id}/{recording.task.value}"
            ) from e


class MockAsrProvider(AsrProvider):
    """
    Deterministic provider for tests.

    Config keys: ``text`` (returned for every recording), ``delay_s`` (simulated
    latency), ``fail_subjects`` (ids that raise ProviderUnavailableError).
    """

    def __init__(self, provider_id: str = "mock", text: str = "我很好。", delay_s: float = 0.0,
                 fail_subjects: Sequence[str] = ()):
        super().__init__(provider_id)
        self.text = text
        self.delay_s = delay_s
        self.fail_subjects = set(fail_subjects)
        self.in_flight = 0
        self.max_in_flight = 0

    async def transcribe_audio(self, recording: RecordingRef, audio_path: Path) -> str:
        self.calls += 1
        self.in_flight += 1
        self.max_in_flight = max(self.max_in_flight, self.in_flight)
        try:
            await asyncio.sleep(self.delay_s)
            if recording.subject_id in self.fail_subjects:
                raise ProviderUnavailableError(f"mock failure for {recording.subject_id}")
            return self.text
        finally:
            self.in_flight -= 1


class OpenAIAudioAsrProvider(AsrProvider):
    """OpenAI-compatible transcription endpoint (e.g. whisper-1)."""

    def __init__(self, provider_id: str, model: str, base_url: Optional[str] = None,
                 api_key: Optional[str] = None):
        super().__init__(provider_id)
        self.model = model
        self.http = ProviderHttpClient(
            provider_id,
            base_url or settings.asr_base_url,
            api_key if api_key is not None else settings.asr_api_key,
        )

    async def transcribe_audio(self, recording: RecordingRef, audio_path: Path) -> str:
        self.calls += 1
        async with aiofiles.open(audio_path, "rb") as f:
            audio = await f.read()

        payload = await self.http.post(
            "/audio/transcriptions",
            files={"file": (audio_path.name, audio)},
            data={"model": self.model, "language": "zh", "response_format": "json"},
        )
        return str(payload.get("text", ""))

    async def close(self):
        await self.http.close()


def build_asr_provider(descriptor: AsrProviderDescriptor) -> AsrProvider:
    """
    Instantiate the provider named by a descriptor.

    Raises:
        UnknownProviderError: Unsupported kind
    """
    cfg = descriptor.config
    kind = descriptor.kind
    if kind == "file":
        return FileAsrProvider(descriptor.provider_id)
    if kind == "mock":
        return MockAsrProvider(
            descriptor.provider_id,
            text=cfg.get("text", "我很好。"),
            delay_s=float(cfg.get("delay_s", 0.0)),
            fail_subjects=cfg.get("fail_subjects", ()),
        )
    if kind == "openai-audio":
        return OpenAIAudioAsrProvider(
            descriptor.provider_id,
            model=cfg.get("model", descriptor.provider_id),
            base_url=cfg.get("base_url"),
        )
    raise UnknownProviderError(f"unknown ASR provider kind {kind!r}")


class AsrGateway:
    """Cached, retrying front door to ASR providers."""

    def __init__(
        self,
        cache_root: Union[str, Path],
        max_attempts: int = 3,
        retry_base_delay: Optional[float] = None,
    ):
        """
        Initialize gateway.

        Args:
            cache_root: Root of the shared cache; entries live under asr/
            max_attempts: Attempts per item for retryable errors
            retry_base_delay: First backoff delay in seconds
        """
        self.cache = ArtifactCache(cache_root)
        self.max_attempts = max_attempts
        self.retry_base_delay = (
            settings.retry_base_delay_seconds if retry_base_delay is None else retry_base_delay
        )
        self.providers: Dict[str, AsrProvider] = {}

    def register(self, provider: AsrProvider):
        self.providers[provider.provider_id] = provider

    def provider_for(self, descriptor: AsrProviderDescriptor) -> AsrProvider:
        if descriptor.provider_id not in self.providers:
            self.register(build_asr_provider(descriptor))
        return self.providers[descriptor.provider_id]

    @staticmethod
    def entry_key(provider_id: str, subject_id: str, task: TaskKind) -> str:
        return f"{provider_id}/{subject_id}/{task.value}"

    @staticmethod
    def cache_path(provider_id: str, subject_id: str, task: TaskKind) -> str:
        return f"asr/{safe_name(provider_id)}/{safe_name(subject_id)}__{task.value}.txt"

    async def cached(
        self, recording: RecordingRef, descriptor: AsrProviderDescriptor
    ) -> Optional[AsrCacheEntry]:
        """Cache entry for a recording, if one exists."""
        path = self.cache_path(descriptor.provider_id, recording.subject_id, recording.task)
        text = await self.cache.get(path)
        if text is None:
            return None
        return AsrCacheEntry(
            key=self.entry_key(descriptor.provider_id, recording.subject_id, recording.task),
            transcript=Transcript(
                subject_id=recording.subject_id,
                task=recording.task,
                text=text,
                provider_id=descriptor.provider_id,
            ),
            created_at=self.cache.created_at(path),
        )

    async def transcribe(
        self,
        recording: RecordingRef,
        descriptor: AsrProviderDescriptor,
        root: Optional[Union[str, Path]] = None,
    ) -> Transcript:
        """
        Transcribe one recording, serving from cache when possible.

        Args:
            recording: Recording to transcribe
            descriptor: Provider to use
            root: Directory relative audio URIs resolve against

        Returns:
            Chinese Transcript tagged with the provider id

        Raises:
            ProviderUnavailableError: Provider still failing after retries
            MissingTranscriptError: File provider found no transcript
            EmptyProviderOutputError: Empty text for ER/ED
        """
        entry = await self.cached(recording, descriptor)
        if entry is not None:
            logger.debug("asr_cache_hit", key=entry.key)
            return entry.transcript

        provider = self.provider_for(descriptor)
        audio_path = Path(recording.audio_uri)
        if root is not None and not audio_path.is_absolute():
            audio_path = Path(root) / audio_path

        text = await retry_async(
            lambda: provider.transcribe_audio(recording, audio_path),
            attempts=self.max_attempts,
            base_delay=self.retry_base_delay,
            name="asr",
        )
        if not text.strip() and recording.task != TaskKind.PR:
            raise EmptyProviderOutputError(
                f"{descriptor.provider_id} returned no text for "
                f"{recording.subject_id}/{recording.task.value}"
            )

        transcript = Transcript(
            subject_id=recording.subject_id,
            task=recording.task,
            text=text,
            provider_id=descriptor.provider_id,
        )
        await self.cache.put(
            self.cache_path(descriptor.provider_id, recording.subject_id, recording.task),
            text,
        )
        return transcript

    async def batch_transcribe(
        self,
        manifest: DatasetManifest,
        descriptor: AsrProviderDescriptor,
        concurrency_limit: int = 4,
        recordings: Optional[Sequence[RecordingRef]] = None,
    ) -> TranscriptionBatch:
        """
        Transcribe every recording with bounded concurrency.

        Individual failures are collected; output order follows the manifest.

        Args:
            manifest: Manifest whose recordings to transcribe
            descriptor: Provider to use
            concurrency_limit: Maximum provider calls in flight
            recordings: Subset to transcribe (defaults to all recordings)

        Returns:
            TranscriptionBatch

        Raises:
            ValueError: concurrency_limit < 1
            ProviderError: Every item failed
        """
        if concurrency_limit < 1:
            raise ValueError("concurrency_limit must be >= 1")

        items = list(manifest.recordings if recordings is None else recordings)
        provider = self.provider_for(descriptor)
        calls_before = provider.calls
        semaphore = asyncio.Semaphore(concurrency_limit)

        async def run_one(recording: RecordingRef):
            async with semaphore:
                return await self.transcribe(recording, descriptor, root=manifest.root)

        results = await asyncio.gather(*(run_one(r) for r in items), return_exceptions=True)

        batch = TranscriptionBatch()
        for recording, result in zip(items, results):
            if isinstance(result, Exception):
                if not isinstance(result, (ProviderError, OSError)):
                    raise result
                logger.warning(
                    "transcription_failed",
                    subject_id=recording.subject_id,
                    task=recording.task.value,
                    error=str(result),
                )
                batch.failures.append(FailureRecord(
                    subject_id=recording.subject_id,
                    task=recording.task,
                    stage="transcribe",
                    error_type=type(result).__name__,
                    message=str(result),
                ))
            else:
                batch.transcripts.append(result)
        batch.provider_calls = provider.calls - calls_before

        logger.info(
            "batch_transcribe_completed",
            provider=descriptor.provider_id,
            total=len(items),
            transcribed=len(batch.transcripts),
            failed=len(batch.failures),
            provider_calls=batch.provider_calls,
        )

        if items and not batch.transcripts:
            raise ProviderError(f"all {len(items)} transcriptions failed with {descriptor.provider_id}")
        return batch

    async def close(self):
        for provider in self.providers.values():
            await provider.close()
