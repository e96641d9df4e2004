"""
Bilingual risk-feature extraction: render the task prompt, ask an LLM
provider for a first-person risk summary in each requested language, cache
every answer under (provider, prompt version, subject, task, language).
"""
import asyncio
import re
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Union

import structlog
from pydantic import BaseModel, ConfigDict, Field

from config.settings import settings
from src.collectors.http_client import ProviderHttpClient
from src.domain.lexicon import MarkerLexicon, load_lexicon
from src.domain.models import (
    FailureRecord,
    Language,
    RiskFeatureText,
    TaskKind,
    TEXT_TASKS,
    Transcript,
)
from src.errors import (
    ConfigError,
    EmptyProviderOutputError,
    PipelineError,
    PromptError,
    UnknownProviderError,
)
from src.prompts.loader import DEFAULT_VERSION, load_template, render_prompt
from src.storage.cache import ArtifactCache
from src.utils.hashing import safe_name
from src.utils.retry import retry_async

logger = structlog.get_logger()

NO_RISK_CONTENT = "no risk-related content"
_SENTENCE = re.compile(r"[^.!?。！？]+[.!?。！？]*")


def split_sentences(text: str) -> List[str]:
    return [s.strip() for s in _SENTENCE.findall(text) if s.strip()]


def mock_extract(
    text: str,
    lexicon: Iterable[str],
    language: Language,
    lookup: Optional[Mapping[str, str]] = None,
) -> str:
    """
    Deterministic stand-in for an LLM summary.

    Keeps, in order, the sentences that contain at least one marker; for
    English output every marker is replaced through the lookup table.

    Args:
        text: Transcript text
        lexicon: Marker surface forms to look for
        language: Output language
        lookup: Marker -> English form, required for Language.EN

    Returns:
        Kept sentences joined by single spaces, or the no-content sentinel

    Raises:
        ValueError: Empty lexicon, or an English run with markers missing from the lookup
    """
    markers = sorted({m for m in lexicon if m}, key=len, reverse=True)
    if not markers:
        raise ValueError("marker lexicon is empty")
    if language == Language.EN:
        if not lookup:
            raise ValueError("English output needs a marker lookup table")
        untranslated = [m for m in markers if m not in lookup]
        if untranslated:
            raise ValueError(f"no English form for markers {untranslated}")

    pattern = re.compile("|".join(re.escape(m) for m in markers))
    kept = [s for s in split_sentences(text) if pattern.search(s)]
    if not kept:
        return NO_RISK_CONTENT

    if language == Language.EN:
        kept = [pattern.sub(lambda m: lookup[m.group(0)], s) for s in kept]
    return " ".join(kept)


class ExtractionProviderDescriptor(BaseModel):
    model_config = ConfigDict(frozen=True)

    provider_id: str = Field(min_length=1)
    config: Dict[str, Any] = {}

    @property
    def kind(self) -> str:
        return str(self.config.get("kind", self.provider_id))


class CompletionRequest(BaseModel):
    """What a provider receives. External providers only read the prompt."""
    model_config = ConfigDict(frozen=True)

    prompt: str
    transcript_text: str
    task: TaskKind
    language: Language
    config: Dict[str, Any] = {}


class ExtractionBatch(BaseModel):
    features: List[RiskFeatureText] = []
    failures: List[FailureRecord] = []
    provider_calls: int = 0


class ExtractionProvider(ABC):
    """Provider contract: prompt in, text out."""

    def __init__(self, provider_id: str):
        self.provider_id = provider_id
        self.calls = 0

    @abstractmethod
    async def complete(self, request: CompletionRequest) -> str:
        """Return the model's answer."""

    async def close(self):
        pass


class MockExtractionProvider(ExtractionProvider):
    """Sentence filter over a marker lexicon; see mock_extract."""

    def __init__(self, lexicon: MarkerLexicon, provider_id: str = "mock"):
        super().__init__(provider_id)
        self.lexicon = lexicon
        self.lookup = lexicon.zh_to_en()

    async def complete(self, request: CompletionRequest) -> str:
        self.calls += 1
        return mock_extract(
            request.transcript_text,
            self.lexicon.forms(Language.ZH),
            request.language,
            self.lookup,
        )


class OpenAIChatProvider(ExtractionProvider):
    """OpenAI-compatible chat completions (GPT-4o, Qwen-Plus compatible mode)."""

    def __init__(self, provider_id: str, model: str, temperature: float = 0.0,
                 base_url: Optional[str] = None, api_key: Optional[str] = None):
        super().__init__(provider_id)
        self.model = model
        self.temperature = temperature
        self.http = ProviderHttpClient(
            provider_id,
            base_url or settings.llm_base_url,
            api_key if api_key is not None else settings.llm_api_key,
        )

    async def complete(self, request: CompletionRequest) -> str:
        self.calls += 1
        payload = await self.http.post(
            "/chat/completions",
            json={
                "model": self.model,
                "temperature": self.temperature,
                "messages": [{"role": "user", "content": request.prompt}],
            },
        )
        try:
            return str(payload["choices"][0]["message"]["content"] or "")
        except (KeyError, IndexError, TypeError):
            return ""

    async def close(self):
        await self.http.close()


def build_extraction_provider(
    descriptor: ExtractionProviderDescriptor,
    lexicon: Optional[MarkerLexicon] = None,
) -> ExtractionProvider:
    """
    Instantiate the provider named by a descriptor.

    Raises:
        UnknownProviderError: Unsupported kind
        ConfigError: Mock provider without a lexicon
    """
    cfg = descriptor.config
    kind = descriptor.kind
    if kind == "mock":
        if lexicon is None:
            if "lexicon_path" not in cfg:
                raise ConfigError("mock extraction provider needs a marker lexicon")
            lexicon = load_lexicon(cfg["lexicon_path"])
        return MockExtractionProvider(lexicon, descriptor.provider_id)
    if kind == "openai-chat":
        return OpenAIChatProvider(
            descriptor.provider_id,
            model=cfg.get("model", descriptor.provider_id),
            temperature=float(cfg.get("temperature", 0.0)),
            base_url=cfg.get("base_url"),
        )
    raise UnknownProviderError(f"unknown extraction provider kind {kind!r}")


def ordered_languages(languages: Iterable[Language]) -> List[Language]:
    requested = set(languages)
    return [lang for lang in Language if lang in requested]


class RiskFeatureExtractor:
    """Cached, retrying front door to extraction providers."""

    def __init__(
        self,
        cache_root: Union[str, Path],
        max_attempts: int = 3,
        retry_base_delay: Optional[float] = None,
    ):
        self.cache = ArtifactCache(cache_root)
        self.max_attempts = max_attempts
        self.retry_base_delay = (
            settings.retry_base_delay_seconds if retry_base_delay is None else retry_base_delay
        )
        self.providers: Dict[str, ExtractionProvider] = {}

    def register(self, provider: ExtractionProvider):
        self.providers[provider.provider_id] = provider

    def provider_for(self, descriptor: ExtractionProviderDescriptor) -> ExtractionProvider:
        if descriptor.provider_id not in self.providers:
            self.register(build_extraction_provider(descriptor))
        return self.providers[descriptor.provider_id]

    @staticmethod
    def cache_path(provider_id: str, prompt_version: str, subject_id: str,
                   task: TaskKind, language: Language) -> str:
        return (
            f"features/{safe_name(provider_id)}/{safe_name(prompt_version)}/"
            f"{safe_name(subject_id)}__{task.value}__{language.value}.txt"
        )

    async def _extract_one(
        self,
        transcript: Transcript,
        language: Language,
        descriptor: ExtractionProviderDescriptor,
        prompt_version: str,
    ) -> RiskFeatureText:
        key = self.cache_path(
            descriptor.provider_id, prompt_version, transcript.subject_id, transcript.task, language
        )
        text = await self.cache.get(key)
        if text is None:
            template = load_template(transcript.task, language, prompt_version)
            request = CompletionRequest(
                prompt=render_prompt(template, transcript),
                transcript_text=transcript.text,
                task=transcript.task,
                language=language,
                config=descriptor.config,
            )
            provider = self.provider_for(descriptor)
            text = (await retry_async(
                lambda: provider.complete(request),
                attempts=self.max_attempts,
                base_delay=self.retry_base_delay,
                name="extraction",
            )).strip()
            if not text:
                raise EmptyProviderOutputError(
                    f"{descriptor.provider_id} returned no features for "
                    f"{transcript.subject_id}/{transcript.task.value}/{language.value}"
                )
            await self.cache.put(key, text)
        else:
            logger.debug("feature_cache_hit", key=key)

        return RiskFeatureText(
            subject_id=transcript.subject_id,
            task=transcript.task,
            language=language,
            text=text,
            provider_id=descriptor.provider_id,
            prompt_version=prompt_version,
        )

    async def extract_features(
        self,
        transcript: Transcript,
        task: TaskKind,
        languages: Iterable[Language],
        descriptor: ExtractionProviderDescriptor,
        prompt_version: str = DEFAULT_VERSION,
    ) -> List[RiskFeatureText]:
        """
        Extract one risk-feature text per requested language.

        Raises:
            PromptError: PR task or transcript of another task
            ProviderError: Provider failure after retries or an empty answer
        """
        if task not in TEXT_TASKS:
            raise PromptError(f"no feature extraction for {task.value}")
        if transcript.task != task:
            raise PromptError(f"transcript is {transcript.task.value}, expected {task.value}")

        return [
            await self._extract_one(transcript, lang, descriptor, prompt_version)
            for lang in ordered_languages(languages)
        ]

    async def batch_extract(
        self,
        transcripts: Sequence[Transcript],
        languages: Iterable[Language],
        descriptor: ExtractionProviderDescriptor,
        prompt_version: str = DEFAULT_VERSION,
        concurrency_limit: int = 4,
    ) -> ExtractionBatch:
        """
        Extract features for every ER/ED transcript with bounded concurrency.

        PR transcripts are skipped. Failures are recorded, never replaced by
        empty features.
        """
        if concurrency_limit < 1:
            raise ValueError("concurrency_limit must be >= 1")

        langs = ordered_languages(languages)
        items = [(t, lang) for t in transcripts if t.task in TEXT_TASKS for lang in langs]
        provider = self.provider_for(descriptor)
        calls_before = provider.calls
        semaphore = asyncio.Semaphore(concurrency_limit)

        async def run_one(transcript: Transcript, language: Language):
            async with semaphore:
                return await self._extract_one(transcript, language, descriptor, prompt_version)

        results = await asyncio.gather(*(run_one(t, lang) for t, lang in items), return_exceptions=True)

        batch = ExtractionBatch()
        for (transcript, language), result in zip(items, results):
            if isinstance(result, Exception):
                if not isinstance(result, PipelineError):
                    raise result
                logger.warning(
                    "feature_extraction_failed",
                    subject_id=transcript.subject_id,
                    task=transcript.task.value,
                    language=language.value,
                    error=str(result),
                )
                batch.failures.append(FailureRecord(
                    subject_id=transcript.subject_id,
                    task=transcript.task,
                    stage="extract",
                    error_type=type(result).__name__,
                    message=str(result),
                    language=language,
                ))
            else:
                batch.features.append(result)
        batch.provider_calls = provider.calls - calls_before

        logger.info(
            "batch_extract_completed",
            provider=descriptor.provider_id,
            prompt_version=prompt_version,
            languages=[lang.value for lang in langs],
            total=len(items),
            extracted=len(batch.features),
            failed=len(batch.failures),
            provider_calls=batch.provider_calls,
        )
        return batch

    async def close(self):
        for provider in self.providers.values():
            await provider.close()
