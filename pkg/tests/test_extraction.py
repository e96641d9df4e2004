import pytest

from src.collectors.extraction import (
    NO_RISK_CONTENT,
    ExtractionProviderDescriptor,
    MockExtractionProvider,
    OpenAIChatProvider,
    RiskFeatureExtractor,
    build_extraction_provider,
    mock_extract,
)
from src.domain.models import Language, TaskKind, Transcript
from src.errors import ConfigError, PromptError

MOCK = ExtractionProviderDescriptor(provider_id="mock")
LOOKUP = {"哭": "cry", "难过": "sad", "没有方向": "no direction"}


def _transcript(sid="S1", task=TaskKind.ER, text="今天我去了学校。最近我常常哭。我很难过，想哭。"):
    return Transcript(subject_id=sid, task=task, text=text, provider_id="file")


def test_mock_extract_keeps_marker_sentences_in_order():
    text = "今天我去了学校。最近我常常哭。老师讲了数学题。我很难过。"
    assert mock_extract(text, LOOKUP, Language.ZH) == "最近我常常哭。 我很难过。"


def test_mock_extract_translates_markers_for_english():
    text = "我觉得没有方向。我想哭。"
    assert mock_extract(text, LOOKUP, Language.EN, LOOKUP) == "我觉得no direction。 我想cry。"


def test_mock_extract_sentinel_without_markers():
    assert mock_extract("今天天气很好。", LOOKUP, Language.ZH) == NO_RISK_CONTENT


def test_mock_extract_needs_lookup_for_english():
    with pytest.raises(ValueError):
        mock_extract("我想哭。", LOOKUP, Language.EN)


def test_mock_extract_rejects_markers_missing_from_the_lookup():
    # 哭泣 overlaps 哭 but has no English form
    with pytest.raises(ValueError, match="哭泣"):
        mock_extract("我一直哭泣。", [*LOOKUP, "哭泣"], Language.EN, LOOKUP)
    assert mock_extract("我一直哭泣。", [*LOOKUP, "哭泣"], Language.ZH) == "我一直哭泣。"


async def test_extract_features_one_per_language_and_cached(tmp_path, lexicon):
    extractor = RiskFeatureExtractor(tmp_path, retry_base_delay=0)
    provider = MockExtractionProvider(lexicon)
    extractor.register(provider)

    features = await extractor.extract_features(
        _transcript(), TaskKind.ER, [Language.EN, Language.ZH], MOCK,
    )
    again = await extractor.extract_features(
        _transcript(), TaskKind.ER, [Language.ZH, Language.EN], MOCK,
    )

    assert [f.language for f in features] == [Language.ZH, Language.EN]
    assert features == again
    assert provider.calls == 2
    assert features[0].text == "最近我常常哭。 我很难过，想哭。"
    assert features[1].text == "最近我常常cry。 我很sad，想cry。"
    assert all(f.prompt_version == "v1" and f.provider_id == "mock" for f in features)
    assert (tmp_path / "features" / "mock" / "v1" / "S1__ER__en.txt").exists()


async def test_prompt_version_is_part_of_the_cache_key(tmp_path, lexicon):
    extractor = RiskFeatureExtractor(tmp_path, retry_base_delay=0)
    provider = MockExtractionProvider(lexicon)
    extractor.register(provider)

    await extractor.extract_features(_transcript(), TaskKind.ER, [Language.ZH], MOCK, "v1")
    await extractor.extract_features(_transcript(), TaskKind.ER, [Language.ZH], MOCK, "v1-summary")

    assert provider.calls == 2


async def test_extract_features_rejects_pr_and_task_mismatch(tmp_path, lexicon):
    extractor = RiskFeatureExtractor(tmp_path)
    extractor.register(MockExtractionProvider(lexicon))

    with pytest.raises(PromptError):
        await extractor.extract_features(_transcript(task=TaskKind.PR), TaskKind.PR, [Language.ZH], MOCK)
    with pytest.raises(PromptError):
        await extractor.extract_features(_transcript(task=TaskKind.ED), TaskKind.ER, [Language.ZH], MOCK)


class _FlakyProvider(MockExtractionProvider):
    """Returns an empty answer for one subject."""

    async def complete(self, request):
        if "S2" in request.prompt:
            self.calls += 1
            return ""
        return await super().complete(request)


async def test_batch_extract_skips_pr_and_records_failures(tmp_path, lexicon):
    extractor = RiskFeatureExtractor(tmp_path, retry_base_delay=0)
    extractor.register(_FlakyProvider(lexicon))
    transcripts = [
        _transcript("S1", TaskKind.ER),
        _transcript("S1", TaskKind.PR, "北风和太阳。"),
        _transcript("S2", TaskKind.ED, "S2 图片里的人在哭。"),
    ]

    batch = await extractor.batch_extract(transcripts, [Language.ZH, Language.EN], MOCK, concurrency_limit=2)

    assert [(f.subject_id, f.language) for f in batch.features] == [("S1", Language.ZH), ("S1", Language.EN)]
    assert [(f.subject_id, f.language, f.error_type) for f in batch.failures] == [
        ("S2", Language.ZH, "EmptyProviderOutputError"),
        ("S2", Language.EN, "EmptyProviderOutputError"),
    ]
    assert not (tmp_path / "features" / "mock" / "v1" / "S2__ED__zh.txt").exists()


def test_mock_provider_needs_a_lexicon():
    with pytest.raises(ConfigError):
        build_extraction_provider(MOCK)


async def test_openai_chat_provider(tmp_path, httpx_mock):
    httpx_mock.add_response(
        url="https://llm.test/v1/chat/completions",
        method="POST",
        json={"choices": [{"message": {"content": "  I often feel like crying.  "}}]},
    )
    descriptor = ExtractionProviderDescriptor(provider_id="gpt-4o", config={"kind": "openai-chat"})
    extractor = RiskFeatureExtractor(tmp_path, retry_base_delay=0)
    extractor.register(OpenAIChatProvider("gpt-4o", model="gpt-4o", base_url="https://llm.test/v1", api_key="k"))
    try:
        features = await extractor.extract_features(_transcript(), TaskKind.ER, [Language.EN], descriptor)
    finally:
        await extractor.close()

    assert features[0].text == "I often feel like crying."
    request = httpx_mock.get_request()
    body = request.read().decode("utf-8")
    assert '"model":"gpt-4o"' in body.replace(" ", "")
    assert "English" in body
