import asyncio
import time

import numpy as np
import pytest

from src.domain.models import Representation, TaskKind
from src.errors import DimensionError, MissingArtifactError, ProviderError, ProviderUnavailableError
from src.storage.cache import ArtifactCache
from src.storage.representations import RepresentationStore
from src.utils.hashing import derive_seed, safe_name, sha256_tree
from src.utils.rate_limiter import AdaptiveRateLimiter, RateLimiter
from src.utils.retry import retry_async


async def test_retry_retries_only_retryable_errors():
    calls = []

    async def flaky():
        calls.append(1)
        if len(calls) < 3:
            raise ProviderUnavailableError("busy")
        return "ok"

    assert await retry_async(flaky, attempts=3, base_delay=0) == "ok"
    assert len(calls) == 3

    async def broken():
        calls.append(1)
        raise ProviderError("bad request")

    calls.clear()
    with pytest.raises(ProviderError):
        await retry_async(broken, attempts=3, base_delay=0)
    assert len(calls) == 1


async def test_retry_gives_up_after_the_last_attempt():
    async def down():
        raise ProviderUnavailableError("down")

    with pytest.raises(ProviderUnavailableError):
        await retry_async(down, attempts=2, base_delay=0)


async def test_rate_limiter_allows_a_burst_then_waits():
    limiter = RateLimiter(requests_per_minute=600)
    for _ in range(600):
        assert await limiter.try_acquire()
    assert not await limiter.try_acquire()

    start = time.monotonic()
    await limiter.acquire()
    assert time.monotonic() - start >= 0.05


async def test_zero_rate_is_unlimited():
    limiter = RateLimiter(requests_per_minute=0)
    assert limiter.unlimited
    for _ in range(1000):
        assert await limiter.try_acquire()


async def test_adaptive_limiter_backs_off_and_recovers():
    limiter = AdaptiveRateLimiter(requests_per_minute=100)
    await limiter.report_rate_limit_hit()
    assert limiter.requests_per_minute == 70
    for _ in range(50):
        await limiter.report_success()
    assert 70 < limiter.requests_per_minute <= 100


async def test_cache_put_get_invalidate(tmp_path):
    cache = ArtifactCache(tmp_path)
    assert await cache.get("asr/mock/S1__ER.txt") is None

    await cache.put("asr/mock/S1__ER.txt", "我很好。\n")
    assert await cache.get("asr/mock/S1__ER.txt") == "我很好。\n"
    assert [p.name for p in (tmp_path / "asr" / "mock").iterdir()] == ["S1__ER.txt"]
    assert cache.created_at("asr/mock/S1__ER.txt") is not None

    assert await cache.invalidate("asr/mock/S1__ER.txt")
    assert not await cache.invalidate("asr/mock/S1__ER.txt")


async def test_concurrent_puts_leave_one_complete_entry(tmp_path):
    cache = ArtifactCache(tmp_path)
    await asyncio.gather(*(cache.put("k.txt", str(i) * 1000) for i in range(10)))

    text = await cache.get("k.txt")
    assert len(set(text)) == 1 and len(text) == 1000
    assert [p.name for p in tmp_path.iterdir()] == ["k.txt"]


async def test_failed_put_removes_its_temporary_file(tmp_path):
    cache = ArtifactCache(tmp_path)
    # a directory where the entry should go makes the rename fail
    (tmp_path / "k.txt").mkdir()

    with pytest.raises(OSError):
        await cache.put("k.txt", "我很好。")

    assert [p.name for p in tmp_path.iterdir()] == ["k.txt"]
    assert (tmp_path / "k.txt").is_dir()


def test_representation_store_round_trip_is_byte_stable(tmp_path):
    store = RepresentationStore(tmp_path)
    reps = [
        Representation(subject_id=f"S{i}", task=TaskKind.ED, encoder_id="enc", vector=np.arange(3) + i)
        for i in range(4)
    ]
    store.write("enc", TaskKind.ED, "dev", reps)
    first = sha256_tree(tmp_path)
    store.write("enc", TaskKind.ED, "dev", store.read("enc", TaskKind.ED, "dev"))

    assert sha256_tree(tmp_path) == first
    assert store.read_map("enc", TaskKind.ED, "dev")["S2"].vector.tolist() == [2.0, 3.0, 4.0]


def test_representation_store_errors(tmp_path):
    store = RepresentationStore(tmp_path)
    with pytest.raises(MissingArtifactError):
        store.read("enc", TaskKind.ER, "test")
    mixed = [
        Representation(subject_id="S1", task=TaskKind.ER, encoder_id="enc", vector=[1.0]),
        Representation(subject_id="S2", task=TaskKind.ER, encoder_id="enc", vector=[1.0, 2.0]),
    ]
    with pytest.raises(DimensionError):
        store.write("enc", TaskKind.ER, "test", mixed)


def test_stage_seeds_differ_per_stage_and_are_stable():
    assert derive_seed(0, "train_text") == derive_seed(0, "train_text")
    assert derive_seed(0, "train_text") != derive_seed(0, "train_speech")
    assert derive_seed(0, "train_text") != derive_seed(1, "train_text")
    assert 0 <= derive_seed(123, "ingest") < 2 ** 31


def test_safe_name():
    assert safe_name("hf-text:bert/base") == "hf-text_bert_base"
