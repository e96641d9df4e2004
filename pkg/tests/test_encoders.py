import sys
from types import SimpleNamespace

import numpy as np
import pytest
import torch

from src.domain.models import Modality, TaskKind
from src.errors import ConfigError, DimensionError, ModalityError
from src.models.encoders import build_encoder, encode, encoder_modality
from src.models.types import EncoderInput, EncoderSettings


def _text(content, sid="S1", task=TaskKind.ER):
    return EncoderInput(subject_id=sid, task=task, modality=Modality.TEXT, content=content)


def _markers(lexicon_file, **kw):
    return build_encoder(EncoderSettings(
        encoder_id="bag-of-markers", kind="bag-of-markers", lexicon_path=str(lexicon_file), **kw
    ))


def _acoustic(**kw):
    kw.setdefault("vocabulary", ["a0", "a1", "n0", "n1"])
    return build_encoder(EncoderSettings(encoder_id="tokens", kind="bag-of-acoustic-tokens", **kw))


def test_bag_of_markers_counts_cry_twice_in_its_slot(lexicon_file):
    encoder = _markers(lexicon_file)
    vector = encode(encoder, _text("cry cry")).vector

    assert vector.shape == (8,)
    assert vector[2] == 2.0
    assert vector.sum() == 2.0


def test_bag_of_markers_maps_both_languages_to_the_same_slots(lexicon_file):
    encoder = _markers(lexicon_file)
    zh = encode(encoder, _text("我很难过，常常哭，觉得没有方向。")).vector
    en = encode(encoder, _text("我很SAD，常常cry，觉得no direction。")).vector

    np.testing.assert_array_equal(zh, en)
    assert zh.tolist() == [1, 0, 1, 0, 1, 0, 0, 0]


def test_bag_of_markers_truncates_long_text(lexicon_file):
    encoder = _markers(lexicon_file, max_length=4)
    assert encode(encoder, _text("哭哭哭哭哭哭")).vector[2] == 4.0


def test_bag_of_markers_descriptor(lexicon_file):
    descriptor = _markers(lexicon_file).descriptor
    assert descriptor.modality == Modality.TEXT
    assert descriptor.repr_dim == 8
    assert descriptor.trainable is False
    assert descriptor.pooling == "count"


def test_declared_repr_dim_must_match(lexicon_file):
    with pytest.raises(DimensionError):
        _markers(lexicon_file, repr_dim=4)
    assert _markers(lexicon_file, repr_dim=12).repr_dim == 12


def test_acoustic_tokens_mean_pool_over_windows(tmp_path):
    path = tmp_path / "S1_ER.tok"
    # window of 4 tokens: [a0 a0 a1 n0] [a0 n1 zz n1]
    path.write_text("a0 a0 a1 n0 a0 n1 zz n1", encoding="utf-8")
    encoder = _acoustic(tokens_per_second=2.0, window_seconds=2.0)
    item = EncoderInput(subject_id="S1", task=TaskKind.ER, modality=Modality.SPEECH, content=str(path))

    vector = encode(encoder, item).vector

    np.testing.assert_allclose(vector, [1.5, 0.5, 0.5, 1.0])


def test_acoustic_tokens_empty_file_encodes_to_zeros(tmp_path):
    path = tmp_path / "empty.tok"
    path.write_text("", encoding="utf-8")
    item = EncoderInput(subject_id="S1", task=TaskKind.PR, modality=Modality.SPEECH, content=str(path))
    assert encode(_acoustic(), item).vector.tolist() == [0.0, 0.0, 0.0, 0.0]


def test_acoustic_tokens_need_a_vocabulary():
    with pytest.raises(ConfigError):
        _acoustic(vocabulary=[])


def test_encoder_rejects_other_modality(lexicon_file, tmp_path):
    encoder = _markers(lexicon_file)
    speech = EncoderInput(subject_id="S1", task=TaskKind.ER, modality=Modality.SPEECH, content="x.tok")
    with pytest.raises(ModalityError):
        encoder.encode_batch([speech])


def test_build_encoder_checks_expected_modality(lexicon_file):
    settings = EncoderSettings(encoder_id="b", kind="bag-of-markers", lexicon_path=str(lexicon_file))
    with pytest.raises(ModalityError):
        build_encoder(settings, modality=Modality.SPEECH)


def test_encoder_kinds():
    assert encoder_modality("hf-text:bert-base-chinese") == Modality.TEXT
    assert encoder_modality("hf-speech") == Modality.SPEECH
    with pytest.raises(ConfigError):
        encoder_modality("word2vec")


def test_encode_batch_is_float32(lexicon_file):
    batch = _markers(lexicon_file).encode_batch([_text("哭"), _text("累", sid="S2")])
    assert batch.dtype == torch.float32
    assert batch.shape == (2, 8)


class _FakeAudioModel(torch.nn.Module):
    """Projects (1, channels, frames) or (1, samples) inputs to (1, frames, width)."""

    def __init__(self, config, in_features):
        super().__init__()
        self.config = config
        self.proj = torch.nn.Linear(in_features, 4)

    def forward(self, **inputs):
        (name, x), = inputs.items()
        frames = x.transpose(1, 2) if name == "input_features" else x.reshape(1, -1, 2)
        return SimpleNamespace(last_hidden_state=self.proj(frames))


class _FakeSeq2Seq(torch.nn.Module):
    config = SimpleNamespace(d_model=4, is_encoder_decoder=True)

    def __init__(self):
        super().__init__()
        self.encoder = _FakeAudioModel(SimpleNamespace(d_model=4, is_encoder_decoder=True), 3)

    def get_encoder(self):
        return self.encoder

    def forward(self, **inputs):
        raise ValueError("decoder inputs required")


class _FakeExtractor:
    def __init__(self, input_name):
        self.model_input_names = [input_name, "attention_mask"]

    def __call__(self, window, sampling_rate, return_tensors):
        level = float(np.mean(window))
        if self.model_input_names[0] == "input_features":
            return {"input_features": torch.full((1, 3, 5), level)}
        return {"input_values": torch.full((1, 10), level)}


def _fake_backend(monkeypatch, model, input_name):
    monkeypatch.setitem(sys.modules, "transformers", SimpleNamespace(
        AutoFeatureExtractor=SimpleNamespace(from_pretrained=lambda checkpoint: _FakeExtractor(input_name)),
        AutoModel=SimpleNamespace(from_pretrained=lambda checkpoint: model),
    ))
    # 45 s of audio: one full window and one half window
    monkeypatch.setitem(sys.modules, "librosa", SimpleNamespace(
        load=lambda path, sr: (np.ones(int(45 * sr), dtype=np.float32), sr),
    ))


def _speech(content="a.wav"):
    return EncoderInput(subject_id="S1", task=TaskKind.PR, modality=Modality.SPEECH, content=content)


@pytest.mark.parametrize("input_name", ["input_features", "input_values"])
def test_hf_speech_feeds_the_feature_extractor_output(monkeypatch, input_name):
    if input_name == "input_features":
        model = _FakeSeq2Seq()
    else:
        model = _FakeAudioModel(SimpleNamespace(hidden_size=4), 2)
    _fake_backend(monkeypatch, model, input_name)

    encoder = build_encoder(EncoderSettings(
        encoder_id="speech", kind="hf-speech", checkpoint="fake", repr_dim=4, sample_rate=100,
    ))
    batch = encoder.encode_batch([_speech(), _speech("b.wav")])

    assert encoder.repr_dim == 4
    assert batch.shape == (2, 4)
    assert batch.dtype == torch.float32
    if input_name == "input_features":
        assert encoder.module() is model.encoder
