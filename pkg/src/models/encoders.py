"""
Encoder plugins.

An encoder maps text (transcripts or risk-feature text) or audio to a
fixed-length vector. Built-in kinds:

- ``bag-of-markers``: per-slot marker counts over a bilingual lexicon (text)
- ``bag-of-acoustic-tokens``: token counts over surrogate audio, mean-pooled
  over fixed windows (speech)
- ``hf-text`` / ``hf-speech``: Hugging Face checkpoints, loaded lazily
"""
import re
from abc import ABC, abstractmethod
from collections import Counter
from pathlib import Path
from typing import List, Optional, Sequence, Union

import numpy as np
import structlog
import torch
from torch import nn

from src.domain.lexicon import load_lexicon
from src.domain.models import Modality, Representation
from src.errors import ConfigError, DimensionError, EncoderUnavailableError, ModalityError
from src.models.types import EncoderDescriptor, EncoderInput, EncoderSettings

logger = structlog.get_logger()

TEXT_KINDS = ("bag-of-markers", "hf-text")
SPEECH_KINDS = ("bag-of-acoustic-tokens", "hf-speech")


class Encoder(ABC):
    """Encoder contract shared by mock and pretrained plugins."""

    def __init__(self, settings: EncoderSettings, modality: Modality, repr_dim: int,
                 pooling: str, truncation: str):
        if settings.repr_dim is not None and settings.repr_dim != repr_dim:
            raise DimensionError(
                f"encoder {settings.encoder_id} produces {repr_dim}-d vectors, "
                f"config says {settings.repr_dim}"
            )
        self.settings = settings
        self.descriptor = EncoderDescriptor(
            encoder_id=settings.encoder_id,
            modality=modality,
            repr_dim=repr_dim,
            trainable=settings.trainable and self.module() is not None,
            pooling=pooling,
            truncation=truncation,
        )
        logger.info(
            "encoder_built",
            encoder_id=settings.encoder_id,
            kind=settings.kind,
            modality=modality.value,
            repr_dim=repr_dim,
            pooling=pooling,
            truncation=truncation,
        )

    @property
    def encoder_id(self) -> str:
        return self.descriptor.encoder_id

    @property
    def modality(self) -> Modality:
        return self.descriptor.modality

    @property
    def repr_dim(self) -> int:
        return self.descriptor.repr_dim

    def module(self) -> Optional[nn.Module]:
        """Torch module holding the encoder weights, if any."""
        return None

    def trainable_parameters(self) -> List[nn.Parameter]:
        module = self.module()
        if module is None or not self.descriptor.trainable:
            return []
        return [p for p in module.parameters() if p.requires_grad]

    def train(self, mode: bool = True):
        module = self.module()
        if module is not None:
            module.train(mode and self.descriptor.trainable)

    def eval(self):
        self.train(False)

    def check_modality(self, inputs: Sequence[EncoderInput]):
        for item in inputs:
            if item.modality != self.modality:
                raise ModalityError(
                    f"{self.modality.value} encoder {self.encoder_id} got "
                    f"{item.modality.value} input for {item.subject_id}/{item.task.value}"
                )

    @abstractmethod
    def encode_batch(self, inputs: Sequence[EncoderInput]) -> torch.Tensor:
        """
        Encode a batch into a float32 tensor of shape (len(inputs), repr_dim).

        Gradients flow into trainable_parameters() when grad mode is enabled.
        """


class BagOfMarkersEncoder(Encoder):
    """
    Marker-count text encoder.

    Slot i counts every surface form (Chinese or English) of lexicon entry i,
    case-insensitively, so features in either language map to the same slots.
    """

    def __init__(self, settings: EncoderSettings, base_dir: Union[str, Path] = "."):
        if not settings.lexicon_path:
            raise ConfigError(f"encoder {settings.encoder_id} needs lexicon_path")
        path = Path(settings.lexicon_path)
        if not path.is_absolute():
            path = Path(base_dir) / path
        self.lexicon = load_lexicon(path)

        form_to_slot = {}
        for slot, forms in enumerate(self.lexicon.slots()):
            for form in forms:
                form_to_slot[form.lower()] = slot
        self._form_to_slot = form_to_slot
        ordered = sorted(form_to_slot, key=len, reverse=True)
        self._pattern = re.compile("|".join(re.escape(f) for f in ordered))

        dim = settings.repr_dim or len(self.lexicon)
        if dim < len(self.lexicon):
            raise DimensionError(
                f"repr_dim {dim} is smaller than the lexicon ({len(self.lexicon)} markers)"
            )
        super().__init__(
            settings.model_copy(update={"repr_dim": dim}),
            Modality.TEXT,
            dim,
            pooling="count",
            truncation=f"chars:{settings.max_length}",
        )

    def counts(self, text: str) -> np.ndarray:
        limit = self.settings.max_length
        if len(text) > limit:
            logger.debug("text_truncated", encoder_id=self.encoder_id, chars=len(text), limit=limit)
            text = text[:limit]

        vector = np.zeros(self.repr_dim, dtype=np.float32)
        for match in self._pattern.finditer(text.lower()):
            vector[self._form_to_slot[match.group(0)]] += 1.0
        return vector

    def encode_batch(self, inputs: Sequence[EncoderInput]) -> torch.Tensor:
        self.check_modality(inputs)
        if not inputs:
            return torch.zeros((0, self.repr_dim), dtype=torch.float32)
        return torch.from_numpy(np.stack([self.counts(i.content) for i in inputs]))


class BagOfAcousticTokensEncoder(Encoder):
    """
    Speech surrogate encoder.

    The audio reference points to a whitespace-separated token file. Tokens are
    cut into windows of window_seconds * tokens_per_second, counted per window
    over the configured vocabulary, and the window counts are mean-pooled.
    """

    def __init__(self, settings: EncoderSettings):
        if not settings.vocabulary:
            raise ConfigError(f"encoder {settings.encoder_id} needs a token vocabulary")
        self.vocabulary = list(settings.vocabulary)
        self._index = {tok: i for i, tok in enumerate(self.vocabulary)}
        if len(self._index) != len(self.vocabulary):
            raise ConfigError(f"duplicate tokens in {settings.encoder_id} vocabulary")

        self.window_tokens = max(1, int(round(settings.window_seconds * settings.tokens_per_second)))
        dim = settings.repr_dim or len(self.vocabulary)
        if dim < len(self.vocabulary):
            raise DimensionError(
                f"repr_dim {dim} is smaller than the vocabulary ({len(self.vocabulary)} tokens)"
            )
        super().__init__(
            settings.model_copy(update={"repr_dim": dim}),
            Modality.SPEECH,
            dim,
            pooling="mean-over-windows",
            truncation=f"window:{settings.window_seconds:g}s",
        )

    def tokens(self, audio_uri: str) -> List[str]:
        path = Path(audio_uri)
        return path.read_text(encoding="utf-8").split()

    def pooled_counts(self, tokens: Sequence[str]) -> np.ndarray:
        if not tokens:
            return np.zeros(self.repr_dim, dtype=np.float32)

        windows = [
            tokens[start:start + self.window_tokens]
            for start in range(0, len(tokens), self.window_tokens)
        ]
        matrix = np.zeros((len(windows), self.repr_dim), dtype=np.float64)
        unknown = 0
        for row, window in enumerate(windows):
            for tok, n in Counter(window).items():
                if tok in self._index:
                    matrix[row, self._index[tok]] = n
                else:
                    unknown += n
        if unknown:
            logger.debug("unknown_acoustic_tokens", encoder_id=self.encoder_id, count=unknown)
        return matrix.mean(axis=0).astype(np.float32)

    def encode_batch(self, inputs: Sequence[EncoderInput]) -> torch.Tensor:
        self.check_modality(inputs)
        if not inputs:
            return torch.zeros((0, self.repr_dim), dtype=torch.float32)
        return torch.from_numpy(np.stack([self.pooled_counts(self.tokens(i.content)) for i in inputs]))


def _hidden_size(config) -> int:
    # Whisper-style configs name the width d_model
    size = getattr(config, "hidden_size", None) or getattr(config, "d_model", None)
    if not size:
        raise EncoderUnavailableError(f"cannot tell the hidden size of {type(config).__name__}")
    return int(size)


def _require_transformers():
    try:
        import transformers
    except ImportError as e:
        raise EncoderUnavailableError(
            "Hugging Face encoders need the optional 'transformers' package"
        ) from e
    return transformers


class HFTextEncoder(Encoder):
    """Pretrained text checkpoint; the first-token vector is the summary."""

    def __init__(self, settings: EncoderSettings, checkpoint: str):
        transformers = _require_transformers()
        try:
            self.tokenizer = transformers.AutoTokenizer.from_pretrained(checkpoint)
            self.model = transformers.AutoModel.from_pretrained(checkpoint)
        except OSError as e:
            raise EncoderUnavailableError(f"cannot load {checkpoint}: {e}") from e
        self.model.requires_grad_(settings.trainable)
        super().__init__(
            settings,
            Modality.TEXT,
            _hidden_size(self.model.config),
            pooling="first-token",
            truncation=f"tokens:{settings.max_length}",
        )

    def module(self) -> Optional[nn.Module]:
        return getattr(self, "model", None)

    def encode_batch(self, inputs: Sequence[EncoderInput]) -> torch.Tensor:
        self.check_modality(inputs)
        batch = self.tokenizer(
            [i.content for i in inputs],
            padding=True,
            truncation=True,
            max_length=self.settings.max_length,
            return_tensors="pt",
        )
        out = self.model(**batch)
        return out.last_hidden_state[:, 0].float()


class HFSpeechEncoder(Encoder):
    """
    Pretrained speech checkpoint; frames are mean-pooled within and across windows.

    Encoder-decoder checkpoints (Whisper) contribute only their audio encoder.
    The model input is whatever the checkpoint's feature extractor produces
    first (``input_values`` for wav2vec2/HuBERT, ``input_features`` for Whisper).
    """

    def __init__(self, settings: EncoderSettings, checkpoint: str):
        transformers = _require_transformers()
        try:
            import librosa
        except ImportError as e:
            raise EncoderUnavailableError("hf-speech encoders need the optional 'librosa' package") from e
        self._load_audio = librosa.load
        try:
            self.feature_extractor = transformers.AutoFeatureExtractor.from_pretrained(checkpoint)
            model = transformers.AutoModel.from_pretrained(checkpoint)
        except OSError as e:
            raise EncoderUnavailableError(f"cannot load {checkpoint}: {e}") from e
        if getattr(model.config, "is_encoder_decoder", False):
            model = model.get_encoder()
        self.model = model
        self.model.requires_grad_(settings.trainable)
        self.input_name = self.feature_extractor.model_input_names[0]
        super().__init__(
            settings,
            Modality.SPEECH,
            _hidden_size(self.model.config),
            pooling="mean-over-frames",
            truncation=f"window:{settings.window_seconds:g}s",
        )

    def module(self) -> Optional[nn.Module]:
        return getattr(self, "model", None)

    def _encode_one(self, audio_uri: str) -> torch.Tensor:
        sr = self.settings.sample_rate
        wave, _ = self._load_audio(audio_uri, sr=sr)
        step = int(self.settings.window_seconds * sr)
        windows = [wave[i:i + step] for i in range(0, max(len(wave), 1), step)]
        pooled = []
        for window in windows:
            features = self.feature_extractor(window, sampling_rate=sr, return_tensors="pt")
            out = self.model(**{self.input_name: features[self.input_name]})
            pooled.append(out.last_hidden_state.mean(dim=1).squeeze(0))
        return torch.stack(pooled).mean(dim=0).float()

    def encode_batch(self, inputs: Sequence[EncoderInput]) -> torch.Tensor:
        self.check_modality(inputs)
        if not inputs:
            return torch.zeros((0, self.repr_dim), dtype=torch.float32)
        return torch.stack([self._encode_one(i.content) for i in inputs])


def encoder_modality(kind: str) -> Modality:
    base = kind.split(":", 1)[0]
    if base in TEXT_KINDS:
        return Modality.TEXT
    if base in SPEECH_KINDS:
        return Modality.SPEECH
    raise ConfigError(f"unknown encoder kind {kind!r}")


def build_encoder(
    settings: EncoderSettings,
    base_dir: Union[str, Path] = ".",
    modality: Optional[Modality] = None,
) -> Encoder:
    """
    Instantiate an encoder plugin.

    Args:
        settings: Encoder settings from the experiment config
        base_dir: Directory relative lexicon paths resolve against
        modality: Expected modality, checked when given

    Returns:
        Encoder

    Raises:
        ConfigError: Unknown kind or missing plugin settings
        ModalityError: Plugin modality differs from the expected one
        EncoderUnavailableError: Optional backend missing
    """
    kind, _, suffix = settings.kind.partition(":")
    actual = encoder_modality(kind)
    if modality is not None and actual != modality:
        raise ModalityError(
            f"encoder {settings.encoder_id} is a {actual.value} encoder, {modality.value} required"
        )

    if kind == "bag-of-markers":
        return BagOfMarkersEncoder(settings, base_dir)
    if kind == "bag-of-acoustic-tokens":
        return BagOfAcousticTokensEncoder(settings)

    checkpoint = suffix or settings.checkpoint
    if not checkpoint:
        raise ConfigError(f"encoder {settings.encoder_id} needs a checkpoint")
    if kind == "hf-text":
        return HFTextEncoder(settings, checkpoint)
    return HFSpeechEncoder(settings, checkpoint)


def encode(encoder: Encoder, item: EncoderInput) -> Representation:
    """
    Frozen, eval-mode encoding of one input.

    Raises:
        ModalityError: Input modality differs from the encoder's
    """
    encoder.check_modality([item])
    was_training = _is_training(encoder)
    encoder.eval()
    try:
        with torch.no_grad():
            vector = encoder.encode_batch([item])[0]
    finally:
        encoder.train(was_training)

    return Representation(
        subject_id=item.subject_id,
        task=item.task,
        encoder_id=encoder.encoder_id,
        vector=vector.detach().cpu().numpy(),
    )


def _is_training(encoder: Encoder) -> bool:
    module = encoder.module()
    return bool(module is not None and module.training)
