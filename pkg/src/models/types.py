"""
Configuration and metadata models for encoders, heads and training.
"""
from typing import List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, PositiveInt, field_validator

from src.domain.models import Modality, TaskKind


class EncoderSettings(BaseModel):
    """
    How to build an encoder plugin.

    kind selects the plugin: ``bag-of-markers`` (text mock),
    ``bag-of-acoustic-tokens`` (speech mock), ``hf-text`` or ``hf-speech``.
    """
    model_config = ConfigDict(extra="forbid")

    encoder_id: str = Field(min_length=1)
    kind: str = "bag-of-markers"
    repr_dim: Optional[PositiveInt] = None
    trainable: bool = True
    lexicon_path: Optional[str] = None
    vocabulary: List[str] = []
    tokens_per_second: PositiveFloat = 2.0
    window_seconds: PositiveFloat = 30.0
    checkpoint: Optional[str] = None
    max_length: PositiveInt = 512
    sample_rate: PositiveInt = 16000


class EncoderDescriptor(BaseModel):
    """Self-describing identity of a built encoder."""
    model_config = ConfigDict(frozen=True)

    encoder_id: str
    modality: Modality
    repr_dim: PositiveInt
    trainable: bool
    pooling: str
    truncation: str


class ClassifierHeadConfig(BaseModel):
    """One hidden layer, ReLU, dropout, two-way output."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    input_dim: PositiveInt
    hidden_dim: Literal[512] = 512
    activation: Literal["relu"] = "relu"
    dropout: Literal[0.1] = 0.1
    num_classes: Literal[2] = 2


class Hyperparams(BaseModel):
    """Fine-tuning hyperparameters; optimizer and schedule are fixed."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    epochs: PositiveInt = 10
    learning_rate: PositiveFloat = 5e-5
    batch_size: PositiveInt = 16
    optimizer: Literal["adam"] = "adam"
    schedule: Literal["cosine"] = "cosine"
    seed: int = 0


class TextHyperparams(Hyperparams):
    learning_rate: PositiveFloat = 5e-5
    batch_size: PositiveInt = 16


class SpeechHyperparams(Hyperparams):
    learning_rate: PositiveFloat = 1e-5
    batch_size: PositiveInt = 8


class TrainingHistory(BaseModel):
    """Per-epoch mean training loss and dev accuracy (None without a dev set)."""
    train_loss: List[float] = []
    dev_accuracy: List[Optional[float]] = []

    def append(self, loss: float, dev_accuracy: Optional[float]):
        self.train_loss.append(loss)
        self.dev_accuracy.append(dev_accuracy)

    def __len__(self) -> int:
        return len(self.train_loss)


class TrainedModelMeta(BaseModel):
    """Metadata document persisted next to a model's parameter blob."""
    model_id: str
    task: TaskKind
    encoder: EncoderSettings
    descriptor: EncoderDescriptor
    head: ClassifierHeadConfig
    hyperparams: Hyperparams
    history: TrainingHistory
    encoder_fine_tuned: bool = False


class FusionConfig(BaseModel):
    """Fusion layer over concatenated frozen text and speech representations."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    text_encoder_id: Optional[str] = None
    speech_encoder_id: Optional[str] = None
    hidden_dim: Literal[256] = 256
    activation: Literal["relu"] = "relu"
    dropout: Literal[0.1] = 0.1
    learning_rate: PositiveFloat = 1e-3
    batch_size: PositiveInt = 32
    epochs: PositiveInt = 10
    seed: int = 0


class FusionModelMeta(BaseModel):
    """Metadata document persisted next to a fusion model's parameter blob."""
    model_id: str
    task: TaskKind
    config: FusionConfig
    text_dim: PositiveInt
    speech_dim: PositiveInt
    history: TrainingHistory
    dropped_subjects: List[str] = []


class FusedInput(BaseModel):
    """Concatenation [text ; speech] for one subject and task."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    subject_id: str
    task: TaskKind
    vector: np.ndarray
    text_dim: PositiveInt

    @field_validator("vector", mode="before")
    @classmethod
    def _as_float32(cls, v):
        return np.asarray(v, dtype=np.float32)

    @property
    def speech_dim(self) -> int:
        return int(self.vector.shape[0]) - self.text_dim

    def blocks(self):
        """Split back into (text, speech) vectors."""
        return self.vector[: self.text_dim], self.vector[self.text_dim:]


class EncoderInput(BaseModel):
    """One item to encode: transcript/feature text or an audio reference."""
    model_config = ConfigDict(frozen=True)

    subject_id: str
    task: TaskKind
    modality: Modality
    content: str

