"""
Domain models shared by every pipeline stage.
"""
from enum import Enum, IntEnum
from pathlib import Path
from typing import Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class TaskKind(str, Enum):
    """The three speech tasks recorded per subject."""
    ER = "ER"  # emotional regulation
    PR = "PR"  # passage reading
    ED = "ED"  # expression description


TEXT_TASKS: Tuple[TaskKind, ...] = (TaskKind.ER, TaskKind.ED)
ALL_TASKS: Tuple[TaskKind, ...] = (TaskKind.ER, TaskKind.PR, TaskKind.ED)


class RiskLabel(IntEnum):
    """Binary risk label. AT_RISK is the positive class everywhere."""
    NON_RISK = 0
    AT_RISK = 1


class Sex(str, Enum):
    F = "F"
    M = "M"


class Split(str, Enum):
    TRAIN = "train"
    DEV = "dev"
    TEST = "test"


class Language(str, Enum):
    ZH = "zh"
    EN = "en"


class Modality(str, Enum):
    TEXT = "text"
    SPEECH = "speech"


class _Record(BaseModel):
    """Immutable record; unknown fields are rejected."""
    model_config = ConfigDict(frozen=True, extra="forbid")


class SubjectRecord(_Record):
    """One participant."""
    subject_id: str = Field(min_length=1)
    age: Optional[int] = Field(default=None, ge=10, le=18)
    sex: Optional[Sex] = None
    label: RiskLabel
    split: Optional[Split] = None


class RecordingRef(_Record):
    """Reference to one task recording of a subject."""
    subject_id: str = Field(min_length=1)
    task: TaskKind
    audio_uri: str = Field(min_length=1)
    duration_s: Optional[float] = Field(default=None, ge=0.0)

    @property
    def key(self) -> Tuple[str, TaskKind]:
        return (self.subject_id, self.task)


class Transcript(_Record):
    """Chinese transcript of one recording."""
    subject_id: str = Field(min_length=1)
    task: TaskKind
    language: Literal["zh"] = "zh"
    text: str
    provider_id: str = Field(min_length=1)

    @model_validator(mode="after")
    def _text_required_for_open_tasks(self):
        # PR text is identical for everyone and never used downstream
        if self.task != TaskKind.PR and not self.text.strip():
            raise ValueError(f"empty transcript text for {self.subject_id}/{self.task.value}")
        return self

    @property
    def key(self) -> Tuple[str, TaskKind]:
        return (self.subject_id, self.task)


class DatasetManifest(BaseModel):
    """Subjects, recordings and transcripts of one corpus."""
    model_config = ConfigDict(frozen=True)

    subjects: Tuple[SubjectRecord, ...] = ()
    recordings: Tuple[RecordingRef, ...] = ()
    transcripts: Tuple[Transcript, ...] = ()
    # Directory that relative audio_uri values resolve against; not serialized
    root: Optional[str] = Field(default=None, exclude=True)

    def subject_ids(self, split: Optional[Split] = None) -> List[str]:
        """Subject ids in manifest order, optionally restricted to one split."""
        return [s.subject_id for s in self.subjects if split is None or s.split == split]

    def labels(self) -> Dict[str, RiskLabel]:
        return {s.subject_id: s.label for s in self.subjects}

    def split_counts(self) -> Dict[str, int]:
        counts: Dict[str, int] = {}
        for s in self.subjects:
            key = s.split.value if s.split else "unassigned"
            counts[key] = counts.get(key, 0) + 1
        return counts

    def recording(self, subject_id: str, task: TaskKind) -> Optional[RecordingRef]:
        for rec in self.recordings:
            if rec.subject_id == subject_id and rec.task == task:
                return rec
        return None

    def transcript(self, subject_id: str, task: TaskKind) -> Optional[Transcript]:
        for tr in self.transcripts:
            if tr.subject_id == subject_id and tr.task == task:
                return tr
        return None

    def resolve_uri(self, audio_uri: str) -> Path:
        """Resolve a recording URI relative to the manifest directory."""
        path = Path(audio_uri)
        if path.is_absolute() or self.root is None:
            return path
        return Path(self.root) / path


class Violation(BaseModel):
    """One manifest invariant violation."""
    model_config = ConfigDict(frozen=True)

    code: str
    message: str
    subject_id: Optional[str] = None
    task: Optional[TaskKind] = None


class ValidationReport(BaseModel):
    """Result of validate_manifest; empty iff the manifest is consistent."""
    violations: List[Violation] = []

    @property
    def ok(self) -> bool:
        return not self.violations

    def __len__(self) -> int:
        return len(self.violations)


class FailureRecord(BaseModel):
    """A per-item failure collected by a batch operation."""
    model_config = ConfigDict(frozen=True)

    subject_id: str
    task: TaskKind
    stage: str
    error_type: str
    message: str
    language: Optional[Language] = None


class RiskFeatureText(_Record):
    """LLM-extracted risk summary of one transcript in one language."""
    subject_id: str
    task: TaskKind
    language: Language
    text: str = Field(min_length=1)
    provider_id: str
    prompt_version: str


class Representation(BaseModel):
    """Fixed-length vector produced by an encoder for one (subject, task)."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    subject_id: str
    task: TaskKind
    encoder_id: str
    vector: np.ndarray

    @field_validator("vector", mode="before")
    @classmethod
    def _as_float32(cls, v):
        arr = np.asarray(v, dtype=np.float32)
        if arr.ndim != 1:
            raise ValueError(f"representation must be 1-D, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("representation contains non-finite values")
        return arr

    @property
    def dim(self) -> int:
        return int(self.vector.shape[0])


class Logits(BaseModel):
    """Two-class scores; index 0 is NON_RISK, index 1 is AT_RISK."""
    model_config = ConfigDict(frozen=True)

    subject_id: str
    task: TaskKind
    source_id: str
    values: Tuple[float, float]
    fallback: bool = False

    @field_validator("values")
    @classmethod
    def _finite(cls, v):
        if not all(np.isfinite(x) for x in v):
            raise ValueError(f"non-finite logits {v}")
        return v
