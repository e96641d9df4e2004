"""
Synthetic corpus generator.

Produces a labeled stand-in corpus: a manifest, one Chinese transcript file per
recording (read by the ``file`` ASR provider) and one surrogate audio file of
acoustic tokens per recording (read by the bag-of-acoustic-tokens encoder).

Each ER/ED sentence independently carries one risk marker with the
class-conditional probability; acoustic tokens are drawn from the marker
token set with the same probabilities. PR text is the same fixed passage for
every subject.
"""
import shutil
from pathlib import Path
from typing import List, Optional, Union

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, PositiveInt, model_validator

from src.domain.lexicon import MarkerLexicon, load_lexicon
from src.domain.manifest import serialize_manifest
from src.domain.models import (
    ALL_TASKS,
    DatasetManifest,
    Language,
    RecordingRef,
    RiskLabel,
    Sex,
    SubjectRecord,
    TaskKind,
    Transcript,
)

logger = structlog.get_logger()

PR_PASSAGE = "北风和太阳争论谁的本领大。他们看见一个穿着大衣的行人。谁能让他脱下大衣，就算谁赢。"

NEUTRAL_SENTENCES = {
    TaskKind.ER: (
        "今天我去了学校。",
        "我和同学一起吃午饭。",
        "老师讲了数学题。",
        "周末我在家看书。",
        "我喜欢画画。",
        "天气很好，我们去公园散步。",
        "妈妈做了我爱吃的菜。",
        "放学后我去打篮球。",
    ),
    TaskKind.ED: (
        "图片里的人在微笑。",
        "她的眼睛睁得很大。",
        "他的嘴角向上。",
        "这个人看起来很平静。",
        "照片里是一张年轻的脸。",
        "她的眉毛皱了一下。",
    ),
}
MARKER_SENTENCE = "最近我常常想到「{marker}」这件事。"

MANIFEST_NAME = "manifest.jsonl"
AUDIO_DIR = "audio"


class SyntheticSpec(BaseModel):
    """Parameters of a synthetic corpus."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    n_subjects: PositiveInt = 120
    at_risk_fraction: float = Field(default=0.5, gt=0.0, lt=1.0)
    lexicon_path: str = "lexicon.toml"
    p_marker_at_risk: float = Field(default=0.9, ge=0.0, le=1.0)
    p_marker_non_risk: float = Field(default=0.1, ge=0.0, le=1.0)
    sentences_per_transcript: PositiveInt = 10
    marker_tokens: List[str] = ["a0", "a1", "a2", "a3"]
    neutral_tokens: List[str] = ["n0", "n1", "n2", "n3"]
    tokens_per_recording: PositiveInt = 60
    tokens_per_second: PositiveFloat = 2.0
    output_dir: str = "data/synthetic"
    include_transcripts: bool = False
    seed: int = 0

    @model_validator(mode="after")
    def _check(self):
        if not self.p_marker_non_risk < self.p_marker_at_risk:
            raise ValueError("p_marker_non_risk must be below p_marker_at_risk")
        if not self.marker_tokens or not self.neutral_tokens:
            raise ValueError("marker and neutral token sets must be non-empty")
        if set(self.marker_tokens) & set(self.neutral_tokens):
            raise ValueError("marker and neutral token sets overlap")
        return self

    @property
    def vocabulary(self) -> List[str]:
        return list(self.marker_tokens) + list(self.neutral_tokens)


def _marker_probability(spec: SyntheticSpec, label: RiskLabel) -> float:
    return spec.p_marker_at_risk if label == RiskLabel.AT_RISK else spec.p_marker_non_risk


def _transcript(rng: np.random.Generator, spec: SyntheticSpec, markers: List[str],
                task: TaskKind, label: RiskLabel) -> str:
    if task == TaskKind.PR:
        return PR_PASSAGE

    p = _marker_probability(spec, label)
    neutral = NEUTRAL_SENTENCES[task]
    sentences = []
    for _ in range(spec.sentences_per_transcript):
        if rng.random() < p:
            sentences.append(MARKER_SENTENCE.format(marker=markers[rng.integers(len(markers))]))
        else:
            sentences.append(neutral[rng.integers(len(neutral))])
    return "".join(sentences)


def _acoustic_tokens(rng: np.random.Generator, spec: SyntheticSpec, label: RiskLabel) -> List[str]:
    p = _marker_probability(spec, label)
    tokens = []
    for _ in range(spec.tokens_per_recording):
        pool = spec.marker_tokens if rng.random() < p else spec.neutral_tokens
        tokens.append(pool[rng.integers(len(pool))])
    return tokens


def generate_synthetic(
    spec: SyntheticSpec,
    out_dir: Optional[Union[str, Path]] = None,
    lexicon: Optional[MarkerLexicon] = None,
    base_dir: Union[str, Path] = ".",
) -> DatasetManifest:
    """
    Write a synthetic corpus and return its manifest.

    Args:
        spec: Corpus parameters
        out_dir: Destination directory (defaults to spec.output_dir under base_dir)
        lexicon: Marker lexicon (defaults to spec.lexicon_path under base_dir)
        base_dir: Directory relative spec paths resolve against

    Returns:
        DatasetManifest rooted at out_dir, identical to the written manifest
    """
    base = Path(base_dir)
    out = Path(out_dir) if out_dir is not None else base / spec.output_dir
    if lexicon is None:
        lexicon_path = Path(spec.lexicon_path)
        lexicon = load_lexicon(lexicon_path if lexicon_path.is_absolute() else base / lexicon_path)
    markers = lexicon.forms(Language.ZH)

    rng = np.random.default_rng(spec.seed)
    n_at_risk = int(round(spec.n_subjects * spec.at_risk_fraction))
    labels = [RiskLabel.AT_RISK] * n_at_risk + [RiskLabel.NON_RISK] * (spec.n_subjects - n_at_risk)
    labels = [labels[i] for i in rng.permutation(spec.n_subjects)]

    audio_dir = out / AUDIO_DIR
    # the audio dir holds exactly the files of the manifest written below
    if audio_dir.exists():
        shutil.rmtree(audio_dir)
    audio_dir.mkdir(parents=True)

    width = max(4, len(str(spec.n_subjects)))
    subjects, recordings, transcripts = [], [], []
    for i, label in enumerate(labels, start=1):
        subject_id = f"S{i:0{width}d}"
        subjects.append(SubjectRecord(
            subject_id=subject_id,
            age=int(rng.integers(12, 17)),
            sex=Sex.F if rng.random() < 0.5 else Sex.M,
            label=label,
        ))
        for task in ALL_TASKS:
            stem = f"{subject_id}_{task.value}"
            tokens = _acoustic_tokens(rng, spec, label)
            text = _transcript(rng, spec, markers, task, label)

            (audio_dir / f"{stem}.tok").write_text(" ".join(tokens) + "\n", encoding="utf-8", newline="")
            (audio_dir / f"{stem}.txt").write_text(text, encoding="utf-8", newline="")

            recordings.append(RecordingRef(
                subject_id=subject_id,
                task=task,
                audio_uri=f"{AUDIO_DIR}/{stem}.tok",
                duration_s=len(tokens) / spec.tokens_per_second,
            ))
            if spec.include_transcripts:
                transcripts.append(Transcript(
                    subject_id=subject_id, task=task, text=text, provider_id="synthetic",
                ))

    manifest = DatasetManifest(
        subjects=tuple(subjects),
        recordings=tuple(recordings),
        transcripts=tuple(transcripts),
        root=str(out),
    )
    serialize_manifest(manifest, out / MANIFEST_NAME)

    logger.info(
        "synthetic_corpus_generated",
        out_dir=str(out),
        subjects=spec.n_subjects,
        at_risk=n_at_risk,
        recordings=len(recordings),
        seed=spec.seed,
    )
    return manifest
