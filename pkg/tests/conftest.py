"""Shared fixtures: lexicons, manifests and experiment configs under tmp_path."""
import json
import shutil
from pathlib import Path
from typing import Dict, Iterable, List

import pytest

from src.domain.lexicon import load_lexicon
from src.domain.models import ALL_TASKS, RiskLabel

REPO_ROOT = Path(__file__).resolve().parent.parent
LEXICON_FILE = REPO_ROOT / "experiments" / "lexicon.toml"

TINY_LEXICON = """\
[[markers]]
zh = "难过"
en = "sad"

[[markers]]
zh = "孤独"
en = "lonely"

[[markers]]
zh = "哭"
en = "cry"
"""

EXPERIMENT_TOML = """\
experiment_id = "{experiment_id}"

[synthetic]
output_dir = "data"
lexicon_path = "lexicon.toml"
n_subjects = {n_subjects}
seed = {seed}

[dataset]
manifest_path = "data/manifest.jsonl"

[asr]
provider_id = "file"

[extraction]
provider_id = "mock"
languages = ["zh", "en"]
lexicon_path = "lexicon.toml"

[text_model]
input_source = "{input_source}"
feature_language = "{feature_language}"

[text_model.encoder]
encoder_id = "bag-of-markers"
kind = "bag-of-markers"
lexicon_path = "lexicon.toml"
max_length = 4096

[text_model.hyperparams]
learning_rate = 5e-3

[speech_model.encoder]
encoder_id = "bag-of-acoustic-tokens"
kind = "bag-of-acoustic-tokens"
vocabulary = ["a0", "a1", "a2", "a3", "n0", "n1", "n2", "n3"]

[speech_model.hyperparams]
learning_rate = 5e-3

[fusion]
learning_rate = 5e-3

[runtime]
seed = {seed}
cache_root = "cache"
output_root = "outputs"
"""


@pytest.fixture
def lexicon_file() -> Path:
    return LEXICON_FILE


@pytest.fixture
def lexicon(lexicon_file):
    return load_lexicon(lexicon_file)


@pytest.fixture
def tiny_lexicon_file(tmp_path) -> Path:
    path = tmp_path / "tiny_lexicon.toml"
    path.write_text(TINY_LEXICON, encoding="utf-8")
    return path


def manifest_lines(
    labels: Dict[str, RiskLabel],
    tasks: Iterable = ALL_TASKS,
    transcripts: bool = False,
) -> List[dict]:
    lines = []
    for sid, label in labels.items():
        lines.append({"record_type": "subject", "subject_id": sid, "age": 14, "sex": "F", "label": int(label)})
    for sid in labels:
        for task in tasks:
            lines.append({
                "record_type": "recording",
                "subject_id": sid,
                "task": task.value,
                "audio_uri": f"audio/{sid}_{task.value}.wav",
            })
            if transcripts:
                lines.append({
                    "record_type": "transcript",
                    "subject_id": sid,
                    "task": task.value,
                    "text": f"{sid} 的 {task.value} 录音。",
                    "provider_id": "manual",
                })
    return lines


def write_lines(path: Path, lines: Iterable) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(
        "".join((l if isinstance(l, str) else json.dumps(l, ensure_ascii=False)) + "\n" for l in lines),
        encoding="utf-8",
    )
    return path


@pytest.fixture
def balanced_labels() -> Dict[str, RiskLabel]:
    return {
        f"S{i:03d}": RiskLabel.AT_RISK if i % 2 else RiskLabel.NON_RISK
        for i in range(1, 25)
    }


def write_experiment(
    directory: Path,
    experiment_id: str = "synthetic-test",
    n_subjects: int = 120,
    seed: int = 0,
    input_source: str = "features",
    feature_language: str = "zh",
) -> Path:
    """Write an experiment config plus lexicon into directory; returns the config path."""
    directory.mkdir(parents=True, exist_ok=True)
    shutil.copyfile(LEXICON_FILE, directory / "lexicon.toml")
    path = directory / "experiment.toml"
    path.write_text(
        EXPERIMENT_TOML.format(
            experiment_id=experiment_id,
            n_subjects=n_subjects,
            seed=seed,
            input_source=input_source,
            feature_language=feature_language,
        ),
        encoding="utf-8",
    )
    return path


@pytest.fixture
def experiment_config(tmp_path) -> Path:
    return write_experiment(tmp_path / "exp", n_subjects=30)
