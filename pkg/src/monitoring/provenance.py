"""
Run records and stage bookkeeping for an experiment directory.

Every executed or skipped stage appends one immutable RunRecord line to
``runs.jsonl``. ``config.lock.json`` pins the config hash the experiment's
outputs were produced under.
"""
import json
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Union

import aiofiles
import structlog
from pydantic import BaseModel, ConfigDict

from src.errors import ConfigMismatchError
from src.utils.hashing import sha256_file

logger = structlog.get_logger()

RUNS_FILE = "runs.jsonl"
LOCK_FILE = "config.lock.json"


class RunRecord(BaseModel):
    """Provenance of one stage execution."""
    model_config = ConfigDict(frozen=True)

    stage: str
    experiment_id: str
    config_hash: str
    stage_seed: int
    input_hashes: Dict[str, str]
    output_hashes: Dict[str, str]
    started_at: datetime
    finished_at: datetime
    duration_s: float
    status: Literal["completed", "skipped"]
    metrics: Dict[str, Any] = {}


def hash_directory(root: Union[str, Path]) -> Dict[str, str]:
    """Relative path -> SHA-256 for every file under root."""
    root = Path(root)
    if not root.exists():
        return {}
    return {
        path.relative_to(root).as_posix(): sha256_file(path)
        for path in sorted(p for p in root.rglob("*") if p.is_file())
    }


class RunTracker:
    """Keeps the run log and config lock of one experiment directory."""

    def __init__(self, experiment_dir: Union[str, Path], experiment_id: str, config_hash: str):
        """
        Initialize tracker.

        Args:
            experiment_dir: output_root/<experiment_id>
            experiment_id: Experiment id recorded in every run record
            config_hash: Hash of the resolved config
        """
        self.experiment_dir = Path(experiment_dir)
        self.experiment_id = experiment_id
        self.config_hash = config_hash
        self.runs_path = self.experiment_dir / RUNS_FILE
        self.lock_path = self.experiment_dir / LOCK_FILE

        # Per-stage counters gathered while a stage runs
        self.metrics: Dict[str, Dict[str, Any]] = {}

    def check_config(self, force: bool = False):
        """
        Pin the config hash, refusing to mix outputs of different configs.

        Raises:
            ConfigMismatchError: Existing outputs were produced under another hash and force is off
        """
        self.experiment_dir.mkdir(parents=True, exist_ok=True)
        if self.lock_path.exists():
            locked = json.loads(self.lock_path.read_text(encoding="utf-8"))
            if locked.get("config_hash") == self.config_hash:
                return
            if not force:
                raise ConfigMismatchError(
                    f"{self.experiment_dir} holds outputs of config {locked.get('config_hash', '?')[:12]}, "
                    f"current config is {self.config_hash[:12]}; use --force to overwrite"
                )
            logger.warning(
                "config_lock_overridden",
                previous=locked.get("config_hash"),
                current=self.config_hash,
            )

        self.lock_path.write_text(
            json.dumps({"experiment_id": self.experiment_id, "config_hash": self.config_hash}, indent=2) + "\n",
            encoding="utf-8",
        )

    def record_metric(self, stage: str, name: str, value: Any):
        self.metrics.setdefault(stage, {})[name] = value

    def records(self) -> List[RunRecord]:
        if not self.runs_path.exists():
            return []
        return [
            RunRecord.model_validate_json(line)
            for line in self.runs_path.read_text(encoding="utf-8").splitlines()
            if line.strip()
        ]

    def last_completed(self, stage: str) -> Optional[RunRecord]:
        for record in reversed(self.records()):
            if record.stage == stage and record.status == "completed":
                return record
        return None

    def is_up_to_date(self, stage: str, input_hashes: Dict[str, str], stage_dir: Union[str, Path]) -> bool:
        """Whether the last completed run of stage saw the same config, inputs and outputs."""
        last = self.last_completed(stage)
        if last is None:
            return False
        return (
            last.config_hash == self.config_hash
            and last.input_hashes == input_hashes
            and bool(last.output_hashes)
            and last.output_hashes == hash_directory(stage_dir)
        )

    async def append(
        self,
        stage: str,
        stage_seed: int,
        input_hashes: Dict[str, str],
        stage_dir: Union[str, Path],
        started_at: datetime,
        status: Literal["completed", "skipped"],
    ) -> RunRecord:
        """Append a run record; output hashes are read from stage_dir."""
        finished_at = datetime.now(timezone.utc)
        record = RunRecord(
            stage=stage,
            experiment_id=self.experiment_id,
            config_hash=self.config_hash,
            stage_seed=stage_seed,
            input_hashes=input_hashes,
            output_hashes=hash_directory(stage_dir),
            started_at=started_at,
            finished_at=finished_at,
            duration_s=(finished_at - started_at).total_seconds(),
            status=status,
            metrics=self.metrics.pop(stage, {}),
        )

        self.runs_path.parent.mkdir(parents=True, exist_ok=True)
        async with aiofiles.open(self.runs_path, "a", encoding="utf-8") as f:
            await f.write(record.model_dump_json() + "\n")

        logger.info(
            "run_recorded",
            stage=stage,
            status=status,
            duration_s=round(record.duration_s, 3),
            outputs=len(record.output_hashes),
        )
        return record
