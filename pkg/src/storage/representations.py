"""
Representation store: one row-major float32 matrix per (encoder, task, split)
plus a sidecar index of ``subject_id<TAB>row`` lines.
"""
import os
from pathlib import Path
from typing import Dict, List, Sequence, Union

import numpy as np
import structlog

from src.domain.models import Representation, TaskKind
from src.errors import DimensionError, MissingArtifactError
from src.utils.hashing import safe_name

logger = structlog.get_logger()


def _atomic_write_bytes(path: Path, data: bytes):
    tmp = path.with_name(f".{path.name}.{os.getpid()}.tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


class RepresentationStore:
    """Reads and writes frozen representations under a root directory."""

    def __init__(self, root: Union[str, Path]):
        self.root = Path(root)

    def paths(self, encoder_id: str, task: TaskKind, split: str):
        base = self.root / safe_name(encoder_id) / task.value
        return base / f"{split}.f32", base / f"{split}.idx"

    def exists(self, encoder_id: str, task: TaskKind, split: str) -> bool:
        data_path, index_path = self.paths(encoder_id, task, split)
        return data_path.exists() and index_path.exists()

    def write(
        self,
        encoder_id: str,
        task: TaskKind,
        split: str,
        representations: Sequence[Representation],
    ) -> Path:
        """
        Persist representations of one (encoder, task, split).

        Raises:
            DimensionError: Rows of different length
        """
        data_path, index_path = self.paths(encoder_id, task, split)
        data_path.parent.mkdir(parents=True, exist_ok=True)

        dims = {r.dim for r in representations}
        if len(dims) > 1:
            raise DimensionError(f"mixed representation dims {sorted(dims)} for {encoder_id}/{task.value}")

        if representations:
            matrix = np.stack([r.vector for r in representations]).astype("<f4", copy=False)
        else:
            matrix = np.zeros((0, 0), dtype="<f4")

        _atomic_write_bytes(data_path, np.ascontiguousarray(matrix).tobytes(order="C"))
        index = "".join(f"{r.subject_id}\t{i}\n" for i, r in enumerate(representations))
        _atomic_write_bytes(index_path, index.encode("utf-8"))

        logger.info(
            "representations_written",
            encoder_id=encoder_id,
            task=task.value,
            split=split,
            rows=len(representations),
            dim=next(iter(dims), 0),
        )
        return data_path

    def read(self, encoder_id: str, task: TaskKind, split: str) -> List[Representation]:
        """
        Load representations of one (encoder, task, split).

        Raises:
            MissingArtifactError: Store files absent
        """
        data_path, index_path = self.paths(encoder_id, task, split)
        if not self.exists(encoder_id, task, split):
            raise MissingArtifactError(str(data_path), stage="export_repr")

        rows: List[tuple] = []
        for line in index_path.read_text(encoding="utf-8").splitlines():
            if line:
                subject_id, row = line.split("\t")
                rows.append((subject_id, int(row)))

        flat = np.frombuffer(data_path.read_bytes(), dtype="<f4")
        if not rows:
            return []
        if flat.size % len(rows):
            raise DimensionError(f"{data_path}: {flat.size} floats do not split into {len(rows)} rows")
        matrix = flat.reshape(len(rows), flat.size // len(rows))

        return [
            Representation(subject_id=sid, task=task, encoder_id=encoder_id, vector=matrix[row].copy())
            for sid, row in rows
        ]

    def read_map(self, encoder_id: str, task: TaskKind, split: str) -> Dict[str, Representation]:
        return {r.subject_id: r for r in self.read(encoder_id, task, split)}
