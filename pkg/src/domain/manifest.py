"""
Manifest ingestion, validation and stratified splitting.

The manifest is a UTF-8 JSON-lines file; every line carries a ``record_type``
of ``subject``, ``recording`` or ``transcript`` plus that record's fields.
"""
import json
import random
from collections import defaultdict
from pathlib import Path
from typing import Dict, List, Sequence, Tuple, Type, Union

import structlog
from pydantic import BaseModel, ValidationError

from src.domain.models import (
    DatasetManifest,
    RecordingRef,
    RiskLabel,
    Split,
    SubjectRecord,
    TaskKind,
    Transcript,
    ValidationReport,
    Violation,
)
from src.errors import ManifestError, SplitError

logger = structlog.get_logger()

RECORD_TYPES: Dict[str, Type[BaseModel]] = {
    "subject": SubjectRecord,
    "recording": RecordingRef,
    "transcript": Transcript,
}
SPLIT_ORDER: Tuple[Split, ...] = (Split.TRAIN, Split.DEV, Split.TEST)


def _describe_validation_error(err: ValidationError) -> str:
    parts = []
    for e in err.errors():
        loc = ".".join(str(p) for p in e["loc"]) or "record"
        parts.append(f"{loc}: {e['msg']}")
    return "; ".join(parts)


def parse_manifest(path: Union[str, Path]) -> DatasetManifest:
    """
    Parse and fully validate a manifest file.

    Args:
        path: Manifest file path

    Returns:
        Validated DatasetManifest rooted at the file's directory

    Raises:
        ManifestError: Malformed line, unknown task, duplicate key or dangling subject
    """
    path = Path(path)
    if not path.exists():
        raise ManifestError(f"manifest not found: {path}")

    subjects: List[SubjectRecord] = []
    recordings: List[RecordingRef] = []
    transcripts: List[Transcript] = []

    subject_lines: Dict[str, int] = {}
    recording_lines: Dict[Tuple[str, TaskKind], int] = {}
    transcript_lines: Dict[Tuple[str, TaskKind], int] = {}
    references: List[Tuple[int, str]] = []

    with path.open("r", encoding="utf-8") as f:
        for line_number, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line:
                continue

            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise ManifestError(f"invalid JSON ({e.msg})", line_number) from e

            if not isinstance(obj, dict):
                raise ManifestError("record must be an object", line_number)

            record_type = obj.pop("record_type", None)
            model = RECORD_TYPES.get(record_type)
            if model is None:
                raise ManifestError(f"unknown record_type {record_type!r}", line_number)

            try:
                record = model.model_validate(obj)
            except ValidationError as e:
                raise ManifestError(_describe_validation_error(e), line_number) from e

            if isinstance(record, SubjectRecord):
                if record.subject_id in subject_lines:
                    raise ManifestError(
                        f"duplicate subject {record.subject_id} "
                        f"(first seen on line {subject_lines[record.subject_id]})",
                        line_number,
                    )
                subject_lines[record.subject_id] = line_number
                subjects.append(record)
                continue

            seen = recording_lines if isinstance(record, RecordingRef) else transcript_lines
            if record.key in seen:
                raise ManifestError(
                    f"duplicate {record_type} for {record.subject_id}/{record.task.value}",
                    line_number,
                )
            seen[record.key] = line_number
            references.append((line_number, record.subject_id))

            if isinstance(record, RecordingRef):
                recordings.append(record)
            else:
                transcripts.append(record)

    for line_number, subject_id in references:
        if subject_id not in subject_lines:
            raise ManifestError(f"reference to unknown subject {subject_id}", line_number)

    manifest = DatasetManifest(
        subjects=tuple(subjects),
        recordings=tuple(recordings),
        transcripts=tuple(transcripts),
        root=str(path.parent),
    )

    logger.info(
        "manifest_parsed",
        path=str(path),
        subjects=len(subjects),
        recordings=len(recordings),
        transcripts=len(transcripts),
        splits=manifest.split_counts(),
    )
    return manifest


def serialize_manifest(manifest: DatasetManifest, path: Union[str, Path]) -> Path:
    """
    Write a manifest in the line-delimited format parse_manifest reads.

    Args:
        manifest: Manifest to write
        path: Destination file

    Returns:
        The written path
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    lines = []
    for record_type, records in (
        ("subject", manifest.subjects),
        ("recording", manifest.recordings),
        ("transcript", manifest.transcripts),
    ):
        for record in records:
            data = {"record_type": record_type, **record.model_dump(mode="json", exclude_none=True)}
            lines.append(json.dumps(data, ensure_ascii=False, sort_keys=False))

    text = "\n".join(lines) + ("\n" if lines else "")
    path.write_text(text, encoding="utf-8")
    return path


def validate_manifest(manifest: DatasetManifest) -> ValidationReport:
    """
    Check every manifest invariant without raising.

    A missing PR transcript is not a violation since PR text is never used.

    Args:
        manifest: Manifest to check (not mutated)

    Returns:
        ValidationReport, empty iff all invariants hold
    """
    violations: List[Violation] = []

    subject_ids = set()
    for s in manifest.subjects:
        if s.subject_id in subject_ids:
            violations.append(Violation(
                code="duplicate_subject",
                message=f"subject {s.subject_id} appears more than once",
                subject_id=s.subject_id,
            ))
        subject_ids.add(s.subject_id)

    for kind, records in (("recording", manifest.recordings), ("transcript", manifest.transcripts)):
        keys = set()
        for r in records:
            if r.subject_id not in subject_ids:
                violations.append(Violation(
                    code=f"dangling_{kind}",
                    message=f"{kind} for unknown subject {r.subject_id}",
                    subject_id=r.subject_id,
                    task=r.task,
                ))
            if r.key in keys:
                violations.append(Violation(
                    code=f"duplicate_{kind}",
                    message=f"more than one {kind} for {r.subject_id}/{r.task.value}",
                    subject_id=r.subject_id,
                    task=r.task,
                ))
            keys.add(r.key)

    assigned = [s.split for s in manifest.subjects if s.split is not None]
    if assigned and len(assigned) != len(manifest.subjects):
        violations.append(Violation(
            code="partial_split",
            message=f"{len(assigned)} of {len(manifest.subjects)} subjects carry a split",
        ))

    return ValidationReport(violations=violations)


def _split_targets(n: int, ratios: Sequence[int]) -> Dict[Split, int]:
    total = sum(ratios)
    targets = {split: n * r // total for split, r in zip(SPLIT_ORDER[1:], ratios[1:])}
    # remainder goes to train
    targets[Split.TRAIN] = n - sum(targets.values())
    return targets


def split_dataset(
    manifest: DatasetManifest,
    ratios: Sequence[int] = (4, 1, 1),
    seed: int = 0,
) -> DatasetManifest:
    """
    Assign train/dev/test splits stratified by risk label.

    Manifests that already carry splits (the official split) pass through
    unchanged. Overall split sizes are floor(n * r / sum) for dev and test with
    the remainder going to train; each class contributes in proportion to its
    size, leftovers go to the class with the largest fractional share.

    Args:
        manifest: Manifest without split assignments
        ratios: (train, dev, test) positive integer ratios
        seed: Shuffle seed

    Returns:
        New manifest with every subject's split set

    Raises:
        SplitError: Bad ratios, partial assignments or a class smaller than 3
    """
    if len(ratios) != 3 or any(int(r) != r or r <= 0 for r in ratios):
        raise SplitError(f"ratios must be three positive integers, got {tuple(ratios)}")

    assigned = [s for s in manifest.subjects if s.split is not None]
    if assigned:
        if len(assigned) != len(manifest.subjects):
            raise SplitError(
                f"{len(assigned)} of {len(manifest.subjects)} subjects already carry a split"
            )
        logger.info("split_passthrough", splits=manifest.split_counts())
        return manifest

    if not manifest.subjects:
        return manifest

    by_label: Dict[RiskLabel, List[str]] = defaultdict(list)
    for s in manifest.subjects:
        by_label[s.label].append(s.subject_id)

    for label, members in by_label.items():
        if len(members) < len(SPLIT_ORDER):
            raise SplitError(
                f"class {label.name} has {len(members)} subjects, "
                f"fewer than the {len(SPLIT_ORDER)} splits"
            )

    rng = random.Random(seed)
    labels = sorted(by_label)
    for label in labels:
        by_label[label].sort()
        rng.shuffle(by_label[label])

    total = sum(ratios)
    targets = _split_targets(len(manifest.subjects), ratios)

    quotas: Dict[RiskLabel, Dict[Split, int]] = {label: {} for label in labels}
    extras: Dict[RiskLabel, int] = {label: 0 for label in labels}
    for split, r in zip(SPLIT_ORDER[1:], ratios[1:]):
        shares = {label: len(by_label[label]) * r / total for label in labels}
        for label in labels:
            quotas[label][split] = int(shares[label])
        leftover = targets[split] - sum(quotas[label][split] for label in labels)
        for _ in range(leftover):
            label = min(
                labels,
                key=lambda lb: (
                    -(shares[lb] - quotas[lb][split]),
                    extras[lb],
                    lb.value,
                ),
            )
            quotas[label][split] += 1
            extras[label] += 1

    split_of: Dict[str, Split] = {}
    for label in labels:
        members = by_label[label]
        cursor = 0
        for split in (Split.DEV, Split.TEST):
            for sid in members[cursor:cursor + quotas[label][split]]:
                split_of[sid] = split
            cursor += quotas[label][split]
        for sid in members[cursor:]:
            split_of[sid] = Split.TRAIN

    subjects = tuple(s.model_copy(update={"split": split_of[s.subject_id]}) for s in manifest.subjects)
    result = manifest.model_copy(update={"subjects": subjects})

    logger.info("dataset_split", ratios=tuple(ratios), seed=seed, splits=result.split_counts())
    return result
