from collections import Counter

import pytest

from src.domain.manifest import parse_manifest, serialize_manifest, split_dataset, validate_manifest
from src.domain.models import DatasetManifest, RiskLabel, Split, SubjectRecord, TaskKind
from src.errors import ManifestError, SplitError
from tests.conftest import manifest_lines, write_lines


def test_parse_manifest_reads_all_record_types(tmp_path, balanced_labels):
    path = write_lines(tmp_path / "manifest.jsonl", manifest_lines(balanced_labels, transcripts=True))

    manifest = parse_manifest(path)

    assert len(manifest.subjects) == 24
    assert len(manifest.recordings) == 72
    assert len(manifest.transcripts) == 72
    assert manifest.root == str(tmp_path)
    assert manifest.resolve_uri("audio/S001_ER.wav") == tmp_path / "audio" / "S001_ER.wav"


def test_parse_manifest_reports_line_of_duplicate_subject(tmp_path):
    lines = manifest_lines({"S1": RiskLabel.AT_RISK}, tasks=())
    lines.append(lines[0])
    path = write_lines(tmp_path / "manifest.jsonl", lines)

    with pytest.raises(ManifestError) as exc:
        parse_manifest(path)
    assert exc.value.line_number == 2


def test_parse_manifest_rejects_unknown_task(tmp_path):
    lines = manifest_lines({"S1": RiskLabel.AT_RISK}, tasks=())
    lines.append({"record_type": "recording", "subject_id": "S1", "task": "XX", "audio_uri": "a.wav"})
    path = write_lines(tmp_path / "manifest.jsonl", lines)

    with pytest.raises(ManifestError) as exc:
        parse_manifest(path)
    assert exc.value.line_number == 2


def test_parse_manifest_rejects_dangling_recording(tmp_path):
    lines = manifest_lines({"S1": RiskLabel.AT_RISK}, tasks=())
    lines.append({"record_type": "recording", "subject_id": "S9", "task": "ER", "audio_uri": "a.wav"})
    path = write_lines(tmp_path / "manifest.jsonl", lines)

    with pytest.raises(ManifestError, match="unknown subject S9"):
        parse_manifest(path)


def test_parse_manifest_rejects_invalid_json(tmp_path):
    path = write_lines(tmp_path / "manifest.jsonl", ['{"record_type": "subject",'])
    with pytest.raises(ManifestError, match="invalid JSON"):
        parse_manifest(path)


def test_empty_er_transcript_is_rejected_but_empty_pr_is_allowed(tmp_path):
    base = manifest_lines({"S1": RiskLabel.AT_RISK}, tasks=())
    pr = {"record_type": "transcript", "subject_id": "S1", "task": "PR", "text": "", "provider_id": "x"}
    assert len(parse_manifest(write_lines(tmp_path / "ok.jsonl", base + [pr])).transcripts) == 1

    er = dict(pr, task="ER")
    with pytest.raises(ManifestError):
        parse_manifest(write_lines(tmp_path / "bad.jsonl", base + [er]))


def test_serialize_then_parse_preserves_manifest(tmp_path, balanced_labels):
    original = parse_manifest(
        write_lines(tmp_path / "in.jsonl", manifest_lines(balanced_labels, transcripts=True))
    )
    again = parse_manifest(serialize_manifest(original, tmp_path / "out" / "manifest.jsonl"))

    assert again.subjects == original.subjects
    assert again.recordings == original.recordings
    assert again.transcripts == original.transcripts


def test_validate_manifest_collects_violations_without_raising():
    manifest = DatasetManifest(
        subjects=(
            SubjectRecord(subject_id="S1", label=RiskLabel.AT_RISK, split=Split.TRAIN),
            SubjectRecord(subject_id="S1", label=RiskLabel.NON_RISK),
        ),
    )
    report = validate_manifest(manifest)

    assert not report.ok
    assert {v.code for v in report.violations} == {"duplicate_subject", "partial_split"}


def test_split_dataset_sizes_and_stratification(tmp_path):
    labels = {f"S{i:03d}": RiskLabel(i % 2) for i in range(120)}
    manifest = parse_manifest(write_lines(tmp_path / "m.jsonl", manifest_lines(labels, tasks=())))

    split = split_dataset(manifest, (4, 1, 1), seed=7)

    counts = Counter(s.split for s in split.subjects)
    assert counts == {Split.TRAIN: 80, Split.DEV: 20, Split.TEST: 20}
    for part in (Split.DEV, Split.TEST):
        per_label = Counter(s.label for s in split.subjects if s.split == part)
        assert per_label[RiskLabel.AT_RISK] == per_label[RiskLabel.NON_RISK] == 10


def test_split_dataset_is_deterministic_and_order_independent(tmp_path):
    labels = {f"S{i:03d}": RiskLabel(int(i % 3 == 0)) for i in range(60)}
    lines = manifest_lines(labels, tasks=())
    forward = parse_manifest(write_lines(tmp_path / "a.jsonl", lines))
    backward = parse_manifest(write_lines(tmp_path / "b.jsonl", list(reversed(lines))))

    a = {s.subject_id: s.split for s in split_dataset(forward, seed=3).subjects}
    b = {s.subject_id: s.split for s in split_dataset(backward, seed=3).subjects}
    assert a == b


def test_split_dataset_passes_official_split_through():
    manifest = DatasetManifest(subjects=tuple(
        SubjectRecord(subject_id=f"S{i}", label=RiskLabel(i % 2), split=Split.TEST) for i in range(4)
    ))
    assert split_dataset(manifest) is manifest


def test_split_dataset_rejects_tiny_class_and_bad_ratios():
    manifest = DatasetManifest(subjects=tuple(
        [SubjectRecord(subject_id=f"A{i}", label=RiskLabel.AT_RISK) for i in range(10)]
        + [SubjectRecord(subject_id="N0", label=RiskLabel.NON_RISK)]
    ))
    with pytest.raises(SplitError):
        split_dataset(manifest)
    with pytest.raises(SplitError):
        split_dataset(manifest, (4, 0, 1))


def test_subject_ids_filter_by_split():
    manifest = DatasetManifest(subjects=(
        SubjectRecord(subject_id="S1", label=RiskLabel.AT_RISK, split=Split.DEV),
        SubjectRecord(subject_id="S2", label=RiskLabel.NON_RISK, split=Split.TRAIN),
    ))
    assert manifest.subject_ids(Split.DEV) == ["S1"]
    assert manifest.recording("S1", TaskKind.ER) is None
