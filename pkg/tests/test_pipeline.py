"""End-to-end runs of the CLI over the synthetic corpus."""
import json
import shutil

import numpy as np
import pytest

from config.experiment import load_config
from src.collectors.extraction import mock_extract
from src.domain.models import Language, Modality, TaskKind
from src.evaluation.metrics import confusion_from_pairs
from src.main import EXIT_MISSING_ARTIFACT, EXIT_OK, EXIT_VALIDATION, STAGES, ExperimentOrchestrator, main, synth, validate
from src.models.encoders import build_encoder
from src.models.training import TrainedModel, predict_batch, train_classifier
from src.models.types import ClassifierHeadConfig, EncoderInput, EncoderSettings, Hyperparams
from src.monitoring.provenance import RunTracker
from src.storage.representations import RepresentationStore
from src.synthetic.generator import SyntheticSpec, generate_synthetic
from src.utils.hashing import sha256_tree
from tests.conftest import write_experiment

pytestmark = pytest.mark.slow


def _run_all(directory, **kw):
    config_path = write_experiment(directory, **kw)
    assert main(["--config", str(config_path), "synth"]) == EXIT_OK
    assert main(["--config", str(config_path), "all"]) == EXIT_OK
    return load_config(config_path)


@pytest.fixture(scope="module")
def synthetic_run(tmp_path_factory):
    return _run_all(tmp_path_factory.mktemp("run_a"))


def test_full_run_reaches_high_dev_accuracy(synthetic_run):
    metrics = json.loads((synthetic_run.experiment_dir / "evaluate" / "metrics_dev.json").read_text(encoding="utf-8"))

    assert metrics["combined"]["acc"] >= 0.85
    assert metrics["combined"]["n"] == 20
    assert set(metrics["per_task"]) == {"ER", "PR", "ED"}
    assert metrics["fallback_logits"] == 0


def test_full_run_writes_every_stage(synthetic_run):
    root = synthetic_run.experiment_dir
    for stage in STAGES:
        assert (root / stage).is_dir(), stage
    assert (root / "train_text" / "ER" / "model.pt").exists()
    assert not (root / "train_text" / "PR").exists()
    assert (root / "train_speech" / "PR" / "model.pt").exists()
    assert not (root / "train_fusion" / "PR").exists()
    report = (root / "report" / "synthetic-test__test.report.txt").read_text(encoding="utf-8")
    assert "mock-bag-of-markers+bag-of-acoustic-tokens" in report

    tracker = RunTracker(root, synthetic_run.experiment_id, synthetic_run.config_hash())
    completed = [r.stage for r in tracker.records() if r.status == "completed"]
    assert completed == list(STAGES)


def test_identical_runs_are_byte_identical(synthetic_run, tmp_path):
    other = _run_all(tmp_path / "run_b")

    for split in ("dev", "test"):
        for stage, name in (
            ("predict", f"predictions_{split}.csv"),
            ("report", f"synthetic-test__{split}.report.txt"),
            ("report", f"synthetic-test__{split}.report.csv"),
        ):
            a = (synthetic_run.experiment_dir / stage / name).read_bytes()
            b = (other.experiment_dir / stage / name).read_bytes()
            assert a == b, name


async def test_rerun_skips_every_stage(synthetic_run):
    orchestrator = ExperimentOrchestrator(synthetic_run)
    assert await orchestrator.run() == {stage: "skipped" for stage in STAGES}


def test_deleted_fusion_weights_exit_with_code_2(tmp_path):
    config = _run_all(tmp_path, n_subjects=30)
    (config.experiment_dir / "train_fusion" / "ER" / "model.pt").unlink()

    code = main(["--config", str(tmp_path / "experiment.toml"), "--stage", "predict", "--force"])
    assert code == EXIT_MISSING_ARTIFACT


def test_changed_config_is_refused_without_force(tmp_path):
    _run_all(tmp_path, n_subjects=30)
    config_path = tmp_path / "experiment.toml"
    with config_path.open("a", encoding="utf-8") as f:
        f.write("\n[decision]\npolicy = \"prob_sum\"\n")

    assert main(["--config", str(config_path), "report"]) == EXIT_VALIDATION
    assert main(["--config", str(config_path), "all", "--force"]) == EXIT_OK


def test_validate_command(tmp_path, capsys):
    config = load_config(write_experiment(tmp_path, n_subjects=12))
    assert synth(config) == EXIT_OK
    capsys.readouterr()
    assert validate(config) == EXIT_OK
    assert "0 violation(s) in 12 subjects" in capsys.readouterr().out

    manifest = tmp_path / "data" / "manifest.jsonl"
    with manifest.open("a", encoding="utf-8") as f:
        f.write('{"record_type": "subject", "subject_id": "X1", "label": 1, "split": "train"}\n')
    assert validate(config) == EXIT_VALIDATION
    assert "partial_split" in capsys.readouterr().out


def test_stage_before_its_inputs_exits_with_code_2(tmp_path):
    config_path = write_experiment(tmp_path, n_subjects=12)
    assert main(["--config", str(config_path), "evaluate"]) == EXIT_MISSING_ARTIFACT


def test_transcript_input_source_runs(tmp_path):
    config = _run_all(tmp_path, n_subjects=30, input_source="transcript")
    report = (config.experiment_dir / "report" / "synthetic-test__dev.report.txt").read_text(encoding="utf-8")
    assert "\nbag-of-markers+bag-of-acoustic-tokens" in report


def test_zh_and_en_features_give_identical_results(tmp_path, lexicon, lexicon_file):
    manifest = generate_synthetic(SyntheticSpec(n_subjects=60, seed=3), out_dir=tmp_path, lexicon=lexicon)
    lookup = lexicon.zh_to_en()
    markers = lexicon.forms(Language.ZH)
    labels = manifest.labels()
    subjects = sorted(labels)
    train_ids, test_ids = subjects[:40], subjects[40:]

    def features(language):
        items = {}
        for rec in manifest.recordings:
            if rec.task != TaskKind.ER:
                continue
            text = manifest.resolve_uri(rec.audio_uri).with_suffix(".txt").read_text(encoding="utf-8")
            items[rec.subject_id] = EncoderInput(
                subject_id=rec.subject_id,
                task=TaskKind.ER,
                modality=Modality.TEXT,
                content=mock_extract(text, markers, language, lookup),
            )
        return items

    counts, vectors = {}, {}
    for language in (Language.ZH, Language.EN):
        items = features(language)
        encoder = build_encoder(EncoderSettings(
            encoder_id="bag-of-markers", kind="bag-of-markers", lexicon_path=str(lexicon_file), max_length=4096,
        ))
        model = train_classifier(
            [(items[s], labels[s]) for s in train_ids], [], encoder,
            ClassifierHeadConfig(input_dim=encoder.repr_dim),
            Hyperparams(learning_rate=5e-3, batch_size=8, seed=0), TaskKind.ER,
        )
        logits = predict_batch(model, [items[s] for s in test_ids])
        pairs = [(lg.subject_id, int(lg.values[1] > lg.values[0])) for lg in logits]
        counts[language] = confusion_from_pairs(pairs, labels)

        vectors[language] = encoder.encode_batch([items[s] for s in subjects]).numpy()

    assert counts[Language.ZH] == counts[Language.EN]
    np.testing.assert_array_equal(vectors[Language.ZH], vectors[Language.EN])


def test_rerunning_one_deleted_stage_reproduces_it_and_touches_nothing_else(tmp_path):
    config = _run_all(tmp_path, n_subjects=30)
    root = config.experiment_dir
    before = {stage: sha256_tree(root / stage) for stage in STAGES}

    shutil.rmtree(root / "export_repr")
    assert main(["--config", str(tmp_path / "experiment.toml"), "--stage", "export_repr"]) == EXIT_OK

    assert {stage: sha256_tree(root / stage) for stage in STAGES} == before


def test_export_reads_the_trained_encoders(tmp_path, monkeypatch):
    config = _run_all(tmp_path, n_subjects=30)
    store = RepresentationStore(config.experiment_dir / "export_repr")
    text_id, speech_id = config.fusion.text_encoder_id, config.fusion.speech_encoder_id
    text_before = store.read_map(text_id, TaskKind.ER, "train")
    speech_before = store.read_map(speech_id, TaskKind.PR, "train")

    load = TrainedModel.load

    def load_perturbed(directory, base_dir="."):
        model = load(directory, base_dir)
        encode = model.encoder.encode_batch
        model.encoder.encode_batch = lambda inputs: encode(inputs) * 2
        return model

    monkeypatch.setattr("src.main.TrainedModel.load", load_perturbed)
    assert main(["--config", str(tmp_path / "experiment.toml"), "--stage", "export_repr", "--force"]) == EXIT_OK

    text_after = store.read_map(text_id, TaskKind.ER, "train")
    speech_after = store.read_map(speech_id, TaskKind.PR, "train")
    assert set(text_after) == set(text_before) and set(speech_after) == set(speech_before)
    for before, after in ((text_before, text_after), (speech_before, speech_after)):
        for subject_id, rep in before.items():
            np.testing.assert_array_equal(after[subject_id].vector, rep.vector * 2)
