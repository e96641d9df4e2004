"""
Experiment orchestrator and command-line entry point.

Stages run in order ingest -> transcribe -> extract -> train_text ->
train_speech -> export_repr -> train_fusion -> predict -> evaluate -> report.
Each stage writes under <output_root>/<experiment_id>/<stage>/ and appends a
run record; a stage whose config, inputs and outputs are unchanged is skipped.

Usage::

    python -m src.main --config experiments/synthetic.toml synth
    python -m src.main --config experiments/synthetic.toml all
    python -m src.main --config experiments/synthetic.toml --stage predict --force
"""
import argparse
import asyncio
import json
import shutil
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Type, TypeVar

import structlog
from pydantic import BaseModel

from config.experiment import ExperimentConfig, load_config
from config.settings import settings
from src.collectors.asr import AsrGateway, AsrProviderDescriptor
from src.collectors.extraction import (
    ExtractionProviderDescriptor,
    MockExtractionProvider,
    RiskFeatureExtractor,
)
from src.decision.voting import (
    TaskLogitsSet,
    aggregate_dataset,
    read_predictions,
    task_vote,
    write_predictions,
)
from src.domain.lexicon import load_lexicon
from src.domain.manifest import parse_manifest, serialize_manifest, split_dataset, validate_manifest
from src.domain.models import (
    ALL_TASKS,
    TEXT_TASKS,
    DatasetManifest,
    FailureRecord,
    Logits,
    Modality,
    RiskFeatureText,
    RiskLabel,
    Split,
    TaskKind,
    Transcript,
)
from src.errors import (
    ManifestError,
    MissingArtifactError,
    PipelineError,
    ValidationFailure,
    ConfigError,
)
from src.evaluation.metrics import (
    MetricsResult,
    confusion,
    confusion_from_pairs,
    metrics_from_counts,
)
from src.evaluation.report import ReportRow, render_report, write_report
from src.models.encoders import build_encoder
from src.models.fusion import FusionModel, fuse, fusion_predict, train_fusion
from src.models.training import (
    MODEL_META,
    TrainedModel,
    export_representations,
    predict_logits,
    train_classifier,
)
from src.models.types import ClassifierHeadConfig, EncoderInput
from src.monitoring.provenance import RunTracker
from src.storage.representations import RepresentationStore
from src.synthetic.generator import generate_synthetic
from src.utils.hashing import derive_seed, sha256_file, sha256_tree
from src.utils.logger import setup_logging

logger = structlog.get_logger()

STAGES = (
    "ingest",
    "transcribe",
    "extract",
    "train_text",
    "train_speech",
    "export_repr",
    "train_fusion",
    "predict",
    "evaluate",
    "report",
)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_MISSING_ARTIFACT = 2

M = TypeVar("M", bound=BaseModel)


def write_jsonl(path: Path, records: Iterable[BaseModel]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("".join(r.model_dump_json() + "\n" for r in records), encoding="utf-8")
    return path


def read_jsonl(path: Path, model: Type[M], stage: Optional[str] = None) -> List[M]:
    if not path.exists():
        raise MissingArtifactError(str(path), stage)
    return [
        model.model_validate_json(line)
        for line in path.read_text(encoding="utf-8").splitlines()
        if line.strip()
    ]


def write_json(path: Path, payload) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, ensure_ascii=False, sort_keys=True) + "\n", encoding="utf-8")
    return path


class SplitMetrics(BaseModel):
    """Combined and per-task metrics of one split."""
    split: Split
    combined: Optional[MetricsResult]
    per_task: Dict[TaskKind, Optional[MetricsResult]]
    fallback_logits: int = 0


class ExperimentOrchestrator:
    """Runs pipeline stages for one experiment config."""

    def __init__(self, config: ExperimentConfig, force: bool = False):
        """
        Initialize orchestrator.

        Args:
            config: Resolved experiment config
            force: Rerun stages even when up to date and override a config lock
        """
        self.config = config
        self.force = force
        self.experiment_dir = config.experiment_dir
        self.tracker = RunTracker(self.experiment_dir, config.experiment_id, config.config_hash())
        self._manifest: Optional[DatasetManifest] = None

        logger.info(
            "orchestrator_initialized",
            experiment_id=config.experiment_id,
            experiment_dir=str(self.experiment_dir),
            config_hash=self.tracker.config_hash[:12],
            environment=settings.environment,
        )

    # ------------------------------------------------------------------
    # paths and upstream artifacts

    def stage_dir(self, stage: str) -> Path:
        return self.experiment_dir / stage

    @property
    def text_source_stage(self) -> str:
        return "extract" if self.config.text_model.input_source == "features" else "transcribe"

    def upstream(self, stage: str) -> List[str]:
        return {
            "ingest": [],
            "transcribe": ["ingest"],
            "extract": ["transcribe"],
            "train_text": ["ingest", self.text_source_stage],
            "train_speech": ["ingest"],
            "export_repr": ["ingest", self.text_source_stage, "train_text", "train_speech"],
            "train_fusion": ["ingest", "export_repr"],
            "predict": ["ingest", "export_repr", "train_text", "train_speech", "train_fusion"],
            "evaluate": ["ingest", "predict"],
            "report": ["evaluate"],
        }[stage]

    def artifact(self, stage: str, *parts: str) -> Path:
        """Path of an upstream artifact; raises if it does not exist."""
        path = self.stage_dir(stage).joinpath(*parts)
        if not path.exists():
            raise MissingArtifactError(str(path), stage)
        return path

    def input_hashes(self, stage: str) -> Dict[str, str]:
        if stage == "ingest":
            manifest_path = self.config.resolve_path(self.config.dataset.manifest_path)
            if not manifest_path.exists():
                raise MissingArtifactError(str(manifest_path))
            return {"manifest": sha256_file(manifest_path)}
        hashes = {}
        for up in self.upstream(stage):
            up_dir = self.stage_dir(up)
            if not up_dir.exists():
                raise MissingArtifactError(str(up_dir), up)
            hashes[up] = sha256_tree(up_dir)
        return hashes

    # ------------------------------------------------------------------
    # loaders

    def manifest(self) -> DatasetManifest:
        if self._manifest is None:
            path = self.artifact("ingest", "manifest.jsonl")
            source = json.loads(self.artifact("ingest", "source.json").read_text(encoding="utf-8"))
            self._manifest = parse_manifest(path).model_copy(update={"root": source["root"]})
        return self._manifest

    def text_inputs(self, split: Split) -> Dict[TaskKind, Dict[str, EncoderInput]]:
        """Text model inputs of one split: feature text or raw transcripts."""
        subjects = set(self.manifest().subject_ids(split))
        if self.config.text_model.input_source == "features":
            language = self.config.text_model.feature_language
            records = [
                (f.subject_id, f.task, f.text)
                for f in read_jsonl(self.stage_dir("extract") / "features.jsonl", RiskFeatureText, "extract")
                if f.language == language
            ]
        else:
            records = [
                (t.subject_id, t.task, t.text)
                for t in read_jsonl(self.stage_dir("transcribe") / "transcripts.jsonl", Transcript, "transcribe")
            ]

        inputs: Dict[TaskKind, Dict[str, EncoderInput]] = {task: {} for task in TEXT_TASKS}
        for subject_id, task, text in records:
            if task in TEXT_TASKS and subject_id in subjects:
                inputs[task][subject_id] = EncoderInput(
                    subject_id=subject_id, task=task, modality=Modality.TEXT, content=text,
                )
        return inputs

    def speech_inputs(self, split: Split) -> Dict[TaskKind, Dict[str, EncoderInput]]:
        manifest = self.manifest()
        subjects = set(manifest.subject_ids(split))
        inputs: Dict[TaskKind, Dict[str, EncoderInput]] = {task: {} for task in ALL_TASKS}
        for rec in manifest.recordings:
            if rec.subject_id not in subjects:
                continue
            path = manifest.resolve_uri(rec.audio_uri)
            if not path.exists():
                logger.warning("recording_missing", subject_id=rec.subject_id, task=rec.task.value, path=str(path))
                continue
            inputs[rec.task][rec.subject_id] = EncoderInput(
                subject_id=rec.subject_id, task=rec.task, modality=Modality.SPEECH, content=str(path),
            )
        return inputs

    def labeled(self, items: Dict[str, EncoderInput]):
        labels = self.manifest().labels()
        return [(items[sid], labels[sid]) for sid in sorted(items)]

    def report_splits(self) -> List[Split]:
        return [Split(s) for s in self.config.report.splits]

    # ------------------------------------------------------------------
    # stages

    async def ingest(self, out: Path):
        cfg = self.config.dataset
        manifest_path = self.config.resolve_path(cfg.manifest_path)
        manifest = parse_manifest(manifest_path)
        report = validate_manifest(manifest)
        if not report.ok:
            raise ManifestError("; ".join(v.message for v in report.violations))

        split = split_dataset(manifest, cfg.split_ratios, seed=cfg.split_seed)
        serialize_manifest(split, out / "manifest.jsonl")
        write_json(out / "source.json", {"manifest_path": str(manifest_path), "root": manifest.root})
        self._manifest = split.model_copy(update={"root": manifest.root})
        self.tracker.record_metric("ingest", "splits", split.split_counts())

    async def transcribe(self, out: Path):
        manifest = self.manifest()
        cfg = self.config.asr
        given = {t.key: t for t in manifest.transcripts}
        needed = [r for r in manifest.recordings if r.key not in given]

        transcripts: Dict[tuple, Transcript] = dict(given)
        failures: List[FailureRecord] = []
        if needed:
            gateway = AsrGateway(self.config.cache_root, max_attempts=cfg.max_attempts)
            try:
                batch = await gateway.batch_transcribe(
                    manifest,
                    AsrProviderDescriptor(provider_id=cfg.provider_id, config=cfg.config),
                    concurrency_limit=cfg.concurrency,
                    recordings=needed,
                )
            finally:
                await gateway.close()
            transcripts.update({t.key: t for t in batch.transcripts})
            failures = batch.failures

        ordered = [transcripts[r.key] for r in manifest.recordings if r.key in transcripts]
        write_jsonl(out / "transcripts.jsonl", ordered)
        write_jsonl(out / "failures.jsonl", failures)
        self.tracker.record_metric("transcribe", "from_manifest", len(given))
        self.tracker.record_metric("transcribe", "failures", len(failures))

    async def extract(self, out: Path):
        cfg = self.config.extraction
        transcripts = read_jsonl(self.artifact("transcribe", "transcripts.jsonl"), Transcript, "transcribe")
        descriptor = ExtractionProviderDescriptor(provider_id=cfg.provider_id, config=cfg.config)

        extractor = RiskFeatureExtractor(self.config.cache_root, max_attempts=cfg.max_attempts)
        if descriptor.kind == "mock":
            if cfg.lexicon_path is None:
                raise ConfigError("the mock extraction provider needs extraction.lexicon_path")
            lexicon = load_lexicon(self.config.resolve_path(cfg.lexicon_path))
            extractor.register(MockExtractionProvider(lexicon, cfg.provider_id))
        try:
            batch = await extractor.batch_extract(
                transcripts,
                cfg.languages,
                descriptor,
                prompt_version=cfg.prompt_version,
                concurrency_limit=cfg.concurrency,
            )
        finally:
            await extractor.close()

        write_jsonl(out / "features.jsonl", batch.features)
        write_jsonl(out / "failures.jsonl", batch.failures)
        self.tracker.record_metric("extract", "features", len(batch.features))
        self.tracker.record_metric("extract", "failures", len(batch.failures))

    async def train_text(self, out: Path):
        cfg = self.config.text_model
        train_inputs = self.text_inputs(Split.TRAIN)
        dev_inputs = self.text_inputs(Split.DEV)
        for task in TEXT_TASKS:
            encoder = build_encoder(cfg.encoder, self.config.base_dir, Modality.TEXT)
            model = train_classifier(
                self.labeled(train_inputs[task]),
                self.labeled(dev_inputs[task]),
                encoder,
                ClassifierHeadConfig(input_dim=encoder.repr_dim),
                cfg.hyperparams,
                task,
            )
            model.save(out / task.value)
            self.tracker.record_metric("train_text", f"{task.value}_dev_accuracy", model.meta.history.dev_accuracy[-1])

    async def train_speech(self, out: Path):
        cfg = self.config.speech_model
        train_inputs = self.speech_inputs(Split.TRAIN)
        dev_inputs = self.speech_inputs(Split.DEV)
        for task in ALL_TASKS:
            encoder = build_encoder(cfg.encoder, self.config.base_dir, Modality.SPEECH)
            model = train_classifier(
                self.labeled(train_inputs[task]),
                self.labeled(dev_inputs[task]),
                encoder,
                ClassifierHeadConfig(input_dim=encoder.repr_dim),
                cfg.hyperparams,
                task,
            )
            model.save(out / task.value)
            self.tracker.record_metric("train_speech", f"{task.value}_dev_accuracy", model.meta.history.dev_accuracy[-1])

    async def export_repr(self, out: Path):
        # fine-tuned encoders, frozen from here on
        store = RepresentationStore(out)
        text_models, speech_models = self._load_unimodal()
        text_id, speech_id = self.config.fusion.text_encoder_id, self.config.fusion.speech_encoder_id

        missing: List[FailureRecord] = []
        for split in Split:
            text_inputs = self.text_inputs(split)
            speech_inputs = self.speech_inputs(split)
            for task in TEXT_TASKS:
                result = export_representations(
                    text_models[task], list(text_inputs[task].values()), task, split.value, store, text_id,
                )
                missing.extend(result.missing)
            for task in ALL_TASKS:
                result = export_representations(
                    speech_models[task], list(speech_inputs[task].values()), task, split.value, store, speech_id,
                )
                missing.extend(result.missing)

        write_jsonl(out / "failures.jsonl", missing)
        self.tracker.record_metric("export_repr", "missing", len(missing))

    def _fused_pairs(self, store: RepresentationStore, task: TaskKind, split: Split):
        labels = self.manifest().labels()
        text = store.read_map(self.config.fusion.text_encoder_id, task, split.value)
        speech = store.read_map(self.config.fusion.speech_encoder_id, task, split.value)
        both = sorted(set(text) & set(speech))
        dropped = sorted((set(text) | set(speech)) - set(both))
        return [(fuse(text[s], speech[s]), labels[s]) for s in both], dropped

    async def train_fusion(self, out: Path):
        store = RepresentationStore(self.stage_dir("export_repr"))
        text_dim = self.config.text_model.encoder.repr_dim
        speech_dim = self.config.speech_model.encoder.repr_dim
        expected = (text_dim, speech_dim) if text_dim and speech_dim else None

        for task in TEXT_TASKS:
            train, dropped = self._fused_pairs(store, task, Split.TRAIN)
            dev, _ = self._fused_pairs(store, task, Split.DEV)
            if dropped:
                logger.warning("fusion_subjects_dropped", task=task.value, subjects=dropped)
            model = train_fusion(train, dev, self.config.fusion, task, expected, dropped)
            model.save(out / task.value)
            self.tracker.record_metric("train_fusion", f"{task.value}_dev_accuracy", model.meta.history.dev_accuracy[-1])

    def _load_unimodal(self):
        base_dir = self.config.base_dir
        speech = {
            t: TrainedModel.load(self.artifact("train_speech", t.value, MODEL_META).parent, base_dir)
            for t in ALL_TASKS
        }
        text = {
            t: TrainedModel.load(self.artifact("train_text", t.value, MODEL_META).parent, base_dir)
            for t in TEXT_TASKS
        }
        return text, speech

    def _load_models(self):
        text, speech = self._load_unimodal()
        fusion = {
            t: FusionModel.load(self.artifact("train_fusion", t.value, MODEL_META).parent)
            for t in TEXT_TASKS
        }
        return text, speech, fusion

    async def predict(self, out: Path):
        cfg = self.config
        store = RepresentationStore(self.stage_dir("export_repr"))
        text_models, speech_models, fusion_models = self._load_models()
        tie_label = RiskLabel.AT_RISK if cfg.decision.tie_label == "at_risk" else RiskLabel.NON_RISK

        for split in self.report_splits():
            subjects = self.manifest().subject_ids(split)
            text_inputs = self.text_inputs(split)
            speech_inputs = self.speech_inputs(split)
            text_reps = {t: store.read_map(cfg.fusion.text_encoder_id, t, split.value) for t in TEXT_TASKS}
            speech_reps = {t: store.read_map(cfg.fusion.speech_encoder_id, t, split.value) for t in TEXT_TASKS}

            all_logits: List[Logits] = []
            sets: List[TaskLogitsSet] = []
            fallbacks = 0
            for subject_id in subjects:
                per_subject: List[Logits] = []
                for task in TEXT_TASKS:
                    t_rep = text_reps[task].get(subject_id)
                    s_rep = speech_reps[task].get(subject_id)
                    if t_rep is not None and s_rep is not None:
                        per_subject.append(fusion_predict(fusion_models[task], fuse(t_rep, s_rep), task))
                    elif subject_id in speech_inputs[task]:
                        lg = predict_logits(speech_models[task], speech_inputs[task][subject_id])
                        per_subject.append(lg.model_copy(update={"fallback": True}))
                    elif subject_id in text_inputs[task]:
                        lg = predict_logits(text_models[task], text_inputs[task][subject_id])
                        per_subject.append(lg.model_copy(update={"fallback": True}))
                if subject_id in speech_inputs[TaskKind.PR]:
                    per_subject.append(fusion_predict(
                        None, speech_inputs[TaskKind.PR][subject_id], TaskKind.PR, speech_models[TaskKind.PR],
                    ))

                if not per_subject:
                    logger.warning("subject_without_logits", subject_id=subject_id, split=split.value)
                    continue
                fallbacks += sum(1 for lg in per_subject if lg.fallback)
                all_logits.extend(per_subject)
                sets.append(TaskLogitsSet.from_logits(subject_id, per_subject))

            predictions = aggregate_dataset(sets, cfg.decision.policy, tie_label)
            write_jsonl(out / f"logits_{split.value}.jsonl", all_logits)
            write_predictions(predictions, out / f"predictions_{split.value}.csv")
            self.tracker.record_metric("predict", f"{split.value}_fallback_logits", fallbacks)

            logger.info(
                "split_predicted",
                split=split.value,
                subjects=len(predictions),
                fallback_logits=fallbacks,
            )

    async def evaluate(self, out: Path):
        labels = self.manifest().labels()
        for split in self.report_splits():
            predictions = read_predictions(self.artifact("predict", f"predictions_{split.value}.csv"))
            logits = read_jsonl(self.artifact("predict", f"logits_{split.value}.jsonl"), Logits, "predict")

            combined = metrics_from_counts(confusion(predictions, labels)) if predictions else None
            per_task: Dict[TaskKind, Optional[MetricsResult]] = {}
            for task in ALL_TASKS:
                pairs = [(lg.subject_id, task_vote(lg.values)) for lg in logits if lg.task == task]
                per_task[task] = metrics_from_counts(confusion_from_pairs(pairs, labels)) if pairs else None

            result = SplitMetrics(
                split=split,
                combined=combined,
                per_task=per_task,
                fallback_logits=sum(1 for lg in logits if lg.fallback),
            )
            write_json(out / f"metrics_{split.value}.json", result.model_dump(mode="json"))
            logger.info(
                "split_evaluated",
                split=split.value,
                accuracy=combined.acc if combined else None,
                f1=combined.f1 if combined else None,
                subjects=combined.n if combined else 0,
            )

    def method_name(self) -> str:
        cfg = self.config
        if cfg.report.method_name:
            return cfg.report.method_name
        name = f"{cfg.text_model.encoder.encoder_id}+{cfg.speech_model.encoder.encoder_id}"
        if cfg.text_model.input_source == "features":
            name = f"{cfg.extraction.provider_id}-{name}"
        return name

    async def report(self, out: Path):
        for split in self.report_splits():
            path = self.artifact("evaluate", f"metrics_{split.value}.json")
            metrics = SplitMetrics.model_validate_json(path.read_text(encoding="utf-8"))
            row = ReportRow.from_results(self.method_name(), metrics.per_task, metrics.combined)
            table = render_report(
                [row],
                title=f"{self.config.experiment_id} ({split.value}): Acc %, F1 %",
                accuracy_format=self.config.report.accuracy_format,
            )
            write_report(table, out, self.config.experiment_id, split.value)

    # ------------------------------------------------------------------

    async def run_stage(self, stage: str) -> str:
        """
        Run one stage unless it is up to date.

        Returns:
            "completed" or "skipped"

        Raises:
            MissingArtifactError: Upstream artifacts absent
            ConfigMismatchError: Experiment outputs belong to another config
        """
        if stage not in STAGES:
            raise ValueError(f"unknown stage {stage!r}")

        self.tracker.check_config(force=self.force)
        structlog.contextvars.bind_contextvars(experiment_id=self.config.experiment_id, stage=stage)
        try:
            started_at = datetime.now(timezone.utc)
            stage_seed = derive_seed(self.config.runtime.seed, stage)
            inputs = self.input_hashes(stage)
            out = self.stage_dir(stage)

            if not self.force and self.tracker.is_up_to_date(stage, inputs, out):
                logger.info("stage_skipped", reason="unchanged")
                await self.tracker.append(stage, stage_seed, inputs, out, started_at, "skipped")
                return "skipped"

            logger.info("stage_started", seed=stage_seed)
            if out.exists():
                shutil.rmtree(out)
            out.mkdir(parents=True)
            if stage != "ingest":
                self.manifest()

            await getattr(self, stage)(out)
            record = await self.tracker.append(stage, stage_seed, inputs, out, started_at, "completed")
            logger.info("stage_completed", duration_s=round(record.duration_s, 3))
            return "completed"
        finally:
            structlog.contextvars.unbind_contextvars("experiment_id", "stage")

    async def run(self, stages: Sequence[str] = STAGES) -> Dict[str, str]:
        """Run stages in order."""
        return {stage: await self.run_stage(stage) for stage in stages}


def validate(config: ExperimentConfig) -> int:
    """Validate the manifest named by a config; prints one line per violation."""
    manifest = parse_manifest(config.resolve_path(config.dataset.manifest_path))
    report = validate_manifest(manifest)
    for v in report.violations:
        print(f"{v.code}: {v.message}")
    print(f"{len(report)} violation(s) in {len(manifest.subjects)} subjects")
    return EXIT_OK if report.ok else EXIT_VALIDATION


def synth(config: ExperimentConfig) -> int:
    if config.synthetic is None:
        raise ConfigError("config has no [synthetic] section")
    manifest = generate_synthetic(config.synthetic, base_dir=config.base_dir)
    print(Path(manifest.root) / "manifest.jsonl")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="python -m src.main",
        description="Suicidal risk assessment pipeline over speech and LLM-extracted text features",
    )
    parser.add_argument(
        "command",
        nargs="?",
        choices=list(STAGES) + ["all", "run", "synth", "validate"],
        help="stage to run, 'all' (alias 'run') for every stage, 'synth' or 'validate'",
    )
    parser.add_argument("--config", required=True, help="experiment config (TOML)")
    parser.add_argument("--stage", choices=list(STAGES) + ["all"], help="stage to run")
    parser.add_argument("--force", action="store_true", help="rerun up-to-date stages and override the config lock")
    parser.add_argument("--log-level", help="override LOG_LEVEL")
    return parser


async def run_command(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    command = args.command or args.stage or "all"
    if args.command and args.stage and args.command != args.stage:
        raise ConfigError(f"conflicting command {args.command!r} and --stage {args.stage!r}")

    if command == "validate":
        return validate(config)
    if command == "synth":
        return synth(config)

    orchestrator = ExperimentOrchestrator(config, force=args.force)
    stages = STAGES if command in ("all", "run") else (command,)
    await orchestrator.run(stages)

    if "report" in stages:
        for split in orchestrator.report_splits():
            path = orchestrator.stage_dir("report") / f"{config.experiment_id}__{split.value}.report.txt"
            print(path.read_text(encoding="utf-8"), end="")
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    """CLI entry point; returns the process exit code."""
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level)

    try:
        return asyncio.run(run_command(args))
    except MissingArtifactError as e:
        logger.error("missing_artifact", path=e.path, stage=e.stage, error=str(e))
        return EXIT_MISSING_ARTIFACT
    except ValidationFailure as e:
        logger.error("validation_failed", error_type=type(e).__name__, error=str(e))
        return EXIT_VALIDATION
    except PipelineError as e:
        logger.error("pipeline_failed", error_type=type(e).__name__, error=str(e))
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
