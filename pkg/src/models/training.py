"""
Fine-tuning loop, trained model artifacts, prediction and representation export.

Training uses Adam with a cosine learning-rate schedule over the total number
of optimizer steps, mean cross-entropy, and final-epoch parameters. Rows are
ordered by subject id before the seeded shuffle so the result does not depend
on the order the caller passes them in.
"""
import math
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple, Union

import structlog
import torch
import torch.nn.functional as F
from pydantic import BaseModel
from torch import nn
from torch.optim.lr_scheduler import LambdaLR

from src.domain.models import (
    FailureRecord,
    Logits,
    Modality,
    Representation,
    RiskLabel,
    TaskKind,
)
from src.errors import MissingArtifactError, ModalityError, TrainingError
from src.models.encoders import Encoder, build_encoder
from src.models.head import MLPHead, build_head
from src.models.types import (
    ClassifierHeadConfig,
    EncoderInput,
    Hyperparams,
    TrainedModelMeta,
    TrainingHistory,
)
from src.storage.representations import RepresentationStore

logger = structlog.get_logger()

MODEL_WEIGHTS = "model.pt"
MODEL_META = "model.json"

LabeledInput = Tuple[EncoderInput, RiskLabel]


def cosine_lr(step: int, total_steps: int, base_lr: float) -> float:
    """
    Cosine-annealed learning rate from base_lr at step 0 to 0 at total_steps.

    Raises:
        ValueError: total_steps < 1 or step outside [0, total_steps]
    """
    if total_steps < 1:
        raise ValueError(f"total_steps must be >= 1, got {total_steps}")
    if not 0 <= step <= total_steps:
        raise ValueError(f"step {step} outside [0, {total_steps}]")
    if step == total_steps:
        return 0.0
    return base_lr * 0.5 * (1.0 + math.cos(math.pi * step / total_steps))


def seed_everything(seed: int) -> torch.Generator:
    """Seed torch's global RNG (init, dropout) and return a shuffling generator."""
    torch.manual_seed(seed)
    return torch.Generator().manual_seed(seed)


def check_labels(labels: Sequence[RiskLabel], what: str):
    if not labels:
        raise TrainingError(f"{what}: empty training set")
    if len(set(int(l) for l in labels)) < 2:
        raise TrainingError(f"{what}: training set has a single class ({RiskLabel(labels[0]).name})")


def fit(
    head: nn.Module,
    batch_inputs: Callable[[List[int]], torch.Tensor],
    labels: torch.Tensor,
    epochs: int,
    learning_rate: float,
    batch_size: int,
    generator: torch.Generator,
    extra_parameters: Sequence[nn.Parameter] = (),
    set_train_mode: Optional[Callable[[bool], None]] = None,
    dev_accuracy: Optional[Callable[[], float]] = None,
    name: str = "model",
) -> TrainingHistory:
    """
    Mini-batch training with Adam and a per-step cosine schedule.

    Args:
        head: Module producing two-class logits
        batch_inputs: Row indices -> input tensor for the head
        labels: Class indices, one per row
        epochs: Full passes over the rows
        learning_rate: Base learning rate
        batch_size: Rows per optimizer step
        generator: Seeded generator for the per-epoch shuffle
        extra_parameters: Further trainable parameters (fine-tuned encoder)
        set_train_mode: Called with True before and False after every epoch
        dev_accuracy: Evaluates the current model, called after every epoch
        name: Model name used in logs

    Returns:
        TrainingHistory with one entry per epoch

    Raises:
        TrainingError: Non-finite loss
    """
    n = int(labels.shape[0])
    steps_per_epoch = math.ceil(n / batch_size)
    total_steps = epochs * steps_per_epoch

    optimizer = torch.optim.Adam(list(head.parameters()) + list(extra_parameters), lr=learning_rate)
    scheduler = LambdaLR(optimizer, lambda step: cosine_lr(step, total_steps, 1.0))
    history = TrainingHistory()

    for epoch in range(epochs):
        head.train()
        if set_train_mode:
            set_train_mode(True)

        order = torch.randperm(n, generator=generator).tolist()
        loss_sum = 0.0
        for start in range(0, n, batch_size):
            rows = order[start:start + batch_size]
            logits = head(batch_inputs(rows))
            loss = F.cross_entropy(logits, labels[rows])
            if not torch.isfinite(loss):
                raise TrainingError(
                    f"{name}: non-finite loss {loss.item()} at epoch {epoch + 1}, "
                    f"step {scheduler.last_epoch}, lr {scheduler.get_last_lr()[0]:.3g}"
                )
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            scheduler.step()
            loss_sum += loss.item() * len(rows)

        head.eval()
        if set_train_mode:
            set_train_mode(False)
        epoch_loss = loss_sum / n
        acc = dev_accuracy() if dev_accuracy else None
        history.append(epoch_loss, acc)

        logger.info(
            "epoch_completed",
            model=name,
            epoch=epoch + 1,
            epochs=epochs,
            train_loss=round(epoch_loss, 6),
            dev_accuracy=acc,
        )

    return history


class TrainedModel:
    """Encoder plus classification head for one task and modality."""

    def __init__(self, meta: TrainedModelMeta, head: MLPHead, encoder: Encoder):
        self.meta = meta
        self.head = head
        self.encoder = encoder

    @property
    def model_id(self) -> str:
        return self.meta.model_id

    @property
    def task(self) -> TaskKind:
        return self.meta.task

    @property
    def modality(self) -> Modality:
        return self.encoder.modality

    def eval(self):
        self.head.eval()
        self.encoder.eval()

    def save(self, directory: Union[str, Path]) -> Path:
        """Write model.pt (parameters) and model.json (metadata)."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        state = {"head": self.head.state_dict()}
        module = self.encoder.module()
        if self.meta.encoder_fine_tuned and module is not None:
            state["encoder"] = module.state_dict()
        torch.save(state, directory / MODEL_WEIGHTS)
        (directory / MODEL_META).write_text(self.meta.model_dump_json(indent=2), encoding="utf-8")
        return directory

    @classmethod
    def load(cls, directory: Union[str, Path], base_dir: Union[str, Path] = ".") -> "TrainedModel":
        """
        Rebuild a saved model.

        Raises:
            MissingArtifactError: model.json or model.pt absent
        """
        directory = Path(directory)
        for fname in (MODEL_META, MODEL_WEIGHTS):
            if not (directory / fname).exists():
                raise MissingArtifactError(str(directory / fname))

        meta = TrainedModelMeta.model_validate_json((directory / MODEL_META).read_text(encoding="utf-8"))
        encoder = build_encoder(meta.encoder, base_dir, meta.descriptor.modality)
        head = build_head(meta.head)
        state = torch.load(directory / MODEL_WEIGHTS, map_location="cpu", weights_only=True)
        head.load_state_dict(state["head"])
        if "encoder" in state:
            encoder.module().load_state_dict(state["encoder"])

        model = cls(meta, head, encoder)
        model.eval()
        return model


def _check_inputs(encoder: Encoder, task: TaskKind, items: Sequence[EncoderInput]):
    if encoder.modality == Modality.TEXT and task == TaskKind.PR:
        raise ModalityError("no text model is trained for PR: its text is identical for every subject")
    encoder.check_modality(items)
    for item in items:
        if item.task != task:
            raise ModalityError(f"{item.subject_id}: {item.task.value} input in a {task.value} set")


def _predict_labels(head: MLPHead, x: torch.Tensor) -> List[int]:
    with torch.no_grad():
        return head(x).argmax(dim=1).tolist()


def train_classifier(
    train: Sequence[LabeledInput],
    dev: Sequence[LabeledInput],
    encoder: Encoder,
    head_config: ClassifierHeadConfig,
    hyperparams: Hyperparams,
    task: TaskKind,
    model_id: Optional[str] = None,
) -> TrainedModel:
    """
    Fine-tune a classification head, and the encoder when it is trainable.

    Args:
        train: (input, label) pairs
        dev: (input, label) pairs evaluated after every epoch (may be empty)
        encoder: Encoder plugin
        head_config: Head architecture; input_dim must equal the encoder's repr_dim
        hyperparams: Epochs, learning rate, batch size, seed
        task: Task the model is for
        model_id: Defaults to <task>-<modality>-<encoder_id>

    Returns:
        TrainedModel in eval mode

    Raises:
        ModalityError: Text model for PR, or inputs of another modality/task
        TrainingError: Empty or single-class training set, non-finite loss
    """
    _check_inputs(encoder, task, [x for x, _ in train] + [x for x, _ in dev])
    check_labels([y for _, y in train], f"{task.value}/{encoder.encoder_id}")
    if head_config.input_dim != encoder.repr_dim:
        raise TrainingError(
            f"head input_dim {head_config.input_dim} != encoder repr_dim {encoder.repr_dim}"
        )

    model_id = model_id or f"{task.value}-{encoder.modality.value}-{encoder.encoder_id}"
    train = sorted(train, key=lambda pair: pair[0].subject_id)
    inputs = [x for x, _ in train]
    labels = torch.tensor([int(y) for _, y in train], dtype=torch.long)

    generator = seed_everything(hyperparams.seed)
    head = build_head(head_config)
    encoder_params = encoder.trainable_parameters()

    if encoder_params:
        def batch_inputs(rows: List[int]) -> torch.Tensor:
            return encoder.encode_batch([inputs[i] for i in rows])
    else:
        # frozen or parameter-free encoder: encode once
        encoder.eval()
        with torch.no_grad():
            features = encoder.encode_batch(inputs)

        def batch_inputs(rows: List[int]) -> torch.Tensor:
            return features[rows]

    dev_accuracy = None
    if dev:
        dev_inputs = [x for x, _ in dev]
        dev_labels = [int(y) for _, y in dev]

        def dev_accuracy() -> float:
            encoder.eval()
            with torch.no_grad():
                predicted = _predict_labels(head, encoder.encode_batch(dev_inputs))
            return sum(int(p == y) for p, y in zip(predicted, dev_labels)) / len(dev_labels)

    logger.info(
        "training_started",
        model=model_id,
        train=len(train),
        dev=len(dev),
        epochs=hyperparams.epochs,
        learning_rate=hyperparams.learning_rate,
        batch_size=hyperparams.batch_size,
        seed=hyperparams.seed,
        encoder_fine_tuned=bool(encoder_params),
    )

    history = fit(
        head,
        batch_inputs,
        labels,
        epochs=hyperparams.epochs,
        learning_rate=hyperparams.learning_rate,
        batch_size=hyperparams.batch_size,
        generator=generator,
        extra_parameters=encoder_params,
        set_train_mode=encoder.train if encoder_params else None,
        dev_accuracy=dev_accuracy,
        name=model_id,
    )

    meta = TrainedModelMeta(
        model_id=model_id,
        task=task,
        encoder=encoder.settings,
        descriptor=encoder.descriptor,
        head=head_config,
        hyperparams=hyperparams,
        history=history,
        encoder_fine_tuned=bool(encoder_params),
    )
    model = TrainedModel(meta, head, encoder)
    model.eval()
    return model


def predict_batch(model: TrainedModel, items: Sequence[EncoderInput]) -> List[Logits]:
    """
    Eval-mode logits for several inputs of the model's task.

    Raises:
        ModalityError: Input modality or task differs from the model's
    """
    _check_inputs(model.encoder, model.task, items)
    if not items:
        return []
    model.eval()
    with torch.no_grad():
        out = model.head(model.encoder.encode_batch(items))
    return [
        Logits(
            subject_id=item.subject_id,
            task=item.task,
            source_id=model.model_id,
            values=(float(row[0]), float(row[1])),
        )
        for item, row in zip(items, out.tolist())
    ]


def predict_logits(model: TrainedModel, item: EncoderInput) -> Logits:
    return predict_batch(model, [item])[0]


class ExportResult(BaseModel):
    representations: List[Representation] = []
    missing: List[FailureRecord] = []


def export_representations(
    source: Union[TrainedModel, Encoder],
    items: Sequence[EncoderInput],
    task: TaskKind,
    split: str,
    store: Optional[RepresentationStore] = None,
    store_id: Optional[str] = None,
) -> ExportResult:
    """
    Encode items with a frozen encoder and persist them.

    Items that cannot be encoded (unreadable audio, for instance) are listed in
    the result, not raised.

    Args:
        source: Trained model (its possibly fine-tuned encoder) or an encoder
        items: Inputs of one task
        task: Task of the inputs
        split: Split name used as the store key
        store: Representation store; nothing is written when None
        store_id: Key to store under; defaults to the model or encoder id

    Returns:
        ExportResult
    """
    if isinstance(source, TrainedModel):
        encoder, default_id = source.encoder, source.model_id
    else:
        encoder, default_id = source, source.encoder_id
    store_id = store_id or default_id
    _check_inputs(encoder, task, items)

    result = ExportResult()
    encoder.eval()
    for item in sorted(items, key=lambda i: i.subject_id):
        try:
            with torch.no_grad():
                vector = encoder.encode_batch([item])[0]
        except OSError as e:
            logger.warning("representation_export_failed", subject_id=item.subject_id,
                           task=task.value, error=str(e))
            result.missing.append(FailureRecord(
                subject_id=item.subject_id,
                task=task,
                stage="export_repr",
                error_type=type(e).__name__,
                message=str(e),
            ))
            continue
        result.representations.append(Representation(
            subject_id=item.subject_id,
            task=task,
            encoder_id=store_id,
            vector=vector.cpu().numpy(),
        ))

    if store is not None:
        store.write(store_id, task, split, result.representations)

    logger.info(
        "representations_exported",
        encoder_id=store_id,
        task=task.value,
        split=split,
        exported=len(result.representations),
        missing=len(result.missing),
    )
    return result

