"""
Late fusion of frozen text and speech representations.

ER and ED predictions come from a 256-unit fusion head over [text ; speech];
PR has no informative text and is predicted by the speech model alone.
"""
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import structlog
import torch

from src.domain.models import Logits, Representation, RiskLabel, TaskKind
from src.errors import AlignmentError, DimensionError, MissingArtifactError, ModalityError
from src.models.head import MLPHead
from src.models.training import (
    MODEL_META,
    MODEL_WEIGHTS,
    TrainedModel,
    check_labels,
    fit,
    predict_logits,
    seed_everything,
)
from src.models.types import EncoderInput, FusedInput, FusionConfig, FusionModelMeta

logger = structlog.get_logger()

LabeledFused = Tuple[FusedInput, RiskLabel]


def fuse(text_repr: Representation, speech_repr: Representation) -> FusedInput:
    """
    Concatenate text and speech vectors, text first, without normalization.

    Raises:
        AlignmentError: Representations of different subjects or tasks
    """
    if text_repr.subject_id != speech_repr.subject_id or text_repr.task != speech_repr.task:
        raise AlignmentError(
            f"cannot fuse {text_repr.subject_id}/{text_repr.task.value} with "
            f"{speech_repr.subject_id}/{speech_repr.task.value}"
        )
    return FusedInput(
        subject_id=text_repr.subject_id,
        task=text_repr.task,
        vector=np.concatenate([text_repr.vector, speech_repr.vector]),
        text_dim=text_repr.dim,
    )


class FusionModel:
    """Fusion head for one task."""

    def __init__(self, meta: FusionModelMeta, head: MLPHead):
        self.meta = meta
        self.head = head

    @property
    def model_id(self) -> str:
        return self.meta.model_id

    @property
    def input_dim(self) -> int:
        return self.meta.text_dim + self.meta.speech_dim

    def save(self, directory: Union[str, Path]) -> Path:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        torch.save({"head": self.head.state_dict()}, directory / MODEL_WEIGHTS)
        (directory / MODEL_META).write_text(self.meta.model_dump_json(indent=2), encoding="utf-8")
        return directory

    @classmethod
    def load(cls, directory: Union[str, Path]) -> "FusionModel":
        directory = Path(directory)
        for fname in (MODEL_META, MODEL_WEIGHTS):
            if not (directory / fname).exists():
                raise MissingArtifactError(str(directory / fname), stage="train_fusion")

        meta = FusionModelMeta.model_validate_json((directory / MODEL_META).read_text(encoding="utf-8"))
        head = build_fusion_head(meta.text_dim + meta.speech_dim, meta.config)
        state = torch.load(directory / MODEL_WEIGHTS, map_location="cpu", weights_only=True)
        head.load_state_dict(state["head"])
        head.eval()
        return cls(meta, head)


def build_fusion_head(input_dim: int, config: FusionConfig) -> MLPHead:
    return MLPHead(input_dim, config.hidden_dim, 2, config.dropout)


def _dims(items: Sequence[FusedInput]) -> Tuple[int, int]:
    dims = {(x.text_dim, x.speech_dim) for x in items}
    if len(dims) != 1:
        raise DimensionError(f"fused inputs have mixed (text, speech) dims {sorted(dims)}")
    return dims.pop()


def train_fusion(
    train: Sequence[LabeledFused],
    dev: Sequence[LabeledFused],
    config: FusionConfig,
    task: TaskKind,
    expected_dims: Optional[Tuple[int, int]] = None,
    dropped_subjects: Sequence[str] = (),
    model_id: Optional[str] = None,
) -> FusionModel:
    """
    Train the fusion head on precomputed, frozen representations.

    Args:
        train: (fused input, label) pairs
        dev: (fused input, label) pairs evaluated per epoch (may be empty)
        config: Fusion hyperparameters
        task: ER or ED
        expected_dims: (text_dim, speech_dim) of the configured encoders
        dropped_subjects: Subjects left out for a missing modality, recorded in metadata
        model_id: Defaults to <task>-fusion-<text>+<speech>

    Returns:
        FusionModel in eval mode

    Raises:
        ModalityError: task is PR
        DimensionError: Input dims differ from each other or from expected_dims
        TrainingError: Empty or single-class training set, non-finite loss
    """
    if task == TaskKind.PR:
        raise ModalityError("PR is predicted by the speech model alone; no fusion model is trained")
    check_labels([y for _, y in train], f"{task.value}/fusion")

    text_dim, speech_dim = _dims([x for x, _ in train] + [x for x, _ in dev])
    if expected_dims is not None and (text_dim, speech_dim) != tuple(expected_dims):
        raise DimensionError(
            f"fused dims ({text_dim}, {speech_dim}) do not match encoders {tuple(expected_dims)}"
        )
    for x, _ in list(train) + list(dev):
        if x.task != task:
            raise AlignmentError(f"{x.subject_id}: {x.task.value} input in a {task.value} set")

    model_id = model_id or f"{task.value}-fusion-{config.text_encoder_id}+{config.speech_encoder_id}"
    train = sorted(train, key=lambda pair: pair[0].subject_id)
    features = torch.from_numpy(np.stack([x.vector for x, _ in train]))
    labels = torch.tensor([int(y) for _, y in train], dtype=torch.long)

    generator = seed_everything(config.seed)
    head = build_fusion_head(text_dim + speech_dim, config)

    dev_accuracy = None
    if dev:
        dev_x = torch.from_numpy(np.stack([x.vector for x, _ in dev]))
        dev_y = [int(y) for _, y in dev]

        def dev_accuracy() -> float:
            with torch.no_grad():
                predicted = head(dev_x).argmax(dim=1).tolist()
            return sum(int(p == y) for p, y in zip(predicted, dev_y)) / len(dev_y)

    logger.info(
        "fusion_training_started",
        model=model_id,
        train=len(train),
        dev=len(dev),
        text_dim=text_dim,
        speech_dim=speech_dim,
        normalization="none",
        dropped_subjects=len(dropped_subjects),
    )

    history = fit(
        head,
        lambda rows: features[rows],
        labels,
        epochs=config.epochs,
        learning_rate=config.learning_rate,
        batch_size=config.batch_size,
        generator=generator,
        dev_accuracy=dev_accuracy,
        name=model_id,
    )

    meta = FusionModelMeta(
        model_id=model_id,
        task=task,
        config=config,
        text_dim=text_dim,
        speech_dim=speech_dim,
        history=history,
        dropped_subjects=sorted(dropped_subjects),
    )
    head.eval()
    return FusionModel(meta, head)


def fusion_predict(
    model: Optional[FusionModel],
    item: Union[FusedInput, EncoderInput],
    task: TaskKind,
    speech_model: Optional[TrainedModel] = None,
) -> Logits:
    """
    Eval-mode logits for one subject and task.

    ER/ED take a FusedInput and use the fusion model. PR takes the speech
    EncoderInput and delegates to the speech model, so the logits carry the
    speech model's id.

    Raises:
        ModalityError: Fused input for PR, or a non-fused input for ER/ED
        DimensionError: Fused input does not match the model
    """
    if task == TaskKind.PR:
        if isinstance(item, FusedInput):
            raise ModalityError("PR is predicted from speech only; fused input rejected")
        if speech_model is None:
            raise ModalityError("PR prediction needs the speech model")
        return predict_logits(speech_model, item)

    if not isinstance(item, FusedInput):
        raise ModalityError(f"{task.value} fusion prediction needs a fused input")
    if item.task != task:
        raise AlignmentError(f"{item.subject_id}: {item.task.value} input for {task.value}")
    if model is None:
        raise ModalityError(f"no fusion model for {task.value}")
    if (item.text_dim, item.speech_dim) != (model.meta.text_dim, model.meta.speech_dim):
        raise DimensionError(
            f"fused input dims ({item.text_dim}, {item.speech_dim}) != model "
            f"({model.meta.text_dim}, {model.meta.speech_dim})"
        )

    model.head.eval()
    with torch.no_grad():
        values = model.head(torch.from_numpy(item.vector).unsqueeze(0))[0].tolist()
    return Logits(
        subject_id=item.subject_id,
        task=task,
        source_id=model.model_id,
        values=(float(values[0]), float(values[1])),
    )


def fusion_predict_batch(model: FusionModel, items: Sequence[FusedInput]) -> List[Logits]:
    return [fusion_predict(model, item, item.task) for item in items]
