"""
Classification heads and gradient checking.

Both the per-task classifier and the fusion layer are one hidden layer with
ReLU and dropout followed by a two-way linear classifier; they differ only in
width (512 vs 256).
"""
import copy
from typing import Dict, List, Optional, Union

import numpy as np
import torch
import torch.nn.functional as F
from pydantic import BaseModel
from torch import nn

from src.errors import DimensionError
from src.models.types import ClassifierHeadConfig

ArrayLike = Union[np.ndarray, torch.Tensor, List[float]]


class MLPHead(nn.Module):
    """Linear -> ReLU -> Dropout -> Linear. nn.Dropout scales by 1/(1-p) at train time."""

    def __init__(self, input_dim: int, hidden_dim: int, num_classes: int = 2, dropout: float = 0.1):
        super().__init__()
        self.input_dim = input_dim
        self.hidden_dim = hidden_dim
        self.hidden = nn.Linear(input_dim, hidden_dim)
        self.activation = nn.ReLU()
        self.dropout = nn.Dropout(dropout)
        self.classifier = nn.Linear(hidden_dim, num_classes)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.classifier(self.dropout(self.activation(self.hidden(x))))


def build_head(config: ClassifierHeadConfig) -> MLPHead:
    return MLPHead(config.input_dim, config.hidden_dim, config.num_classes, config.dropout)


def count_parameters(module: nn.Module) -> int:
    return sum(p.numel() for p in module.parameters())


def zero_parameters(module: nn.Module) -> nn.Module:
    with torch.no_grad():
        for p in module.parameters():
            p.zero_()
    return module


def head_forward(head: MLPHead, x: ArrayLike, train_mode: bool = False) -> np.ndarray:
    """
    Run the head on one vector or a batch of row vectors.

    Dropout is active only with train_mode=True; the head's own mode is
    restored afterwards.

    Args:
        head: Head to evaluate
        x: Shape (input_dim,) or (n, input_dim)
        train_mode: Apply dropout

    Returns:
        Logits of shape (2,) or (n, 2)

    Raises:
        DimensionError: Last axis differs from the head's input_dim
    """
    param = next(head.parameters())
    tensor = torch.as_tensor(np.asarray(x) if not isinstance(x, torch.Tensor) else x)
    tensor = tensor.to(dtype=param.dtype)
    if tensor.ndim not in (1, 2) or tensor.shape[-1] != head.input_dim:
        raise DimensionError(f"head expects input_dim {head.input_dim}, got shape {tuple(tensor.shape)}")

    was_training = head.training
    head.train(train_mode)
    try:
        with torch.no_grad():
            out = head(tensor)
    finally:
        head.train(was_training)
    return out.detach().cpu().numpy()


class GradientCheckResult(BaseModel):
    """Analytic vs numeric gradient agreement per parameter tensor."""
    relative_errors: Dict[str, float]
    checked: int
    skipped: int

    @property
    def max_relative_error(self) -> float:
        return max(self.relative_errors.values(), default=0.0)

    def ok(self, tolerance: float = 1e-4) -> bool:
        return self.max_relative_error <= tolerance


def gradient_check(
    module: nn.Module,
    x: ArrayLike,
    y: ArrayLike,
    eps: float = 1e-3,
    sample: Optional[int] = None,
    seed: int = 0,
) -> GradientCheckResult:
    """
    Compare autograd gradients of the mean cross-entropy with central
    differences, in float64 and eval mode (dropout off).

    Elements whose +-eps perturbation changes any ReLU activation pattern sit on
    a kink and are skipped. The error of a tensor is
    ||analytic - numeric|| / max(||analytic||, ||numeric||, 1e-12) over the
    checked elements.

    Args:
        module: Head to check; it is copied, not modified
        x: Inputs, shape (n, input_dim)
        y: Integer class labels, shape (n,)
        eps: Finite-difference step
        sample: Check at most this many random elements per tensor
        seed: Seed for element sampling

    Returns:
        GradientCheckResult
    """
    model = copy.deepcopy(module).double().eval()
    inputs = torch.as_tensor(np.asarray(x, dtype=np.float64) if not isinstance(x, torch.Tensor) else x).double()
    targets = torch.as_tensor(np.asarray(y) if not isinstance(y, torch.Tensor) else y).long()

    masks: List[torch.Tensor] = []

    def record_mask(_module, args, _output):
        masks.append(args[0] > 0)

    hooks = [m.register_forward_hook(record_mask) for m in model.modules() if isinstance(m, nn.ReLU)]

    def loss_and_pattern():
        masks.clear()
        with torch.no_grad():
            loss = F.cross_entropy(model(inputs), targets).item()
        return loss, [m.clone() for m in masks]

    try:
        model.zero_grad()
        F.cross_entropy(model(inputs), targets).backward()
        _, base_pattern = loss_and_pattern()

        rng = np.random.default_rng(seed)
        errors: Dict[str, float] = {}
        checked = skipped = 0
        for name, param in model.named_parameters():
            analytic_all = param.grad.detach().reshape(-1)
            flat = param.data.view(-1)
            indices = np.arange(flat.numel())
            if sample is not None and sample < flat.numel():
                indices = np.sort(rng.choice(flat.numel(), size=sample, replace=False))

            analytic, numeric = [], []
            for i in map(int, indices):
                original = flat[i].item()
                flat[i] = original + eps
                plus, plus_pattern = loss_and_pattern()
                flat[i] = original - eps
                minus, minus_pattern = loss_and_pattern()
                flat[i] = original

                if not (_same(base_pattern, plus_pattern) and _same(base_pattern, minus_pattern)):
                    skipped += 1
                    continue
                analytic.append(analytic_all[i].item())
                numeric.append((plus - minus) / (2 * eps))
                checked += 1

            a = np.asarray(analytic)
            n = np.asarray(numeric)
            scale = max(np.linalg.norm(a), np.linalg.norm(n), 1e-12)
            errors[name] = float(np.linalg.norm(a - n) / scale) if a.size else 0.0
    finally:
        for hook in hooks:
            hook.remove()

    return GradientCheckResult(relative_errors=errors, checked=checked, skipped=skipped)


def _same(a: List[torch.Tensor], b: List[torch.Tensor]) -> bool:
    return len(a) == len(b) and all(torch.equal(p, q) for p, q in zip(a, b))
