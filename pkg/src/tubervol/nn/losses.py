"""Training losses: MSE, L1, batch contrastive, and their weighted sum."""

from __future__ import annotations

import numpy as np

from ..errors import ShapeMismatchError
from .tensor import DiffTensor, make_output

CONTRASTIVE_MARGIN = 0.5


def _check_match(pred: DiffTensor, target: np.ndarray, name: str) -> np.ndarray:
    target = np.asarray(target, dtype=pred.values.dtype)
    if pred.shape != target.shape:
        raise ShapeMismatchError(f"{name}: prediction {pred.shape} vs target {target.shape}")
    return target


def mse_loss(pred: DiffTensor, target) -> DiffTensor:
    """Mean over all elements of squared differences."""
    target = _check_match(pred, target, "mse_loss")
    diff = pred.values - target
    out = np.array(np.mean(diff * diff), dtype=pred.values.dtype)

    def backward(grad):
        if pred.requires_grad:
            pred.accumulate_grad(grad * 2.0 * diff / diff.size)

    return make_output(out, (pred,), backward)


def l1_loss(pred: DiffTensor, target) -> DiffTensor:
    """Mean over all elements of absolute differences."""
    target = _check_match(pred, target, "l1_loss")
    diff = pred.values - target
    out = np.array(np.mean(np.abs(diff)), dtype=pred.values.dtype)

    def backward(grad):
        if pred.requires_grad:
            pred.accumulate_grad(grad * np.sign(diff) / diff.size)

    return make_output(out, (pred,), backward)


def contrastive_loss(latents: DiffTensor, ids, margin: float = CONTRASTIVE_MARGIN) -> DiffTensor:
    """Sum over all ordered latent pairs: the Euclidean distance when the
    instance ids match (pulls codes of one object together), and the
    hinge ``max(0, margin - distance)`` when they differ (pushes codes of
    different objects at least ``margin`` apart)."""
    if latents.values.ndim != 2 or len(latents.values) < 2:
        raise ShapeMismatchError(f"contrastive_loss needs a (batch>=2, dim) matrix, got {latents.shape}")
    ids = np.asarray(ids)
    if len(ids) != len(latents.values):
        raise ShapeMismatchError("contrastive_loss: one id per latent required")

    z = latents.values
    diff = z[:, None, :] - z[None, :, :]
    dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    same = ids[:, None] == ids[None, :]
    attract = np.where(same, dist, 0.0)
    repel = np.where(~same, np.maximum(0.0, margin - dist), 0.0)
    out = np.array(attract.sum() + repel.sum(), dtype=z.dtype)

    def backward(grad):
        if not latents.requires_grad:
            return
        # d(loss)/d(dist): +1 for same-id pairs, -1 for different ids
        # strictly inside the margin; symmetric in (i, j)
        w = np.where(same, 1.0, 0.0) - np.where(~same & (dist < margin), 1.0, 0.0)
        safe = np.where(dist > 0, dist, 1.0)
        unit = diff / safe[:, :, None]
        w = np.where(dist > 0, w, 0.0)
        latents.accumulate_grad(grad * 2.0 * np.einsum("ij,ijk->ik", w, unit).astype(z.dtype))

    return make_output(out, (latents,), backward)


def combined_loss(l_mse, l_c, w_mse: float = 1.0, w_c: float = 0.05):
    """Weighted sum ``w_mse * l_mse + w_c * l_c``; accepts floats or
    DiffTensors (and keeps the tape when given tensors)."""
    if isinstance(l_mse, DiffTensor) or isinstance(l_c, DiffTensor):
        from .ops import add, scale

        a = l_mse if isinstance(l_mse, DiffTensor) else DiffTensor(np.asarray(l_mse))
        b = l_c if isinstance(l_c, DiffTensor) else DiffTensor(np.asarray(l_c, dtype=a.dtype))
        return add(scale(a, w_mse), scale(b, w_c))
    return w_mse * l_mse + w_c * l_c
