"""Finite-difference gradient verification for the op set."""

from __future__ import annotations

import numpy as np

from .tensor import DiffTensor


def grad_check(op, inputs, eps: float = 1e-5, seed: int = 0) -> float:
    """Compare analytic gradients of ``op`` against central differences.

    ``op`` takes the tensors in ``inputs`` (those marked requires_grad are
    checked) and returns a DiffTensor. Non-scalar outputs are reduced with
    a fixed random projection so one backward pass covers every output
    element. Use 64-bit inputs; returns the max relative error, with the
    denominator floored at 1 so near-zero gradients compare absolutely.
    """
    rng = np.random.default_rng(seed)
    out = op(*inputs)
    projection = rng.normal(size=out.values.shape)

    for t in inputs:
        if isinstance(t, DiffTensor):
            t.zero_grad()
    out = op(*inputs)
    out.backward(projection)

    worst = 0.0
    for t in inputs:
        if not (isinstance(t, DiffTensor) and t.requires_grad):
            continue
        analytic = t.grad if t.grad is not None else np.zeros_like(t.values)
        numeric = np.zeros_like(t.values)
        flat = t.values.ravel()
        num_flat = numeric.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            hi = float((op(*inputs).values * projection).sum())
            flat[i] = orig - eps
            lo = float((op(*inputs).values * projection).sum())
            flat[i] = orig
            num_flat[i] = (hi - lo) / (2.0 * eps)
        err = np.abs(analytic - numeric)
        denom = np.maximum(1.0, np.maximum(np.abs(analytic), np.abs(numeric)))
        worst = max(worst, float((err / denom).max()))
    return worst
