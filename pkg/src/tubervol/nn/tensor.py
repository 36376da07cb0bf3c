"""Dense tensors with gradient buffers and a fixed-op backward tape.

This is deliberately not a general autodiff engine: only the layer set in
:mod:`tubervol.nn.ops` builds graph nodes, and every backward rule is
written out by hand. The tape exists so models can compose those ops
freely and still get exact gradients with one ``backward()`` call.
"""

from __future__ import annotations

import contextlib
import ctypes

import numpy as np

from ..errors import NonFiniteError

_CHECK_FINITE = False
_TAPE_ENABLED = True


def debug_checks(enabled: bool) -> None:
    """Toggle NaN/Inf detection after every op (hard error when tripped)."""
    global _CHECK_FINITE
    _CHECK_FINITE = enabled


def finite_checks_enabled() -> bool:
    return _CHECK_FINITE


@contextlib.contextmanager
def no_grad():
    """Run ops without recording backward closures (inference path)."""
    global _TAPE_ENABLED
    prev = _TAPE_ENABLED
    _TAPE_ENABLED = False
    try:
        yield
    finally:
        _TAPE_ENABLED = prev


def tune_allocator() -> bool:
    """Keep large numpy buffers on the heap across training steps.

    glibc hands buffers above the mmap threshold straight back to the OS
    on free, so every conv layer re-faults hundreds of MB per step. Raising
    the threshold roughly halves the step time. No-op off glibc.
    """
    try:
        libc = ctypes.CDLL("libc.so.6")
        libc.mallopt(-3, 1 << 30)  # M_MMAP_THRESHOLD
        libc.mallopt(-4, 0)  # M_MMAP_MAX
        return True
    except OSError:
        return False


class DiffTensor:
    """A value array plus an optional gradient buffer of the same shape."""

    __slots__ = ("values", "grad", "requires_grad", "_parents", "_backward_fn")

    def __init__(self, values, requires_grad: bool = False, _parents=(), _backward_fn=None):
        self.values = np.asarray(values)
        self.grad = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in _parents)
        self._parents = _parents
        self._backward_fn = _backward_fn
        if _CHECK_FINITE and not np.isfinite(self.values).all():
            raise NonFiniteError("non-finite values in tensor")

    @property
    def shape(self):
        return self.values.shape

    @property
    def dtype(self):
        return self.values.dtype

    def item(self) -> float:
        return float(self.values)

    def detach(self) -> "DiffTensor":
        return DiffTensor(self.values)

    def accumulate_grad(self, grad: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.values)
        self.grad += grad

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self, seed=None) -> None:
        """Accumulate gradients of this (scalar unless seeded) output into
        every reachable tensor with ``requires_grad``."""
        if seed is None:
            if self.values.size != 1:
                raise ValueError("backward() without a seed needs a scalar output")
            seed = np.ones_like(self.values)
        order: list[DiffTensor] = []
        seen: set[int] = set()
        stack: list[tuple[DiffTensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if parent.requires_grad and id(parent) not in seen:
                    stack.append((parent, False))
        self.accumulate_grad(np.asarray(seed, dtype=self.values.dtype))
        for node in reversed(order):
            if node._backward_fn is not None and node.grad is not None:
                node._backward_fn(node.grad)

    def __repr__(self) -> str:
        return f"DiffTensor(shape={self.values.shape}, dtype={self.values.dtype})"


def as_tensor(x, dtype=None) -> DiffTensor:
    if isinstance(x, DiffTensor):
        return x
    arr = np.asarray(x, dtype=dtype)
    return DiffTensor(arr)


def make_output(values, parents, backward_fn) -> DiffTensor:
    """Build an op output; drops the tape when no parent needs gradients
    or when running under ``no_grad``."""
    if _TAPE_ENABLED and any(p.requires_grad for p in parents):
        return DiffTensor(values, _parents=tuple(parents), _backward_fn=backward_fn)
    return DiffTensor(values)
