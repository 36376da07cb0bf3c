"""Named parameter sets, the Adam update, and learning-rate schedules."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ShapeMismatchError, TubervolError
from .tensor import DiffTensor

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


class MissingGradientError(TubervolError):
    pass


@dataclass
class Parameter:
    tensor: DiffTensor
    m: np.ndarray = None
    v: np.ndarray = None
    step: int = 0

    def __post_init__(self):
        if self.m is None:
            self.m = np.zeros_like(self.tensor.values)
        if self.v is None:
            self.v = np.zeros_like(self.tensor.values)
        if self.m.shape != self.tensor.values.shape or self.v.shape != self.tensor.values.shape:
            raise ShapeMismatchError("optimizer state does not match parameter shape")


class ParameterSet:
    """Uniquely named parameters with per-parameter Adam moment buffers."""

    def __init__(self):
        self._params: dict[str, Parameter] = {}

    def add(self, name: str, values: np.ndarray) -> DiffTensor:
        if name in self._params:
            raise ValueError(f"duplicate parameter name {name!r}")
        tensor = DiffTensor(np.array(values), requires_grad=True)
        self._params[name] = Parameter(tensor)
        return tensor

    def adopt(self, name: str, parameter: Parameter) -> None:
        """Share an existing Parameter (same tensor and optimizer state),
        e.g. to drive several parameter groups with one optimizer."""
        if name in self._params:
            raise ValueError(f"duplicate parameter name {name!r}")
        self._params[name] = parameter

    def __getitem__(self, name: str) -> DiffTensor:
        return self._params[name].tensor

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __iter__(self):
        return iter(self._params.items())

    def __len__(self) -> int:
        return len(self._params)

    def names(self):
        return list(self._params)

    def state(self, name: str) -> Parameter:
        return self._params[name]

    def n_values(self) -> int:
        return sum(p.tensor.values.size for p in self._params.values())

    def zero_grads(self) -> None:
        for p in self._params.values():
            p.tensor.zero_grad()

    def astype(self, dtype) -> "ParameterSet":
        out = ParameterSet()
        for name, p in self._params.items():
            t = out.add(name, p.tensor.values.astype(dtype))
            state = out.state(name)
            state.m = p.m.astype(dtype)
            state.v = p.v.astype(dtype)
            state.step = p.step
        return out

    def copy(self) -> "ParameterSet":
        out = ParameterSet()
        for name, p in self._params.items():
            out.add(name, p.tensor.values.copy())
            state = out.state(name)
            state.m = p.m.copy()
            state.v = p.v.copy()
            state.step = p.step
        return out

    def load_values(self, other: "ParameterSet") -> None:
        """Copy values/moments in from a set with identical names/shapes."""
        for name, p in self._params.items():
            src = other.state(name)
            if src.tensor.values.shape != p.tensor.values.shape:
                raise ShapeMismatchError(f"parameter {name!r}: {src.tensor.values.shape} vs {p.tensor.values.shape}")
            p.tensor.values = src.tensor.values.astype(p.tensor.values.dtype).copy()
            p.m = src.m.astype(p.m.dtype).copy()
            p.v = src.v.astype(p.v.dtype).copy()
            p.step = src.step


def adam_step(params: ParameterSet, lr: float, beta1: float = ADAM_BETA1,
              beta2: float = ADAM_BETA2, eps: float = ADAM_EPS) -> ParameterSet:
    """One bias-corrected Adam update, in place. Gradients must be populated."""
    for name, state in params:
        tensor = state.tensor
        g = tensor.grad
        if g is None:
            raise MissingGradientError(f"parameter {name!r} has no gradient")
        state.step += 1
        state.m = beta1 * state.m + (1.0 - beta1) * g
        state.v = beta2 * state.v + (1.0 - beta2) * (g * g)
        m_hat = state.m / (1.0 - beta1**state.step)
        v_hat = state.v / (1.0 - beta2**state.step)
        tensor.values = tensor.values - (lr * m_hat / (np.sqrt(v_hat) + eps)).astype(
            tensor.values.dtype
        )
    return params


@dataclass(frozen=True)
class Schedule:
    """Learning-rate schedule: halve every ``step_interval`` epochs, or
    decay exponentially by ``decay_factor`` per epoch."""

    kind: str  # "step-halving" | "exponential"
    base_lr: float
    step_interval: int | None = None
    decay_factor: float | None = None

    def __post_init__(self):
        if self.base_lr <= 0:
            raise ValueError("base_lr must be positive")
        if self.kind == "step-halving":
            if not self.step_interval or self.step_interval <= 0:
                raise ValueError("step-halving needs a positive step_interval")
        elif self.kind == "exponential":
            if self.decay_factor is None or not (0.0 < self.decay_factor <= 1.0):
                raise ValueError("exponential decay_factor must be in (0, 1]")
        else:
            raise ValueError(f"unknown schedule kind {self.kind!r}")


def schedule_lr(schedule: Schedule, epoch: int) -> float:
    if epoch < 0:
        raise ValueError("epoch must be >= 0")
    if schedule.kind == "step-halving":
        return schedule.base_lr * 0.5 ** (epoch // schedule.step_interval)
    return schedule.base_lr * schedule.decay_factor**epoch


def uniform_init(rng: np.random.Generator, shape, fan_in: int, dtype=np.float32) -> np.ndarray:
    """Weights uniform in +-1/sqrt(fan_in); the library-wide default init."""
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)
