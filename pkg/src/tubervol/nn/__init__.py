"""Differentiable computation kernels sufficient to train both networks."""

from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .gradcheck import grad_check
from .losses import CONTRASTIVE_MARGIN, combined_loss, contrastive_loss, l1_loss, mse_loss
from .ops import (
    add,
    concat_columns,
    conv2d,
    dense,
    flatten,
    gather_rows,
    leaky_relu,
    maxpool2d,
    relu,
    scale,
    tanh,
)
from .optim import (
    MissingGradientError,
    Parameter,
    ParameterSet,
    Schedule,
    adam_step,
    schedule_lr,
    uniform_init,
)
from .tensor import (
    DiffTensor,
    as_tensor,
    debug_checks,
    finite_checks_enabled,
    no_grad,
    tune_allocator,
)

__all__ = [
    "CONTRASTIVE_MARGIN",
    "CheckpointError",
    "DiffTensor",
    "MissingGradientError",
    "Parameter",
    "ParameterSet",
    "Schedule",
    "adam_step",
    "add",
    "as_tensor",
    "combined_loss",
    "concat_columns",
    "conv2d",
    "contrastive_loss",
    "debug_checks",
    "dense",
    "finite_checks_enabled",
    "flatten",
    "gather_rows",
    "grad_check",
    "l1_loss",
    "leaky_relu",
    "load_checkpoint",
    "maxpool2d",
    "mse_loss",
    "no_grad",
    "relu",
    "save_checkpoint",
    "scale",
    "schedule_lr",
    "tanh",
    "tune_allocator",
    "uniform_init",
]
