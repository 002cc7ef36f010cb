"""Dense float64 tensor engine: autograd, 3-D convolutions, Adam, checkpoints."""

from .autograd import (
    Tensor,
    add,
    clamp,
    div,
    gather_rows,
    gradients,
    log,
    matmul,
    mul,
    neg,
    relu,
    reshape,
    sigmoid,
    sqrt,
    sub,
    tmean,
    tsum,
)
from .checkpoint import (
    CHECKPOINT_MAGIC,
    CHECKPOINT_VERSION,
    load_checkpoint,
    save_checkpoint,
)
from .conv import conv3d, conv3d_raw, conv_transpose3d, conv_transpose3d_raw
from .network import (
    BCE_CLAMP,
    ParameterSet,
    batchnorm,
    bce_loss,
    bce_loss_raw,
    linear,
    xavier_uniform,
)
from .optim import OptimizerState, adam_step

__all__ = [
    "Tensor", "add", "sub", "mul", "div", "neg", "log", "sqrt", "relu",
    "sigmoid", "clamp", "tsum", "tmean", "reshape", "matmul", "gather_rows",
    "gradients",
    "conv3d", "conv3d_raw", "conv_transpose3d", "conv_transpose3d_raw",
    "ParameterSet", "batchnorm", "bce_loss", "bce_loss_raw", "linear",
    "xavier_uniform", "BCE_CLAMP",
    "OptimizerState", "adam_step",
    "save_checkpoint", "load_checkpoint", "CHECKPOINT_MAGIC", "CHECKPOINT_VERSION",
]
