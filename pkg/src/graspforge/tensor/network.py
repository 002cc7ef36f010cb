"""Parameter containers, layer primitives and losses for the voxel networks.

``ParameterSet`` is an ordered name -> Tensor map.  Trainable entries carry
``requires_grad=True``; batchnorm running statistics live in the same map
(so they travel with checkpoints) but never receive gradients.
"""

from __future__ import annotations

import numpy as np

from .autograd import Tensor, _as_tensor, clamp, log, matmul, reshape, sqrt, tmean

__all__ = [
    "ParameterSet",
    "xavier_uniform",
    "linear",
    "batchnorm",
    "bce_loss",
    "bce_loss_raw",
]

BN_EPS = 1e-5
BN_MOMENTUM = 0.1


class ParameterSet:
    """Ordered mapping of parameter id to leaf Tensor with frozen shapes."""

    def __init__(self):
        self._entries: dict[str, Tensor] = {}

    def add(self, name, data, trainable=True):
        if name in self._entries:
            raise ValueError(f"duplicate parameter id {name!r}")
        t = Tensor(np.array(data, dtype=np.float64), requires_grad=trainable)
        self._entries[name] = t
        return t

    def __getitem__(self, name) -> Tensor:
        return self._entries[name]

    def __contains__(self, name):
        return name in self._entries

    def __len__(self):
        return len(self._entries)

    def __iter__(self):
        return iter(self._entries)

    def names(self):
        return list(self._entries)

    def items(self):
        return self._entries.items()

    def set_data(self, name, data):
        """Replace a parameter's values; the shape is immutable."""
        data = np.asarray(data, dtype=np.float64)
        current = self._entries[name]
        if data.shape != current.data.shape:
            raise ValueError(
                f"parameter {name!r} has shape {current.data.shape}, cannot assign {data.shape}"
            )
        current.data = data.copy()

    def trainable(self, prefix=""):
        return {
            n: t
            for n, t in self._entries.items()
            if t.requires_grad and n.startswith(prefix)
        }

    def zero_grad(self):
        for t in self._entries.values():
            t.grad = None

    def copy(self):
        out = ParameterSet()
        for n, t in self._entries.items():
            out.add(n, t.data.copy(), trainable=t.requires_grad)
        return out

    def state_arrays(self):
        """Name -> ndarray snapshot (copies), for serialization."""
        return {n: t.data.copy() for n, t in self._entries.items()}


def xavier_uniform(rng, shape, fan_in, fan_out):
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape)


def linear(x, w, b):
    """Affine map (B, F_in) @ (F_in, F_out) + (F_out,)."""
    return matmul(x, w) + b


def batchnorm(x, scale, shift, running_mean, running_var, training,
              eps=BN_EPS, momentum=BN_MOMENTUM, update_running=False):
    """Per-channel batch normalization for (B, C, ...) or (B, F) tensors.

    In training mode the batch statistics are used (batch size must be at
    least 2) and, when ``update_running`` is set, folded into the running
    estimates in place.  Eval mode normalizes with the stored running
    statistics, so it is a pure deterministic function.
    """
    nd = x.data.ndim
    if nd < 2:
        raise ValueError(f"batchnorm expects at least 2-D input, got shape {x.data.shape}")
    channels = x.data.shape[1]
    if scale.data.shape != (channels,):
        raise ValueError(
            f"batchnorm scale shape {scale.data.shape} does not match {channels} channels"
        )
    axes = (0,) + tuple(range(2, nd))
    param_shape = (1, channels) + (1,) * (nd - 2)
    scale_b = reshape(scale, param_shape)
    shift_b = reshape(shift, param_shape)

    if training:
        if x.data.shape[0] < 2:
            raise ValueError("batchnorm in train mode requires batch size >= 2")
        mu = tmean(x, axis=axes, keepdims=True)
        centered = x - mu
        var = tmean(centered * centered, axis=axes, keepdims=True)
        if update_running:
            running_mean.data = (
                (1.0 - momentum) * running_mean.data + momentum * mu.data.reshape(channels)
            )
            running_var.data = (
                (1.0 - momentum) * running_var.data + momentum * var.data.reshape(channels)
            )
        norm = centered / sqrt(var + eps)
    else:
        rm = running_mean.data.reshape(param_shape)
        rv = running_var.data.reshape(param_shape)
        norm = (x - rm) / np.sqrt(rv + eps)
    return scale_b * norm + shift_b


BCE_CLAMP = 1e-7


def bce_loss(prediction, target):
    """Mean binary cross-entropy with predictions clamped to [1e-7, 1-1e-7]."""
    prediction = _as_tensor(prediction)
    target = _as_tensor(target)
    if prediction.data.shape != target.data.shape:
        raise ValueError(
            f"bce_loss shape mismatch: {prediction.data.shape} vs {target.data.shape}"
        )
    p = clamp(prediction, BCE_CLAMP, 1.0 - BCE_CLAMP)
    t = target.data
    elem = -(t * log(p) + (1.0 - t) * log(1.0 - p))
    return tmean(elem)


def bce_loss_raw(prediction, target):
    """Plain-array BCE matching ``bce_loss`` exactly."""
    prediction = np.asarray(prediction, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if prediction.shape != target.shape:
        raise ValueError(f"bce_loss shape mismatch: {prediction.shape} vs {target.shape}")
    p = np.clip(prediction, BCE_CLAMP, 1.0 - BCE_CLAMP)
    return float(np.mean(-(target * np.log(p) + (1.0 - target) * np.log(1.0 - p))))
