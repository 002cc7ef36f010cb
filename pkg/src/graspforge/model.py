"""Voxel autoencoder with an interpolation critic.

The encoder maps an occupancy grid to a latent vector through a stack of
strided 3-D convolutions (batchnorm + ReLU between) and a fully connected
head; the decoder mirrors it with transposed convolutions and a sigmoid
output.  The critic shares the encoder topology plus one extra fully
connected layer that regresses a single scalar: the interpolation weight
of a latent-interpolated reconstruction.

Training runs in two phases: the autoencoder alone on reconstruction
cross-entropy, then alternating critic / autoencoder updates per batch
where the critic learns to recover interpolation weights and the
autoencoder is additionally rewarded for driving the critic's output on
interpolants to zero.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError
from .geometry import VoxelGrid
from .tensor import (
    OptimizerState,
    ParameterSet,
    Tensor,
    adam_step,
    batchnorm,
    bce_loss,
    conv3d,
    conv_transpose3d,
    gather_rows,
    linear,
    load_checkpoint,
    relu,
    reshape,
    save_checkpoint,
    sigmoid,
    tmean,
    xavier_uniform,
)

__all__ = [
    "ModelConfig",
    "TrainPhases",
    "TrainingReport",
    "init_parameters",
    "encode",
    "encode_batch",
    "decode",
    "decode_batch",
    "critic_score",
    "interpolate",
    "critic_loss",
    "critic_loss_from_outputs",
    "ae_loss",
    "train",
    "reconstruction_iou",
    "save_model",
    "load_model",
]


@dataclass(frozen=True)
class ModelConfig:
    """Architecture and regularization settings.

    The defaults are the desk-scale configuration (CPU-trainable in
    minutes); ``paper_scale`` gives the full-size variant.
    """

    grid_resolution: int = 32
    latent_dim: int = 32
    channels: tuple = (16, 32, 64, 128)
    kernel_size: int = 4
    stride: int = 2
    gamma: float = 0.2          # weight of the real grid in the critic's zero-target mix
    reg_weight: float = 0.5     # strength of the critic term in the autoencoder loss
    alpha_range: tuple = (0.0, 0.5)

    def __post_init__(self):
        if self.stride < 1 or self.kernel_size < self.stride:
            raise ConfigError("kernel size must be >= stride >= 1")
        if (self.kernel_size - self.stride) % 2 != 0:
            raise ConfigError("kernel size minus stride must be even for exact halving")
        down = self.stride ** len(self.channels)
        if self.grid_resolution % down != 0:
            raise ConfigError(
                f"resolution {self.grid_resolution} not divisible by stride^layers = {down}"
            )
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigError("gamma must lie in [0, 1]")
        if self.reg_weight < 0.0:
            raise ConfigError("regularization weight must be non-negative")
        lo, hi = self.alpha_range
        if not (0.0 <= lo <= hi <= 0.5):
            raise ConfigError("alpha range must be contained in [0, 0.5]")
        if self.latent_dim < 1:
            raise ConfigError("latent dimension must be positive")

    @classmethod
    def paper_scale(cls, **overrides):
        base = dict(
            grid_resolution=64,
            latent_dim=128,
            channels=(32, 64, 128, 256, 512),
        )
        base.update(overrides)
        return cls(**base)

    @property
    def padding(self):
        return (self.kernel_size - self.stride) // 2

    @property
    def bottleneck_spatial(self):
        return self.grid_resolution // self.stride ** len(self.channels)

    @property
    def flattened_size(self):
        return self.channels[-1] * self.bottleneck_spatial ** 3


@dataclass(frozen=True)
class TrainPhases:
    """Epoch budget and learning rates for the two training phases."""

    phase1_epochs: int = 30
    phase2_epochs: int = 15
    batch_size: int = 16
    lr_phase1: float = 1e-3
    lr_ae: float = 1e-4
    lr_critic: float = 1e-3

    def __post_init__(self):
        if self.phase1_epochs < 0 or self.phase2_epochs < 0:
            raise ConfigError("epoch counts must be non-negative")
        if self.batch_size < 2:
            raise ConfigError("batch size must be at least 2 (batchnorm)")


@dataclass
class TrainingReport:
    seed: int
    config: dict
    phases: dict
    epochs: list = field(default_factory=list)

    def to_dict(self):
        return {
            "seed": self.seed,
            "config": self.config,
            "phases": self.phases,
            "epochs": self.epochs,
        }


# --- parameter initialization -------------------------------------------------------


def _conv_trunk_channels(config):
    return (1,) + tuple(config.channels)


def init_parameters(config: ModelConfig, seed: int) -> ParameterSet:
    """Seeded uniform +-sqrt(6 / (fan_in + fan_out)) weights, zero biases."""
    rng = np.random.default_rng(seed)
    params = ParameterSet()
    k = config.kernel_size
    k3 = k ** 3

    def add_conv_trunk(prefix):
        chans = _conv_trunk_channels(config)
        for i in range(len(config.channels)):
            cin, cout = chans[i], chans[i + 1]
            params.add(
                f"{prefix}.conv{i}.weight",
                xavier_uniform(rng, (cout, cin, k, k, k), cin * k3, cout * k3),
            )
            params.add(f"{prefix}.conv{i}.bias", np.zeros(cout))
            params.add(f"{prefix}.bn{i}.scale", np.ones(cout))
            params.add(f"{prefix}.bn{i}.shift", np.zeros(cout))
            params.add(f"{prefix}.bn{i}.running_mean", np.zeros(cout), trainable=False)
            params.add(f"{prefix}.bn{i}.running_var", np.ones(cout), trainable=False)

    flat = config.flattened_size
    d = config.latent_dim

    add_conv_trunk("enc")
    params.add("enc.fc.weight", xavier_uniform(rng, (flat, d), flat, d))
    params.add("enc.fc.bias", np.zeros(d))

    params.add("dec.fc.weight", xavier_uniform(rng, (d, flat), d, flat))
    params.add("dec.fc.bias", np.zeros(flat))
    rev = tuple(reversed(config.channels)) + (1,)
    for i in range(len(config.channels)):
        cin, cout = rev[i], rev[i + 1]
        params.add(
            f"dec.convt{i}.weight",
            xavier_uniform(rng, (cin, cout, k, k, k), cin * k3, cout * k3),
        )
        params.add(f"dec.convt{i}.bias", np.zeros(cout))
        if i < len(config.channels) - 1:
            params.add(f"dec.bn{i}.scale", np.ones(cout))
            params.add(f"dec.bn{i}.shift", np.zeros(cout))
            params.add(f"dec.bn{i}.running_mean", np.zeros(cout), trainable=False)
            params.add(f"dec.bn{i}.running_var", np.ones(cout), trainable=False)

    add_conv_trunk("critic")
    params.add("critic.fc.weight", xavier_uniform(rng, (flat, d), flat, d))
    params.add("critic.fc.bias", np.zeros(d))
    params.add("critic.out.weight", xavier_uniform(rng, (d, 1), d, 1))
    params.add("critic.out.bias", np.zeros(1))
    return params


# --- forward passes ----------------------------------------------------------------


def _trunk_forward(params, config, x, prefix, training, update_running):
    h = x
    for i in range(len(config.channels)):
        h = conv3d(
            h,
            params[f"{prefix}.conv{i}.weight"],
            params[f"{prefix}.conv{i}.bias"],
            stride=config.stride,
            padding=config.padding,
        )
        h = batchnorm(
            h,
            params[f"{prefix}.bn{i}.scale"],
            params[f"{prefix}.bn{i}.shift"],
            params[f"{prefix}.bn{i}.running_mean"],
            params[f"{prefix}.bn{i}.running_var"],
            training=training,
            update_running=update_running,
        )
        h = relu(h)
    h = reshape(h, (h.data.shape[0], config.flattened_size))
    return h


def encoder_forward(params, config, x, training=False, update_running=False):
    h = _trunk_forward(params, config, x, "enc", training, update_running)
    return linear(h, params["enc.fc.weight"], params["enc.fc.bias"])


def decoder_forward(params, config, z, training=False, update_running=False):
    h = linear(z, params["dec.fc.weight"], params["dec.fc.bias"])
    s = config.bottleneck_spatial
    h = reshape(h, (h.data.shape[0], config.channels[-1], s, s, s))
    n = len(config.channels)
    for i in range(n):
        h = conv_transpose3d(
            h,
            params[f"dec.convt{i}.weight"],
            params[f"dec.convt{i}.bias"],
            stride=config.stride,
            padding=config.padding,
        )
        if i < n - 1:
            h = batchnorm(
                h,
                params[f"dec.bn{i}.scale"],
                params[f"dec.bn{i}.shift"],
                params[f"dec.bn{i}.running_mean"],
                params[f"dec.bn{i}.running_var"],
                training=training,
                update_running=update_running,
            )
            h = relu(h)
    return sigmoid(h)


def critic_forward(params, config, x, training=False, update_running=False):
    h = _trunk_forward(params, config, x, "critic", training, update_running)
    h = linear(h, params["critic.fc.weight"], params["critic.fc.bias"])
    h = relu(h)
    return linear(h, params["critic.out.weight"], params["critic.out.bias"])


# --- public eval-mode surfaces ------------------------------------------------------


def _grid_to_array(grid, config):
    if isinstance(grid, VoxelGrid):
        occ = grid.occupancy
    else:
        occ = np.asarray(grid, dtype=np.float64)
    if occ.shape != (config.grid_resolution,) * 3:
        raise ValueError(
            f"grid resolution {occ.shape} does not match model resolution "
            f"{config.grid_resolution}"
        )
    return occ


def encode(params, grid, config) -> np.ndarray:
    """Deterministic latent vector of one grid (eval-mode batchnorm)."""
    return encode_batch(params, [grid], config)[0]


def encode_batch(params, grids, config) -> np.ndarray:
    x = np.stack([_grid_to_array(g, config) for g in grids])[:, None]
    z = encoder_forward(params, config, Tensor(x), training=False)
    return z.data.copy()


def decode(params, z, config) -> VoxelGrid:
    """Decode one latent vector to a real-valued occupancy grid in (0, 1)."""
    return decode_batch(params, np.asarray(z, dtype=np.float64)[None], config)[0]


def decode_batch(params, zs, config):
    zs = np.asarray(zs, dtype=np.float64)
    if zs.ndim != 2 or zs.shape[1] != config.latent_dim:
        raise ValueError(
            f"latent batch shape {zs.shape} does not match latent dim {config.latent_dim}"
        )
    out = decoder_forward(params, config, Tensor(zs), training=False)
    res = config.grid_resolution
    return [
        VoxelGrid(out.data[i, 0], origin=(0.0, 0.0, 0.0), voxel_size=1.0 / res)
        for i in range(len(zs))
    ]


def critic_score(params, grid, config) -> float:
    """Raw critic regression output for one grid; no range clamp."""
    x = _grid_to_array(grid, config)[None, None]
    out = critic_forward(params, config, Tensor(x), training=False)
    return float(out.data.reshape(()))


def interpolate(z1, z2, alpha: float) -> np.ndarray:
    """Convex combination ``alpha * z1 + (1 - alpha) * z2``."""
    z1 = np.asarray(z1, dtype=np.float64)
    z2 = np.asarray(z2, dtype=np.float64)
    if z1.shape != z2.shape:
        raise ValueError(f"latent length mismatch: {z1.shape} vs {z2.shape}")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"interpolation weight must lie in [0, 1], got {alpha}")
    return alpha * z1 + (1.0 - alpha) * z2


# --- losses -------------------------------------------------------------------------


def critic_loss_from_outputs(critic_on_interp, alphas, critic_on_mix):
    """Batch means of (C(interp) - alpha)^2 and C(mix)^2; plain arrays."""
    c_i = np.asarray(critic_on_interp, dtype=np.float64).reshape(-1)
    a = np.asarray(alphas, dtype=np.float64).reshape(-1)
    c_m = np.asarray(critic_on_mix, dtype=np.float64).reshape(-1)
    if c_i.shape != a.shape:
        raise ValueError("per-sample critic outputs and weights must align")
    return float(np.mean((c_i - a) ** 2) + np.mean(c_m ** 2))


def critic_loss(params, config, x, x_hat, x_interp, alphas, gamma=None,
                training=True, update_running=False):
    """Critic objective: recover interpolation weights, emit zero on real mixes.

    ``x``/``x_hat``/``x_interp`` are (B, 1, D, D, D) arrays; gradients flow
    into the critic parameters only (the grids are treated as constants).
    """
    gamma = config.gamma if gamma is None else gamma
    alphas = np.asarray(alphas, dtype=np.float64).reshape(-1, 1)
    if alphas.min() < 0.0 or alphas.max() > 1.0:
        raise ValueError("interpolation weights must lie in [0, 1]")
    c_interp = critic_forward(params, config, Tensor(np.asarray(x_interp)),
                              training=training, update_running=update_running)
    mix = gamma * np.asarray(x) + (1.0 - gamma) * np.asarray(x_hat)
    c_mix = critic_forward(params, config, Tensor(mix),
                           training=training, update_running=update_running)
    diff = c_interp - alphas
    return tmean(diff * diff) + tmean(c_mix * c_mix)


def ae_loss(x, x_hat, critic_on_interp, reg_weight):
    """Reconstruction cross-entropy plus the critic-fooling penalty."""
    recon = bce_loss(x_hat, x)
    c = critic_on_interp
    if not isinstance(c, Tensor):
        c = Tensor(np.asarray(c, dtype=np.float64))
    return recon + reg_weight * tmean(c * c)


# --- training -----------------------------------------------------------------------


def _corpus_to_array(corpus, config):
    grids = []
    for g in corpus:
        grids.append(_grid_to_array(g, config))
    if not grids:
        raise DataError("training corpus is empty")
    return np.stack(grids)[:, None]


def _set_trainable(params, prefixes, flag):
    for name in params.names():
        if name.endswith(("running_mean", "running_var")):
            continue
        if name.startswith(prefixes):
            params[name].requires_grad = flag


def _batches(n, batch_size, rng):
    perm = rng.permutation(n)
    for start in range(0, n, batch_size):
        idx = perm[start : start + batch_size]
        if len(idx) >= 2:
            yield idx


def reconstruction_iou(params, config, data, batch_size=16, threshold=0.5):
    """Mean voxel IoU of eval-mode reconstructions against binary inputs."""
    scores = []
    for start in range(0, len(data), batch_size):
        x = data[start : start + batch_size]
        z = encoder_forward(params, config, Tensor(x), training=False)
        x_hat = decoder_forward(params, config, z, training=False)
        pred = x_hat.data > threshold
        truth = x > 0.5
        inter = (pred & truth).sum(axis=(1, 2, 3, 4))
        union = (pred | truth).sum(axis=(1, 2, 3, 4))
        scores.extend(np.where(union > 0, inter / np.maximum(union, 1), 1.0))
    return float(np.mean(scores))


IOU_TRACK_SAMPLES = 64  # per-epoch IoU is tracked on this many grids; the
                        # final epoch is always evaluated on the full corpus


def train(corpus, config: ModelConfig, phases: TrainPhases, seed: int,
          init: ParameterSet | None = None, track_iou: bool = True):
    """Two-phase training; fully deterministic for a given seed.

    Phase 1 trains encoder+decoder on reconstruction cross-entropy.  Phase 2
    alternates per batch: a critic update (recover the interpolation weight
    of decoded latent mixes, output zero on real/reconstruction blends) and
    an autoencoder update (reconstruction plus the critic-fooling penalty).
    Returns ``(params, TrainingReport)``.
    """
    data = _corpus_to_array(corpus, config)
    n = len(data)
    if n < phases.batch_size:
        raise DataError(
            f"corpus of {n} grids is smaller than batch size {phases.batch_size}"
        )
    ss = np.random.SeedSequence(seed)
    rng_init, rng_p1, rng_p2 = [np.random.default_rng(c) for c in ss.spawn(3)]
    params = init.copy() if init is not None else init_parameters(config, rng_init)
    report = TrainingReport(
        seed=seed,
        config=asdict(config),
        phases={
            "phase1_epochs": phases.phase1_epochs,
            "phase2_epochs": phases.phase2_epochs,
            "batch_size": phases.batch_size,
            "learning_rates": {
                "phase1": phases.lr_phase1,
                "phase2_ae": phases.lr_ae,
                "phase2_critic": phases.lr_critic,
            },
        },
    )

    ae_params = {
        name: params[name]
        for name in params.names()
        if name.startswith(("enc.", "dec.")) and params[name].requires_grad
    }
    critic_params = {
        name: params[name]
        for name in params.names()
        if name.startswith("critic.") and params[name].requires_grad
    }

    # optimizers are built while every parameter is still flagged trainable
    opt1 = OptimizerState(params, learning_rate=phases.lr_phase1)
    opt1.m = {k: opt1.m[k] for k in ae_params}
    opt1.v = {k: opt1.v[k] for k in ae_params}
    opt_ae = OptimizerState(params, learning_rate=phases.lr_ae)
    opt_ae.m = {k: opt_ae.m[k] for k in ae_params}
    opt_ae.v = {k: opt_ae.v[k] for k in ae_params}
    opt_c = OptimizerState(params, learning_rate=phases.lr_critic)
    opt_c.m = {k: opt_c.m[k] for k in critic_params}
    opt_c.v = {k: opt_c.v[k] for k in critic_params}

    # phase 1: autoencoder alone
    for epoch in range(phases.phase1_epochs):
        losses = []
        _set_trainable(params, ("enc.", "dec."), True)
        _set_trainable(params, ("critic.",), False)
        for idx in _batches(n, phases.batch_size, rng_p1):
            x = Tensor(data[idx])
            params.zero_grad()
            z = encoder_forward(params, config, x, training=True, update_running=True)
            x_hat = decoder_forward(params, config, z, training=True, update_running=True)
            loss = bce_loss(x_hat, x)
            loss.backward()
            adam_step(params, {k: t.grad for k, t in ae_params.items()}, opt1)
            losses.append(loss.item())
        entry = {"phase": 1, "epoch": epoch, "ae_loss": float(np.mean(losses))}
        if track_iou:
            last = epoch == phases.phase1_epochs - 1 and phases.phase2_epochs == 0
            subset = data if last else data[:IOU_TRACK_SAMPLES]
            entry["iou"] = reconstruction_iou(params, config, subset, phases.batch_size)
        report.epochs.append(entry)

    # phase 2: alternating critic / autoencoder updates
    lo, hi = config.alpha_range
    for epoch in range(phases.phase2_epochs):
        c_losses, a_losses = [], []
        for idx in _batches(n, phases.batch_size, rng_p2):
            x_arr = data[idx]
            b = len(idx)
            offsets = rng_p2.integers(1, b, size=b)
            partner = (np.arange(b) + offsets) % b
            alphas = rng_p2.uniform(lo, hi, size=b)

            # critic step: grids are constants, only critic params learn
            _set_trainable(params, ("enc.", "dec.", "critic."), False)
            z = encoder_forward(params, config, Tensor(x_arr), training=True)
            x_hat = decoder_forward(params, config, z, training=True)
            z_mix = alphas[:, None] * z.data + (1.0 - alphas[:, None]) * z.data[partner]
            x_interp = decoder_forward(params, config, Tensor(z_mix), training=True)
            _set_trainable(params, ("critic.",), True)
            params.zero_grad()
            c_loss = critic_loss(
                params, config, x_arr, x_hat.data, x_interp.data, alphas,
                training=True, update_running=True,
            )
            c_loss.backward()
            adam_step(params, {k: t.grad for k, t in critic_params.items()}, opt_c)
            c_losses.append(c_loss.item())

            # autoencoder step: critic frozen but differentiable
            _set_trainable(params, ("enc.", "dec."), True)
            _set_trainable(params, ("critic.",), False)
            params.zero_grad()
            x = Tensor(x_arr)
            z = encoder_forward(params, config, x, training=True, update_running=True)
            x_hat = decoder_forward(params, config, z, training=True, update_running=True)
            z_mix = Tensor(alphas[:, None]) * z + Tensor(1.0 - alphas[:, None]) * gather_rows(z, partner)
            x_interp = decoder_forward(params, config, z_mix, training=True)
            c_out = critic_forward(params, config, x_interp, training=True)
            loss = ae_loss(x, x_hat, c_out, config.reg_weight)
            loss.backward()
            adam_step(params, {k: t.grad for k, t in ae_params.items()}, opt_ae)
            a_losses.append(loss.item())
        entry = {
            "phase": 2,
            "epoch": epoch,
            "ae_loss": float(np.mean(a_losses)) if a_losses else None,
            "critic_loss": float(np.mean(c_losses)) if c_losses else None,
        }
        if track_iou:
            last = epoch == phases.phase2_epochs - 1
            subset = data if last else data[:IOU_TRACK_SAMPLES]
            entry["iou"] = reconstruction_iou(params, config, subset, phases.batch_size)
        report.epochs.append(entry)

    _set_trainable(params, ("enc.", "dec.", "critic."), True)
    return params, report


# --- persistence --------------------------------------------------------------------

SIDECAR_VERSION = 1


def save_model(params, config: ModelConfig, seed: int, path, extra=None):
    """Checkpoint plus a JSON sidecar carrying the config and seed."""
    path = Path(path)
    save_checkpoint(params, path)
    sidecar = {
        "format": SIDECAR_VERSION,
        "seed": seed,
        "config": asdict(config),
    }
    if extra:
        sidecar["training"] = extra
    with open(path.with_suffix(".json"), "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_model(path):
    """Returns (params, config, sidecar dict)."""
    path = Path(path)
    params = load_checkpoint(path)
    sidecar_path = path.with_suffix(".json")
    if not sidecar_path.exists():
        raise DataError(f"missing checkpoint sidecar {sidecar_path}")
    with open(sidecar_path, "r", encoding="utf-8") as fh:
        sidecar = json.load(fh)
    cfg = sidecar["config"]
    cfg["channels"] = tuple(cfg["channels"])
    cfg["alpha_range"] = tuple(cfg["alpha_range"])
    config = ModelConfig(**cfg)
    return params, config, sidecar
