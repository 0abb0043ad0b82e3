"""Adversarial training loop: non-saturating BCE GAN with Adam, inverted
dropout in the generator hidden blocks, and a mode-collapse monitor."""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field, asdict

import numpy as np

from .data_io import Checkpoint, Dataset
from .layers import BatchNorm2d, DropoutSpec, LayerStack
from .models import (DiscriminatorSpec, GeneratorSpec, build_discriminator,
                     build_generator, discriminator_spec_from_dict,
                     discriminator_spec_to_dict, generator_spec_from_dict,
                     generator_spec_to_dict)
from .tensor import Tensor

log = logging.getLogger(__name__)

BCE_EPS = 1e-7


class TrainingDiverged(RuntimeError):
    def __init__(self, message, train_log):
        super().__init__(message)
        self.train_log = train_log


@dataclass
class TrainConfig:
    p_train: float = 0.0
    epochs: int = 5
    batch_size: int = 64
    learning_rate: float = 2e-4
    adam_beta1: float = 0.5
    seed: int = 0
    dataset_slice: int = 5000
    latent_dim: int = 64
    gen_widths: tuple = (64, 32)
    disc_widths: tuple = (32, 64)
    placement: str = "all-hidden"
    image_hw: int = 28

    def __post_init__(self):
        if not (0.0 <= self.p_train < 1.0):
            raise ValueError(f"p_train={self.p_train} must lie in [0, 1)")
        if self.batch_size < 2:
            raise ValueError("batch_size must be >= 2")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["gen_widths"] = list(self.gen_widths)
        d["disc_widths"] = list(self.disc_widths)
        return d

    @staticmethod
    def from_dict(d: dict) -> "TrainConfig":
        d = dict(d)
        d["gen_widths"] = tuple(d["gen_widths"])
        d["disc_widths"] = tuple(d["disc_widths"])
        return TrainConfig(**d)

    def generator_spec(self) -> GeneratorSpec:
        return GeneratorSpec(
            latent_dim=self.latent_dim,
            hidden_widths=self.gen_widths,
            image_hw=self.image_hw,
            dropout=DropoutSpec(mode="inverted", p_train=self.p_train),
            placement=self.placement,
        )

    def discriminator_spec(self) -> DiscriminatorSpec:
        return DiscriminatorSpec(hidden_widths=self.disc_widths, image_hw=self.image_hw)


@dataclass
class TrainLog:
    g_loss: list = field(default_factory=list)
    d_loss: list = field(default_factory=list)
    d_acc_real: list = field(default_factory=list)
    d_acc_fake: list = field(default_factory=list)
    collapse_checks: list = field(default_factory=list)  # (step, flagged, mean_dist)

    def append(self, g, d, ar, af):
        self.g_loss.append(float(g))
        self.d_loss.append(float(d))
        self.d_acc_real.append(float(ar))
        self.d_acc_fake.append(float(af))

    @property
    def steps(self) -> int:
        return len(self.g_loss)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    def digest(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()


class Adam:
    def __init__(self, params: dict[str, Tensor], lr: float, beta1: float = 0.5,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr, self.b1, self.b2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in params.items()}

    def step(self):
        self.t += 1
        b1t = 1 - self.b1 ** self.t
        b2t = 1 - self.b2 ** self.t
        for k, p in self.params.items():
            g = p.grad
            if g is None:
                continue
            self.m[k] = self.b1 * self.m[k] + (1 - self.b1) * g
            self.v[k] = self.b2 * self.v[k] + (1 - self.b2) * g * g
            mhat = self.m[k] / b1t
            vhat = self.v[k] / b2t
            p.data -= (self.lr * mhat / (np.sqrt(vhat) + self.eps)).astype(p.data.dtype)


def bce_loss(pred: Tensor, target: float) -> Tensor:
    """Binary cross-entropy against a constant label, epsilon-clipped."""
    p = pred.reshape((pred.data.size,))
    if target == 1.0:
        return -((p + BCE_EPS).log().mean())
    if target == 0.0:
        return -((1.0 - p + BCE_EPS).log().mean())
    return -((p + BCE_EPS).log() * target
             + (1.0 - p + BCE_EPS).log() * (1.0 - target)).mean()


def mean_pairwise_distance(images: np.ndarray) -> float:
    """Mean euclidean distance over all pairs in a batch [K,...]."""
    flat = images.reshape(images.shape[0], -1).astype(np.float64)
    sq = (flat * flat).sum(axis=1)
    d2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * flat @ flat.T, 0.0)
    k = flat.shape[0]
    iu = np.triu_indices(k, 1)
    return float(np.sqrt(d2[iu]).mean()) if iu[0].size else 0.0


def mode_collapse_monitor(samples: np.ndarray, reference_distance: float,
                          threshold_fraction: float = 0.1):
    """Flag a generated batch whose mean pairwise distance collapses below a
    fraction of the dataset's own mean pairwise distance. Advisory only."""
    mean_dist = mean_pairwise_distance(samples)
    threshold = threshold_fraction * reference_distance
    flagged = mean_dist < threshold
    return flagged, {
        "mean_pairwise_distance": mean_dist,
        "reference_distance": reference_distance,
        "threshold": threshold,
    }


@dataclass
class TrainState:
    gen: LayerStack
    disc: LayerStack
    opt_g: Adam
    opt_d: Adam
    z_rng: np.random.Generator
    drop_rng: np.random.Generator
    latent_dim: int


def train_step(state: TrainState, real_batch: np.ndarray):
    """One adversarial update: discriminator on real+fake, then generator on
    the discriminator's feedback. Returns (g_loss, d_loss, acc_real, acc_fake)."""
    gen, disc = state.gen, state.disc
    b = real_batch.shape[0]
    z = state.z_rng.standard_normal((b, state.latent_dim)).astype(np.float32)

    fake = gen.forward(Tensor(z), "train", state.drop_rng)

    # discriminator update (fake detached so G sees no update here)
    d_real = disc.forward(Tensor(real_batch), "train")
    d_fake = disc.forward(fake.detach(), "train")
    d_loss = bce_loss(d_real, 1.0) + bce_loss(d_fake, 0.0)
    gen.zero_grads()
    disc.zero_grads()
    d_loss.backward()
    state.opt_d.step()

    # generator update (non-saturating loss through the fresh discriminator)
    d_fake2 = disc.forward(fake, "train")
    g_loss = bce_loss(d_fake2, 1.0)
    gen.zero_grads()
    disc.zero_grads()
    g_loss.backward()
    state.opt_g.step()

    if not (np.isfinite(d_loss.data) and np.isfinite(g_loss.data)):
        raise FloatingPointError("NaN/Inf loss")

    acc_real = float((d_real.data > 0.5).mean())
    acc_fake = float((d_fake.data <= 0.5).mean())
    return float(g_loss.data), float(d_loss.data), acc_real, acc_fake


def init_state(cfg: TrainConfig) -> TrainState:
    ss = np.random.SeedSequence(cfg.seed)
    init_g, init_d, z_ss, drop_ss = ss.spawn(4)
    gen = build_generator(cfg.generator_spec(), np.random.default_rng(init_g))
    disc = build_discriminator(cfg.discriminator_spec(), np.random.default_rng(init_d))
    return TrainState(
        gen=gen, disc=disc,
        opt_g=Adam(gen.named_params(), cfg.learning_rate, cfg.adam_beta1),
        opt_d=Adam(disc.named_params(), cfg.learning_rate, cfg.adam_beta1),
        z_rng=np.random.default_rng(z_ss),
        drop_rng=np.random.default_rng(drop_ss),
        latent_dim=cfg.latent_dim,
    )


def train_gan(cfg: TrainConfig, dataset: Dataset):
    """Train one model; returns (Checkpoint, TrainLog). Fully determined by
    (cfg, dataset) on one platform/build."""
    state = init_state(cfg)
    images = dataset.images[:cfg.dataset_slice]
    n = images.shape[0]
    if n < cfg.batch_size:
        raise ValueError(f"dataset slice ({n}) smaller than one batch ({cfg.batch_size})")
    shuffle_rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0xDA7A]))
    eval_rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0xE7A1]))
    ref_idx = shuffle_rng.choice(n, size=min(n, 256), replace=False)
    ref_dist = mean_pairwise_distance(images[ref_idx])

    tlog = TrainLog()
    steps_per_epoch = n // cfg.batch_size
    for epoch in range(cfg.epochs):
        perm = shuffle_rng.permutation(n)
        for s in range(steps_per_epoch):
            batch = images[perm[s * cfg.batch_size:(s + 1) * cfg.batch_size]]
            try:
                g, d, ar, af = train_step(state, batch)
            except FloatingPointError as e:
                raise TrainingDiverged(
                    f"diverged at epoch {epoch} step {s}: {e}", tlog) from e
            tlog.append(g, d, ar, af)
        # end-of-epoch collapse probe on a fresh latent batch
        z = eval_rng.standard_normal((64, cfg.latent_dim)).astype(np.float32)
        samples = state.gen.forward(Tensor(z), "generation").data
        flagged, diag = mode_collapse_monitor(samples, ref_dist)
        tlog.collapse_checks.append([tlog.steps, bool(flagged),
                                     diag["mean_pairwise_distance"]])
        log.info("epoch %d/%d g_loss=%.3f d_loss=%.3f collapse=%s",
                 epoch + 1, cfg.epochs, g, d, flagged)

    ckpt = checkpoint_from_state(state.gen, state.disc, cfg, tlog)
    return ckpt, tlog


# -- checkpoint assembly / restore ---------------------------------------


def _collect(stack: LayerStack, prefix: str) -> dict:
    out = {}
    for name, p in stack.named_params().items():
        out[f"{prefix}.{name}"] = p.data.copy()
    for name, b in stack.named_buffers().items():
        out[f"{prefix}.{name}"] = b.copy()
    return out


def checkpoint_from_state(gen: LayerStack, disc: LayerStack, cfg: TrainConfig,
                          tlog: TrainLog) -> Checkpoint:
    tensors = _collect(gen, "gen") | _collect(disc, "disc")
    return Checkpoint(
        generator_spec=generator_spec_to_dict(cfg.generator_spec()),
        discriminator_spec=discriminator_spec_to_dict(cfg.discriminator_spec()),
        tensors=tensors,
        train_config=cfg.to_dict(),
        seed=cfg.seed,
        log_digest=tlog.digest(),
    )


def _load_into(stack: LayerStack, prefix: str, tensors: dict):
    from .data_io import CheckpointError
    expected = set()
    for name, p in stack.named_params().items():
        key = f"{prefix}.{name}"
        expected.add(key)
        if key not in tensors:
            raise CheckpointError(f"checkpoint missing parameter {key}")
        arr = tensors[key]
        if tuple(arr.shape) != p.data.shape:
            raise CheckpointError(f"{key}: shape {arr.shape} != model {p.data.shape}")
        p.data = arr.astype(p.data.dtype, copy=True)
    for i, layer in enumerate(stack.layers):
        if isinstance(layer, BatchNorm2d):
            mkey, vkey = f"{prefix}.layer{i}.running_mean", f"{prefix}.layer{i}.running_var"
            expected.update((mkey, vkey))
            if mkey not in tensors or vkey not in tensors:
                raise CheckpointError(f"checkpoint missing buffers for layer {i}")
            layer.set_buffers(tensors[mkey], tensors[vkey])
    unknown = [k for k in tensors if k.startswith(prefix + ".") and k not in expected]
    if unknown:
        raise CheckpointError(f"unknown parameter names in checkpoint: {unknown}")


def generator_from_checkpoint(ckpt: Checkpoint):
    """Rebuild the trained generator; returns (LayerStack, GeneratorSpec)."""
    spec = generator_spec_from_dict(ckpt.generator_spec)
    gen = build_generator(spec, np.random.default_rng(0))
    _load_into(gen, "gen", ckpt.tensors)
    return gen, spec


def discriminator_from_checkpoint(ckpt: Checkpoint):
    spec = discriminator_spec_from_dict(ckpt.discriminator_spec)
    disc = build_discriminator(spec, np.random.default_rng(0))
    _load_into(disc, "disc", ckpt.tensors)
    return disc, spec
