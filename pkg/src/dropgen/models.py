"""DCGAN-style generator/discriminator construction and generation-phase
dropout placement.

Desk-scale geometry: latent vector -> dense projection to a small spatial
map -> transposed-conv blocks doubling the resolution -> tanh output in
[-1, 1]. The discriminator mirrors it with strided convolutions and a
sigmoid head. Dropout layers sit at the end of each hidden block of the
generator only.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np

from .layers import (Activation, BatchNorm2d, Conv2d, ConvTranspose2d, Dense,
                     Dropout, DropoutSpec, LayerStack, Reshape, DROPOUT_DISABLED)
from .tensor import Tensor

PLACEMENTS = ("none", "all-hidden", "first-hidden-only")


@dataclass(frozen=True)
class GeneratorSpec:
    latent_dim: int = 64
    hidden_widths: tuple = (64, 32)   # block 0 is the dense projection
    image_hw: int = 28
    image_channels: int = 1
    dropout: DropoutSpec = field(default_factory=DropoutSpec)
    placement: str = "all-hidden"

    def __post_init__(self):
        if self.placement not in PLACEMENTS:
            raise ValueError(f"unknown placement {self.placement!r}")
        ups = len(self.hidden_widths)  # hidden convT blocks + output block
        if self.image_hw % (2 ** ups) != 0:
            raise ValueError(f"image size {self.image_hw} not divisible by 2^{ups}")

    @property
    def base_hw(self) -> int:
        return self.image_hw // (2 ** len(self.hidden_widths))

    @property
    def n_hidden_blocks(self) -> int:
        return len(self.hidden_widths)


@dataclass(frozen=True)
class DiscriminatorSpec:
    hidden_widths: tuple = (32, 64)
    image_hw: int = 28
    image_channels: int = 1
    leaky_slope: float = 0.2
    batchnorm_first: bool = False     # DCGAN convention: no BN on block 0

    @property
    def final_hw(self) -> int:
        return self.image_hw // (2 ** len(self.hidden_widths))


@dataclass(frozen=True)
class GenerationConfig:
    p_dropout: float = 0.0
    p_scale: float = 0.0
    placement: str = "all-hidden"     # which dropout layers participate

    def __post_init__(self):
        if not (0.0 <= self.p_dropout < 1.0):
            raise ValueError(f"p_dropout={self.p_dropout} must lie in [0, 1)")
        if not (0.0 <= self.p_scale < 1.0):
            raise ValueError(f"p_scale={self.p_scale} must lie in [0, 1)")
        if self.placement not in ("all-hidden", "first-hidden-only"):
            raise ValueError(f"unknown placement {self.placement!r}")

    @property
    def is_noiseless(self) -> bool:
        return self.p_dropout == 0.0 and self.p_scale == 0.0


def build_generator(spec: GeneratorSpec, rng: np.random.Generator,
                    dtype=np.float32) -> LayerStack:
    """Dense projection block, then transposed-conv hidden blocks, then the
    tanh output block. Dropout goes at the end of each hidden block per the
    placement policy; the output block never gets dropout."""
    layers: list = []
    w0 = spec.hidden_widths[0]
    s0 = spec.base_hw

    def want_dropout(block_index: int) -> bool:
        if spec.placement == "none":
            return False
        if spec.placement == "first-hidden-only":
            return block_index == 0
        return True

    # hidden block 0: project + reshape + BN + relu
    layers += [Dense(spec.latent_dim, w0 * s0 * s0, rng, dtype),
               Reshape((w0, s0, s0)),
               BatchNorm2d(w0, dtype=dtype),
               Activation("relu")]
    if want_dropout(0):
        layers.append(Dropout(spec.dropout))

    prev = w0
    for b, width in enumerate(spec.hidden_widths[1:], start=1):
        layers += [ConvTranspose2d(prev, width, 4, 2, 1, rng, dtype),
                   BatchNorm2d(width, dtype=dtype),
                   Activation("relu")]
        if want_dropout(b):
            layers.append(Dropout(spec.dropout))
        prev = width

    # output block: transposed conv + tanh, no dropout
    layers += [ConvTranspose2d(prev, spec.image_channels, 4, 2, 1, rng, dtype),
               Activation("tanh")]
    return LayerStack(layers)


def build_discriminator(spec: DiscriminatorSpec, rng: np.random.Generator,
                        dtype=np.float32) -> LayerStack:
    layers: list = []
    prev = spec.image_channels
    for b, width in enumerate(spec.hidden_widths):
        layers.append(Conv2d(prev, width, 4, 2, 1, rng, dtype))
        if b > 0 or spec.batchnorm_first:
            layers.append(BatchNorm2d(width, dtype=dtype))
        layers.append(Activation("leaky-relu", spec.leaky_slope))
        prev = width
    # output block: full-extent conv down to 1x1, then sigmoid
    layers += [Conv2d(prev, 1, spec.final_hw, 1, 0, rng, dtype),
               Activation("sigmoid")]
    return LayerStack(layers)


def dropout_overrides_for(gen: LayerStack, cfg: GenerationConfig) -> dict:
    """Per-dropout-layer overrides realizing cfg on an already-built stack."""
    overrides: dict[int, object] = {}
    n = len(gen.dropout_layers())
    for i in range(n):
        active = (i == 0) if cfg.placement == "first-hidden-only" else True
        if cfg.is_noiseless or not active:
            overrides[i] = DROPOUT_DISABLED
        else:
            overrides[i] = gen.dropout_layers()[i].spec.with_generation(
                cfg.p_dropout, cfg.p_scale)
    return overrides


def generate(gen: LayerStack, z: Tensor, cfg: GenerationConfig,
             rng: np.random.Generator | None = None) -> Tensor:
    """Run the generator on a batch of latents.

    A zeroed cfg gives the unaltered deterministic g(z); otherwise
    generation-noise dropout is applied to the dropout layers selected by
    cfg.placement, drawing masks from `rng`.
    """
    overrides = dropout_overrides_for(gen, cfg)
    phase = "generation" if cfg.is_noiseless else "generation-noise"
    if phase == "generation-noise" and rng is None:
        raise ValueError("generation-noise needs an rng for mask sampling")
    return gen.forward(z, phase, rng, dropout_overrides=overrides)


def generator_spec_to_dict(spec: GeneratorSpec) -> dict:
    d = asdict(spec)
    d["hidden_widths"] = list(spec.hidden_widths)
    return d


def generator_spec_from_dict(d: dict) -> GeneratorSpec:
    d = dict(d)
    d["hidden_widths"] = tuple(d["hidden_widths"])
    d["dropout"] = DropoutSpec(**d["dropout"])
    return GeneratorSpec(**d)


def discriminator_spec_to_dict(spec: DiscriminatorSpec) -> dict:
    d = asdict(spec)
    d["hidden_widths"] = list(spec.hidden_widths)
    return d


def discriminator_spec_from_dict(d: dict) -> DiscriminatorSpec:
    d = dict(d)
    d["hidden_widths"] = tuple(d["hidden_widths"])
    return DiscriminatorSpec(**d)
