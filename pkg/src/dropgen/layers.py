"""Layer abstractions: dense, conv, batchnorm, activations, and dropout.

The dropout layer is the heart of the project. It supports three phases:

* ``train``      -- the usual regularizer (standard or inverted formulation)
* ``generation`` -- plain inference (scale by keep-prob for standard mode,
                    identity for inverted mode); consumes no randomness
* ``generation-noise`` -- dropout applied while generating, with the drop
                    probability and the scale probability controlled
                    independently: out = mask / (1 - p_scale) * x where
                    mask ~ Bernoulli(keep = 1 - p_dropout)
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .tensor import Tensor, ShapeError, conv2d, conv2d_transpose

PHASES = ("train", "generation", "generation-noise")


@dataclass(frozen=True)
class DropoutSpec:
    """Dropout configuration: training probability plus the two independently
    controllable generation-phase probabilities."""

    mode: str = "inverted"            # "standard" | "inverted"
    p_train: float = 0.0
    p_dropout: float = 0.0            # generation-phase drop probability
    p_scale: float = 0.0              # generation-phase scale probability
    rng_stream_id: str = "dropout"

    def __post_init__(self):
        if self.mode not in ("standard", "inverted"):
            raise ValueError(f"unknown dropout mode {self.mode!r}")
        for name in ("p_train", "p_dropout", "p_scale"):
            p = getattr(self, name)
            if not (0.0 <= p < 1.0):
                raise ValueError(f"{name}={p} must lie in [0, 1)")

    @property
    def q_train(self) -> float:
        return 1.0 - self.p_train

    @property
    def q_scale(self) -> float:
        return 1.0 - self.p_scale

    def with_generation(self, p_dropout: float, p_scale: float) -> "DropoutSpec":
        return replace(self, p_dropout=p_dropout, p_scale=p_scale)


@dataclass
class DropoutMask:
    """A sampled binary keep-mask, with enough provenance to audit it."""

    values: np.ndarray                # entries in {0, 1}
    keep_probability: float
    stream_id: str

    @property
    def zero_fraction(self) -> float:
        return float(1.0 - self.values.mean())


def sample_mask(shape, drop_p: float, rng: np.random.Generator,
                stream_id: str = "dropout", dtype=np.float32) -> DropoutMask:
    values = (rng.random(shape) >= drop_p).astype(dtype)
    return DropoutMask(values, 1.0 - drop_p, stream_id)


def dropout_forward(x: Tensor, spec: DropoutSpec, phase: str,
                    rng: np.random.Generator | None = None):
    """Apply dropout in the given phase. Returns (output, mask-or-None)."""
    if phase not in PHASES:
        raise ValueError(f"unknown phase {phase!r}")

    if phase == "train":
        if spec.p_train == 0.0 and spec.mode == "inverted":
            return x, None
        mask = sample_mask(x.shape, spec.p_train, rng, spec.rng_stream_id, x.dtype)
        out = x * Tensor(mask.values)
        if spec.mode == "inverted":
            out = out * (1.0 / spec.q_train)
        return out, mask

    if phase == "generation":
        if spec.mode == "standard":
            return x * spec.q_train, None
        return x, None

    # generation-noise: always on the inverted basis
    mask = sample_mask(x.shape, spec.p_dropout, rng, spec.rng_stream_id, x.dtype)
    out = x * Tensor(mask.values) * (1.0 / spec.q_scale)
    return out, mask


# -- layers ---------------------------------------------------------------


class Layer:
    """Base: stateless forward unless noted; params() yields (name, Tensor)."""

    def params(self):
        return []

    def forward(self, x: Tensor, phase: str, rng=None) -> Tensor:
        raise NotImplementedError


class Dense(Layer):
    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator,
                 dtype=np.float32):
        scale = np.sqrt(1.0 / in_features)
        self.weight = Tensor(rng.normal(0, scale, (in_features, out_features)).astype(dtype),
                             requires_grad=True)
        self.bias = Tensor(np.zeros(out_features, dtype=dtype), requires_grad=True)

    def params(self):
        return [("weight", self.weight), ("bias", self.bias)]

    def forward(self, x, phase, rng=None):
        return x @ self.weight + self.bias


class Conv2d(Layer):
    def __init__(self, in_ch: int, out_ch: int, kernel: int, stride: int, padding: int,
                 rng: np.random.Generator, dtype=np.float32):
        fan_in = in_ch * kernel * kernel
        self.weight = Tensor(
            rng.normal(0, np.sqrt(1.0 / fan_in), (out_ch, in_ch, kernel, kernel)).astype(dtype),
            requires_grad=True)
        self.bias = Tensor(np.zeros(out_ch, dtype=dtype), requires_grad=True)
        self.stride, self.padding = stride, padding

    def params(self):
        return [("weight", self.weight), ("bias", self.bias)]

    def forward(self, x, phase, rng=None):
        y = conv2d(x, self.weight, self.stride, self.padding)
        return y + self.bias.reshape(1, -1, 1, 1)


class ConvTranspose2d(Layer):
    def __init__(self, in_ch: int, out_ch: int, kernel: int, stride: int, padding: int,
                 rng: np.random.Generator, dtype=np.float32):
        fan_in = in_ch * kernel * kernel
        self.weight = Tensor(
            rng.normal(0, np.sqrt(1.0 / fan_in), (in_ch, out_ch, kernel, kernel)).astype(dtype),
            requires_grad=True)
        self.bias = Tensor(np.zeros(out_ch, dtype=dtype), requires_grad=True)
        self.stride, self.padding = stride, padding

    def params(self):
        return [("weight", self.weight), ("bias", self.bias)]

    def forward(self, x, phase, rng=None):
        y = conv2d_transpose(x, self.weight, self.stride, self.padding)
        return y + self.bias.reshape(1, -1, 1, 1)


class BatchNorm2d(Layer):
    """Per-channel batchnorm over [N,C,H,W] (or [N,C] for dense features).

    Train phase normalizes by batch statistics and updates the running
    stats; generation phases normalize by the stored running stats.
    """

    def __init__(self, channels: int, eps: float = 1e-5, momentum: float = 0.1,
                 dtype=np.float32):
        self.gamma = Tensor(np.ones(channels, dtype=dtype), requires_grad=True)
        self.beta = Tensor(np.zeros(channels, dtype=dtype), requires_grad=True)
        self.running_mean = np.zeros(channels, dtype=dtype)
        self.running_var = np.ones(channels, dtype=dtype)
        self.eps, self.momentum = eps, momentum

    def params(self):
        return [("gamma", self.gamma), ("beta", self.beta)]

    def buffers(self):
        return [("running_mean", self.running_mean), ("running_var", self.running_var)]

    def set_buffers(self, mean: np.ndarray, var: np.ndarray):
        self.running_mean = mean.astype(self.running_mean.dtype)
        self.running_var = var.astype(self.running_var.dtype)

    def _param_shape(self, x):
        return (1, -1) + (1,) * (x.data.ndim - 2)

    def forward(self, x, phase, rng=None):
        shp = self._param_shape(x)
        axes = (0,) + tuple(range(2, x.data.ndim))
        if phase == "train":
            mu = x.mean(axis=axes, keepdims=True)
            centered = x - mu
            var = (centered * centered).mean(axis=axes, keepdims=True)
            xhat = centered / (var + self.eps).sqrt()
            m = self.momentum
            batch_mean = mu.data.reshape(-1)
            n = x.data.size / x.data.shape[1]
            unbiased = var.data.reshape(-1) * (n / max(n - 1, 1))
            self.running_mean = ((1 - m) * self.running_mean + m * batch_mean).astype(
                self.running_mean.dtype)
            self.running_var = ((1 - m) * self.running_var + m * unbiased).astype(
                self.running_var.dtype)
        else:
            mu = Tensor(self.running_mean.reshape(shp).astype(x.dtype))
            sd = Tensor(np.sqrt(self.running_var.reshape(shp).astype(x.dtype) + self.eps))
            xhat = (x - mu) / sd
        return xhat * self.gamma.reshape(shp) + self.beta.reshape(shp)


class Activation(Layer):
    KINDS = ("relu", "leaky-relu", "sigmoid", "tanh")

    def __init__(self, kind: str, slope: float | None = None):
        if kind not in self.KINDS:
            raise ValueError(f"unknown activation {kind!r}")
        if kind == "leaky-relu" and slope is None:
            raise ValueError("leaky-relu needs a slope")
        self.kind, self.slope = kind, slope

    def forward(self, x, phase, rng=None):
        if self.kind == "relu":
            return x.relu()
        if self.kind == "leaky-relu":
            return x.leaky_relu(self.slope)
        if self.kind == "sigmoid":
            return x.sigmoid()
        return x.tanh()


def activation(kind: str, x: Tensor, slope: float | None = None) -> Tensor:
    return Activation(kind, slope).forward(x, "generation")


class Dropout(Layer):
    def __init__(self, spec: DropoutSpec):
        self.spec = spec
        self.last_mask: DropoutMask | None = None

    def forward(self, x, phase, rng=None, spec_override: DropoutSpec | None = None):
        spec = spec_override if spec_override is not None else self.spec
        out, mask = dropout_forward(x, spec, phase, rng)
        self.last_mask = mask
        return out


class Reshape(Layer):
    def __init__(self, shape: tuple):
        self.shape = shape  # per-sample shape, batch dim preserved

    def forward(self, x, phase, rng=None):
        return x.reshape((x.shape[0],) + tuple(self.shape))


# -- the stack ------------------------------------------------------------

DROPOUT_DISABLED = "disabled"


class LayerStack:
    """Ordered layer sequence with named parameters.

    ``dropout_overrides`` maps the ordinal of a dropout layer (0 for the
    first dropout layer in the stack, 1 for the second, ...) to either a
    replacement DropoutSpec or DROPOUT_DISABLED. A disabled dropout layer
    acts as the identity and consumes no randomness.
    """

    def __init__(self, layers: list[Layer]):
        self.layers = layers

    def named_params(self) -> dict[str, Tensor]:
        out = {}
        for i, layer in enumerate(self.layers):
            for name, p in layer.params():
                out[f"layer{i}.{name}"] = p
        return out

    def named_buffers(self) -> dict[str, np.ndarray]:
        out = {}
        for i, layer in enumerate(self.layers):
            if isinstance(layer, BatchNorm2d):
                for name, b in layer.buffers():
                    out[f"layer{i}.{name}"] = b
        return out

    def dropout_layers(self) -> list[Dropout]:
        return [l for l in self.layers if isinstance(l, Dropout)]

    def forward(self, x: Tensor, phase: str, rng: np.random.Generator | None = None,
                dropout_overrides: dict[int, object] | None = None) -> Tensor:
        if dropout_overrides:
            n_drop = len(self.dropout_layers())
            bad = [k for k in dropout_overrides if not (0 <= k < n_drop)]
            if bad:
                raise ValueError(f"dropout overrides {bad} reference missing layers "
                                 f"(stack has {n_drop} dropout layers)")
        drop_idx = 0
        for i, layer in enumerate(self.layers):
            try:
                if isinstance(layer, Dropout):
                    ov = (dropout_overrides or {}).get(drop_idx)
                    drop_idx += 1
                    if ov is DROPOUT_DISABLED:
                        if layer.spec.mode == "standard":
                            x = layer.forward(x, "generation", None)
                        # inverted/generation is the identity: skip entirely
                        continue
                    x = layer.forward(x, phase, rng,
                                      spec_override=ov if isinstance(ov, DropoutSpec) else None)
                else:
                    x = layer.forward(x, phase, rng)
            except ShapeError as e:
                raise ShapeError(f"layer {i} ({type(layer).__name__}): {e}") from e
        return x

    def zero_grads(self):
        for p in self.named_params().values():
            p.grad = None
