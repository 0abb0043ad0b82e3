"""Minimal dense tensor library with reverse-mode autodiff.

Backed by numpy arrays. Covers exactly what the GAN stacks need:
elementwise arithmetic, matmul, 2D convolution / transposed convolution,
reductions, and the activation functions. Gradients are computed by
recording a graph during the forward pass and walking it in reverse
topological order from a scalar loss.

Convention: image tensors are laid out [N, C, H, W], row-major.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class ShapeError(ValueError):
    """Raised when operand shapes do not compose."""


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum `grad` down to `shape` (reverse of numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    # leading axes that were added by broadcasting
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    # axes that were size 1 and got expanded
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    """An n-d array plus the bookkeeping for reverse-mode differentiation."""

    __slots__ = ("data", "grad", "requires_grad", "_backward", "_prev", "_op",
                 "_grad_shared")

    def __init__(self, data, requires_grad: bool = False, _prev=(), _op: str = ""):
        arr = np.asarray(data)
        if not np.issubdtype(arr.dtype, np.floating):
            arr = arr.astype(np.float32)
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._backward = None
        self._prev = _prev
        self._op = _op
        self._grad_shared = False

    # -- constructors -------------------------------------------------

    @staticmethod
    def zeros(shape, dtype=np.float32, requires_grad=False) -> "Tensor":
        return Tensor(np.zeros(shape, dtype=dtype), requires_grad)

    @staticmethod
    def ones(shape, dtype=np.float32, requires_grad=False) -> "Tensor":
        return Tensor(np.ones(shape, dtype=dtype), requires_grad)

    # -- plumbing -----------------------------------------------------

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def __repr__(self):
        return f"Tensor(shape={self.shape}, op={self._op!r}, grad={self.requires_grad})"

    def _as_tensor(self, other) -> "Tensor":
        if isinstance(other, Tensor):
            return other
        return Tensor(np.asarray(other, dtype=self.data.dtype))

    def _accum(self, grad: np.ndarray):
        # Contributions only arrive before this node's own _backward runs
        # (reverse topological order), so the first one may alias its
        # producer's buffer; a second contribution forces a fresh array.
        grad = _unbroadcast(grad, self.data.shape)
        if self.grad is None:
            self.grad = grad
            self._grad_shared = True
        elif self._grad_shared:
            self.grad = self.grad + grad
            self._grad_shared = False
        else:
            self.grad += grad

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    # -- elementwise arithmetic --------------------------------------

    def __add__(self, other):
        other = self._as_tensor(other)
        out = Tensor(self.data + other.data, True, (self, other), "add")

        def bwd():
            self._accum(out.grad)
            other._accum(out.grad)

        out._backward = bwd
        return out

    __radd__ = __add__

    def __neg__(self):
        out = Tensor(-self.data, True, (self,), "neg")
        out._backward = lambda: self._accum(-out.grad)
        return out

    def __sub__(self, other):
        other = self._as_tensor(other)
        out = Tensor(self.data - other.data, True, (self, other), "sub")

        def bwd():
            self._accum(out.grad)
            other._accum(-out.grad)

        out._backward = bwd
        return out

    def __rsub__(self, other):
        return self._as_tensor(other) - self

    def __mul__(self, other):
        other = self._as_tensor(other)
        out = Tensor(self.data * other.data, True, (self, other), "mul")

        def bwd():
            self._accum(out.grad * other.data)
            other._accum(out.grad * self.data)

        out._backward = bwd
        return out

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._as_tensor(other)
        if np.any(other.data == 0):
            raise ZeroDivisionError("division by a tensor containing zero")
        out = Tensor(self.data / other.data, True, (self, other), "div")

        def bwd():
            self._accum(out.grad / other.data)
            other._accum(-out.grad * self.data / (other.data * other.data))

        out._backward = bwd
        return out

    def __rtruediv__(self, other):
        return self._as_tensor(other) / self

    # -- shape ops ----------------------------------------------------

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        old = self.data.shape
        out = Tensor(self.data.reshape(shape), True, (self,), "reshape")
        out._backward = lambda: self._accum(out.grad.reshape(old))
        return out

    def transpose(self, *axes) -> "Tensor":
        axes = axes or tuple(reversed(range(self.data.ndim)))
        inv = np.argsort(axes)
        out = Tensor(self.data.transpose(axes), True, (self,), "transpose")
        out._backward = lambda: self._accum(out.grad.transpose(inv))
        return out

    # -- reductions ---------------------------------------------------

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        out = Tensor(self.data.sum(axis=axis, keepdims=keepdims), True, (self,), "sum")

        def bwd():
            g = out.grad
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            self._accum(np.broadcast_to(g, self.data.shape))

        out._backward = bwd
        return out

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        n = self.data.size if axis is None else np.prod(
            [self.data.shape[a] for a in np.atleast_1d(axis)]
        )
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / float(n))

    # -- pointwise functions ------------------------------------------

    def sqrt(self) -> "Tensor":
        out = Tensor(np.sqrt(self.data), True, (self,), "sqrt")
        out._backward = lambda: self._accum(out.grad * 0.5 / out.data)
        return out

    def log(self) -> "Tensor":
        out = Tensor(np.log(self.data), True, (self,), "log")
        out._backward = lambda: self._accum(out.grad / self.data)
        return out

    def exp(self) -> "Tensor":
        out = Tensor(np.exp(self.data), True, (self,), "exp")
        out._backward = lambda: self._accum(out.grad * out.data)
        return out

    def relu(self) -> "Tensor":
        out = Tensor(np.maximum(self.data, 0), True, (self,), "relu")
        out._backward = lambda: self._accum(out.grad * (self.data > 0))
        return out

    def leaky_relu(self, slope: float = 0.2) -> "Tensor":
        out = Tensor(np.where(self.data > 0, self.data, slope * self.data),
                     True, (self,), "leaky_relu")
        out._backward = lambda: self._accum(
            np.where(self.data > 0, out.grad, self.data.dtype.type(slope) * out.grad))
        return out

    def sigmoid(self) -> "Tensor":
        s = 1.0 / (1.0 + np.exp(-self.data))
        out = Tensor(s, True, (self,), "sigmoid")
        out._backward = lambda: self._accum(out.grad * out.data * (1 - out.data))
        return out

    def tanh(self) -> "Tensor":
        out = Tensor(np.tanh(self.data), True, (self,), "tanh")
        out._backward = lambda: self._accum(out.grad * (1 - out.data * out.data))
        return out

    # -- matmul -------------------------------------------------------

    def matmul(self, other: "Tensor") -> "Tensor":
        other = self._as_tensor(other)
        if self.data.ndim != 2 or other.data.ndim != 2:
            raise ShapeError(f"matmul needs 2-d operands, got {self.shape} and {other.shape}")
        if self.data.shape[1] != other.data.shape[0]:
            raise ShapeError(f"matmul inner dims disagree: {self.shape} @ {other.shape}")
        out = Tensor(self.data @ other.data, True, (self, other), "matmul")

        def bwd():
            self._accum(out.grad @ other.data.T)
            other._accum(self.data.T @ out.grad)

        out._backward = bwd
        return out

    __matmul__ = matmul

    # -- backward -----------------------------------------------------

    def backward(self):
        if self.data.size != 1:
            raise ValueError(f"backward() needs a scalar loss, got shape {self.shape}")
        topo: list[Tensor] = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._prev:
                if id(p) not in seen:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward()


# -- the op-kind dispatch required by the public elementwise surface --

_ELEMENTWISE = {
    "add": Tensor.__add__,
    "sub": Tensor.__sub__,
    "mul": Tensor.__mul__,
    "div": Tensor.__truediv__,
}


def elementwise(op_kind: str, a: Tensor, b) -> Tensor:
    """Componentwise add/sub/mul/div; `b` may be a tensor of equal shape or a scalar."""
    if op_kind not in _ELEMENTWISE:
        raise ValueError(f"unknown elementwise op {op_kind!r}")
    if isinstance(b, Tensor) and b.shape != a.shape and b.data.size != 1:
        raise ShapeError(f"elementwise {op_kind}: shapes {a.shape} and {b.shape} differ")
    return _ELEMENTWISE[op_kind](a, b)


# -- convolution ---------------------------------------------------------


def _conv_out_size(size: int, k: int, stride: int, padding: int) -> int:
    return (size + 2 * padding - k) // stride + 1


def _im2col(x: np.ndarray, kh: int, kw: int, stride: int, padding: int) -> np.ndarray:
    """[N,C,H,W] -> columns [C*kh*kw, N*Ho*Wo]."""
    n, c, h, w = x.shape
    if padding:
        x = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    ho = _conv_out_size(h, kh, stride, padding)
    wo = _conv_out_size(w, kw, stride, padding)
    # windows: [N, C, Ho, Wo, kh, kw]
    win = np.lib.stride_tricks.sliding_window_view(x, (kh, kw), axis=(2, 3))
    win = win[:, :, ::stride, ::stride]
    cols = win.transpose(1, 4, 5, 0, 2, 3).reshape(c * kh * kw, n * ho * wo)
    return np.ascontiguousarray(cols)


def _col2im(cols: np.ndarray, x_shape: tuple, kh: int, kw: int,
            stride: int, padding: int) -> np.ndarray:
    """Adjoint of _im2col: scatter-add columns back to [N,C,H,W]."""
    n, c, h, w = x_shape
    hp, wp = h + 2 * padding, w + 2 * padding
    ho = _conv_out_size(h, kh, stride, padding)
    wo = _conv_out_size(w, kw, stride, padding)
    out = np.zeros((n, c, hp, wp), dtype=cols.dtype)
    cols = cols.reshape(c, kh, kw, n, ho, wo)
    for i in range(kh):
        hi = i + stride * ho
        for j in range(kw):
            wj = j + stride * wo
            out[:, :, i:hi:stride, j:wj:stride] += cols[:, i, j].transpose(1, 0, 2, 3)
    if padding:
        out = out[:, :, padding:hp - padding, padding:wp - padding]
    return out


def conv2d(x: Tensor, kernel: Tensor, stride: int = 1, padding: int = 0) -> Tensor:
    """2D convolution (cross-correlation): [N,C,H,W] * [F,C,kh,kw] -> [N,F,Ho,Wo]."""
    n, c, h, w = x.shape
    f, ck, kh, kw = kernel.shape
    if ck != c:
        raise ShapeError(f"conv2d channel mismatch: input {c}, kernel {ck}")
    ho = _conv_out_size(h, kh, stride, padding)
    wo = _conv_out_size(w, kw, stride, padding)
    if ho <= 0 or wo <= 0:
        raise ShapeError(f"conv2d output size {ho}x{wo} not positive "
                         f"(input {h}x{w}, kernel {kh}x{kw}, stride {stride}, pad {padding})")
    cols = _im2col(x.data, kh, kw, stride, padding)
    k2 = kernel.data.reshape(f, c * kh * kw)
    y = (k2 @ cols).reshape(f, n, ho * wo).transpose(1, 0, 2).reshape(n, f, ho, wo)
    out = Tensor(y, True, (x, kernel), "conv2d")

    def bwd():
        g2 = out.grad.reshape(n, f, ho * wo).transpose(1, 0, 2).reshape(f, n * ho * wo)
        kernel._accum((g2 @ cols.T).reshape(kernel.shape))
        x._accum(_col2im(k2.T @ g2, x.shape, kh, kw, stride, padding))

    out._backward = bwd
    return out


def conv2d_transpose(x: Tensor, kernel: Tensor, stride: int = 1, padding: int = 0) -> Tensor:
    """Transposed 2D convolution: [N,F,H,W] * [F,C,kh,kw] -> [N,C,Ho,Wo].

    Forward is exactly the input-gradient of conv2d with the same kernel and
    geometry, so Ho = (H-1)*stride - 2*padding + kh.
    """
    n, f, h, w = x.shape
    fk, c, kh, kw = kernel.shape
    if fk != f:
        raise ShapeError(f"conv2d_transpose channel mismatch: input {f}, kernel {fk}")
    ho = (h - 1) * stride - 2 * padding + kh
    wo = (w - 1) * stride - 2 * padding + kw
    if ho <= 0 or wo <= 0:
        raise ShapeError(f"conv2d_transpose output size {ho}x{wo} not positive")
    out_shape = (n, c, ho, wo)
    k2 = kernel.data.reshape(f, c * kh * kw)
    x2 = x.data.reshape(n, f, h * w).transpose(1, 0, 2).reshape(f, n * h * w)
    y = _col2im(k2.T @ x2, out_shape, kh, kw, stride, padding)
    out = Tensor(y, True, (x, kernel), "conv2d_transpose")

    def bwd():
        gcols = _im2col(out.grad, kh, kw, stride, padding)
        kernel._accum((x2 @ gcols.T).reshape(kernel.shape))
        gx = (k2 @ gcols).reshape(f, n, h * w).transpose(1, 0, 2).reshape(x.shape)
        x._accum(gx)

    out._backward = bwd
    return out


# -- gradient collection -------------------------------------------------


@dataclass
class GradRecord:
    """Gradient for one named trainable parameter."""
    parameter_id: str
    gradient: np.ndarray


def backward(loss: Tensor, named_params: dict[str, Tensor]) -> list[GradRecord]:
    """Run reverse-mode from a scalar loss; parameters the loss never touched
    get zero gradients."""
    loss.backward()
    records = []
    for name, p in named_params.items():
        g = p.grad if p.grad is not None else np.zeros_like(p.data)
        records.append(GradRecord(name, g))
    return records
