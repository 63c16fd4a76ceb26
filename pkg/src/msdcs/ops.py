"""Dense-tensor layer set with hand-specified backward passes, plus Adam.

Tensors are 4-D numpy arrays laid out (batch, channels, height, width);
the live pipeline runs float32 while gradient checks may pass float64
through the same code paths. Convolution is cross-correlation (no kernel
flip). Every forward here has an explicit adjoint; there is no autodiff
graph.
"""

from dataclasses import dataclass, field

import numpy as np

from . import backend
from .errors import ShapeError


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ShapeError(msg)


def check_tensor(t: np.ndarray, name: str = "tensor") -> np.ndarray:
    _require(isinstance(t, np.ndarray) and t.ndim == 4,
             f"{name} must be a 4-D (batch, channels, height, width) array")
    return t


@dataclass(frozen=True)
class ConvSpec:
    """Static description of one convolution layer."""
    out_channels: int
    in_channels: int
    kernel_h: int
    kernel_w: int
    stride: int = 1
    padding: int = 0
    has_bias: bool = False

    def __post_init__(self):
        _require(self.stride >= 1, f"stride must be >= 1, got {self.stride}")
        _require(self.padding >= 0, f"padding must be >= 0, got {self.padding}")
        _require(self.kernel_h >= 1 and self.kernel_w >= 1,
                 f"kernel dims must be >= 1, got {self.kernel_h}x{self.kernel_w}")
        _require(self.out_channels >= 1 and self.in_channels >= 1,
                 "channel counts must be >= 1")

    @classmethod
    def for_weight(cls, w: np.ndarray, stride: int = 1, padding: int = 0,
                   has_bias: bool = False) -> "ConvSpec":
        return cls(w.shape[0], w.shape[1], w.shape[2], w.shape[3],
                   stride=stride, padding=padding, has_bias=has_bias)

    def out_hw(self, h: int, w: int) -> tuple[int, int]:
        oh = (h + 2 * self.padding - self.kernel_h) // self.stride + 1
        ow = (w + 2 * self.padding - self.kernel_w) // self.stride + 1
        _require(oh >= 1, f"output height {oh} < 1 for input height {h}")
        _require(ow >= 1, f"output width {ow} < 1 for input width {w}")
        return oh, ow


def _check_conv_args(x, weight, spec):
    check_tensor(x, "conv2d input")
    _require(weight.shape == (spec.out_channels, spec.in_channels,
                              spec.kernel_h, spec.kernel_w),
             f"weight shape {weight.shape} does not match spec "
             f"({spec.out_channels}, {spec.in_channels}, {spec.kernel_h}, {spec.kernel_w})")
    _require(x.shape[1] == spec.in_channels,
             f"input has {x.shape[1]} channels, spec expects {spec.in_channels}")


def _pad(x: np.ndarray, p: int) -> np.ndarray:
    if p == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))


def conv2d(x: np.ndarray, weight: np.ndarray, bias: np.ndarray | None,
           spec: ConvSpec) -> np.ndarray:
    """Cross-correlate x with weight; symmetric zero padding, floor-divided stride."""
    _check_conv_args(x, weight, spec)
    if spec.has_bias:
        _require(bias is not None and bias.shape == (spec.out_channels,),
                 f"bias must have shape ({spec.out_channels},)")
    else:
        _require(bias is None, "bias given but spec.has_bias is false")
    spec.out_hw(x.shape[2], x.shape[3])
    y = backend.conv_impl().conv_forward(_pad(x, spec.padding), weight, spec.stride)
    if spec.has_bias:
        y += bias.reshape(1, -1, 1, 1)
    return y


def conv2d_backward(x: np.ndarray, weight: np.ndarray, spec: ConvSpec,
                    grad_out: np.ndarray):
    """Adjoints of conv2d: returns (grad_input, grad_weight, grad_bias)."""
    _check_conv_args(x, weight, spec)
    oh, ow = spec.out_hw(x.shape[2], x.shape[3])
    _require(grad_out.shape == (x.shape[0], spec.out_channels, oh, ow),
             f"grad_out shape {grad_out.shape} does not match conv output "
             f"({x.shape[0]}, {spec.out_channels}, {oh}, {ow})")
    impl = backend.conv_impl()
    p = spec.padding
    xp = _pad(x, p)
    gw = impl.conv_backward_weight(xp, grad_out, spec.stride,
                                   spec.kernel_h, spec.kernel_w)
    gxp = impl.conv_backward_input(weight, grad_out, spec.stride,
                                   xp.shape[2], xp.shape[3])
    gx = gxp[:, :, p:p + x.shape[2], p:p + x.shape[3]]
    gb = grad_out.sum(axis=(0, 2, 3)) if spec.has_bias else None
    return np.ascontiguousarray(gx), gw, gb


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0)


def relu_backward(x: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
    """Pass grad where x > 0; the subgradient at exactly 0 is 0."""
    _require(x.shape == grad_out.shape,
             f"grad_out shape {grad_out.shape} != input shape {x.shape}")
    return np.where(x > 0, grad_out, 0).astype(grad_out.dtype, copy=False)


def concat_channels(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    check_tensor(a, "concat lhs")
    check_tensor(b, "concat rhs")
    _require(a.shape[0] == b.shape[0], f"batch mismatch {a.shape[0]} vs {b.shape[0]}")
    _require(a.shape[2:] == b.shape[2:],
             f"spatial mismatch {a.shape[2:]} vs {b.shape[2:]}")
    return np.concatenate([a, b], axis=1)


def split_channels(t: np.ndarray, c_a: int):
    check_tensor(t, "split input")
    _require(0 <= c_a <= t.shape[1], f"split point {c_a} outside 0..{t.shape[1]}")
    return t[:, :c_a].copy(), t[:, c_a:].copy()


def space_to_depth(t: np.ndarray, block: int) -> np.ndarray:
    """(n,c,h,w) -> (n, c*block^2, h/block, w/block); block entries ordered
    channel-major, then row-major within the block."""
    check_tensor(t, "space_to_depth input")
    n, c, h, w = t.shape
    _require(h % block == 0, f"height {h} not divisible by block {block}")
    _require(w % block == 0, f"width {w} not divisible by block {block}")
    x = t.reshape(n, c, h // block, block, w // block, block)
    x = x.transpose(0, 1, 3, 5, 2, 4)
    return np.ascontiguousarray(x).reshape(n, c * block * block, h // block, w // block)


def depth_to_space(t: np.ndarray, block: int) -> np.ndarray:
    """Exact inverse of space_to_depth (and its backward)."""
    check_tensor(t, "depth_to_space input")
    n, c, h, w = t.shape
    _require(c % (block * block) == 0,
             f"channels {c} not divisible by block^2 = {block * block}")
    co = c // (block * block)
    x = t.reshape(n, co, block, block, h, w)
    x = x.transpose(0, 1, 4, 2, 5, 3)
    return np.ascontiguousarray(x).reshape(n, co, h * block, w * block)


@dataclass
class AdamHyper:
    """Adam hyperparameters; defaults are the customary reference values."""
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def __post_init__(self):
        if not self.lr > 0:
            raise ValueError(f"lr must be > 0, got {self.lr}")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError("beta1/beta2 must lie in (0, 1)")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be > 0")


class Parameter:
    """A named tensor with its gradient accumulator and Adam moment state."""

    __slots__ = ("name", "value", "grad", "adam_m", "adam_v", "step_count")

    def __init__(self, name: str, value: np.ndarray):
        self.name = name
        self.value = value
        self.grad = np.zeros_like(value)
        self.adam_m = np.zeros_like(value)
        self.adam_v = np.zeros_like(value)
        self.step_count = 0

    def zero_grad(self) -> None:
        self.grad[...] = 0

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.value.shape})"


def adam_step(p: Parameter, hyper: AdamHyper) -> Parameter:
    """One bias-corrected Adam update; zeroes the gradient afterwards."""
    g = p.grad
    if not np.isfinite(g).all():
        raise ValueError(f"non-finite gradient in parameter {p.name!r}")
    t = p.step_count + 1
    p.adam_m *= hyper.beta1
    p.adam_m += (1.0 - hyper.beta1) * g
    p.adam_v *= hyper.beta2
    p.adam_v += (1.0 - hyper.beta2) * (g * g)
    m_hat = p.adam_m / (1.0 - hyper.beta1 ** t)
    v_hat = p.adam_v / (1.0 - hyper.beta2 ** t)
    p.value -= hyper.lr * m_hat / (np.sqrt(v_hat) + hyper.epsilon)
    p.step_count = t
    p.zero_grad()
    return p
