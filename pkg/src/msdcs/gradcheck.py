"""Finite-difference verification of every backward pass.

All checks run in float64 (the live pipeline is float32, but central
differences drown in noise there). A check passes when every gradient
entry agrees with its central difference within a relative error of
GRAD_TOL; tiny entries are compared against a floor tied to the largest
gradient magnitude so the metric stays meaningful near zero.
"""

from dataclasses import dataclass

import numpy as np

from . import model, ops, training, wavelet
from .model import NetConfig, SamplingConfig
from .ops import ConvSpec

GRAD_TOL = 1e-3
_FD_EPS = 1e-5


@dataclass
class CheckResult:
    name: str
    max_rel_err: float
    tol: float = GRAD_TOL

    @property
    def passed(self) -> bool:
        return self.max_rel_err < self.tol


def finite_difference(f, x: np.ndarray) -> np.ndarray:
    """Central differences of scalar f with respect to every entry of x."""
    g = np.zeros_like(x, dtype=np.float64)
    flat = x.reshape(-1)
    gflat = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + _FD_EPS
        hi = f()
        flat[i] = orig - _FD_EPS
        lo = f()
        flat[i] = orig
        gflat[i] = (hi - lo) / (2.0 * _FD_EPS)
    return g


def max_rel_err(analytic: np.ndarray, numeric: np.ndarray) -> float:
    a = np.asarray(analytic, dtype=np.float64)
    b = np.asarray(numeric, dtype=np.float64)
    scale = max(np.max(np.abs(a), initial=0.0), np.max(np.abs(b), initial=0.0), 1e-8)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-3 * scale)
    return float(np.max(np.abs(a - b) / denom, initial=0.0))


def _rand(rng, *shape):
    return rng.standard_normal(shape).astype(np.float64)


def _away_from_zero(rng, *shape):
    """Samples with |x| in [0.1, 1.1]: keeps ReLU kinks away from FD steps."""
    x = rng.uniform(0.1, 1.1, size=shape)
    return (x * rng.choice([-1.0, 1.0], size=shape)).astype(np.float64)


def _check_conv(rng, name, spec, in_hw, with_bias):
    x = _rand(rng, 2, spec.in_channels, *in_hw)
    w = _rand(rng, spec.out_channels, spec.in_channels, spec.kernel_h, spec.kernel_w) * 0.5
    b = _rand(rng, spec.out_channels) * 0.1 if with_bias else None
    oh, ow = spec.out_hw(*in_hw)
    g = _rand(rng, 2, spec.out_channels, oh, ow)

    def loss():
        return float(np.sum(ops.conv2d(x, w, b, spec) * g))

    gx, gw, gb = ops.conv2d_backward(x, w, spec, g)
    errs = [max_rel_err(gx, finite_difference(loss, x)),
            max_rel_err(gw, finite_difference(loss, w))]
    if with_bias:
        errs.append(max_rel_err(gb, finite_difference(loss, b)))
    return CheckResult(name, max(errs))


def _check_relu(rng):
    x = _away_from_zero(rng, 2, 3, 4, 4)
    g = _rand(rng, 2, 3, 4, 4)

    def loss():
        return float(np.sum(ops.relu(x) * g))

    return CheckResult("relu", max_rel_err(ops.relu_backward(x, g),
                                           finite_difference(loss, x)))


def _check_concat(rng):
    a = _rand(rng, 1, 2, 4, 4)
    b = _rand(rng, 1, 3, 4, 4)
    g = _rand(rng, 1, 5, 4, 4)

    def loss():
        return float(np.sum(ops.concat_channels(a, b) * g))

    ga, gb = ops.split_channels(g, 2)
    err = max(max_rel_err(ga, finite_difference(loss, a)),
              max_rel_err(gb, finite_difference(loss, b)))
    return CheckResult("concat_channels", err)


def _check_space_depth(rng):
    x = _rand(rng, 1, 2, 4, 4)
    g = _rand(rng, 1, 8, 2, 2)

    def loss():
        return float(np.sum(ops.space_to_depth(x, 2) * g))

    err = max_rel_err(ops.depth_to_space(g, 2), finite_difference(loss, x))
    return CheckResult("space_to_depth", err)


def _check_dwt(rng):
    x = _rand(rng, 1, 2, 4, 4)
    g = _rand(rng, 1, 8, 2, 2)

    def loss():
        return float(np.sum(wavelet.dwt2(x) * g))

    return CheckResult("dwt2", max_rel_err(wavelet.dwt2_backward(g),
                                           finite_difference(loss, x)))


def _check_idwt(rng):
    x = _rand(rng, 1, 8, 2, 2)
    g = _rand(rng, 1, 2, 4, 4)

    def loss():
        return float(np.sum(wavelet.idwt2(x) * g))

    return CheckResult("idwt2", max_rel_err(wavelet.idwt2_backward(g),
                                            finite_difference(loss, x)))


def _check_mse(rng):
    y = _rand(rng, 2, 1, 4, 4)
    t = _rand(rng, 2, 1, 4, 4)

    def loss():
        return training.mse_loss(y, t)[0]

    _, grad = training.mse_loss(y, t)
    return CheckResult("mse_loss", max_rel_err(grad, finite_difference(loss, y)))


def _to_double(params):
    for p in params.named_parameters():
        p.value = p.value.astype(np.float64)
        p.grad = np.zeros_like(p.value)


def _small_model(rng_seed):
    sampling = SamplingConfig(block_size=2, subrate=0.3)
    net = NetConfig(enhance1_depth=3, enhance1_width=4,
                    mwcnn_levels=2, mwcnn_widths=(2, 3),
                    mwcnn_convs_per_level=2)
    params = model.init_params(sampling, net, rng_seed)
    # the branch heads start at zero in fresh models; give them nonzero
    # weights and biases here so every backward path carries signal
    rng = np.random.default_rng(rng_seed + 77)
    for p in params.named_parameters():
        if not p.value.any():
            p.value = rng.standard_normal(p.value.shape).astype(np.float32) * 0.3
    _to_double(params)
    return params


def _check_enhance1(rng):
    params = _small_model(7)
    x = _rand(rng, 1, 1, 8, 8)
    g = _rand(rng, 1, 1, 8, 8)

    def loss():
        y, _ = model._enhance1_fwd(x, params)
        return float(np.sum(y * g))

    for p in params.parameters(3):
        p.grad[...] = 0
    _, cache = model._enhance1_fwd(x, params)
    gx = model._enhance1_bwd(params, cache, g)
    errs = [max_rel_err(gx, finite_difference(loss, x))]
    for layer in params.enhance1:
        for p in layer.params():
            errs.append(max_rel_err(p.grad, finite_difference(loss, p.value)))
    return CheckResult("enhance1", max(errs))


def _check_enhance2(rng):
    params = _small_model(8)
    x = _rand(rng, 1, 1, 8, 8)
    g = _rand(rng, 1, 1, 8, 8)

    def loss():
        y, _ = model._enhance2_fwd(x, params)
        return float(np.sum(y * g))

    for p in params.parameters(3):
        p.grad[...] = 0
    _, cache = model._enhance2_fwd(x, params)
    gx = model._enhance2_bwd(params, cache, g)
    errs = [max_rel_err(gx, finite_difference(loss, x))]
    for block in params.enh2_enc + params.enh2_dec:
        for layer in block:
            for p in layer.params():
                errs.append(max_rel_err(p.grad, finite_difference(loss, p.value)))
    for p in params.enh2_final.params():
        errs.append(max_rel_err(p.grad, finite_difference(loss, p.value)))
    return CheckResult("enhance2", max(errs))


def _check_phase_objective(name, phase, seed):
    """End-to-end gradient of the training objective, sampling kernel included."""
    rng = np.random.default_rng(seed)
    params = _small_model(9)
    x = rng.random((1, 1, 8, 8))

    def loss():
        y, _ = model.run_forward(x, params, phase)
        return training.mse_loss(y, x)[0]

    for p in params.parameters(phase):
        p.grad[...] = 0
    y, cache = model.run_forward(x, params, phase)
    _, gy = training.mse_loss(y, x)
    model.run_backward(params, cache, gy)
    errs = []
    for p in params.parameters(phase):
        errs.append(max_rel_err(p.grad, finite_difference(loss, p.value)))
    return CheckResult(name, max(errs))


def run_all(seed: int = 0) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    results = [
        _check_conv(rng, "conv2d_3x3_pad1",
                    ConvSpec(4, 3, 3, 3, stride=1, padding=1, has_bias=True),
                    (4, 4), True),
        _check_conv(rng, "conv2d_stride2",
                    ConvSpec(3, 2, 2, 2, stride=2, padding=0), (5, 5), False),
        _check_conv(rng, "conv2d_1x1",
                    ConvSpec(5, 4, 1, 1), (3, 3), False),
        _check_relu(rng),
        _check_concat(rng),
        _check_space_depth(rng),
        _check_dwt(rng),
        _check_idwt(rng),
        _check_mse(rng),
        _check_enhance1(rng),
        _check_enhance2(rng),
        _check_phase_objective("phase1_objective", 1, seed),
        _check_phase_objective("phase3_objective", 3, seed + 1),
    ]
    return results
