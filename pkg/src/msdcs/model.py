"""Model assembly: wavelet-domain block sampling, direct initial
reconstruction, and the two enhancement stages.

The sampling front end is strictly linear (no bias, no activation): a
one-level Haar transform followed by a stride-n_B convolution whose m
kernels span all four bands of a block. Initial reconstruction is a 1x1
convolution producing every pixel of a block as a channel, rearranged to
the image grid. Enhancement stage 1 is a plain conv/ReLU residual net;
stage 2 is a small wavelet U-net with additive skips.

Forward passes come in two flavours: the plain functions (sample,
initial_reconstruct, ...) for inference, and run_forward/run_backward
which thread activation caches for training. Each layer's adjoint is
hand-written; there is no autodiff graph.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import ops, wavelet
from .errors import ShapeError
from .ops import ConvSpec, Parameter


def derive_measurement_count(r: float, n_B: int) -> int:
    """Measurements per block: round(r * 4 * n_B^2), half away from zero,
    clamped to [1, 4*n_B^2]."""
    if not 0 < r <= 1:
        raise ValueError(f"subrate must lie in (0, 1], got {r}")
    if n_B < 1:
        raise ValueError(f"block size must be >= 1, got {n_B}")
    full = 4 * n_B * n_B
    m = math.floor(r * full + 0.5)
    return min(max(m, 1), full)


@dataclass(frozen=True)
class SamplingConfig:
    block_size: int = 16
    subrate: float = 0.1

    def __post_init__(self):
        # pin to float32 so the value round-trips through model headers
        object.__setattr__(self, "subrate", float(np.float32(self.subrate)))
        derive_measurement_count(self.subrate, self.block_size)

    @property
    def m(self) -> int:
        return derive_measurement_count(self.subrate, self.block_size)

    @property
    def coeffs_per_block(self) -> int:
        return 4 * self.block_size * self.block_size

    @property
    def realized_subrate(self) -> float:
        return self.m / self.coeffs_per_block


@dataclass(frozen=True)
class NetConfig:
    enhance1_depth: int = 5
    enhance1_width: int = 64
    mwcnn_levels: int = 2
    mwcnn_widths: tuple[int, ...] = (32, 64)
    mwcnn_convs_per_level: int = 2

    def __post_init__(self):
        if self.enhance1_depth < 1 or self.enhance1_width < 1:
            raise ValueError("enhance1 depth and width must be >= 1")
        if self.mwcnn_levels < 1:
            raise ValueError("mwcnn_levels must be >= 1")
        if len(self.mwcnn_widths) != self.mwcnn_levels:
            raise ValueError(f"mwcnn_widths has {len(self.mwcnn_widths)} entries "
                             f"for {self.mwcnn_levels} levels")
        if any(w < 1 for w in self.mwcnn_widths) or self.mwcnn_convs_per_level < 1:
            raise ValueError("mwcnn widths and convs per level must be >= 1")


@dataclass
class ConvLayer:
    weight: Parameter
    bias: Parameter | None
    spec: ConvSpec

    def forward(self, x: np.ndarray) -> np.ndarray:
        b = self.bias.value if self.bias is not None else None
        return ops.conv2d(x, self.weight.value, b, self.spec)

    def backward(self, x: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
        gx, gw, gb = ops.conv2d_backward(x, self.weight.value, self.spec, grad_out)
        self.weight.grad += gw
        if self.bias is not None:
            self.bias.grad += gb
        return gx

    def params(self):
        yield self.weight
        if self.bias is not None:
            yield self.bias


class ModelParams:
    """All learnable parameters plus architecture config for one model."""

    def __init__(self, sampling_cfg: SamplingConfig, net_cfg: NetConfig,
                 sampling: ConvLayer, recon: ConvLayer,
                 enhance1: list[ConvLayer],
                 enh2_enc: list[list[ConvLayer]],
                 enh2_dec: list[list[ConvLayer]],
                 enh2_final: ConvLayer,
                 phase: int, seed: int):
        self.sampling_cfg = sampling_cfg
        self.net_cfg = net_cfg
        self.sampling = sampling
        self.recon = recon
        self.enhance1 = enhance1
        self.enh2_enc = enh2_enc
        self.enh2_dec = enh2_dec
        self.enh2_final = enh2_final
        self.phase = phase
        self.seed = seed
        names = [p.name for p in self.named_parameters()]
        if len(names) != len(set(names)):
            raise ValueError("duplicate parameter names in model")

    @property
    def n_B(self) -> int:
        return self.sampling_cfg.block_size

    @property
    def m(self) -> int:
        return self.sampling_cfg.m

    def _enhance2_layers(self):
        for block in self.enh2_enc:
            yield from block
        for block in self.enh2_dec:
            yield from block
        yield self.enh2_final

    def named_parameters(self) -> list[Parameter]:
        out = list(self.sampling.params()) + list(self.recon.params())
        for layer in self.enhance1:
            out.extend(layer.params())
        for layer in self._enhance2_layers():
            out.extend(layer.params())
        return out

    def parameters(self, phase: int | None = None) -> list[Parameter]:
        """Parameters trained at the given phase (all earlier ones included)."""
        phase = self.phase if phase is None else phase
        _check_phase(phase)
        out = list(self.sampling.params()) + list(self.recon.params())
        if phase >= 2:
            for layer in self.enhance1:
                out.extend(layer.params())
        if phase >= 3:
            for layer in self._enhance2_layers():
                out.extend(layer.params())
        return out


def _check_phase(phase: int) -> None:
    if phase not in (1, 2, 3):
        raise ValueError(f"phase must be 1, 2 or 3, got {phase}")


def _make_conv(name: str, rng: np.random.Generator, in_c: int, out_c: int,
               k: int, stride: int = 1, padding: int = 0, bias: bool = True,
               std: float | None = None) -> ConvLayer:
    if std is None:
        std = math.sqrt(2.0 / (in_c * k * k))
    w = rng.standard_normal((out_c, in_c, k, k), dtype=np.float32) * np.float32(std)
    weight = Parameter(f"{name}.weight", w)
    spec = ConvSpec.for_weight(w, stride=stride, padding=padding, has_bias=bias)
    b = Parameter(f"{name}.bias", np.zeros(out_c, dtype=np.float32)) if bias else None
    return ConvLayer(weight, b, spec)


def init_params(sampling: SamplingConfig, net: NetConfig, seed: int) -> ModelParams:
    """Fresh model: Gaussian sampling/reconstruction kernels, Kaiming conv
    weights, zero biases. The last conv of each enhancement branch starts
    at zero so a newly activated phase is an exact no-op on top of the
    previous one and learns a residual from there. Deterministic for a
    given seed."""
    rng = np.random.default_rng(seed)
    n_B, m = sampling.block_size, sampling.m
    coeffs = sampling.coeffs_per_block

    w = rng.standard_normal((m, 4, n_B, n_B), dtype=np.float32) \
        * np.float32(1.0 / (2 * n_B))
    samp = ConvLayer(Parameter("sampling_kernel", w), None,
                     ConvSpec.for_weight(w, stride=n_B))

    w = rng.standard_normal((coeffs, m, 1, 1), dtype=np.float32) \
        * np.float32(math.sqrt(1.0 / m))
    recon = ConvLayer(Parameter("recon_kernel", w), None, ConvSpec.for_weight(w))

    enhance1 = []
    for i in range(net.enhance1_depth - 1):
        in_c = 1 if i == 0 else net.enhance1_width
        enhance1.append(_make_conv(f"enhance1.{i}", rng, in_c, net.enhance1_width,
                                   3, padding=1))
    last_in = net.enhance1_width if net.enhance1_depth > 1 else 1
    enhance1.append(_make_conv(f"enhance1.{net.enhance1_depth - 1}", rng,
                               last_in, 1, 3, padding=1))

    levels = net.mwcnn_levels
    widths = net.mwcnn_widths
    below = [1] + list(widths[:-1])  # channel count entering each level's dwt
    enc, dec = [], []
    for l in range(levels):
        block = []
        for i in range(net.mwcnn_convs_per_level):
            in_c = 4 * below[l] if i == 0 else widths[l]
            block.append(_make_conv(f"enhance2.enc{l + 1}.{i}", rng, in_c,
                                    widths[l], 3, padding=1))
        enc.append(block)
    for l in reversed(range(levels)):
        block = []
        for i in range(net.mwcnn_convs_per_level):
            out_c = widths[l] if i < net.mwcnn_convs_per_level - 1 else 4 * below[l]
            block.append(_make_conv(f"enhance2.dec{l + 1}.{i}", rng, widths[l],
                                    out_c, 3, padding=1))
        dec.append(block)
    final = _make_conv("enhance2.final", rng, 1, 1, 3, padding=1)
    enhance1[-1].weight.value[...] = 0
    final.weight.value[...] = 0

    return ModelParams(sampling, net, samp, recon, enhance1, enc, dec, final,
                       phase=1, seed=seed)


def granule(params: ModelParams) -> int:
    """Spatial divisor a valid input must satisfy at this model's phase."""
    g = 2 * params.n_B
    if params.phase >= 3:
        g = math.lcm(g, 2 ** params.net_cfg.mwcnn_levels)
    return g


# ---------------------------------------------------------------------------
# sampling side

def _check_sample_input(image: np.ndarray, params: ModelParams) -> None:
    ops.check_tensor(image, "sample input")
    if image.shape[1] != 1:
        raise ShapeError(f"sample expects a single-channel image, got "
                         f"{image.shape[1]} channels")
    step = 2 * params.n_B
    h, w = image.shape[2], image.shape[3]
    if h % step or w % step:
        raise ShapeError(f"image dims {h}x{w} not divisible by {step} "
                         f"(= 2 * block size); pad or crop the image first")


def _sample_fwd(image, params):
    coeffs = wavelet.dwt2(image)
    meas = params.sampling.forward(coeffs)
    return meas, coeffs


def sample(image: np.ndarray, params: ModelParams) -> np.ndarray:
    """Image (1,1,h,w) -> measurements (n, m, h/(2 n_B), w/(2 n_B)); linear."""
    _check_sample_input(image, params)
    meas, _ = _sample_fwd(image, params)
    return meas


def export_matrix(params: ModelParams) -> np.ndarray:
    """The per-block measurement matrix (m x 4*n_B^2); row i flattens
    sampling kernel i channel-major then row-major, matching the conv
    inner-loop order."""
    m = params.m
    return params.sampling.weight.value.reshape(m, -1).copy()


# ---------------------------------------------------------------------------
# reconstruction side

def _initial_fwd(meas, params):
    z = params.recon.forward(meas)
    img = ops.depth_to_space(z, 2 * params.n_B)
    return img, meas


def initial_reconstruct(measurements: np.ndarray, params: ModelParams) -> np.ndarray:
    """Measurements -> image estimate via the 1x1 reconstruction conv and
    block reshuffle; linear (no bias)."""
    ops.check_tensor(measurements, "measurements")
    if measurements.shape[1] != params.m:
        raise ShapeError(f"measurement grid has {measurements.shape[1]} channels, "
                         f"model expects {params.m}")
    img, _ = _initial_fwd(measurements, params)
    return img


def _block_fwd(block: list[ConvLayer], x):
    """conv+ReLU chain; returns output and per-conv (input, pre-activation)."""
    cache = []
    h = x
    for layer in block:
        pre = layer.forward(h)
        cache.append((h, pre))
        h = ops.relu(pre)
    return h, cache


def _block_bwd(block: list[ConvLayer], cache, g):
    for layer, (h_in, pre) in zip(reversed(block), reversed(cache)):
        g = ops.relu_backward(pre, g)
        g = layer.backward(h_in, g)
    return g


def _enhance1_fwd(x, params):
    layers = params.enhance1
    cache = []
    h = x
    for layer in layers[:-1]:
        pre = layer.forward(h)
        cache.append((h, pre))
        h = ops.relu(pre)
    branch = layers[-1].forward(h)
    cache.append((h, None))
    return x + branch, cache


def _enhance1_bwd(params, cache, gy):
    layers = params.enhance1
    h_in, _ = cache[-1]
    g = layers[-1].backward(h_in, gy)
    for layer, (h_in, pre) in zip(reversed(layers[:-1]), reversed(cache[:-1])):
        g = ops.relu_backward(pre, g)
        g = layer.backward(h_in, g)
    return gy + g


def enhance1_forward(image: np.ndarray, params: ModelParams) -> np.ndarray:
    """Plain conv/ReLU refinement with a global residual connection."""
    ops.check_tensor(image, "enhance1 input")
    if image.shape[1] != 1:
        raise ShapeError("enhance1 expects a single-channel image")
    y, _ = _enhance1_fwd(image, params)
    return y


def _check_enhance2_input(image, levels):
    ops.check_tensor(image, "enhance2 input")
    if image.shape[1] != 1:
        raise ShapeError("enhance2 expects a single-channel image")
    div = 2 ** levels
    h, w = image.shape[2], image.shape[3]
    if h % div or w % div:
        raise ShapeError(f"image dims {h}x{w} not divisible by 2^levels = {div}")


def _enhance2_fwd(x, params):
    levels = params.net_cfg.mwcnn_levels
    enc_caches, skips = [], []
    h = x
    for block in params.enh2_enc:
        a = wavelet.dwt2(h)
        h, blk_cache = _block_fwd(block, a)
        enc_caches.append(blk_cache)
        skips.append(h)
    dec_caches = []
    d = skips[-1]
    for idx, block in enumerate(params.enh2_dec):
        level = levels - idx
        h, blk_cache = _block_fwd(block, d)
        dec_caches.append(blk_cache)
        u = wavelet.idwt2(h)
        d = u + skips[level - 2] if level > 1 else u
    branch = params.enh2_final.forward(d)
    return x + branch, (enc_caches, dec_caches, d)


def _enhance2_bwd(params, cache, gy):
    levels = params.net_cfg.mwcnn_levels
    enc_caches, dec_caches, final_in = cache
    # grad accumulated at each encoder output e_l (index l-1)
    g_enc = [None] * levels
    g_u = params.enh2_final.backward(final_in, gy)
    # decoder blocks ran for level = L..1; walk them back from level 1 up
    for idx in reversed(range(levels)):
        level = levels - idx
        gb = wavelet.idwt2_backward(g_u)
        gd = _block_bwd(params.enh2_dec[idx], dec_caches[idx], gb)
        g_enc[level - 1] = gd
        g_u = gd  # for level < L this is the grad into u_{level+1}
    # encoder chain, deepest level first; carry flows through each dwt2
    carry = None
    for l in reversed(range(levels)):
        gh = g_enc[l] if carry is None else g_enc[l] + carry
        ga = _block_bwd(params.enh2_enc[l], enc_caches[l], gh)
        carry = wavelet.dwt2_backward(ga)
    return gy + carry


def enhance2_forward(image: np.ndarray, params: ModelParams) -> np.ndarray:
    """Wavelet U-net refinement with additive skips and a global residual."""
    _check_enhance2_input(image, params.net_cfg.mwcnn_levels)
    y, _ = _enhance2_fwd(image, params)
    return y


# ---------------------------------------------------------------------------
# full pipeline

def run_forward(image: np.ndarray, params: ModelParams, phase: int):
    """Forward pass through the active stages, keeping activation caches
    so run_backward can replay the adjoints."""
    _check_phase(phase)
    _check_sample_input(image, params)
    if phase >= 3:
        _check_enhance2_input(image, params.net_cfg.mwcnn_levels)
    meas, coeffs = _sample_fwd(image, params)
    img, _ = _initial_fwd(meas, params)
    e1_cache = e2_cache = None
    img1 = img
    if phase >= 2:
        img1, e1_cache = _enhance1_fwd(img, params)
    out = img1
    if phase >= 3:
        out, e2_cache = _enhance2_fwd(img1, params)
    cache = (image, coeffs, meas, img, e1_cache, e2_cache, phase)
    return out, cache


def run_backward(params: ModelParams, cache, grad_out: np.ndarray) -> np.ndarray:
    """Accumulate parameter gradients for the cached forward pass; returns
    the gradient with respect to the input image."""
    image, coeffs, meas, img, e1_cache, e2_cache, phase = cache
    g = grad_out
    if phase >= 3:
        g = _enhance2_bwd(params, e2_cache, g)
    if phase >= 2:
        g = _enhance1_bwd(params, e1_cache, g)
    gz = ops.space_to_depth(g, 2 * params.n_B)
    g_meas = params.recon.backward(meas, gz)
    g_coeffs = params.sampling.backward(coeffs, g_meas)
    return wavelet.dwt2_backward(g_coeffs)


def forward(image: np.ndarray, params: ModelParams, phase: int) -> np.ndarray:
    """Sample then reconstruct at the given phase (1: initial only,
    2: + plain CNN refinement, 3: + wavelet U-net refinement)."""
    y, _ = run_forward(image, params, phase)
    return y


def reconstruct(measurements: np.ndarray, params: ModelParams,
                phase: int | None = None) -> np.ndarray:
    """Decoder side only: initial reconstruction plus the enhancements
    active at the model's phase."""
    phase = params.phase if phase is None else phase
    _check_phase(phase)
    img = initial_reconstruct(measurements, params)
    if phase >= 2:
        img = enhance1_forward(img, params)
    if phase >= 3:
        img = enhance2_forward(img, params)
    return img


# ---------------------------------------------------------------------------
# constructive exact model at full rate

_HAAR_SYNTHESIS = np.array([[1, -1, -1, 1],
                            [1, 1, -1, -1],
                            [1, -1, 1, -1],
                            [1, 1, 1, 1]], dtype=np.float32) * 0.5


def make_full_rate_model(n_B: int, net: NetConfig | None = None,
                         seed: int = 0) -> ModelParams:
    """Subrate-1 model whose sampling kernel is the identity over the
    block's wavelet coefficients and whose reconstruction kernel inverts
    the Haar analysis, so sample -> initial_reconstruct is exact. All
    enhancement weights are zero, so every phase reconstructs exactly."""
    net = net or NetConfig()
    params = init_params(SamplingConfig(block_size=n_B, subrate=1.0), net, seed)
    m = params.m
    params.sampling.weight.value = np.eye(m, dtype=np.float32) \
        .reshape(m, 4, n_B, n_B)
    big = 2 * n_B
    r_mat = np.zeros((4 * n_B * n_B, m), dtype=np.float32)
    for br in range(big):
        for bc in range(big):
            p = br * big + bc
            s = (br % 2) * 2 + (bc % 2)
            for band in range(4):
                q = band * n_B * n_B + (br // 2) * n_B + (bc // 2)
                r_mat[p, q] = _HAAR_SYNTHESIS[s, band]
    params.recon.weight.value = r_mat.reshape(4 * n_B * n_B, m, 1, 1)
    for layer in params.enhance1 + [ly for blk in params.enh2_enc for ly in blk] \
            + [ly for blk in params.enh2_dec for ly in blk] + [params.enh2_final]:
        layer.weight.value[...] = 0
        if layer.bias is not None:
            layer.bias.value[...] = 0
    return params
