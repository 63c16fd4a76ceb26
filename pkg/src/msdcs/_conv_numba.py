"""Numba-JIT convolution cores.

Stride-1 kernels keep the innermost loop contiguous so LLVM can vectorize
it; the generic strided kernels only ever see the block-sampling layer,
which is a tiny fraction of the work. prange iterations write disjoint
output slices, so results are bit-reproducible run to run regardless of
thread scheduling. The weight-gradient kernel carries fastmath to allow a
vectorized reduction; its summation order is fixed at compile time.
"""

import numpy as np
from numba import njit, prange


@njit(cache=True, parallel=True)
def _fwd_s1(xp, w, out):
    n, ic = xp.shape[0], xp.shape[1]
    oc, kh, kw = w.shape[0], w.shape[2], w.shape[3]
    oh, ow = out.shape[2], out.shape[3]
    for t in prange(n * oc):
        b = t // oc
        o = t % oc
        for i in range(oh):
            row = out[b, o, i]
            for c in range(ic):
                for u in range(kh):
                    xrow = xp[b, c, i + u]
                    for v in range(kw):
                        wv = w[o, c, u, v]
                        for j in range(ow):
                            row[j] += wv * xrow[j + v]


@njit(cache=True, parallel=True)
def _fwd_strided(xp, w, stride, out):
    n, ic = xp.shape[0], xp.shape[1]
    oc, kh, kw = w.shape[0], w.shape[2], w.shape[3]
    oh, ow = out.shape[2], out.shape[3]
    for t in prange(n * oc):
        b = t // oc
        o = t % oc
        for i in range(oh):
            for j in range(ow):
                acc = 0.0
                for c in range(ic):
                    for u in range(kh):
                        for v in range(kw):
                            acc += w[o, c, u, v] * xp[b, c, i * stride + u, j * stride + v]
                out[b, o, i, j] = acc


@njit(cache=True, parallel=True)
def _bwd_input_s1(w, gy, gxp):
    n, oc, oh, ow = gy.shape
    ic, kh, kw = w.shape[1], w.shape[2], w.shape[3]
    for t in prange(n * ic):
        b = t // ic
        c = t % ic
        for o in range(oc):
            for i in range(oh):
                gyrow = gy[b, o, i]
                for u in range(kh):
                    gxrow = gxp[b, c, i + u]
                    for v in range(kw):
                        wv = w[o, c, u, v]
                        for j in range(ow):
                            gxrow[j + v] += wv * gyrow[j]


@njit(cache=True, parallel=True)
def _bwd_input_strided(w, gy, stride, gxp):
    n, oc, oh, ow = gy.shape
    ic, kh, kw = w.shape[1], w.shape[2], w.shape[3]
    for t in prange(n * ic):
        b = t // ic
        c = t % ic
        for o in range(oc):
            for i in range(oh):
                for j in range(ow):
                    g = gy[b, o, i, j]
                    for u in range(kh):
                        for v in range(kw):
                            gxp[b, c, i * stride + u, j * stride + v] += g * w[o, c, u, v]


@njit(cache=True, parallel=True, fastmath=True)
def _bwd_weight_s1(xp, gy, gw):
    n, oc, oh, ow = gy.shape
    ic, kh, kw = gw.shape[1], gw.shape[2], gw.shape[3]
    for o in prange(oc):
        for b in range(n):
            for i in range(oh):
                gyrow = gy[b, o, i]
                for c in range(ic):
                    for u in range(kh):
                        xrow = xp[b, c, i + u]
                        for v in range(kw):
                            s = 0.0
                            for j in range(ow):
                                s += gyrow[j] * xrow[j + v]
                            gw[o, c, u, v] += s


@njit(cache=True, parallel=True, fastmath=True)
def _bwd_weight_strided(xp, gy, stride, gw):
    n, oc, oh, ow = gy.shape
    ic, kh, kw = gw.shape[1], gw.shape[2], gw.shape[3]
    for o in prange(oc):
        for c in range(ic):
            for u in range(kh):
                for v in range(kw):
                    s = 0.0
                    for b in range(n):
                        for i in range(oh):
                            for j in range(ow):
                                s += gy[b, o, i, j] * xp[b, c, i * stride + u, j * stride + v]
                    gw[o, c, u, v] += s


def conv_forward(xp: np.ndarray, w: np.ndarray, stride: int) -> np.ndarray:
    n, _, hp, wp = xp.shape
    oc, _, kh, kw = w.shape
    oh = (hp - kh) // stride + 1
    ow = (wp - kw) // stride + 1
    out = np.zeros((n, oc, oh, ow), dtype=xp.dtype)
    if stride == 1:
        _fwd_s1(xp, w, out)
    else:
        _fwd_strided(xp, w, stride, out)
    return out


def conv_backward_input(w: np.ndarray, gy: np.ndarray, stride: int,
                        hp: int, wp: int) -> np.ndarray:
    gxp = np.zeros((gy.shape[0], w.shape[1], hp, wp), dtype=gy.dtype)
    if stride == 1:
        _bwd_input_s1(w, gy, gxp)
    else:
        _bwd_input_strided(w, gy, stride, gxp)
    return gxp


def conv_backward_weight(xp: np.ndarray, gy: np.ndarray, stride: int,
                         kh: int, kw: int) -> np.ndarray:
    gw = np.zeros((gy.shape[1], xp.shape[1], kh, kw), dtype=xp.dtype)
    if stride == 1:
        _bwd_weight_s1(xp, gy, gw)
    else:
        _bwd_weight_strided(xp, gy, stride, gw)
    return gw
