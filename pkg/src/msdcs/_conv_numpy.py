"""Pure-numpy convolution cores (im2col + GEMM).

Reference implementation; the numba kernels in _conv_numba.py must agree
with these within float rounding. All functions take the already padded
input and leave bias handling to the caller.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def _im2col(xp: np.ndarray, kh: int, kw: int, stride: int) -> np.ndarray:
    """(n, c, hp, wp) -> (n*oh*ow, c*kh*kw), rows batch-major, cols channel-major."""
    n, c = xp.shape[:2]
    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    oh, ow = win.shape[2], win.shape[3]
    col = np.ascontiguousarray(win.transpose(0, 2, 3, 1, 4, 5))
    return col.reshape(n * oh * ow, c * kh * kw), oh, ow


def conv_forward(xp: np.ndarray, w: np.ndarray, stride: int) -> np.ndarray:
    n = xp.shape[0]
    oc, _, kh, kw = w.shape
    col, oh, ow = _im2col(xp, kh, kw, stride)
    y = col @ w.reshape(oc, -1).T
    return np.ascontiguousarray(y.reshape(n, oh, ow, oc).transpose(0, 3, 1, 2))


def conv_backward_weight(xp: np.ndarray, gy: np.ndarray, stride: int,
                         kh: int, kw: int) -> np.ndarray:
    oc = gy.shape[1]
    col, oh, ow = _im2col(xp, kh, kw, stride)
    gy_col = np.ascontiguousarray(gy.transpose(0, 2, 3, 1)).reshape(-1, oc)
    gw = gy_col.T @ col
    return gw.reshape(oc, xp.shape[1], kh, kw)


def conv_backward_input(w: np.ndarray, gy: np.ndarray, stride: int,
                        hp: int, wp: int) -> np.ndarray:
    n, oc, oh, ow = gy.shape
    _, ic, kh, kw = w.shape
    gy_col = np.ascontiguousarray(gy.transpose(0, 2, 3, 1)).reshape(-1, oc)
    dcol = gy_col @ w.reshape(oc, -1)
    d = dcol.reshape(n, oh, ow, ic, kh, kw).transpose(0, 3, 4, 5, 1, 2)
    gxp = np.zeros((n, ic, hp, wp), dtype=gy.dtype)
    for u in range(kh):
        for v in range(kw):
            gxp[:, :, u:u + stride * oh:stride, v:v + stride * ow:stride] += d[:, :, u, v]
    return gxp
