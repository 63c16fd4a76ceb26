"""One-level orthonormal 2-D Haar transform and its inverse.

Each input channel k yields four output channels 4k..4k+3 in the order
[LL, HL, LH, HH] at half resolution. The analysis operator is orthonormal,
so the inverse is its transpose and each transform is the other's backward.
Band conventions, for a 2x2 block [[p00, p01], [p10, p11]]:

    LL = (+p00 + p01 + p10 + p11) / 2
    HL = (-p00 + p01 - p10 + p11) / 2
    LH = (-p00 - p01 + p10 + p11) / 2
    HH = (+p00 - p01 - p10 + p11) / 2
"""

import numpy as np

from .errors import ShapeError
from .ops import check_tensor


def dwt2(t: np.ndarray) -> np.ndarray:
    """(n, c, h, w) -> (n, 4c, h/2, w/2); h and w must be even."""
    check_tensor(t, "dwt2 input")
    n, c, h, w = t.shape
    if h % 2 or w % 2:
        raise ShapeError(f"dwt2 needs even spatial dims, got {h}x{w}")
    p00 = t[:, :, 0::2, 0::2]
    p01 = t[:, :, 0::2, 1::2]
    p10 = t[:, :, 1::2, 0::2]
    p11 = t[:, :, 1::2, 1::2]
    ll = (p00 + p01 + p10 + p11) * 0.5
    hl = (-p00 + p01 - p10 + p11) * 0.5
    lh = (-p00 - p01 + p10 + p11) * 0.5
    hh = (p00 - p01 - p10 + p11) * 0.5
    out = np.stack([ll, hl, lh, hh], axis=2)
    return np.ascontiguousarray(out).reshape(n, 4 * c, h // 2, w // 2)


def idwt2(s: np.ndarray) -> np.ndarray:
    """Exact inverse of dwt2; channels must be divisible by 4."""
    check_tensor(s, "idwt2 input")
    n, c4, h2, w2 = s.shape
    if c4 % 4:
        raise ShapeError(f"idwt2 needs channels divisible by 4, got {c4}")
    c = c4 // 4
    bands = s.reshape(n, c, 4, h2, w2)
    ll, hl, lh, hh = bands[:, :, 0], bands[:, :, 1], bands[:, :, 2], bands[:, :, 3]
    out = np.empty((n, c, 2 * h2, 2 * w2), dtype=s.dtype)
    out[:, :, 0::2, 0::2] = (ll - hl - lh + hh) * 0.5
    out[:, :, 0::2, 1::2] = (ll + hl - lh - hh) * 0.5
    out[:, :, 1::2, 0::2] = (ll - hl + lh - hh) * 0.5
    out[:, :, 1::2, 1::2] = (ll + hl + lh + hh) * 0.5
    return out


def dwt2_backward(grad_out: np.ndarray) -> np.ndarray:
    """Adjoint of dwt2 = idwt2 applied to the cotangent (orthonormal map)."""
    return idwt2(grad_out)


def idwt2_backward(grad_out: np.ndarray) -> np.ndarray:
    """Adjoint of idwt2 = dwt2 applied to the cotangent."""
    return dwt2(grad_out)
