import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from msdcs import wavelet
from msdcs.errors import ShapeError

# Independent oracle: orthonormal analysis matrix over [p00, p01, p10, p11],
# rows ordered [LL, HL, LH, HH].
H_ANALYSIS = np.array([[1, 1, 1, 1],
                       [-1, 1, -1, 1],
                       [-1, -1, 1, 1],
                       [1, -1, -1, 1]], dtype=np.float64) * 0.5


def dwt_matrix_oracle(x):
    """Apply H_ANALYSIS block-wise; x is (n, c, h, w)."""
    n, c, h, w = x.shape
    out = np.zeros((n, 4 * c, h // 2, w // 2), dtype=np.float64)
    for b in range(n):
        for ch in range(c):
            for i in range(h // 2):
                for j in range(w // 2):
                    block = np.array([x[b, ch, 2 * i, 2 * j],
                                      x[b, ch, 2 * i, 2 * j + 1],
                                      x[b, ch, 2 * i + 1, 2 * j],
                                      x[b, ch, 2 * i + 1, 2 * j + 1]],
                                     dtype=np.float64)
                    out[b, 4 * ch:4 * ch + 4, i, j] = H_ANALYSIS @ block
    return out


def test_oracle_matrix_is_orthonormal():
    npt.assert_allclose(H_ANALYSIS @ H_ANALYSIS.T, np.eye(4), atol=1e-12)


def test_constant_image_kills_detail_bands():
    x = np.full((1, 1, 4, 4), 3.0, dtype=np.float32)
    s = wavelet.dwt2(x)
    npt.assert_allclose(s[:, 0], 6.0)
    npt.assert_array_equal(s[:, 1:], 0)


def test_2x2_example():
    x = np.array([1, 2, 3, 4], dtype=np.float32).reshape(1, 1, 2, 2)
    s = wavelet.dwt2(x)
    npt.assert_array_equal(s.ravel(), [5, 1, 2, 0])


def test_matches_matrix_oracle(rng):
    x = rng.standard_normal((2, 3, 8, 8)).astype(np.float32)
    npt.assert_allclose(wavelet.dwt2(x), dwt_matrix_oracle(x), rtol=1e-5, atol=1e-6)


def test_energy_preserved(rng):
    x = rng.standard_normal((1, 1, 8, 8)).astype(np.float32)
    n0, n1 = np.linalg.norm(x), np.linalg.norm(wavelet.dwt2(x))
    assert abs(n0 - n1) / n0 < 1e-5


def test_linearity(rng):
    x = rng.standard_normal((1, 2, 6, 6)).astype(np.float32)
    y = rng.standard_normal((1, 2, 6, 6)).astype(np.float32)
    a, b = 1.7, -0.4
    npt.assert_allclose(wavelet.dwt2(a * x + b * y),
                        a * wavelet.dwt2(x) + b * wavelet.dwt2(y),
                        rtol=1e-5, atol=1e-6)


def test_band_selectivity_hl_zero_for_horizontal_stripes(rng):
    col = rng.standard_normal((6, 1)).astype(np.float32)
    x = np.broadcast_to(col, (6, 8)).copy().reshape(1, 1, 6, 8)
    s = wavelet.dwt2(x)
    npt.assert_array_equal(s[:, 1], 0)  # HL


def test_idwt2_example():
    s = np.array([5, 1, 2, 0], dtype=np.float32).reshape(1, 4, 1, 1)
    npt.assert_allclose(wavelet.idwt2(s).ravel(), [1, 2, 3, 4], atol=1e-6)


def test_idwt2_constant_stack():
    s = np.zeros((1, 4, 3, 3), dtype=np.float32)
    s[:, 0] = 6.0
    npt.assert_allclose(wavelet.idwt2(s), 3.0)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 2), st.integers(1, 3), st.integers(1, 8), st.integers(1, 8),
       st.integers(0, 10_000))
def test_perfect_reconstruction(n, c, h2, w2, seed):
    x = np.random.default_rng(seed).standard_normal(
        (n, c, 2 * h2, 2 * w2)).astype(np.float32)
    npt.assert_allclose(wavelet.idwt2(wavelet.dwt2(x)), x, atol=1e-5)


def test_backwards_are_adjoints(rng):
    x = rng.standard_normal((1, 2, 6, 6)).astype(np.float32)
    g = rng.standard_normal((1, 8, 3, 3)).astype(np.float32)
    lhs = float(np.vdot(wavelet.dwt2(x).astype(np.float64), g.astype(np.float64)))
    rhs = float(np.vdot(x.astype(np.float64),
                        wavelet.dwt2_backward(g).astype(np.float64)))
    assert abs(lhs - rhs) / max(abs(lhs), abs(rhs)) < 1e-5


def test_dwt2_backward_inverts_dwt2(rng):
    x = rng.standard_normal((1, 1, 4, 4)).astype(np.float32)
    npt.assert_allclose(wavelet.dwt2_backward(wavelet.dwt2(x)), x, atol=1e-5)


def test_zero_cotangent(rng):
    assert not wavelet.dwt2_backward(np.zeros((1, 4, 2, 2), np.float32)).any()
    assert not wavelet.idwt2_backward(np.zeros((1, 1, 4, 4), np.float32)).any()


def test_odd_dims_rejected():
    with pytest.raises(ShapeError, match="even"):
        wavelet.dwt2(np.zeros((1, 1, 3, 4), np.float32))
    with pytest.raises(ShapeError, match="even"):
        wavelet.dwt2(np.zeros((1, 1, 4, 5), np.float32))


def test_channel_count_rejected():
    with pytest.raises(ShapeError, match="divisible by 4"):
        wavelet.idwt2(np.zeros((1, 3, 2, 2), np.float32))
