import numpy as np
import numpy.testing as npt
import pytest

from msdcs import backend, ops
from msdcs.errors import ConfigError
from msdcs.ops import ConvSpec

CASES = [
    (ConvSpec(4, 3, 3, 3, stride=1, padding=1, has_bias=True), (2, 3, 8, 8)),
    (ConvSpec(3, 2, 2, 2, stride=2, padding=0), (1, 2, 9, 9)),
    (ConvSpec(6, 4, 1, 1, stride=1, padding=0), (2, 4, 5, 5)),
    (ConvSpec(2, 1, 16, 16, stride=16, padding=0), (1, 1, 32, 32)),
]

needs_numba = pytest.mark.skipif(not backend.numba_available(),
                                 reason="numba not importable")


def test_default_backend_prefers_numba(restore_backend, monkeypatch):
    monkeypatch.delenv(backend.ENV_VAR, raising=False)
    backend.set_backend(None)
    expected = "numba" if backend.numba_available() else "numpy"
    assert backend.active_backend() == expected


def test_env_flag_selects_numpy(restore_backend, monkeypatch):
    monkeypatch.setenv(backend.ENV_VAR, "numpy")
    backend.set_backend(None)
    assert backend.active_backend() == "numpy"
    assert backend.conv_impl().__name__.endswith("_conv_numpy")


def test_env_flag_validated(restore_backend, monkeypatch):
    monkeypatch.setenv(backend.ENV_VAR, "cuda")
    backend.set_backend(None)
    with pytest.raises(ConfigError, match="cuda"):
        backend.active_backend()


def test_set_backend_overrides_env(restore_backend, monkeypatch):
    monkeypatch.setenv(backend.ENV_VAR, "numpy")
    if backend.numba_available():
        backend.set_backend("numba")
        assert backend.active_backend() == "numba"


def test_set_backend_rejects_unknown(restore_backend):
    with pytest.raises(ConfigError):
        backend.set_backend("fortran")


def test_numba_request_fails_cleanly_when_missing(restore_backend, monkeypatch):
    monkeypatch.setattr(backend, "_conv_numba", None)
    with pytest.raises(ConfigError, match="numba"):
        backend.set_backend("numba")


@needs_numba
@pytest.mark.parametrize("dtype,rtol", [(np.float32, 1e-4), (np.float64, 1e-10)])
@pytest.mark.parametrize("spec,xshape", CASES)
def test_backends_agree(spec, xshape, dtype, rtol, restore_backend, rng):
    x = rng.standard_normal(xshape).astype(dtype)
    w = rng.standard_normal((spec.out_channels, spec.in_channels,
                             spec.kernel_h, spec.kernel_w)).astype(dtype) * 0.3
    b = rng.standard_normal(spec.out_channels).astype(dtype) \
        if spec.has_bias else None
    oh, ow = spec.out_hw(xshape[2], xshape[3])
    gy = rng.standard_normal((xshape[0], spec.out_channels, oh, ow)).astype(dtype)

    outs = {}
    for name in ("numpy", "numba"):
        backend.set_backend(name)
        y = ops.conv2d(x, w, b, spec)
        gx, gw, gb = ops.conv2d_backward(x, w, spec, gy)
        outs[name] = (y, gx, gw, gb)
    for a, b_ in zip(outs["numpy"][:3], outs["numba"][:3]):
        npt.assert_allclose(a, b_, rtol=rtol, atol=rtol * 10)
    if spec.has_bias:
        npt.assert_allclose(outs["numpy"][3], outs["numba"][3], rtol=rtol)


@needs_numba
def test_numba_path_deterministic_across_calls(restore_backend, rng):
    backend.set_backend("numba")
    x = rng.standard_normal((4, 8, 16, 16)).astype(np.float32)
    w = rng.standard_normal((8, 8, 3, 3)).astype(np.float32)
    spec = ConvSpec(8, 8, 3, 3, padding=1)
    first = ops.conv2d(x, w, None, spec)
    for _ in range(3):
        npt.assert_array_equal(ops.conv2d(x, w, None, spec), first)
