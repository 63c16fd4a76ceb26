import numpy as np
import numpy.testing as npt
import pytest

from msdcs import model, ops, wavelet
from msdcs.errors import ShapeError
from msdcs.model import NetConfig, SamplingConfig


def make_params(n_B=2, r=0.3, seed=0, **net_kwargs):
    defaults = dict(enhance1_depth=3, enhance1_width=4, mwcnn_levels=2,
                    mwcnn_widths=(2, 3), mwcnn_convs_per_level=2)
    defaults.update(net_kwargs)
    return model.init_params(SamplingConfig(block_size=n_B, subrate=r),
                             NetConfig(**defaults), seed)


class TestMeasurementCount:
    @pytest.mark.parametrize("r,n_B,expected", [
        (1.0, 16, 1024),
        (0.1, 16, 102),
        (0.3, 16, 307),
        (0.5, 2, 8),
    ])
    def test_examples(self, r, n_B, expected):
        assert model.derive_measurement_count(r, n_B) == expected

    def test_half_rounds_away_from_zero(self):
        # 0.53125 * 16 = 8.5 exactly in binary floating point
        assert model.derive_measurement_count(0.53125, 2) == 9

    def test_clamped_to_at_least_one(self):
        assert model.derive_measurement_count(1e-6, 2) == 1

    @pytest.mark.parametrize("r", [0.0, -0.1, 1.5])
    def test_invalid_subrate(self, r):
        with pytest.raises(ValueError):
            model.derive_measurement_count(r, 16)

    @pytest.mark.parametrize("n_B", [2, 4, 16])
    @pytest.mark.parametrize("r", [0.1, 0.3, 1.0])
    def test_realized_subrate_within_one_kernel(self, n_B, r):
        cfg = SamplingConfig(block_size=n_B, subrate=r)
        assert abs(cfg.realized_subrate - r) <= 1.0 / (4 * n_B * n_B) + 1e-12


class TestSample:
    def test_identity_kernel_returns_coefficients(self, rng):
        params = make_params(n_B=1, r=1.0)
        params.sampling.weight.value = np.eye(4, dtype=np.float32).reshape(4, 4, 1, 1)
        x = rng.random((1, 1, 6, 6)).astype(np.float32)
        npt.assert_allclose(model.sample(x, params), wavelet.dwt2(x),
                            rtol=1e-6, atol=1e-7)

    def test_linearity(self, rng):
        params = make_params(n_B=2, r=0.5, seed=3)
        for _ in range(5):
            x = rng.random((1, 1, 8, 8)).astype(np.float32)
            y = rng.random((1, 1, 8, 8)).astype(np.float32)
            a, b = rng.uniform(-2, 2, size=2).astype(np.float32)
            lhs = model.sample(a * x + b * y, params)
            rhs = a * model.sample(x, params) + b * model.sample(y, params)
            scale = np.abs(rhs).max()
            assert np.abs(lhs - rhs).max() / scale < 1e-5

    def test_matrix_equivalence(self, rng):
        n_B = 4
        params = make_params(n_B=n_B, r=0.3, seed=5)
        x = rng.random((1, 1, 16, 24)).astype(np.float32)
        meas = model.sample(x, params)
        coeffs = wavelet.dwt2(x)
        phi = model.export_matrix(params)
        for bi in range(meas.shape[2]):
            for bj in range(meas.shape[3]):
                block = coeffs[0, :, bi * n_B:(bi + 1) * n_B,
                               bj * n_B:(bj + 1) * n_B].reshape(-1)
                ref = phi.astype(np.float64) @ block.astype(np.float64)
                got = meas[0, :, bi, bj]
                assert np.abs(ref - got).max() / np.abs(ref).max() < 1e-4

    def test_divisibility_error_mentions_padding(self):
        params = make_params(n_B=2)
        with pytest.raises(ShapeError, match="pad or crop"):
            model.sample(np.zeros((1, 1, 6, 8), np.float32), params)

    def test_measurement_grid_shape(self, rng):
        params = make_params(n_B=2, r=0.3)
        x = rng.random((1, 1, 8, 12)).astype(np.float32)
        assert model.sample(x, params).shape == (1, params.m, 2, 3)


class TestExportMatrix:
    def test_identity_model(self):
        params = model.make_full_rate_model(1)
        npt.assert_array_equal(model.export_matrix(params), np.eye(4))

    def test_shape_contract(self):
        params = make_params(n_B=4, r=0.3)
        assert model.export_matrix(params).shape == (params.m, 64)


class TestInitialReconstruct:
    @pytest.mark.parametrize("n_B", [1, 2, 4])
    def test_full_rate_exactness(self, n_B, rng):
        params = model.make_full_rate_model(n_B)
        x = rng.random((1, 1, 8 * n_B, 8 * n_B)).astype(np.float32)
        y = model.initial_reconstruct(model.sample(x, params), params)
        assert np.abs(y - x).max() < 1e-5

    def test_zero_measurements_zero_image(self):
        params = make_params(n_B=2, r=0.3)
        y = model.initial_reconstruct(np.zeros((1, params.m, 2, 2), np.float32), params)
        npt.assert_array_equal(y, 0)

    def test_output_shape(self, rng):
        params = make_params(n_B=2, r=0.3)
        x = rng.random((1, 1, 12, 8)).astype(np.float32)
        y = model.initial_reconstruct(model.sample(x, params), params)
        assert y.shape == (1, 1, 12, 8)

    def test_sampling_path_superposition(self, rng):
        params = make_params(n_B=2, r=0.5, seed=11)

        def f(img):
            return model.initial_reconstruct(model.sample(img, params), params)

        x = rng.random((1, 1, 8, 8)).astype(np.float32)
        y = rng.random((1, 1, 8, 8)).astype(np.float32)
        a, b = np.float32(1.3), np.float32(-0.7)
        lhs, rhs = f(a * x + b * y), a * f(x) + b * f(y)
        assert np.abs(lhs - rhs).max() / np.abs(rhs).max() < 1e-5


class TestEnhanceNets:
    def test_enhance1_zero_weights_identity(self, rng):
        params = make_params()
        for layer in params.enhance1:
            layer.weight.value[...] = 0
            layer.bias.value[...] = 0
        x = rng.random((1, 1, 8, 8)).astype(np.float32)
        npt.assert_array_equal(model.enhance1_forward(x, params), x)

    def test_enhance1_shape_preserved_any_dims(self, rng):
        params = make_params()
        x = rng.random((1, 1, 10, 14)).astype(np.float32)
        assert model.enhance1_forward(x, params).shape == x.shape

    def test_enhance2_zero_weights_identity(self, rng):
        params = make_params()
        for block in params.enh2_enc + params.enh2_dec:
            for layer in block:
                layer.weight.value[...] = 0
                layer.bias.value[...] = 0
        params.enh2_final.weight.value[...] = 0
        params.enh2_final.bias.value[...] = 0
        x = rng.random((1, 1, 8, 8)).astype(np.float32)
        npt.assert_array_equal(model.enhance2_forward(x, params), x)

    def test_enhance2_shape_preserved(self, rng):
        params = make_params()
        x = rng.random((1, 1, 8, 12)).astype(np.float32)
        assert model.enhance2_forward(x, params).shape == x.shape

    def test_enhance2_divisibility_error(self, rng):
        params = make_params()  # 2 levels -> dims must divide by 4
        with pytest.raises(ShapeError, match="2\\^levels"):
            model.enhance2_forward(np.zeros((1, 1, 6, 8), np.float32), params)

    def test_enhance1_depth_one_is_single_conv(self, rng):
        params = make_params(enhance1_depth=1)
        assert len(params.enhance1) == 1
        x = rng.random((1, 1, 8, 8)).astype(np.float32)
        assert model.enhance1_forward(x, params).shape == x.shape


class TestForwardPhases:
    def test_invalid_phase(self):
        params = make_params()
        with pytest.raises(ValueError, match="phase"):
            model.forward(np.zeros((1, 1, 8, 8), np.float32), params, 4)

    def test_phase_nesting_with_zero_enhancements(self, rng):
        params = make_params(seed=2)
        for block in [params.enhance1] + params.enh2_enc + params.enh2_dec \
                + [[params.enh2_final]]:
            for layer in block:
                layer.weight.value[...] = 0
                if layer.bias is not None:
                    layer.bias.value[...] = 0
        x = rng.random((1, 1, 8, 8)).astype(np.float32)
        y1 = model.forward(x, params, 1)
        y2 = model.forward(x, params, 2)
        y3 = model.forward(x, params, 3)
        npt.assert_array_equal(y1, y2)
        npt.assert_array_equal(y2, y3)

    def test_full_rate_phase1_is_identity(self, rng):
        params = model.make_full_rate_model(2)
        x = rng.random((1, 1, 8, 8)).astype(np.float32)
        assert np.abs(model.forward(x, params, 1) - x).max() < 1e-5

    def test_reconstruct_matches_forward(self, rng):
        params = make_params(seed=4)
        params.phase = 3
        x = rng.random((1, 1, 8, 8)).astype(np.float32)
        meas = model.sample(x, params)
        npt.assert_array_equal(model.reconstruct(meas, params),
                               model.forward(x, params, 3))


class TestInitParams:
    def test_same_seed_bit_identical(self):
        a, b = make_params(seed=9), make_params(seed=9)
        for pa, pb in zip(a.named_parameters(), b.named_parameters()):
            assert pa.name == pb.name
            npt.assert_array_equal(pa.value, pb.value)

    def test_different_seed_differs(self):
        a, b = make_params(seed=1), make_params(seed=2)
        assert any(not np.array_equal(pa.value, pb.value)
                   for pa, pb in zip(a.named_parameters(), b.named_parameters()))

    def test_sampling_kernel_variance(self):
        params = model.init_params(SamplingConfig(block_size=16, subrate=0.1),
                                   NetConfig(), seed=0)
        var = float(np.var(params.sampling.weight.value))
        target = 1.0 / 1024
        assert abs(var - target) / target < 0.2

    def test_no_bias_in_sampling_path(self):
        params = make_params()
        assert params.sampling.bias is None
        assert params.recon.bias is None
        assert not params.sampling.spec.has_bias
        assert not params.recon.spec.has_bias

    def test_parameter_names_unique_and_nested_by_phase(self):
        params = make_params()
        names = [p.name for p in params.named_parameters()]
        assert len(names) == len(set(names))
        p1 = {p.name for p in params.parameters(1)}
        p2 = {p.name for p in params.parameters(2)}
        p3 = {p.name for p in params.parameters(3)}
        assert p1 == {"sampling_kernel", "recon_kernel"}
        assert p1 < p2 < p3
        assert p3 == {p.name for p in params.named_parameters()}

    def test_kernel_shapes(self):
        params = make_params(n_B=2, r=0.3)
        m = params.m
        assert params.sampling.weight.value.shape == (m, 4, 2, 2)
        assert params.recon.weight.value.shape == (16, m, 1, 1)


class TestGranule:
    def test_phase_dependence(self):
        params = make_params(n_B=2)
        params.phase = 1
        assert model.granule(params) == 4
        params.phase = 3
        assert model.granule(params) == 4  # lcm(4, 4)
        params16 = make_params(n_B=16)
        params16.phase = 3
        assert model.granule(params16) == 32


class TestConfigValidation:
    def test_net_config_rejects_bad_widths(self):
        with pytest.raises(ValueError):
            NetConfig(mwcnn_levels=2, mwcnn_widths=(8,))
        with pytest.raises(ValueError):
            NetConfig(enhance1_depth=0)

    def test_sampling_config_rejects_bad_subrate(self):
        with pytest.raises(ValueError):
            SamplingConfig(block_size=16, subrate=0.0)
