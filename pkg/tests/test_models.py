"""Model contracts: drifts, noise coefficients, derivatives, metadata."""

import numpy as np
import pytest

from hyperspde.models import (
    ConvolutionNLSModel,
    LinearSchroedingerModel,
    NemytskiiNLSModel,
    TransportModel,
    bounded_shift_jacobian,
    bounded_shift_map,
    build_model,
    saturating_jacobian,
    saturating_map,
)
from hyperspde.noise import NoiseModel
from hyperspde.schemes import SCHRODINGER_KIND, TRANSPORT_KIND
from hyperspde.spectral import (
    TWO_PI,
    ModeSet,
    SpectralField,
    bump_coefficients,
    convolve,
    pointwise_map,
    sobolev_norm,
    to_physical,
)

ALL_MODEL_CLASSES = (
    LinearSchroedingerModel,
    ConvolutionNLSModel,
    NemytskiiNLSModel,
    TransportModel,
)


def smooth_field(modes, rng, decay=2.0):
    ell = np.abs(modes.indices).astype(float)
    scale = (1.0 + ell) ** (-decay)
    return SpectralField(
        modes, scale * (rng.standard_normal(modes.size) + 1j * rng.standard_normal(modes.size))
    )


def basis_vector(modes, ell):
    coeffs = np.zeros(modes.size, dtype=complex)
    coeffs[list(modes.indices).index(ell)] = 1.0
    return coeffs


@pytest.fixture
def modes():
    return ModeSet(32)


@pytest.fixture
def noise(modes):
    return NoiseModel.power_law(modes)


class TestScalarMaps:
    def test_saturating_values(self):
        assert saturating_map(np.array([0.0]))[0] == 0.0
        assert saturating_map(np.array([1.0]))[0] == pytest.approx(0.5)
        assert saturating_map(np.array([1j]))[0] == pytest.approx(0.5j)

    def test_saturating_jacobian_is_directional_derivative(self, rng):
        z = rng.standard_normal(40) + 1j * rng.standard_normal(40)
        v = rng.standard_normal(40) + 1j * rng.standard_normal(40)
        eps = 1e-7
        fd = (saturating_map(z + eps * v) - saturating_map(z)) / eps
        assert np.allclose(saturating_jacobian(z, v), fd, atol=1e-5)

    def test_bounded_shift_properties(self, rng):
        z = 10.0 * (rng.standard_normal(100) + 1j * rng.standard_normal(100))
        vals = bounded_shift_map(z)
        assert np.max(np.abs(vals)) <= 1.0
        v = rng.standard_normal(100) + 1j * rng.standard_normal(100)
        eps = 1e-7
        fd = (bounded_shift_map(z + eps * v) - bounded_shift_map(z)) / eps
        assert np.allclose(bounded_shift_jacobian(z, v), fd, atol=1e-5)

    def test_real_axis_matches_classical_derivative(self):
        x = np.linspace(-3.0, 3.0, 31)
        got = bounded_shift_jacobian(x.astype(complex), np.ones(31, dtype=complex))
        assert np.allclose(got.real, (1.0 + x**2) ** -1.5, atol=1e-12)
        assert np.allclose(got.imag, 0.0, atol=1e-14)


class TestLinearModel:
    def test_zero_potential_zero_drift(self, modes, noise, rng):
        pm = LinearSchroedingerModel(modes, noise, potential=SpectralField(modes, np.zeros(32)))
        out = pm.drift(0.0, smooth_field(modes, rng))
        assert np.allclose(out.coeffs, 0.0, atol=1e-16)

    def test_drift_is_linear(self, modes, noise, rng):
        pm = LinearSchroedingerModel(modes, noise)
        u, v = smooth_field(modes, rng), smooth_field(modes, rng)
        lhs = pm.drift(0.0, u + v).coeffs
        rhs = pm.drift(0.0, u).coeffs + pm.drift(0.0, v).coeffs
        assert np.allclose(lhs, rhs, rtol=1e-12, atol=1e-15)

    def test_noise_is_linear_in_state(self, modes, noise, rng):
        pm = LinearSchroedingerModel(modes, noise)
        u, v = smooth_field(modes, rng), smooth_field(modes, rng)
        w = rng.standard_normal(32) + 1j * rng.standard_normal(32)
        lhs = pm.noise_apply(u + v, w).coeffs
        rhs = pm.noise_apply(u, w).coeffs + pm.noise_apply(v, w).coeffs
        assert np.allclose(lhs, rhs, rtol=1e-12, atol=1e-15)

    def test_bump_potential_on_constant_state(self, modes, noise):
        # u = 1: drift is -i * chi, whose product with a constant is alias-free
        pm = LinearSchroedingerModel(modes, noise)
        one = SpectralField(modes, np.sqrt(TWO_PI) * basis_vector(modes, 0))
        out = pm.drift(0.0, one)
        chi = bump_coefficients(np.pi / 2.0, modes)
        assert np.allclose(out.coeffs, -1j * chi.coeffs, rtol=1e-12, atol=1e-14)

    def test_lipschitz_metadata_is_peak_of_bump(self, modes, noise):
        pm = LinearSchroedingerModel(modes, noise)
        assert pm.lipschitz_drift == pytest.approx(1.0, abs=1e-3)

    def test_mode_set_mismatch_rejected(self, noise):
        with pytest.raises(ValueError):
            LinearSchroedingerModel(
                ModeSet(32), noise, potential=SpectralField(ModeSet(16), np.zeros(16))
            )
        with pytest.raises(ValueError):
            LinearSchroedingerModel(ModeSet(16), noise)


class TestNoiseApply:
    def test_zero_state_linear_noise(self, modes, noise, rng):
        pm = LinearSchroedingerModel(modes, noise)
        w = rng.standard_normal(32)
        out = pm.noise_apply(SpectralField(modes, np.zeros(32)), w)
        assert np.allclose(out.coeffs, 0.0, atol=1e-16)

    def test_zero_eigenvalue_direction_annihilated(self, modes, rng):
        lam = np.zeros(32)
        lam[5] = 0.0
        lam[10] = 0.7
        pm = LinearSchroedingerModel(modes, NoiseModel(modes, lam))
        out = pm.noise_apply(smooth_field(modes, rng), basis_vector(modes, modes.indices[5]))
        assert np.allclose(out.coeffs, 0.0, atol=1e-16)

    def test_constant_state_dc_direction(self, modes, noise):
        # G(1) e_0 = -i sqrt(lambda_0) * e_0 * 1, a constant field
        pm = LinearSchroedingerModel(modes, noise)
        one = SpectralField(modes, np.sqrt(TWO_PI) * basis_vector(modes, 0))
        out = pm.noise_apply(one, basis_vector(modes, 0))
        lam0 = noise.eigenvalues[list(modes.indices).index(0)]
        expected = -1j * np.sqrt(lam0) * basis_vector(modes, 0)
        assert np.allclose(out.coeffs, expected, atol=1e-14)

    def test_derivative_independent_of_state_for_linear_noise(self, modes, noise, rng):
        pm = LinearSchroedingerModel(modes, noise)
        v = smooth_field(modes, rng)
        w = rng.standard_normal(32)
        out1 = pm.noise_derivative_apply(smooth_field(modes, rng), v, w)
        out2 = pm.noise_derivative_apply(smooth_field(modes, rng), v, w)
        assert np.allclose(out1.coeffs, out2.coeffs, atol=1e-16)
        # and it equals the noise applied with the state replaced by v
        out3 = pm.noise_apply(v, w)
        assert np.allclose(out1.coeffs, out3.coeffs, atol=1e-15)

    def test_zero_direction(self, modes, noise, rng):
        pm = TransportModel(modes, noise)
        out = pm.noise_derivative_apply(
            smooth_field(modes, rng), SpectralField(modes, np.zeros(32)), basis_vector(modes, 1)
        )
        assert np.allclose(out.coeffs, 0.0, atol=1e-16)

    def test_transport_derivative_bound(self, modes, noise, rng):
        # |G'(u)[v] w|_L2 <= sup|psi'| * |v|_inf * |Q^(1/2) w|_L2 on samples
        pm = TransportModel(modes, noise)
        for _ in range(10):
            u, v = smooth_field(modes, rng), smooth_field(modes, rng)
            w = rng.standard_normal(32) + 1j * rng.standard_normal(32)
            out = pm.noise_derivative_apply(u, v, w)
            v_sup = np.max(np.abs(to_physical(v, 32).values))
            qw = sobolev_norm(SpectralField(modes, noise.sqrt_eigenvalues * w), 0.0)
            assert sobolev_norm(out, 0.0) <= 1.0 * v_sup * qw * (1.0 + 1e-10)


class TestNonlinearDrifts:
    def test_conv_drift_zero_state(self, modes, noise):
        pm = ConvolutionNLSModel(modes, noise)
        out = pm.drift(0.0, SpectralField(modes, np.zeros(32)))
        assert np.allclose(out.coeffs, 0.0, atol=1e-16)

    def test_conv_drift_assembly(self, modes, noise, rng):
        pm = ConvolutionNLSModel(modes, noise)
        u = smooth_field(modes, rng)
        got = pm.drift(0.0, u)
        expected = -1j * convolve(pm.kernel, pointwise_map(u, saturating_map)).coeffs
        assert np.allclose(got.coeffs, expected, rtol=1e-12, atol=1e-15)

    def test_nemytskii_drift_matches_pointwise_map(self, modes, noise, rng):
        pm = NemytskiiNLSModel(modes, noise)
        u = smooth_field(modes, rng)
        got = pm.drift(0.0, u)
        expected = -1j * pointwise_map(u, saturating_map).coeffs
        assert np.allclose(got.coeffs, expected, rtol=1e-12, atol=1e-15)

    def test_transport_drift_is_real_form(self, modes, noise, rng):
        pm = TransportModel(modes, noise)
        u = smooth_field(modes, rng)
        got = pm.drift(0.0, u)
        expected = pointwise_map(u, saturating_map).coeffs
        assert np.allclose(got.coeffs, expected, rtol=1e-12, atol=1e-15)

    def test_nemytskii_sampled_lipschitz_bound(self, rng):
        # |phi'| <= 1, and the Galerkin projection contracts, so L_F = 1
        m = ModeSet(32)
        pm = NemytskiiNLSModel(m, NoiseModel.power_law(m))
        assert pm.lipschitz_drift == 1.0
        for _ in range(1000):
            u, v = smooth_field(m, rng), smooth_field(m, rng)
            du = pm.drift(0.0, u) - pm.drift(0.0, v)
            assert sobolev_norm(du, 0.0) <= sobolev_norm(u - v, 0.0) * (1.0 + 1e-12)


class TestCommutativity:
    @pytest.mark.parametrize("model_cls", [LinearSchroedingerModel, ConvolutionNLSModel, NemytskiiNLSModel])
    def test_bilinear_symmetry_linear_noise(self, modes, noise, rng, model_cls):
        pm = model_cls(modes, noise)
        u = smooth_field(modes, rng)
        pairs = [(0, 1), (2, -3), (1, 1), (-5, 4)]
        for i, j in pairs:
            ei, ej = basis_vector(modes, i), basis_vector(modes, j)
            a = pm.noise_derivative_apply(u, pm.noise_apply(u, ei), ej).coeffs
            b = pm.noise_derivative_apply(u, pm.noise_apply(u, ej), ei).coeffs
            scale = max(np.max(np.abs(a)), 1e-30)
            assert np.max(np.abs(a - b)) <= 1e-10 * scale

    def test_all_shipped_models_declare_commutative_noise(self, modes, noise):
        for cls in ALL_MODEL_CLASSES:
            assert cls(modes, noise).commutative_noise


class TestBuildModel:
    def test_names_and_generators(self, modes, noise):
        assert build_model("linear", modes, noise).generator.kind == SCHRODINGER_KIND
        assert build_model("conv", modes, noise).generator.kind == SCHRODINGER_KIND
        assert build_model("nemytskii", modes, noise).generator.kind == SCHRODINGER_KIND
        assert build_model("transport", modes, noise).generator.kind == TRANSPORT_KIND

    def test_unknown_name_rejected(self, modes, noise):
        with pytest.raises(ValueError):
            build_model("maxwell", modes, noise)

    def test_overrides(self, modes, noise, rng):
        pot = smooth_field(modes, rng)
        pm = build_model("linear", modes, noise, potential=pot)
        assert np.array_equal(pm.potential.coeffs, pot.coeffs)
        ker = smooth_field(modes, rng)
        pm = build_model("conv", modes, noise, kernel=ker)
        assert np.array_equal(pm.kernel.coeffs, ker.coeffs)

    def test_outputs_stay_band_limited(self, modes, noise, rng):
        for cls in ALL_MODEL_CLASSES:
            pm = cls(modes, noise)
            out = pm.drift(0.0, smooth_field(modes, rng))
            assert out.coeffs.shape == (32,)
            assert out.modes == modes
