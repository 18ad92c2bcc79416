"""Q-Wiener tapes, coarsening, and the Milstein bilinear term."""

import math

import numpy as np
import pytest

from hyperspde.models import LinearSchroedingerModel, TransportModel
from hyperspde.noise import (
    IncrementTape,
    NoiseModel,
    NonCommutativeNoiseError,
    coarsen,
    milstein_term,
    read_tape,
    sample_tape,
    write_tape,
)
from hyperspde.spectral import ModeSet, SpectralField


def unit_field(modes, ell, value=1.0):
    coeffs = np.zeros(modes.size, dtype=complex)
    coeffs[list(modes.indices).index(ell)] = value
    return SpectralField(modes, coeffs)


class TestNoiseModel:
    def test_power_law_values(self):
        m = ModeSet(8)
        model = NoiseModel.power_law(m)
        by_mode = dict(zip(m.indices, model.eigenvalues))
        assert by_mode[0] == 1.0
        assert by_mode[2] == pytest.approx(1.0 / (1.0 + 2.0**5.1))
        assert by_mode[-3] == by_mode[3]

    def test_negative_eigenvalue_rejected(self):
        with pytest.raises(ValueError):
            NoiseModel(ModeSet(4), np.array([1.0, -0.1, 0.0, 0.0]))

    def test_trace_fields_against_direct_summation(self):
        # oracle: sum_l lambda_l e_l(x)^2 evaluated term by term on the grid
        m = ModeSet(16)
        model = NoiseModel.power_law(m, exponent=3.0)
        x = 2.0 * np.pi * np.arange(16) / 16
        direct = np.zeros(16, dtype=complex)
        for ell, lam in zip(m.indices, model.eigenvalues):
            e = np.exp(1j * ell * x) / np.sqrt(2.0 * np.pi)
            direct += lam * e * e
        assert np.allclose(model.trace_square_values, direct, atol=1e-13)
        assert model.trace_abs_value == pytest.approx(
            float(np.sum(model.eigenvalues)) / (2.0 * np.pi)
        )


class TestSampleTape:
    def test_zero_eigenvalue_rows_vanish(self):
        m = ModeSet(4)
        model = NoiseModel(m, np.array([0.5, 0.0, 0.25, 0.0]))
        tape = sample_tape(model, 0.01, 64, seed=3, sample_index=0)
        assert np.all(tape.increments[1] == 0.0)
        assert np.all(tape.increments[3] == 0.0)
        assert np.any(tape.increments[0] != 0.0)

    def test_moments_within_five_standard_errors(self):
        m = ModeSet(4)
        model = NoiseModel.power_law(m)
        h = 0.02
        n = 10**5
        tape = sample_tape(model, h, n, seed=5, sample_index=1)
        for row, lam in zip(tape.increments, model.eigenvalues):
            var = lam * h
            se_mean = math.sqrt(var / n)
            assert abs(row.mean()) <= 5.0 * se_mean
            se_var = var * math.sqrt(2.0 / n)
            assert abs(row.var() - var) <= 5.0 * se_var

    def test_deterministic_per_key(self):
        model = NoiseModel.power_law(ModeSet(8))
        a = sample_tape(model, 0.1, 32, seed=9, sample_index=4)
        b = sample_tape(model, 0.1, 32, seed=9, sample_index=4)
        c = sample_tape(model, 0.1, 32, seed=9, sample_index=5)
        assert np.array_equal(a.increments, b.increments)
        assert not np.array_equal(a.increments, c.increments)

    def test_bad_arguments_rejected(self):
        model = NoiseModel.power_law(ModeSet(4))
        with pytest.raises(ValueError):
            sample_tape(model, 0.0, 8, 0, 0)
        with pytest.raises(ValueError):
            sample_tape(model, 0.1, 0, 0, 0)

    def test_cross_mode_independence(self):
        # increments are iid across steps, so steps act as samples here
        m = ModeSet(8)
        model = NoiseModel.power_law(m, exponent=2.0)
        n = 10**4
        tape = sample_tape(model, 1.0, n, seed=13, sample_index=0)
        rows = tape.increments / np.sqrt(model.eigenvalues)[:, None]
        corr = np.corrcoef(rows)
        off = corr[~np.eye(8, dtype=bool)]
        assert np.max(np.abs(off)) < 4.0 / math.sqrt(n)


class TestCoarsen:
    def test_identity_factor(self):
        model = NoiseModel.power_law(ModeSet(4))
        tape = sample_tape(model, 0.1, 16, seed=1, sample_index=0)
        assert np.array_equal(coarsen(tape, 1), tape.increments)

    def test_total_factor_matches_block_sum(self):
        model = NoiseModel.power_law(ModeSet(4))
        tape = sample_tape(model, 0.1, 16, seed=1, sample_index=0)
        total = coarsen(tape, 16)
        assert total.shape == (4, 1)
        # oracle: exactly-rounded compensated summation
        for row, got in zip(tape.increments, total[:, 0]):
            assert got == pytest.approx(math.fsum(row), abs=1e-15)

    def test_non_divisor_rejected(self):
        model = NoiseModel.power_law(ModeSet(4))
        tape = sample_tape(model, 0.1, 16, seed=1, sample_index=0)
        with pytest.raises(ValueError):
            coarsen(tape, 3)

    @pytest.mark.parametrize("f1,f2", [(2, 2), (2, 4), (4, 2), (8, 2)])
    def test_dyadic_composition_is_bitwise_exact(self, f1, f2):
        model = NoiseModel.power_law(ModeSet(8))
        tape = sample_tape(model, 0.05, 64, seed=21, sample_index=2)
        direct = coarsen(tape, f1 * f2)
        chained = coarsen(tape.coarsened(f1), f2)
        assert np.array_equal(direct, chained)

    def test_coarse_variance(self):
        # variance of block sums ~ lambda * h * factor, within five stderr
        m = ModeSet(4)
        model = NoiseModel.power_law(m)
        h, n, factor = 0.01, 2**16, 8
        tape = sample_tape(model, h, n, seed=33, sample_index=0)
        coarse = coarsen(tape, factor)
        n_blocks = n // factor
        for row, lam in zip(coarse, model.eigenvalues):
            var = lam * h * factor
            assert abs(row.var() - var) <= 5.0 * var * math.sqrt(2.0 / n_blocks)


def cylindrical_coordinates(dw, model):
    out = np.zeros_like(dw)
    mask = model.eigenvalues > 0
    out[mask] = dw[mask] / np.sqrt(model.eigenvalues[mask])
    return out


def literal_identity_term(pm, u, dw, h, model):
    """Milstein term assembled from the public G / G' operations only.

    quadratic part: G'(u)[G(u) w] w with w the cylindrical coordinates of dw;
    trace part: sum over basis vectors of G'(u)[G(u) e_l] e_l.
    """
    modes = pm.modes
    w = cylindrical_coordinates(dw, model)
    quad = pm.noise_derivative_apply(u, pm.noise_apply(u, w), w)
    trace = np.zeros(modes.size, dtype=complex)
    for k in range(modes.size):
        basis = np.zeros(modes.size, dtype=complex)
        basis[k] = 1.0
        trace += pm.noise_derivative_apply(u, pm.noise_apply(u, basis), basis).coeffs
    return SpectralField(modes, 0.5 * (quad.coeffs - h * trace))


def smooth_field(modes, rng, decay=2.0):
    ell = np.abs(modes.indices).astype(float)
    scale = (1.0 + ell) ** (-decay)
    return SpectralField(
        modes, scale * (rng.standard_normal(modes.size) + 1j * rng.standard_normal(modes.size))
    )


class TestMilsteinTerm:
    @pytest.mark.parametrize("model_cls", [LinearSchroedingerModel, TransportModel])
    def test_matches_literal_bilinear_evaluation(self, model_cls, rng):
        m = ModeSet(16)
        noise = NoiseModel.power_law(m, exponent=2.0)
        pm = model_cls(m, noise)
        u = smooth_field(m, rng)
        dw = np.sqrt(noise.eigenvalues) * rng.standard_normal(16) * 0.1
        h = 0.05
        got = milstein_term(pm, u, dw, h, noise)
        expected = literal_identity_term(pm, u, dw, h, noise)
        scale = max(np.max(np.abs(expected.coeffs)), 1e-30)
        assert np.max(np.abs(got.coeffs - expected.coeffs)) <= 1e-10 * scale

    @pytest.mark.parametrize("model_cls", [LinearSchroedingerModel, TransportModel])
    def test_zero_increment_gives_pure_trace(self, model_cls, rng):
        m = ModeSet(16)
        noise = NoiseModel.power_law(m, exponent=2.0)
        pm = model_cls(m, noise)
        u = smooth_field(m, rng)
        h = 0.125
        got = milstein_term(pm, u, np.zeros(16), h, noise)
        expected = literal_identity_term(pm, u, np.zeros(16), h, noise)
        assert np.allclose(got.coeffs, expected.coeffs, atol=1e-14)
        assert np.any(got.coeffs != 0.0)

    def test_zero_state_with_linear_noise(self):
        m = ModeSet(8)
        noise = NoiseModel.power_law(m)
        pm = LinearSchroedingerModel(m, noise, potential=SpectralField(m, np.zeros(8)))
        dw = 0.3 * np.sqrt(noise.eigenvalues)
        out = milstein_term(pm, SpectralField(m, np.zeros(8)), dw, 0.1, noise)
        assert np.allclose(out.coeffs, 0.0, atol=1e-15)

    def test_scalar_reduction_closed_form(self):
        # single active mode l=0: term = -1/2 * lambda_0 * (2*pi)^(-1) * u * (db^2 - h)
        m = ModeSet(2)
        lam = np.array([0.4, 0.0])
        noise = NoiseModel(m, lam)
        pm = LinearSchroedingerModel(m, noise, potential=SpectralField(m, np.zeros(2)))
        amp = 0.7 - 0.2j
        u = SpectralField(m, np.array([amp, 0.0]))
        dbeta, h = 0.3, 0.01
        dw = np.array([np.sqrt(lam[0]) * dbeta, 0.0])
        got = milstein_term(pm, u, dw, h, noise)
        expected = -0.5 * lam[0] * amp * (dbeta**2 - h) / (2.0 * np.pi)
        assert got.coeffs[0] == pytest.approx(expected, rel=1e-12)
        assert got.coeffs[1] == 0.0

    def test_mean_zero_over_increments(self):
        # the two halves of the identity cancel in expectation
        m = ModeSet(8)
        noise = NoiseModel.power_law(m, exponent=2.0)
        pm = LinearSchroedingerModel(m, noise)
        rng = np.random.default_rng(99)
        u = smooth_field(m, rng)
        h = 0.05
        n = 4000
        draws = rng.standard_normal((8, n)) * np.sqrt(noise.eigenvalues * h)[:, None]
        terms = np.stack(
            [milstein_term(pm, u, draws[:, j], h, noise).coeffs for j in range(n)]
        )
        mean = terms.mean(axis=0)
        se_re = terms.real.std(axis=0, ddof=1) / math.sqrt(n)
        se_im = terms.imag.std(axis=0, ddof=1) / math.sqrt(n)
        assert np.all(np.abs(mean.real) <= 5.0 * se_re + 1e-12)
        assert np.all(np.abs(mean.imag) <= 5.0 * se_im + 1e-12)

    def test_non_commutative_model_rejected(self, rng):
        m = ModeSet(8)
        noise = NoiseModel.power_law(m)

        class Weird(LinearSchroedingerModel):
            commutative_noise = False

        pm = Weird(m, noise)
        with pytest.raises(NonCommutativeNoiseError):
            milstein_term(pm, smooth_field(m, rng), np.zeros(8), 0.1, noise)


class TestTapeIO:
    def test_round_trip(self, tmp_path):
        model = NoiseModel.power_law(ModeSet(8))
        tape = sample_tape(model, 0.25, 16, seed=17, sample_index=3)
        path = tmp_path / "tape.bin"
        write_tape(path, tape)
        back = read_tape(path)
        assert back.seed == 17 and back.sample_index == 3
        assert back.h_fine == 0.25 and back.m_fine == 16
        assert np.array_equal(back.increments, tape.increments)

    def test_truncated_rejected(self, tmp_path):
        model = NoiseModel.power_law(ModeSet(4))
        tape = sample_tape(model, 0.25, 8, seed=1, sample_index=0)
        path = tmp_path / "tape.bin"
        write_tape(path, tape)
        path.write_bytes(path.read_bytes()[:-16])
        with pytest.raises(ValueError):
            read_tape(path)


def test_increment_tape_validation():
    with pytest.raises(ValueError):
        IncrementTape(ModeSet(4), 0.1, np.zeros((3, 5)), 0, 0)
