"""Concrete equation models: drift F, noise coefficient G, and its derivative.

Every shipped model has multiplicative noise acting by pointwise
multiplication on the physical grid,

    G(u) w = m(u) * (Q^{1/2} w),

with multiplier field m(u) = -i*u (dispersive models) or psi(u) (transport),
so the noise is commutative and the Milstein term can be evaluated through
Wiener increments alone.  Scalar nonlinearities are complex maps treated as
R^2 -> R^2; their derivatives enter as real-linear Jacobians.

Drift conventions per model (the generator never carries the potential):

    linear:     F(u) = -i * V * u              (V a potential, default bump)
    conv:       F(u) = -i * eta ** phi(u)       (** = torus convolution)
    nemytskii:  F(u) = -i * phi(u)
    transport:  F(u) = phi(u)                  (real-form equation)
"""

from __future__ import annotations

import abc

import numpy as np

from . import noise as noise_mod
from .schemes import SCHRODINGER, TRANSPORT, Generator
from .spectral import (
    TWO_PI,
    ModeSet,
    SpectralField,
    bump_coefficients,
    coeffs_to_values,
    values_to_coeffs,
)

DEFAULT_BUMP_WIDTH = float(np.pi / 2.0)


def saturating_map(z: np.ndarray) -> np.ndarray:
    """phi(z) = z / (1 + |z|^2); globally Lipschitz with constant 1."""
    return z / (1.0 + np.abs(z) ** 2)


def saturating_jacobian(z: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Real Jacobian of the saturating map applied to the direction v."""
    s = np.abs(z) ** 2
    g = 1.0 / (1.0 + s)
    return v * g - z * (2.0 * np.real(np.conj(z) * v)) * g**2


def bounded_shift_map(z: np.ndarray) -> np.ndarray:
    """psi(z) = z / sqrt(1 + |z|^2); bounded by 1, psi'(x)psi(x) Lipschitz on R."""
    return z / np.sqrt(1.0 + np.abs(z) ** 2)


def bounded_shift_jacobian(z: np.ndarray, v: np.ndarray) -> np.ndarray:
    s = np.abs(z) ** 2
    g = 1.0 / np.sqrt(1.0 + s)
    return v * g - z * np.real(np.conj(z) * v) * g**3


class ProblemModel(abc.ABC):
    """Drift, noise, and Milstein data for one equation on a fixed mode set.

    Subclasses fill in the generator, a drift, and the physical-grid noise
    multiplier with its Jacobian.  Instances are immutable configuration and
    safe to share between workers.
    """

    generator: Generator
    commutative_noise: bool = True
    #: Jacobian of the noise multiplier commutes with multiplication by i.
    jacobian_is_complex_linear: bool = False
    #: Optional Lipschitz metadata for property tests.
    lipschitz_drift: float | None = None
    lipschitz_noise_multiplier: float | None = None

    def __init__(self, modes: ModeSet, noise: noise_mod.NoiseModel):
        if noise.modes != modes:
            raise ValueError("noise model lives on a different mode set")
        self.modes = modes
        self.noise = noise

    # -- physical-grid hooks -------------------------------------------------

    @abc.abstractmethod
    def noise_multiplier_values(self, u_values: np.ndarray) -> np.ndarray:
        """m(u) on the grid; G(u)w multiplies Q^{1/2}w by this field."""

    @abc.abstractmethod
    def noise_jacobian_values(self, u_values: np.ndarray, v_values: np.ndarray) -> np.ndarray:
        """Directional derivative of the multiplier: (d/du) m(u)[v] on the grid."""

    # Pointwise drifts override drift_values; convolution drifts override
    # drift_coeffs and set _drift_in_physical = False.
    _drift_in_physical = True

    def drift_values(self, t: float, u_values: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def drift_coeffs(self, t: float, coeffs: np.ndarray, u_values: np.ndarray) -> np.ndarray:
        size = self.modes.size
        return values_to_coeffs(self.drift_values(t, u_values), size)

    # -- spectral-level API ----------------------------------------------------

    def drift(self, t: float, u: SpectralField) -> SpectralField:
        """F(t, u), Galerkin-projected onto the mode set."""
        self._check(u)
        size = self.modes.size
        u_values = coeffs_to_values(u.coeffs, size, size)
        return SpectralField(self.modes, self.drift_coeffs(t, u.coeffs, u_values))

    def noise_apply(self, u: SpectralField, w) -> SpectralField:
        """G(u) w for an L2 element w given by its mode coefficients."""
        self._check(u)
        w = self._coeffs_of(w)
        size = self.modes.size
        u_values = coeffs_to_values(u.coeffs, size, size)
        qw_values = coeffs_to_values(self.noise.sqrt_eigenvalues * w, size, size)
        vals = self.noise_multiplier_values(u_values) * qw_values
        return SpectralField(self.modes, values_to_coeffs(vals, size))

    def noise_derivative_apply(self, u: SpectralField, v: SpectralField, w) -> SpectralField:
        """G'(u)[v] w; for linear noise this is noise_apply with u replaced by v."""
        self._check(u)
        self._check(v)
        w = self._coeffs_of(w)
        size = self.modes.size
        u_values = coeffs_to_values(u.coeffs, size, size)
        v_values = coeffs_to_values(v.coeffs, size, size)
        qw_values = coeffs_to_values(self.noise.sqrt_eigenvalues * w, size, size)
        vals = self.noise_jacobian_values(u_values, v_values) * qw_values
        return SpectralField(self.modes, values_to_coeffs(vals, size))

    # -- stepping fast path ----------------------------------------------------

    def increment_coeffs(self, t: float, coeffs: np.ndarray, dw: np.ndarray,
                         h: float, milstein: bool) -> np.ndarray:
        """h*F(t,u) + G(u) dW (+ Milstein correction), as mode coefficients.

        dw holds the Wiener increments of the step in tape coordinates, i.e.
        the coefficients of the Q-Wiener increment field itself, so the bare
        multiplier acts on it without another Q^{1/2}.
        """
        size = self.modes.size
        u_values = coeffs_to_values(coeffs, size, size)
        dw_values = coeffs_to_values(dw.astype(np.complex128), size, size)
        acc = self.noise_multiplier_values(u_values) * dw_values
        if milstein:
            acc = acc + noise_mod.milstein_values(self, u_values, dw_values, h, self.noise)
        if self._drift_in_physical:
            acc = acc + h * self.drift_values(t, u_values)
            return values_to_coeffs(acc, size)
        return values_to_coeffs(acc, size) + h * self.drift_coeffs(t, coeffs, u_values)

    def _check(self, u: SpectralField) -> None:
        if u.modes != self.modes:
            raise ValueError("field lives on a different mode set")

    def _coeffs_of(self, w) -> np.ndarray:
        w = w.coeffs if isinstance(w, SpectralField) else np.asarray(w, dtype=np.complex128)
        if w.shape != (self.modes.size,):
            raise ValueError(f"expected {self.modes.size} coefficients, got {w.shape}")
        return w


class _DispersiveNoise:
    """Linear multiplicative noise G(u) = -i M_u Q^{1/2} shared by the SE models."""

    jacobian_is_complex_linear = True
    lipschitz_noise_multiplier = 1.0

    def noise_multiplier_values(self, u_values):
        return -1j * u_values

    def noise_jacobian_values(self, u_values, v_values):
        return -1j * v_values


class LinearSchroedingerModel(_DispersiveNoise, ProblemModel):
    """dU = -i(Laplace U + V*U) dt - i U dW with a fixed potential V."""

    generator = SCHRODINGER

    def __init__(self, modes, noise, potential: SpectralField | None = None):
        super().__init__(modes, noise)
        if potential is None:
            potential = bump_coefficients(DEFAULT_BUMP_WIDTH, modes)
        elif potential.modes != modes:
            raise ValueError("potential lives on a different mode set")
        self.potential = potential
        self._potential_values = coeffs_to_values(potential.coeffs, modes.size, modes.size)
        self.lipschitz_drift = float(np.max(np.abs(self._potential_values)))

    def drift_values(self, t, u_values):
        return -1j * self._potential_values * u_values


class ConvolutionNLSModel(_DispersiveNoise, ProblemModel):
    """dU = -i(Laplace U + eta ** phi(U)) dt - i U dW, nonlocal drift."""

    generator = SCHRODINGER
    _drift_in_physical = False

    def __init__(self, modes, noise, kernel: SpectralField | None = None, phi=saturating_map):
        super().__init__(modes, noise)
        if kernel is None:
            kernel = bump_coefficients(DEFAULT_BUMP_WIDTH, modes)
        elif kernel.modes != modes:
            raise ValueError("kernel lives on a different mode set")
        self.kernel = kernel
        self.phi = phi
        self._conv_factor = np.sqrt(TWO_PI) * kernel.coeffs
        # |F(u)-F(v)|_L2 <= |eta|_L1 * Lip(phi) * |u-v|_L2 by Young's inequality.
        kernel_values = coeffs_to_values(kernel.coeffs, modes.size, 4 * modes.size)
        self.lipschitz_drift = float(
            np.sum(np.abs(kernel_values)) * TWO_PI / (4 * modes.size)
        )

    def drift_coeffs(self, t, coeffs, u_values):
        size = self.modes.size
        return -1j * self._conv_factor * values_to_coeffs(self.phi(u_values), size)


class NemytskiiNLSModel(_DispersiveNoise, ProblemModel):
    """dU = -i(Laplace U + phi(U)) dt - i U dW with a pointwise nonlinearity."""

    generator = SCHRODINGER
    lipschitz_drift = 1.0

    def __init__(self, modes, noise, phi=saturating_map):
        super().__init__(modes, noise)
        self.phi = phi

    def drift_values(self, t, u_values):
        return -1j * self.phi(u_values)


class TransportModel(ProblemModel):
    """dU = (U' + phi(U)) dt + psi(U) dW, periodic form of the transport equation.

    Posed on the torus rather than the whole line so that the shift semigroup
    stays a diagonal Fourier multiplier; a deliberate domain change.
    """

    generator = TRANSPORT
    jacobian_is_complex_linear = False
    lipschitz_drift = 1.0
    lipschitz_noise_multiplier = 1.0

    def __init__(self, modes, noise, phi=saturating_map,
                 psi=bounded_shift_map, psi_jacobian=bounded_shift_jacobian):
        super().__init__(modes, noise)
        self.phi = phi
        self.psi = psi
        self.psi_jacobian = psi_jacobian

    def drift_values(self, t, u_values):
        return self.phi(u_values)

    def noise_multiplier_values(self, u_values):
        return self.psi(u_values)

    def noise_jacobian_values(self, u_values, v_values):
        return self.psi_jacobian(u_values, v_values)


MODEL_NAMES = ("linear", "conv", "nemytskii", "transport")


def build_model(
    name: str,
    modes: ModeSet,
    noise: noise_mod.NoiseModel,
    bump_width: float = DEFAULT_BUMP_WIDTH,
    potential: SpectralField | None = None,
    kernel: SpectralField | None = None,
) -> ProblemModel:
    """Construct a shipped model by name; potential/kernel override the bump."""
    if name == "linear":
        if potential is None:
            potential = bump_coefficients(bump_width, modes)
        return LinearSchroedingerModel(modes, noise, potential)
    if name == "conv":
        if kernel is None:
            kernel = bump_coefficients(bump_width, modes)
        return ConvolutionNLSModel(modes, noise, kernel)
    if name == "nemytskii":
        return NemytskiiNLSModel(modes, noise)
    if name == "transport":
        return TransportModel(modes, noise)
    raise ValueError(f"unknown model {name!r}; choose one of {MODEL_NAMES}")
