"""Complex spectral fields on the one-dimensional torus [0, 2*pi).

Coefficients are taken with respect to the orthonormal Fourier basis

    e_l(x) = (2*pi)**(-1/2) * exp(1j*l*x),   l in {-K/2+1, ..., K/2},

for an even mode count K >= 2.  All (2*pi) factors are carried explicitly
by the transforms, so Parseval holds with constant one: for a band-limited
field sampled on an equispaced grid of N >= K points,

    sum_l |c_l|^2  =  (2*pi/N) * sum_n |u(x_n)|^2.

Nonlinear (Nemytskii) maps are evaluated on the physical grid and projected
back onto the mode set; with the default grid of exactly N = K points no
dealiasing is performed, so aliasing is absorbed into the fixed-K Galerkin
truncation error.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import Callable

import numpy as np

TWO_PI = 2.0 * np.pi
_BASIS_SCALE = 1.0 / np.sqrt(TWO_PI)  # value of e_0


def mode_indices(size: int) -> np.ndarray:
    """Signed mode numbers {-K/2+1, ..., K/2} in ascending order."""
    half = size // 2
    return np.arange(-half + 1, half + 1)


@dataclass(frozen=True)
class ModeSet:
    """Symmetric (up to the single mode +K/2) Fourier mode set of size K."""

    size: int

    def __post_init__(self):
        if self.size < 2 or self.size % 2 != 0:
            raise ValueError(f"mode count must be even and >= 2, got {self.size}")

    @property
    def indices(self) -> np.ndarray:
        return mode_indices(self.size)


@dataclass(frozen=True)
class SpectralField:
    """Immutable coefficient vector over a ModeSet, ascending mode order."""

    modes: ModeSet
    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=np.complex128)
        if coeffs.shape != (self.modes.size,):
            raise ValueError(
                f"expected {self.modes.size} coefficients, got shape {coeffs.shape}"
            )
        coeffs = coeffs.copy()
        coeffs.flags.writeable = False
        object.__setattr__(self, "coeffs", coeffs)

    def __add__(self, other: "SpectralField") -> "SpectralField":
        _require_same_modes(self, other)
        return SpectralField(self.modes, self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        _require_same_modes(self, other)
        return SpectralField(self.modes, self.coeffs - other.coeffs)

    def __mul__(self, scalar: complex) -> "SpectralField":
        return SpectralField(self.modes, self.coeffs * scalar)

    __rmul__ = __mul__


@dataclass(frozen=True)
class PhysicalSamples:
    """Values on the equispaced grid x_n = 2*pi*n/N, n = 0..N-1."""

    grid_size: int
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.complex128)
        if values.shape != (self.grid_size,):
            raise ValueError(
                f"expected {self.grid_size} samples, got shape {values.shape}"
            )
        values = values.copy()
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def grid(self) -> np.ndarray:
        return grid_points(self.grid_size)


def _require_same_modes(a, b):
    if a.modes != b.modes:
        raise ValueError("fields live on different mode sets")


def grid_points(grid_size: int) -> np.ndarray:
    return TWO_PI * np.arange(grid_size) / grid_size


@functools.lru_cache(maxsize=None)
def _scatter_indices(size: int, grid_size: int) -> np.ndarray:
    # FFT bin for each mode; distinct for grid_size >= size.
    return mode_indices(size) % grid_size


def coeffs_to_values(coeffs: np.ndarray, size: int, grid_size: int) -> np.ndarray:
    """Array-level synthesis: values[n] = sum_l c_l e_l(x_n).  Needs grid_size >= size."""
    if grid_size < size:
        raise ValueError(
            f"grid size {grid_size} < mode count {size}: transform would alias"
        )
    buf = np.zeros(grid_size, dtype=np.complex128)
    buf[_scatter_indices(size, grid_size)] = coeffs
    return np.fft.ifft(buf) * (grid_size * _BASIS_SCALE)


def values_to_coeffs(values: np.ndarray, size: int) -> np.ndarray:
    """Array-level analysis: discrete projection onto e_l for l in the mode set."""
    grid_size = values.shape[-1]
    if grid_size < size:
        raise ValueError(
            f"grid size {grid_size} < mode count {size}: projection would alias"
        )
    spec = np.fft.fft(values)
    return spec[..., _scatter_indices(size, grid_size)] * (np.sqrt(TWO_PI) / grid_size)


def to_physical(u: SpectralField, grid_size: int) -> PhysicalSamples:
    """Evaluate u on the equispaced grid of grid_size >= K points."""
    return PhysicalSamples(
        grid_size, coeffs_to_values(u.coeffs, u.modes.size, grid_size)
    )


def to_spectral(samples: PhysicalSamples, modes: ModeSet) -> SpectralField:
    """Project grid samples onto the mode set; inverse of to_physical on band-limited data."""
    return SpectralField(modes, values_to_coeffs(samples.values, modes.size))


def sobolev_norm(u: SpectralField, order: float = 0.0) -> float:
    """H^s norm (sum_l (1+l^2)^s |c_l|^2)^(1/2); order 0 is the L2 norm."""
    weights = (1.0 + u.modes.indices.astype(float) ** 2) ** order
    return float(np.sqrt(np.sum(weights * np.abs(u.coeffs) ** 2)))


def l2_norm(coeffs: np.ndarray) -> float:
    return float(np.linalg.norm(coeffs))


def pointwise_map(
    u: SpectralField,
    fn: Callable[[np.ndarray], np.ndarray],
    grid_size: int | None = None,
) -> SpectralField:
    """Galerkin-projected Nemytskii map: synthesize, apply fn on the grid, project back.

    fn must act elementwise on a complex array.  The default grid has exactly
    K points (no dealiasing); pass grid_size=2*K for dealiased diagnostics.
    """
    size = u.modes.size
    n = size if grid_size is None else grid_size
    values = coeffs_to_values(u.coeffs, size, n)
    return SpectralField(u.modes, values_to_coeffs(fn(values), size))


def convolve(kernel: SpectralField, u: SpectralField) -> SpectralField:
    """Torus convolution (kernel * u); coefficientwise sqrt(2*pi) * k_l * u_l."""
    _require_same_modes(kernel, u)
    return SpectralField(u.modes, np.sqrt(TWO_PI) * kernel.coeffs * u.coeffs)


def evaluate_at(u: SpectralField, x) -> np.ndarray:
    """Direct O(K*len(x)) synthesis at arbitrary points (slow; for verification)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    phases = np.exp(1j * np.outer(x, u.modes.indices))
    return phases @ u.coeffs * _BASIS_SCALE


def bump_values(c: float, x: np.ndarray) -> np.ndarray:
    """Centred C^infinity bump on the torus: 1 at x=0, support width 2c, 0 elsewhere.

    Wrapped profile exp(1/c^2) * exp(1/(y^2 - c^2)) for |y| < c, with
    y the representative of x in [-pi, pi).
    """
    if not 0.0 < c < np.pi:
        raise ValueError(f"bump width must lie in (0, pi), got {c}")
    y = np.mod(np.asarray(x, dtype=float) + np.pi, TWO_PI) - np.pi
    out = np.zeros_like(y)
    inside = np.abs(y) < c
    out[inside] = np.exp(1.0 / c**2) * np.exp(1.0 / (y[inside] ** 2 - c**2))
    return out


def bump_coefficients(
    c: float, modes: ModeSet, quad_grid: int | None = None
) -> SpectralField:
    """Spectral projection of the bump via quadrature on a grid of >= 4K points."""
    n = 4 * modes.size if quad_grid is None else quad_grid
    if n < 4 * modes.size:
        raise ValueError(
            f"quadrature grid {n} < 4*K = {4 * modes.size}: too coarse for the bump"
        )
    values = bump_values(c, grid_points(n)).astype(np.complex128)
    return SpectralField(modes, values_to_coeffs(values, modes.size))


def power_decay_field(exponent: float, modes: ModeSet) -> SpectralField:
    """Real coefficients c_l = (1 + |l|^exponent)^(-1); square-summable for exponent > 1/2."""
    if exponent <= 0.5:
        raise ValueError(f"decay exponent must exceed 1/2, got {exponent}")
    ell = np.abs(modes.indices).astype(float)
    return SpectralField(modes, 1.0 / (1.0 + ell**exponent))


# Flat binary layout used for reference-solution caching: K as a little-endian
# 64-bit signed integer, then K interleaved (re, im) float64 pairs in ascending
# mode order.

def write_field(path, field: SpectralField) -> None:
    with open(path, "wb") as fh:
        np.asarray([field.modes.size], dtype="<i8").tofile(fh)
        interleaved = np.empty((field.modes.size, 2), dtype="<f8")
        interleaved[:, 0] = field.coeffs.real
        interleaved[:, 1] = field.coeffs.imag
        interleaved.tofile(fh)


def read_field(path) -> SpectralField:
    with open(path, "rb") as fh:
        size = int(np.fromfile(fh, dtype="<i8", count=1)[0])
        flat = np.fromfile(fh, dtype="<f8", count=2 * size)
    if flat.size != 2 * size:
        raise ValueError(f"truncated field file: expected {2 * size} floats")
    pairs = flat.reshape(size, 2)
    return SpectralField(ModeSet(size), pairs[:, 0] + 1j * pairs[:, 1])
