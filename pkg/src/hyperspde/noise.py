"""Q-Wiener sampling on the Fourier basis and the Milstein bilinear term.

The driving noise is W(t) = sum_l sqrt(lambda_l) * beta_l(t) * e_l with
independent REAL standard Brownian motions beta_l attached to the complex
basis functions.  A tape stores the per-mode increments over the finest time
grid (variance lambda_l * h_fine each); coarser resolutions are obtained by
summing fine increments, never by resampling, so every scheme and step size
sees the same Brownian path.

Iterated stochastic integrals are never sampled.  For models whose noise
coefficient acts by pointwise multiplication (all shipped ones), the bilinear
Milstein term with symmetric (commutative) structure reduces to Wiener
increments and the covariance eigenvalues alone:

    (G'G)(u) D2W = 1/2 * G'(u)[G(u) dW] dW
                 - 1/2 * h * sum_l lambda_l * G'(u)[G(u) e_l] e_l.

The trace sum is evaluated exactly through two cached grid fields,
sum_l lambda_l * e_l(x)^2 and sum_l lambda_l * |e_l(x)|^2, which is enough
because the Jacobian of the multiplier is real-linear and pointwise.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .spectral import (
    TWO_PI,
    ModeSet,
    SpectralField,
    coeffs_to_values,
    values_to_coeffs,
)


class NonCommutativeNoiseError(ValueError):
    """Milstein term requested for a model without commutative noise.

    Without the symmetry of (G'G)(u) the term cannot be expressed through
    Wiener increments alone; an iterated-integral approximation would be
    required, which this library does not provide.
    """


@dataclass(frozen=True, eq=False)
class NoiseModel:
    """Trace-class covariance diag(lambda_l) on the mode set."""

    modes: ModeSet
    eigenvalues: np.ndarray

    def __post_init__(self):
        lam = np.asarray(self.eigenvalues, dtype=float)
        if lam.shape != (self.modes.size,):
            raise ValueError(
                f"expected {self.modes.size} eigenvalues, got shape {lam.shape}"
            )
        if np.any(lam < 0.0):
            raise ValueError("covariance eigenvalues must be nonnegative")
        lam = lam.copy()
        lam.flags.writeable = False
        object.__setattr__(self, "eigenvalues", lam)

    @classmethod
    def power_law(cls, modes: ModeSet, exponent: float = 5.1) -> "NoiseModel":
        """Default family lambda_l = (1 + |l|^exponent)^(-1)."""
        ell = np.abs(modes.indices).astype(float)
        return cls(modes, 1.0 / (1.0 + ell**exponent))

    @classmethod
    def zero(cls, modes: ModeSet) -> "NoiseModel":
        return cls(modes, np.zeros(modes.size))

    @cached_property
    def sqrt_eigenvalues(self) -> np.ndarray:
        out = np.sqrt(self.eigenvalues)
        out.flags.writeable = False
        return out

    @cached_property
    def trace_square_values(self) -> np.ndarray:
        """sum_l lambda_l * e_l(x)^2 on the K-point grid (complex square)."""
        size = self.modes.size
        buf = np.zeros(size, dtype=np.complex128)
        np.add.at(buf, (2 * self.modes.indices) % size, self.eigenvalues)
        out = np.fft.ifft(buf) * (size / TWO_PI)
        out.flags.writeable = False
        return out

    @cached_property
    def trace_abs_value(self) -> float:
        """sum_l lambda_l * |e_l(x)|^2, constant in x."""
        return float(np.sum(self.eigenvalues)) / TWO_PI

    @cached_property
    def trace_sym_values(self) -> np.ndarray:
        # sum_l lambda_l * Re(e_l(x)) * e_l(x)
        out = 0.5 * (self.trace_square_values + self.trace_abs_value)
        out.flags.writeable = False
        return out

    @cached_property
    def trace_skew_values(self) -> np.ndarray:
        # sum_l lambda_l * Im(e_l(x)) * e_l(x)
        out = (self.trace_square_values - self.trace_abs_value) / 2j
        out.flags.writeable = False
        return out


@dataclass(frozen=True, eq=False)
class IncrementTape:
    """Per-mode Brownian increments on the finest grid, with provenance.

    increments[l, j] is the increment of sqrt(lambda_l) * beta_l over the
    j-th fine interval; rows are modes in ascending order.
    """

    modes: ModeSet
    h_fine: float
    increments: np.ndarray
    seed: int
    sample_index: int

    def __post_init__(self):
        inc = np.asarray(self.increments, dtype=float)
        if inc.ndim != 2 or inc.shape[0] != self.modes.size:
            raise ValueError(f"bad increment array shape {inc.shape}")
        inc = inc.copy()
        inc.flags.writeable = False
        object.__setattr__(self, "increments", inc)

    @property
    def m_fine(self) -> int:
        return self.increments.shape[1]

    def coarsened(self, factor: int) -> "IncrementTape":
        """Re-wrap coarsened increments as a tape at step factor * h_fine."""
        return IncrementTape(
            self.modes,
            self.h_fine * factor,
            coarsen(self, factor),
            self.seed,
            self.sample_index,
        )


def sample_tape(
    model: NoiseModel, h_fine: float, m_fine: int, seed: int, sample_index: int
) -> IncrementTape:
    """Draw the full increment tape for one sample path.

    Uses the counter-based Philox generator keyed by (seed, sample_index), so
    distinct samples can be drawn in any order, on any worker, and still agree
    bit for bit.  Increment (l, j) always sits at the same position of the
    keyed stream.
    """
    if h_fine <= 0.0:
        raise ValueError(f"fine step must be positive, got {h_fine}")
    if m_fine < 1:
        raise ValueError(f"need at least one fine step, got {m_fine}")
    key = np.array([seed % 2**64, sample_index % 2**64], dtype=np.uint64)
    rng = np.random.Generator(np.random.Philox(key=key))
    draws = rng.standard_normal((model.modes.size, m_fine))
    scale = np.sqrt(model.eigenvalues * h_fine)
    return IncrementTape(model.modes, h_fine, draws * scale[:, None], seed, sample_index)


def coarsen(tape: IncrementTape, factor: int) -> np.ndarray:
    """Sum fine increments into blocks of `factor`, keeping the same path.

    Powers of two are reduced by repeated pairwise halving; a coarsening by
    f1 * f2 with dyadic f1 is therefore bit-identical to coarsening by f1
    first and by f2 afterwards.
    """
    if factor < 1 or tape.m_fine % factor != 0:
        raise ValueError(
            f"factor {factor} does not divide the {tape.m_fine} fine steps"
        )
    out = tape.increments
    remaining = factor
    while remaining % 2 == 0:
        out = out[:, 0::2] + out[:, 1::2]
        remaining //= 2
    if remaining > 1:
        out = out.reshape(out.shape[0], -1, remaining).sum(axis=2)
    return out


def milstein_values(pm, u_values: np.ndarray, dw_values: np.ndarray, h: float,
                    model: NoiseModel) -> np.ndarray:
    """Physical-grid values of the Milstein correction (identity form)."""
    mult = pm.noise_multiplier_values(u_values)
    quad = pm.noise_jacobian_values(u_values, mult * dw_values) * dw_values
    if pm.jacobian_is_complex_linear:
        trace = pm.noise_jacobian_values(u_values, mult) * model.trace_square_values
    else:
        # Real-linear Jacobian: split e_l^2 into its conjugate-symmetric parts.
        trace = (
            pm.noise_jacobian_values(u_values, mult) * model.trace_sym_values
            + pm.noise_jacobian_values(u_values, 1j * mult) * model.trace_skew_values
        )
    return 0.5 * (quad - h * trace)


def milstein_term(pm, u: SpectralField, dw, h: float, model: NoiseModel) -> SpectralField:
    """(G'G)(u) applied to the iterated-integral increment over one step.

    dw holds the per-mode coarse Wiener increments (tape coordinates) for the
    step.  Raises NonCommutativeNoiseError unless the model declares
    commutative noise.
    """
    if not pm.commutative_noise:
        raise NonCommutativeNoiseError(
            f"model {type(pm).__name__} does not satisfy the commutativity "
            "condition; the Milstein term is not implementable via the "
            "increment identity"
        )
    dw = dw.coeffs if isinstance(dw, SpectralField) else np.asarray(dw)
    size = u.modes.size
    if dw.shape != (size,):
        raise ValueError(f"expected {size} increment coordinates, got {dw.shape}")
    u_values = coeffs_to_values(u.coeffs, size, size)
    dw_values = coeffs_to_values(dw.astype(np.complex128), size, size)
    vals = milstein_values(pm, u_values, dw_values, h, model)
    return SpectralField(u.modes, values_to_coeffs(vals, size))


# Debug tape dump: little-endian header (seed, sample_index, K as int64,
# h_fine as float64, m_fine as int64) followed by the K x m_fine increment
# matrix in float64, mode-major — the field layout extended by provenance.

def write_tape(path, tape: IncrementTape) -> None:
    with open(path, "wb") as fh:
        np.asarray([tape.seed, tape.sample_index, tape.modes.size], dtype="<i8").tofile(fh)
        np.asarray([tape.h_fine], dtype="<f8").tofile(fh)
        np.asarray([tape.m_fine], dtype="<i8").tofile(fh)
        tape.increments.astype("<f8").tofile(fh)


def read_tape(path) -> IncrementTape:
    with open(path, "rb") as fh:
        seed, sample_index, size = (int(v) for v in np.fromfile(fh, dtype="<i8", count=3))
        h_fine = float(np.fromfile(fh, dtype="<f8", count=1)[0])
        m_fine = int(np.fromfile(fh, dtype="<i8", count=1)[0])
        flat = np.fromfile(fh, dtype="<f8", count=size * m_fine)
    if flat.size != size * m_fine:
        raise ValueError("truncated tape file")
    return IncrementTape(
        ModeSet(size), h_fine, flat.reshape(size, m_fine), seed, sample_index
    )
