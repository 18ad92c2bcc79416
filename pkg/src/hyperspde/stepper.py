"""One-step and full-trajectory time integration.

One step of the rational (or exponential) scheme, with or without the
Milstein correction, is the recursion

    u_next = R_h( u_prev + h*F(t, u_prev) + G(u_prev) dW (+ Milstein term) ),

which unrolls to the summed form

    u_j = R_h^j u_0 + sum_{i<j} R_h^{j-i} [ h F(t_i,u_i) + G(u_i) dW_{i+1} + ... ].

The recursion costs O(M) scheme applications instead of O(M^2); the agreement
of the two forms is a tested invariant, not an assumption.  The Wiener
increments are always consumed from a tape at a finer resolution, coarsened by
summation, so runs at different step sizes share the Brownian path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .models import ProblemModel
from .noise import IncrementTape, coarsen
from .schemes import TimeScheme, step_multipliers
from .spectral import SpectralField


@dataclass(frozen=True)
class StepperConfig:
    model: ProblemModel
    scheme: TimeScheme
    step_size: float
    n_steps: int
    milstein: bool = False

    def __post_init__(self):
        if self.step_size <= 0.0:
            raise ValueError(f"step size must be positive, got {self.step_size}")
        if self.n_steps < 1:
            raise ValueError(f"need at least one step, got {self.n_steps}")

    @property
    def horizon(self) -> float:
        return self.n_steps * self.step_size

    def multipliers(self) -> np.ndarray:
        return step_multipliers(
            self.scheme, self.model.generator, self.step_size, self.model.modes
        )


def step(cfg: StepperConfig, u_prev: SpectralField, t_prev: float, dw) -> SpectralField:
    """Advance one step; dw holds the Wiener increments over (t_prev, t_prev+h]."""
    dw = dw.coeffs if isinstance(dw, SpectralField) else np.asarray(dw)
    inc = cfg.model.increment_coeffs(
        t_prev, u_prev.coeffs, dw, cfg.step_size, cfg.milstein
    )
    return SpectralField(u_prev.modes, cfg.multipliers() * (u_prev.coeffs + inc))


def coarse_increments(cfg: StepperConfig, tape: IncrementTape) -> np.ndarray:
    """Increments of the tape path at the stepper resolution; rejects mismatches."""
    ratio = cfg.step_size / tape.h_fine
    factor = round(ratio)
    if factor < 1 or abs(ratio - factor) > 1e-9 * factor:
        raise ValueError(
            f"tape step {tape.h_fine} does not divide the scheme step {cfg.step_size}"
        )
    if tape.m_fine < factor * cfg.n_steps:
        raise ValueError(
            f"tape covers {tape.m_fine} fine steps but {factor * cfg.n_steps} are needed"
        )
    inc = coarsen(tape, factor)
    return inc[:, : cfg.n_steps]


def integrate_coeffs(
    cfg: StepperConfig,
    init_coeffs: np.ndarray,
    increments: np.ndarray,
    snapshot_stride: int = 1,
) -> np.ndarray:
    """Core loop on raw coefficients; returns states at every stride-th grid time.

    Row k of the result is the state after k*snapshot_stride steps; row 0 is
    the initial state.  snapshot_stride must divide n_steps.
    """
    if cfg.n_steps % snapshot_stride != 0:
        raise ValueError("snapshot stride must divide the step count")
    model = cfg.model
    h = cfg.step_size
    mult = cfg.multipliers()
    c = np.array(init_coeffs, dtype=np.complex128)
    out = np.empty((cfg.n_steps // snapshot_stride + 1, c.size), dtype=np.complex128)
    out[0] = c
    for j in range(cfg.n_steps):
        inc = model.increment_coeffs(j * h, c, increments[:, j], h, cfg.milstein)
        c = mult * (c + inc)
        if (j + 1) % snapshot_stride == 0:
            out[(j + 1) // snapshot_stride] = c
    return out


def run_trajectory(
    cfg: StepperConfig, init: SpectralField, tape: IncrementTape
) -> np.ndarray:
    """All states u_0..u_M on the scheme's grid, as an (M+1, K) coefficient array."""
    if init.modes != cfg.model.modes:
        raise ValueError("initial value lives on a different mode set")
    return integrate_coeffs(cfg, init.coeffs, coarse_increments(cfg, tape))


def summed_form_state(
    cfg: StepperConfig, init: SpectralField, tape: IncrementTape
) -> SpectralField:
    """Final state evaluated through the O(M^2) summed form (testing aid).

    Uses the recursion's own iterates u_i inside the increment terms and
    direct powers of the scheme multipliers, so any disagreement with
    run_trajectory exposes a defect in the recursion bookkeeping.
    """
    increments = coarse_increments(cfg, tape)
    model = cfg.model
    h = cfg.step_size
    mult = cfg.multipliers()
    c = np.array(init.coeffs, dtype=np.complex128)
    incs = []
    for j in range(cfg.n_steps):
        inc = model.increment_coeffs(j * h, c, increments[:, j], h, cfg.milstein)
        incs.append(inc)
        c = mult * (c + inc)
    m = cfg.n_steps
    total = np.power(mult, m) * init.coeffs
    for i, inc in enumerate(incs):
        total = total + np.power(mult, m - i) * inc
    return SpectralField(init.modes, total)
