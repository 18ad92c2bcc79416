"""Strong temporal approximation of hyperbolic stochastic evolution equations.

Euler- and Milstein-type time integration (exponential, implicit Euler,
Crank-Nicolson variants) with a spectral Galerkin backend on the 1-D torus,
coupled-path convergence studies, and deterministic verification suites.
"""

from .spectral import (
    ModeSet,
    PhysicalSamples,
    SpectralField,
    bump_coefficients,
    convolve,
    evaluate_at,
    pointwise_map,
    power_decay_field,
    read_field,
    sobolev_norm,
    to_physical,
    to_spectral,
    write_field,
)
from .schemes import (
    CRANK_NICOLSON,
    EXPONENTIAL,
    IMPLICIT_EULER,
    SCHRODINGER,
    TRANSPORT,
    Generator,
    OrderMeasurement,
    TimeScheme,
    measure_approximation_order,
    measure_operator_order,
    predicted_order,
    scheme_apply,
    scheme_symbol,
    semigroup_apply,
)
from .noise import (
    IncrementTape,
    NoiseModel,
    NonCommutativeNoiseError,
    coarsen,
    milstein_term,
    read_tape,
    sample_tape,
    write_tape,
)
from .models import (
    ConvolutionNLSModel,
    LinearSchroedingerModel,
    NemytskiiNLSModel,
    ProblemModel,
    TransportModel,
    build_model,
)
from .stepper import StepperConfig, run_trajectory, step, summed_form_state
from .harness import (
    ScalarOrderResult,
    StudyConfig,
    StudyResult,
    desk_config,
    estimate_rate,
    milstein_identity_check,
    milstein_stability,
    paper_config,
    reference_trajectory,
    run_study,
    scalar_strong_order,
    study_csv,
    study_report,
    uniform_error,
    write_study_outputs,
)

__version__ = "0.1.0"
