"""Pseudospectral laboratory for quasilinear Schrodinger dynamics."""

__version__ = "0.1.0"

from .grid import (  # noqa: F401
    Field,
    GaussianSpec,
    Grid,
    ScaledProfileSpec,
    SechSpec,
    make_grid,
    moment,
    read_checkpoint,
    synthesize_initial,
    write_checkpoint,
)
from .nonlinearity import (  # noqa: F401
    NonlinearityModel,
    RegimeReport,
    Verdict,
    blowup_growth_constants,
    classify_regime,
    quasilinear_growth_exponent,
    sobolev_best_constant,
    threshold_exponent_window,
    watershed_exponent,
)
from .solver import (  # noqa: F401
    BlowupVerdict,
    RunStatus,
    SolverConfig,
    StepperState,
    detect_blowup,
    integrate,
    linear_half_step,
    nonlinear_phase_step,
    strang_step,
)
from .diagnostics import (  # noqa: F401
    DiagnosticSample,
    IdentityResiduals,
    blowup_conformal_quantity,
    blowup_time_upper_bound,
    identity_residuals,
    sample,
)
from .groundstate import (  # noqa: F401
    GroundStateError,
    RadialConfig,
    RadialProfile,
    ThresholdCertificate,
    estimate_threshold_level,
    solve_stationary,
    threshold_verdict,
)
from .harness import (  # noqa: F401
    ConfigError,
    ExperimentConfig,
    FitResult,
    decay_case_route,
    fit_power_law,
    load_config,
    parse_config,
    run_experiment,
)
