"""Proximal solvers for difference-of-convex programs via envelope smoothing."""

from .envelope import (
    DcInstance,
    EnvelopeEval,
    SmoothFunction,
    SmoothProxFunction,
    backward_smooth_prox,
    dce_eval,
    dce_fbe_equivalence_check,
    fbe_value,
    is_stationary,
    linear_smooth,
    negate_smooth,
    quadratic_smooth,
    sandwich_bounds,
)
from .baselines import dca_run, drs_run, fbs_run
from .lbfgs import LbfgsMemory, LbfgsParams, lbfgs_direction, run_lbfgs, wolfe_linesearch
from .problems import (
    SpcaInstance,
    SyntheticInstance,
    kappa_default,
    make_spca,
    make_spca3,
    power_lambda_max,
    problem_from_json,
    problem_to_json,
    synthetic_catalogue,
)
from .prox import (
    BlockSeparable,
    CapabilityError,
    L1Ball,
    L1Norm,
    LinfBall,
    Linear,
    NumericalError,
    ProxFunction,
    Quadratic,
    ScaledSquare,
    UnitBall,
    Zero,
    ZeroIndicator,
    moreau_gradient,
    moreau_value,
    prox_conjugate,
    prox_diag,
    prox_l1_ball,
    prox_quadratic,
    prox_shifted,
    project_unit_ball,
    soft_threshold,
)
from .reports import RunReport, Termination, TracePoint, residual_rate_check
from .three_prox import (
    ThreeProxConfig,
    ThreeTermInstance,
    lifted_pair,
    psi_gradient_identity_check,
    psi_value,
    run3,
    run3_via_lifted,
    stationarity_certificate,
    three_prox_step,
)
from .two_prox import TwoProxConfig, descent_coefficient, run, run_diag, two_prox_step

_submodules = {"baselines", "envelope", "lbfgs", "problems", "prox",
               "reports", "three_prox", "two_prox"}
__all__ = [name for name in dir()
           if not name.startswith("_") and name not in _submodules]
__version__ = "0.1.0"
