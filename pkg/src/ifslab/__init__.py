"""Numerical laboratory for iterated function systems of monotone interval maps.

Build systems of nondecreasing self-maps of [0, 1], compute their
stationary measures three independent ways (operator fixed point,
forward orbits, backward interval sampling), certify admissibility and
power-tail bounds, and run the plateau-perturbation experiment that
drives systems toward singular stationary measures.
"""
from .interval_maps import (
    DegenerateDerivativeError,
    MoebiusMap,
    PiecewiseLinearMap,
    identity_map,
    validate_cbeta,
    word_eval,
)
from .measures import (
    DEFAULT_N,
    GridMeasure,
    concentration_profile,
    dirac,
    fm_distance,
    fm_oracle,
    from_atoms,
    from_samples,
    m1_epsilon_membership,
    read_measure_csv,
    resample,
    tail_check,
    uniform,
    write_measure_csv,
)
from .system import (
    DEFAULT_BETA,
    AdmissibilityReport,
    IfsSystem,
    NotAdmissibleError,
    admissibility_check,
    irrationality_heuristic,
    metric_d,
    metric_d0,
    minimality_heuristics,
)
from .transfer import (
    CertificateError,
    FixedPointResult,
    PushForwardOperator,
    TailBoundCert,
    dual_apply,
    fixed_point,
    krylov_bogolyubov,
    perturbation_inequality_check,
    push_forward,
    tail_bound_certificate,
)
from .sampling import (
    BackwardSample,
    OrbitRun,
    backward_ensemble,
    backward_sample,
    diameter_stats,
    forward_orbit,
    martingale_trace,
    martingale_traces,
)
from .diagnostics import (
    gap_margin,
    lyapunov_margin,
    robustness_probe,
    singularity_report,
)
from .perturbation import (
    PlateauSpec,
    perturbed_family,
    plateau_limit_system,
    verify_density_construction,
)
from .config import load_system, save_system, system_from_dict, system_to_dict

__version__ = "0.1.0"
