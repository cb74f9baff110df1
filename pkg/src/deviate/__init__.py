"""Numerical laboratory for deviated mixture models.

The package studies densities of the form

    p(x) = (1 - w) h0(x) + w f(x | mu, sigma)

where h0 is a known reference density and f ranges over a parametric
kernel family.  It provides maximum-likelihood estimation via EM,
loss functionals and two-atom Wasserstein distances between deviation
configurations, density distances, linear-independence rank tests,
empirical bound probes, and convergence-rate studies.
"""

from .bounds import (
    BoundProbeReport,
    compare_bound_probes,
    preset_probe,
    probe_bound,
    probe_preset_names,
)
from .distances import DistanceEstimate, QuadratureSpec, hellinger, total_variation
from .estimation import EmConfig, FitResult, em_fit, profile_loglik_lambda
from .exceptions import DeviateError, DomainError, EstimationError, NumericError
from .experiments import (
    DEFAULT_N_GRID,
    RateStudyReport,
    ScenarioSpec,
    emit_plots,
    fit_loglog_slope,
    preset_names,
    preset_scenario,
    resolve_em_config,
    run_density_rate_study,
    run_rate_study,
    run_study_cell,
    study_hash,
)
from .identifiability import (
    RankTestReport,
    check_first_order_distinguishability,
    check_preset_names,
    check_second_order_identifiability,
    cosine_alignment,
    heat_pde_residual,
    make_grid,
    preset_check,
)
from .kernels import (
    CauchyFamily,
    CompactDomain,
    FrozenDensity,
    GaussianFamily,
    GaussianFixedScaleFamily,
    KernelFamily,
    ParamPoint,
    StudentTFamily,
    gaussian_density,
    standard_cauchy_density,
)
from .losses import (
    loss_D,
    loss_Dbar,
    loss_Dr,
    loss_K,
    loss_Q,
    loss_Qprime,
    measures_coincide,
    pair_norm,
    transport_oracle,
    wasserstein_two_atom,
)
from .model import DeviatedModel, DeviationParams, load_dataset, save_dataset

__version__ = "0.1.0"

__all__ = [
    "BoundProbeReport",
    "CauchyFamily",
    "CompactDomain",
    "DEFAULT_N_GRID",
    "DeviatedModel",
    "DeviateError",
    "DeviationParams",
    "DistanceEstimate",
    "DomainError",
    "EmConfig",
    "EstimationError",
    "FitResult",
    "FrozenDensity",
    "GaussianFamily",
    "GaussianFixedScaleFamily",
    "KernelFamily",
    "NumericError",
    "ParamPoint",
    "QuadratureSpec",
    "RankTestReport",
    "RateStudyReport",
    "ScenarioSpec",
    "StudentTFamily",
    "check_first_order_distinguishability",
    "check_preset_names",
    "check_second_order_identifiability",
    "compare_bound_probes",
    "cosine_alignment",
    "em_fit",
    "emit_plots",
    "fit_loglog_slope",
    "gaussian_density",
    "heat_pde_residual",
    "hellinger",
    "loss_D",
    "loss_Dbar",
    "loss_Dr",
    "loss_K",
    "loss_Q",
    "loss_Qprime",
    "make_grid",
    "measures_coincide",
    "pair_norm",
    "preset_check",
    "preset_names",
    "preset_probe",
    "preset_scenario",
    "load_dataset",
    "probe_bound",
    "probe_preset_names",
    "profile_loglik_lambda",
    "resolve_em_config",
    "run_density_rate_study",
    "run_rate_study",
    "run_study_cell",
    "save_dataset",
    "standard_cauchy_density",
    "study_hash",
    "total_variation",
    "transport_oracle",
    "wasserstein_two_atom",
]
