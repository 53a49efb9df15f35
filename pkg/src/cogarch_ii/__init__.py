"""COGARCH(1,1) simulation and indirect inference estimation.

Submodules: :mod:`levy` (driving processes, Laplace exponent), :mod:`cogarch`
(simulation and pathwise gradients), :mod:`aux_ar` (auxiliary AR model of
squared returns), :mod:`binding` (binding function), :mod:`estimators`
(MM, IIE*, simulated IIE) and :mod:`bench` (grid and replication study).
"""
from .aux_ar import AuxParams, aux_estimate, estimate_sigma_star, sample_acvf, yule_walker
from .binding import Analytic, MomentSummary, MonteCarlo, binding, gradient_binding, moment_map
from .cogarch import ReturnsSeries, SimConfig, pathwise_gradient, rescale_beta, simulate_returns
from .errors import CogarchError
from .estimators import (
    EstimationResult,
    IIEConfig,
    WeightMatrix,
    asymptotic_cov,
    build_sim_table,
    iie_sim,
    iie_star,
    mm_estimate,
)
from .levy import CogarchParams, CompoundPoisson, VarianceGamma, psi

__version__ = "0.1.0"

__all__ = [
    "CogarchParams",
    "VarianceGamma",
    "CompoundPoisson",
    "psi",
    "SimConfig",
    "ReturnsSeries",
    "simulate_returns",
    "rescale_beta",
    "pathwise_gradient",
    "AuxParams",
    "sample_acvf",
    "yule_walker",
    "aux_estimate",
    "estimate_sigma_star",
    "MomentSummary",
    "Analytic",
    "MonteCarlo",
    "moment_map",
    "binding",
    "gradient_binding",
    "WeightMatrix",
    "EstimationResult",
    "IIEConfig",
    "mm_estimate",
    "iie_star",
    "iie_sim",
    "build_sim_table",
    "asymptotic_cov",
    "CogarchError",
]
