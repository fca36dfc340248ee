"""Brownian bridge information process on a random default time.

Simulation of the process, Bayesian filtering of the default time, CDS
pricing with and without observing the process, and Monte-Carlo checks.
"""

from ._kernels import backend
from .bayes_filter import (
    DriftProjector,
    Observation,
    PosteriorCurve,
    VectorPosterior,
    conditional_cdf,
    conditional_mean,
    optional_projection_oZ,
    posterior_cdf,
    posterior_density,
    posterior_expectation,
    predict_expectation,
    predictive_kernel_Gtu,
    survival_curve_Psi,
)
from .bridge_core import (
    GaussianKernel,
    Path,
    PathGrid,
    bridge_covariance,
    bridge_density,
    simulate_bridge,
    stopped_bm_from_bridge,
    transition_kernel,
)
from .cds_pricing import CdsContract, Quote, Recovery, fair_spread, price_beta, price_discounted, price_H
from .default_law import (
    DefaultLaw,
    DiscreteAtoms,
    Exponential,
    PiecewiseEmpirical,
    TimeInterval,
    UniformInterval,
    Weibull,
    integrate_dF,
    law_from_params,
)
from .errors import (
    BridgeInfoError,
    ConfigError,
    DefaultedNeedsTau,
    DegenerateFeeLeg,
    DegenerateObservation,
    EmptyBin,
    InvalidLaw,
    NonIntegrable,
    ZeroSurvival,
)
from .info_process import (
    DecomposedPath,
    InfoPath,
    decompose,
    default_indicator_diagnostic,
    drift_Z,
    quadratic_variation,
    simulate_ensemble,
    simulate_info,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
