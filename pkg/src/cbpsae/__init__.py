"""Shrinkage estimation for small areas with data-adaptive compromise
regression weights, plus population-mean estimators and a deterministic
Monte Carlo benchmark harness."""

from .data import AreaDataset, PopMeanInput
from .exceptions import (
    CbpsaeError,
    InfeasibleScenarioError,
    InsufficientDataError,
    NonFiniteObjectiveError,
    OptimizationError,
    SingularDesignError,
)
from .estimators import (
    CompromiseBestPredictor,
    Eblup,
    MultiTauCompromiseBestPredictor,
    ObservedBestPredictor,
    PluginCompromiseBestPredictor,
)
from .general import (
    GeneralFit,
    GeneralModel,
    fay_herriot_model,
    general_cure_fit,
    l_matrix,
)
from .model import (
    BetaEstimate,
    LinearPredictorMatrix,
    ShrinkageVector,
    combine,
    predictor_matrix,
    shrinkage_factors,
    tau_upper_bound,
    wls_beta,
)
from .optimize import BoxSpec, OptResult, minimize_1d, minimize_box
from .popmean import (
    AlphaOpt,
    PopMeanResult,
    alpha_opt_closed_form,
    mu_cbp,
    mu_direct,
    mu_direct_compromise,
    mu_family,
    mu_minvar,
    mu_plugin_cbp,
    mu_spline_regression,
    popmean_risk,
)
from .predictors import (
    FitResult,
    fit_cbp,
    fit_eblup,
    fit_multitau_cbp,
    fit_obp,
    fit_plugin_cbp,
)
from .risk import (
    RiskValue,
    compromise_risk,
    general_mspe_estimate,
    mspe_estimate,
    mspe_true,
)
from .simulate import (
    InformativeSampleSize,
    LatentClusters,
    OracleResult,
    PopAverage,
    SimReport,
    SimScenario,
    generate,
    oracle_fit,
    run_study,
)
from .spline import SmoothingSpline
from .variance import TauEstimate, tau_mle, tau_obp, tau_reml, tau_ure
from .weights import (
    WeightVector,
    bpe_weights,
    compromise_weights,
    mle_weights,
    multitau_weights,
    plugin_weights,
)

__version__ = "0.1.0"

__all__ = [
    "AlphaOpt",
    "AreaDataset",
    "BetaEstimate",
    "BoxSpec",
    "CbpsaeError",
    "CompromiseBestPredictor",
    "Eblup",
    "FitResult",
    "GeneralFit",
    "GeneralModel",
    "InfeasibleScenarioError",
    "InformativeSampleSize",
    "InsufficientDataError",
    "LatentClusters",
    "LinearPredictorMatrix",
    "MultiTauCompromiseBestPredictor",
    "NonFiniteObjectiveError",
    "ObservedBestPredictor",
    "OptResult",
    "OptimizationError",
    "OracleResult",
    "PluginCompromiseBestPredictor",
    "PopAverage",
    "PopMeanInput",
    "PopMeanResult",
    "RiskValue",
    "ShrinkageVector",
    "SimReport",
    "SimScenario",
    "SingularDesignError",
    "SmoothingSpline",
    "TauEstimate",
    "WeightVector",
    "alpha_opt_closed_form",
    "bpe_weights",
    "combine",
    "compromise_risk",
    "compromise_weights",
    "fay_herriot_model",
    "fit_cbp",
    "fit_eblup",
    "fit_multitau_cbp",
    "fit_obp",
    "fit_plugin_cbp",
    "general_cure_fit",
    "general_mspe_estimate",
    "generate",
    "l_matrix",
    "minimize_1d",
    "minimize_box",
    "mle_weights",
    "mspe_estimate",
    "mspe_true",
    "mu_cbp",
    "mu_direct",
    "mu_direct_compromise",
    "mu_family",
    "mu_minvar",
    "mu_plugin_cbp",
    "mu_spline_regression",
    "multitau_weights",
    "oracle_fit",
    "plugin_weights",
    "popmean_risk",
    "predictor_matrix",
    "run_study",
    "shrinkage_factors",
    "tau_mle",
    "tau_obp",
    "tau_reml",
    "tau_upper_bound",
    "tau_ure",
    "wls_beta",
]
