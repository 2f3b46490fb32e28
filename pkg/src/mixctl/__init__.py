"""Error-rate controlled classification rules for finite mixture models."""

from ._validation import FitError, ParameterError
from .control import (
    ErrorControlledClassifier,
    LambdaEstimate,
    brute_force_region,
    estimate_lambda,
    optimal_rule,
    plug_in_mfdr,
    plug_in_mfnr,
    plug_in_mnpr,
    plug_in_risk,
)
from .evaluation import EvalReport, aggregate, evaluate
from .mixture import (
    EmConfig,
    EmResult,
    GaussianComponent,
    GaussianMixtureEM,
    LabeledSample,
    MixtureModel,
    MixturePosterior,
    StudentComponent,
    component_density,
    fit_em,
    match_components,
    posterior,
    sample,
)
from .rules import Risk, RuleSpec, apply_lambda, criterion, map_rule, tau_star, thresholded_rule
from .sim import ScenarioConfig, build_model, run_grid, run_replicate, standard_grid

__version__ = "0.1.0"

__all__ = [
    "aggregate",
    "apply_lambda",
    "brute_force_region",
    "build_model",
    "component_density",
    "criterion",
    "EmConfig",
    "EmResult",
    "ErrorControlledClassifier",
    "estimate_lambda",
    "EvalReport",
    "evaluate",
    "fit_em",
    "FitError",
    "GaussianComponent",
    "GaussianMixtureEM",
    "LabeledSample",
    "LambdaEstimate",
    "map_rule",
    "match_components",
    "MixtureModel",
    "MixturePosterior",
    "optimal_rule",
    "ParameterError",
    "plug_in_mfdr",
    "plug_in_mfnr",
    "plug_in_mnpr",
    "plug_in_risk",
    "posterior",
    "Risk",
    "RuleSpec",
    "run_grid",
    "run_replicate",
    "sample",
    "ScenarioConfig",
    "standard_grid",
    "StudentComponent",
    "tau_star",
    "thresholded_rule",
]
