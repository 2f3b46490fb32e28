"""Replicated simulation grids on three-class bivariate mixtures.

Class centers sit at ``(-1, 0)``, ``(0, D)`` and ``(1, 0)`` with equal
weights. Gaussian cells use covariance ``sigma2 * I``; Student cells use the
scale ``(dof - 2) / dof * I`` so every component has identity covariance.

Seeds: replicate ``r`` of a cell draws its data from
``derive_seed(master_seed, data_key(cell), r)``. The key only depends on the
generative parameters, so cells that differ only in alpha, interest set or
posterior mode see the same datasets, and reordering cells or changing the
replicate count never changes an existing replicate.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import logging
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np
from joblib import Parallel, delayed

from ._validation import FitError
from .control import optimal_rule
from .evaluation import EvalReport, aggregate, evaluate
from .mixture import (
    EmConfig,
    GaussianComponent,
    MixtureModel,
    StudentComponent,
    fit_em,
    match_components,
    sample,
)
from .rules import RuleSpec, map_rule, thresholded_rule

log = logging.getLogger(__name__)

RULES = ("map", "thresholded", "optimal")
DEFAULT_MASTER_SEED = 20210601
FAMILIES = ("gaussian", "student")
MODES = ("known", "estimated")


def derive_seed(master_seed: int, *keys: int) -> int:
    """Stateless 64-bit mix of a master seed with integer keys."""
    words = np.random.SeedSequence([int(master_seed), *map(int, keys)]).generate_state(2, np.uint32)
    return int(words[0]) | (int(words[1]) << 32)


@dataclass(frozen=True)
class ScenarioConfig:
    family: str = "gaussian"
    D: float = 3.0
    sigma2: Optional[float] = None
    dof: Optional[float] = None
    n_per_class: int = 200
    replicates: int = 100
    alpha: float = 0.05
    interest: Optional[tuple] = None
    posterior_mode: str = "known"
    master_seed: int = DEFAULT_MASTER_SEED
    risk: str = "mfdr"

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"family must be one of {FAMILIES}, got {self.family!r}")
        if self.posterior_mode not in MODES:
            raise ValueError(f"posterior_mode must be one of {MODES}, got {self.posterior_mode!r}")
        if self.family == "gaussian":
            if self.sigma2 is None or self.dof is not None:
                raise ValueError("gaussian scenarios need sigma2 and no dof")
            if not self.sigma2 > 0:
                raise ValueError("sigma2 must be positive")
        else:
            if self.dof is None or self.sigma2 is not None:
                raise ValueError("student scenarios need dof and no sigma2")
            if not self.dof > 2:
                raise ValueError("dof must exceed 2")
        if self.n_per_class < 1 or self.replicates < 1:
            raise ValueError("n_per_class and replicates must be positive")
        if self.interest is not None:
            object.__setattr__(self, "interest", tuple(sorted(int(k) for k in self.interest)))
        object.__setattr__(self, "D", float(self.D))
        # validates alpha, risk and the interest indices
        self.rule_spec().resolve(3)

    @property
    def shape_param(self) -> float:
        return float(self.sigma2 if self.family == "gaussian" else self.dof)

    def rule_spec(self) -> RuleSpec:
        return RuleSpec(self.risk, self.alpha, self.interest)

    def data_key(self) -> int:
        ident = json.dumps([self.family, float(self.D), self.shape_param, int(self.n_per_class)])
        return int.from_bytes(hashlib.blake2b(ident.encode(), digest_size=8).digest(), "little")

    def replicate_seed(self, replicate: int) -> int:
        return derive_seed(self.master_seed, self.data_key(), replicate)

    def em_seed(self, replicate: int) -> int:
        return derive_seed(self.master_seed, self.data_key(), replicate, 1)

    def label(self) -> dict:
        return {
            "family": self.family,
            "D": self.D,
            "sigma2_or_dof": self.shape_param,
            "mode": self.posterior_mode,
            "alpha": self.alpha,
            "interest": "all" if self.interest is None else ";".join(map(str, self.interest)),
        }


def class_centers(D: float) -> np.ndarray:
    return np.array([[-1.0, 0.0], [0.0, float(D)], [1.0, 0.0]])


def build_model(config: ScenarioConfig) -> MixtureModel:
    centers = class_centers(config.D)
    weights = np.full(3, 1.0 / 3.0)
    if config.family == "gaussian":
        cov = config.sigma2 * np.eye(2)
        return MixtureModel(weights, [GaussianComponent(c, cov) for c in centers])
    nu = float(config.dof)
    # dof / (dof - 2) * s2 = 1
    scale = (nu - 2.0) / nu * np.eye(2)
    return MixtureModel(weights, [StudentComponent(c, scale, nu) for c in centers])


@dataclass(frozen=True)
class RuleOutcome:
    report: EvalReport
    lambda_hat: float = float("nan")
    tau_threshold: float = float("nan")


@dataclass(frozen=True)
class ReplicateResult:
    replicate: int
    outcomes: dict = field(default_factory=dict)
    failed: bool = False
    message: str = ""


def scenario_posteriors(config: ScenarioConfig, model: MixtureModel, points: np.ndarray,
                        replicate: int, em_config: Optional[EmConfig] = None) -> np.ndarray:
    """Posterior matrix with columns in true-class order."""
    if config.posterior_mode == "known":
        return model.posterior(points)
    fit = fit_em(points, model.n_components, em_config, seed=config.em_seed(replicate))
    perm = match_components(fit.model.centers, model.centers)
    return fit.model.posterior(points)[:, perm]


def run_replicate(config: ScenarioConfig, replicate: int,
                  em_config: Optional[EmConfig] = None) -> ReplicateResult:
    """Simulate one dataset and score the MAP, thresholded and optimal rules on it."""
    model = build_model(config)
    data = sample(model, [config.n_per_class] * 3, seed=config.replicate_seed(replicate))
    try:
        T = scenario_posteriors(config, model, data.points, replicate, em_config)
    except FitError as exc:
        log.warning("replicate %d of %s failed: %s", replicate, config.label(), exc)
        return ReplicateResult(replicate, failed=True, message=str(exc))
    spec = config.rule_spec()
    interest = spec.resolve(3)
    opt_labels, est = optimal_rule(T, spec)
    tau_thr = est.tau_scale_threshold
    outcomes = {
        "map": RuleOutcome(evaluate(map_rule(T, interest), data.labels, interest)),
        "thresholded": RuleOutcome(evaluate(thresholded_rule(T, spec), data.labels, interest)),
        "optimal": RuleOutcome(
            evaluate(opt_labels, data.labels, interest),
            est.lambda_hat,
            float("nan") if tau_thr is None else tau_thr,
        ),
    }
    return ReplicateResult(replicate, outcomes)


def _lower_quantiles(values: np.ndarray) -> dict:
    # "lower" keeps +inf (nothing classified) from turning into nan
    if values.size == 0:
        return {"median": float("nan"), "q25": float("nan"), "q75": float("nan")}
    q = np.percentile(values, [25, 50, 75], method="lower")
    return {"median": float(q[1]), "q25": float(q[0]), "q75": float(q[2])}


@dataclass
class CellResult:
    config: ScenarioConfig
    replicates: list

    @property
    def ok(self) -> list:
        return [r for r in self.replicates if not r.failed]

    @property
    def n_failed(self) -> int:
        return sum(r.failed for r in self.replicates)

    def reports(self, rule: str) -> list:
        return [r.outcomes[rule].report for r in self.ok]

    def rates(self, rule: str, name: str) -> np.ndarray:
        return np.array([rep.rate(name) for rep in self.reports(rule)])

    def n_classified(self, rule: str) -> np.ndarray:
        return np.array([rep.n_classified for rep in self.reports(rule)])

    def lambda_hats(self) -> np.ndarray:
        return np.array([r.outcomes["optimal"].lambda_hat for r in self.ok])

    def tau_thresholds(self) -> np.ndarray:
        return np.array([r.outcomes["optimal"].tau_threshold for r in self.ok])

    def summary(self, rule: str) -> dict:
        return aggregate(self.reports(rule))


@dataclass
class GridResult:
    cells: list

    def records(self) -> list:
        """Long format: one row per (cell, replicate, rule); failed replicates are skipped."""
        rows = []
        for cell in self.cells:
            base = cell.config.label()
            for rep in cell.ok:
                for rule in RULES:
                    out = rep.outcomes[rule]
                    rows.append({
                        **base,
                        "rule": rule,
                        "replicate": rep.replicate,
                        "mfdr": out.report.realized_mfdr,
                        "mnpr": out.report.realized_mnpr,
                        "mfnr": out.report.realized_mfnr,
                        "n_classified": out.report.n_classified,
                        "lambda_hat": out.lambda_hat,
                        "tau_threshold": out.tau_threshold,
                    })
        return rows

    def aggregate_records(self) -> list:
        rows = []
        for cell in self.cells:
            base = cell.config.label()
            for rule in RULES:
                row = {**base, "rule": rule, "n_replicates": len(cell.ok), "n_failed": cell.n_failed}
                if cell.ok:
                    for name, s in cell.summary(rule).items():
                        for stat in ("mean", "sd", "median", "q25", "q75"):
                            row[f"{name}_{stat}"] = getattr(s, stat)
                    row["n_classified_mean"] = float(cell.n_classified(rule).mean())
                    if rule == "optimal":
                        lq = _lower_quantiles(cell.lambda_hats())
                        tq = _lower_quantiles(cell.tau_thresholds())
                        row.update({f"lambda_hat_{k}": v for k, v in lq.items()})
                        row.update({f"tau_threshold_{k}": v for k, v in tq.items()})
                rows.append(row)
        return rows


def run_grid(configs: Sequence[ScenarioConfig], jobs: int = 1,
             em_config: Optional[EmConfig] = None) -> GridResult:
    """Run every replicate of every cell; output order follows ``configs``."""
    tasks = [(ci, r) for ci, cfg in enumerate(configs) for r in range(cfg.replicates)]
    if jobs == 1:
        results = [run_replicate(configs[ci], r, em_config) for ci, r in tasks]
    else:
        results = Parallel(n_jobs=jobs)(
            delayed(run_replicate)(configs[ci], r, em_config) for ci, r in tasks
        )
    cells = [CellResult(cfg, []) for cfg in configs]
    for (ci, _), res in zip(tasks, results):
        cells[ci].replicates.append(res)
    return GridResult(cells)


_EXPANDABLE = ("family", "D", "sigma2", "dof", "alpha", "posterior_mode", "n_per_class", "risk")


def expand_grid(grid: dict) -> list:
    """Expand a grid description into scenario configs.

    ``grid`` holds an optional ``master_seed``, optional ``defaults`` and a
    ``cells`` list. Inside a cell, list values of the scalar fields expand
    as a cartesian product; ``interest`` expands when it is a list of lists.
    """
    master = int(grid.get("master_seed", DEFAULT_MASTER_SEED))
    defaults = dict(grid.get("defaults", {}))
    cells = grid.get("cells")
    if not isinstance(cells, list) or not cells:
        raise ValueError("grid description needs a nonempty 'cells' list")
    known = set(ScenarioConfig.__dataclass_fields__) - {"master_seed"}
    out = []
    for raw in cells:
        entry = {**defaults, **raw}
        unknown = set(entry) - known
        if unknown:
            raise ValueError(f"unknown grid fields {sorted(unknown)}")
        axes = {}
        for key, val in entry.items():
            if key in _EXPANDABLE and isinstance(val, list):
                axes[key] = val
            elif key == "interest" and isinstance(val, list) and val and isinstance(val[0], list):
                axes[key] = val
            else:
                axes[key] = [val]
        keys = list(axes)
        for combo in itertools.product(*(axes[k] for k in keys)):
            out.append(ScenarioConfig(master_seed=master, **dict(zip(keys, combo))))
    return out


def standard_grid(family: str = "gaussian", posterior_mode: str = "known",
                  interest: Optional[Iterable[int]] = None, replicates: int = 100,
                  alpha: float = 0.05, master_seed: int = DEFAULT_MASTER_SEED) -> list:
    """The 4 x 3 (Gaussian: D x sigma2) or 4 x 4 (Student: D x dof) grid."""
    interest = None if interest is None else tuple(interest)
    common = dict(family=family, posterior_mode=posterior_mode, interest=interest,
                  replicates=replicates, alpha=alpha, master_seed=master_seed)
    if family == "gaussian":
        return [ScenarioConfig(D=D, sigma2=s2, **common)
                for s2 in (0.5, 1.0, 2.0) for D in (0, 1, 2, 3)]
    return [ScenarioConfig(D=D, dof=nu, **common)
            for nu in (5.0, 10.0, 20.0, 50.0) for D in (0, 1, 2, 3)]
