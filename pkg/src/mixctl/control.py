"""Plug-in risk estimates and the data-driven choice of the cut-off lambda.

Rows are ranked by the risk-specific criterion (see :func:`mixctl.rules.criterion`)
and the longest prefix whose plug-in risk stays at or below ``alpha`` is
classified. The plug-in risks only use posteriors, never true labels.
"""

from __future__ import annotations

import itertools
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_interest, check_mask, check_posteriors
from .rules import Risk, RuleSpec, apply_lambda, criterion, map_rule, tau_star, thresholded_rule

BRUTE_FORCE_MAX_N = 15


def plug_in_mnpr(posteriors, interest, region_mask) -> float:
    """``(1/n) * sum over the region of (1 - tau*_K)``."""
    tk = tau_star(posteriors, interest)
    mask = check_mask(region_mask, tk.shape[0])
    if not tk.shape[0]:
        return 0.0
    return float((1.0 - tk[mask]).sum() / tk.shape[0])


def plug_in_mfdr(posteriors, interest, region_mask) -> float:
    """Mean of ``1 - tau*_K`` over the region; 0 for an empty region."""
    tk = tau_star(posteriors, interest)
    mask = check_mask(region_mask, tk.shape[0])
    n_r = int(mask.sum())
    if n_r == 0:
        return 0.0
    return float((1.0 - tk[mask]).sum() / n_r)


def plug_in_mfnr(posteriors, interest, region_mask) -> float:
    """``(1/n) * sum outside the region of the total interest posterior mass``."""
    T = check_posteriors(posteriors)
    idx = np.asarray(check_interest(interest, T.shape[1])) - 1
    mask = check_mask(region_mask, T.shape[0])
    if not T.shape[0]:
        return 0.0
    return float(T[~mask][:, idx].sum() / T.shape[0])


def plug_in_risk(posteriors, spec: RuleSpec, region_mask) -> float:
    fn = plug_in_mfdr if spec.risk is Risk.MFDR else plug_in_mnpr
    T = check_posteriors(posteriors)
    return fn(T, spec.resolve(T.shape[1]), region_mask)


@dataclass(frozen=True)
class LambdaEstimate:
    """Output of the forward scan.

    ``cut_index`` is the number of top-ranked rows classified;
    ``tau_scale_threshold`` re-expresses ``lambda_hat`` as a cut-off on the
    max posterior and is only defined when every class is of interest.
    """

    lambda_hat: float
    cut_index: int
    achieved_risk: float
    tau_scale_threshold: Optional[float] = None

    def to_dict(self) -> dict:
        d = asdict(self)
        if d["tau_scale_threshold"] is None:
            del d["tau_scale_threshold"]
        return d


def _ranking(crit: np.ndarray) -> np.ndarray:
    # stable: tied criterion values keep input order
    return np.argsort(-crit, kind="stable")


def _prefix_risks(tk_sorted: np.ndarray, risk: Risk) -> np.ndarray:
    cum = np.cumsum(1.0 - tk_sorted)
    if risk is Risk.MFDR:
        return cum / np.arange(1, cum.shape[0] + 1)
    return cum / cum.shape[0]


def estimate_lambda(posteriors, spec: RuleSpec) -> LambdaEstimate:
    """Largest criterion-sorted prefix whose plug-in risk is ``<= alpha``.

    Every prefix is checked and the last feasible one wins. For the MFDR the
    running mean itself is not monotone, although feasibility is: prefix
    ``m`` is feasible iff the sum of ``mass_i * criterion_i`` over it is
    nonnegative, and those terms change sign only once along the ranking.
    """
    T = check_posteriors(posteriors, allow_empty=False)
    interest = spec.resolve(T.shape[1])
    crit = criterion(T, spec)
    order = _ranking(crit)
    risks = _prefix_risks(tau_star(T, interest)[order], spec.risk)
    feasible = np.flatnonzero(risks <= spec.alpha)
    full = len(interest) == T.shape[1]
    if feasible.size == 0:
        return LambdaEstimate(np.inf, 0, 0.0, np.inf if full else None)
    i_max = int(feasible[-1]) + 1
    lam = float(crit[order[i_max - 1]])
    if lam == np.inf:
        # Keep "+inf <=> nothing classified"; the largest float still admits +inf rows.
        lam = float(np.finfo(np.float64).max)
    tau_thr = None
    if full:
        tau_thr = lam + 1.0 - spec.alpha if spec.risk is Risk.MFDR else lam
    return LambdaEstimate(lam, i_max, float(risks[i_max - 1]), tau_thr)


def optimal_rule(posteriors, spec: RuleSpec) -> tuple[np.ndarray, LambdaEstimate]:
    """Classify exactly the ``cut_index`` top-ranked rows of the calibration sample.

    Rank-based on purpose: with tied criterion values ``criterion >= lambda_hat``
    can admit more rows than the scan allowed. Use :func:`apply_lambda` with
    the returned ``lambda_hat`` on new data.
    """
    T = check_posteriors(posteriors, allow_empty=False)
    est = estimate_lambda(T, spec)
    labels = map_rule(T, spec.resolve(T.shape[1]))
    keep = np.zeros(T.shape[0], dtype=bool)
    keep[_ranking(criterion(T, spec))[: est.cut_index]] = True
    return np.where(keep, labels, 0), est


def brute_force_region(posteriors, spec: RuleSpec) -> np.ndarray:
    """Exhaustive search over all ``2**n`` regions (test oracle, ``n <= 15``).

    Returns the feasible mask with the smallest plug-in MFNR. Ties (compared
    at 1e-12, so row-sum rounding does not decide them) go to the larger
    region, then to the smaller plug-in risk, then to the lexicographically
    largest mask (row 0 first).
    """
    T = check_posteriors(posteriors)
    n = T.shape[0]
    if n > BRUTE_FORCE_MAX_N:
        raise ValueError(f"brute force limited to n <= {BRUTE_FORCE_MAX_N}, got {n}")
    if n == 0:
        return np.zeros(0, dtype=bool)
    interest = spec.resolve(T.shape[1])
    idx = np.asarray(interest) - 1
    err = 1.0 - T[:, idx].max(axis=1)
    mass = T[:, idx].sum(axis=1)
    masks = np.array(list(itertools.product([True, False], repeat=n)), dtype=bool)
    counts = masks.sum(axis=1)
    err_sum = masks @ err
    if spec.risk is Risk.MFDR:
        with np.errstate(invalid="ignore", divide="ignore"):
            risk = np.where(counts > 0, err_sum / np.maximum(counts, 1), 0.0)
    else:
        risk = err_sum / n
    mfnr = (~masks) @ mass / n
    feasible = np.flatnonzero(risk <= spec.alpha)
    # product() enumerates masks in lexicographically descending order (True first),
    # so the first index among equals is the lexicographic tie-break winner.
    key = np.lexsort((
        feasible,
        np.round(risk[feasible], 12),
        -counts[feasible],
        np.round(mfnr[feasible], 12),
    ))
    return masks[feasible[key[0]]].copy()


class ErrorControlledClassifier(BaseEstimator):
    """Restricted MAP classifier with a controlled MFDR or MNPR.

    Works on posterior matrices; put a posterior transformer such as
    :class:`mixctl.mixture.GaussianMixtureEM` in front of it in a pipeline to
    work from raw points.

    Parameters
    ----------
    risk : {"mfdr", "mnpr"}, default="mfdr"
    alpha : float, default=0.05
        Nominal level of the controlled risk.
    interest : sequence of int or None, default=None
        1-based classes of interest; ``None`` means all classes.
    rule : {"optimal", "threshold", "map"}, default="optimal"
        ``optimal`` estimates ``lambda_hat`` on the data passed to ``fit``.

    Attributes
    ----------
    lambda_ : LambdaEstimate
        Only set for ``rule="optimal"``.
    n_classes_ : int
    """

    def __init__(self, risk="mfdr", alpha=0.05, interest=None, rule="optimal"):
        self.risk = risk
        self.alpha = alpha
        self.interest = interest
        self.rule = rule

    def _spec(self) -> RuleSpec:
        if self.rule not in ("optimal", "threshold", "map"):
            raise ValueError(f"rule must be 'optimal', 'threshold' or 'map', got {self.rule!r}")
        interest = None if self.interest is None else tuple(self.interest)
        return RuleSpec(self.risk, self.alpha, interest)

    def fit(self, X, y=None):
        T = check_posteriors(X, allow_empty=False)
        self.spec_ = self._spec()
        self.spec_.resolve(T.shape[1])
        self.n_classes_ = T.shape[1]
        if self.rule == "optimal":
            self.lambda_ = estimate_lambda(T, self.spec_)
        return self

    def _check_width(self, T):
        if T.shape[1] != self.n_classes_:
            raise ValueError(f"expected {self.n_classes_} posterior columns, got {T.shape[1]}")

    def predict(self, X):
        check_is_fitted(self, "spec_")
        T = check_posteriors(X)
        self._check_width(T)
        if self.rule == "map":
            return map_rule(T, self.spec_.resolve(T.shape[1]))
        if self.rule == "threshold":
            return thresholded_rule(T, self.spec_)
        return apply_lambda(T, self.spec_, self.lambda_.lambda_hat)

    def fit_predict(self, X, y=None):
        """Fit and label the same rows; the optimal rule is applied by rank."""
        self.fit(X)
        if self.rule != "optimal":
            return self.predict(X)
        labels, _ = optimal_rule(X, self.spec_)
        return labels

    def decision_function(self, X):
        check_is_fitted(self, "spec_")
        T = check_posteriors(X)
        self._check_width(T)
        return criterion(T, self.spec_)
