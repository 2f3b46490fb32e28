"""Restricted MAP classification rules over a posterior matrix.

Class labels are 1-based; 0 means "not classified". Every rule here is a
restricted MAP rule: wherever it classifies, it outputs the most probable
class among the classes of interest (ties go to the smallest index).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from ._validation import check_alpha, check_interest, check_posteriors


class Risk(str, enum.Enum):
    MFDR = "mfdr"
    MNPR = "mnpr"

    @classmethod
    def parse(cls, value) -> "Risk":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"risk must be 'mfdr' or 'mnpr', got {value!r}") from None


@dataclass(frozen=True)
class RuleSpec:
    """Risk to control, its level, and the classes of interest.

    ``interest=None`` stands for every class of the posterior matrix the
    rule is applied to.
    """

    risk: Risk = Risk.MFDR
    alpha: float = 0.05
    interest: Optional[tuple] = None

    def __post_init__(self):
        object.__setattr__(self, "risk", Risk.parse(self.risk))
        object.__setattr__(self, "alpha", check_alpha(self.alpha))
        if self.interest is not None:
            idx = tuple(int(k) for k in self.interest)
            if not idx or len(set(idx)) != len(idx) or min(idx) < 1:
                raise ValueError(f"interest must be distinct positive class indices, got {idx}")
            object.__setattr__(self, "interest", tuple(sorted(idx)))

    def resolve(self, n_classes: int) -> tuple[int, ...]:
        return check_interest(self.interest, n_classes)


def _columns(T: np.ndarray, interest) -> tuple[np.ndarray, tuple[int, ...]]:
    idx = check_interest(interest, T.shape[1])
    return T[:, np.asarray(idx) - 1], idx


def tau_star(posteriors, interest: Optional[Iterable[int]] = None) -> np.ndarray:
    """Largest posterior among the classes of interest, per row."""
    T = check_posteriors(posteriors)
    sub, _ = _columns(T, interest)
    return sub.max(axis=1) if T.shape[0] else np.zeros(0)


def map_rule(posteriors, interest: Optional[Iterable[int]] = None) -> np.ndarray:
    """Restricted MAP labels; never 0."""
    T = check_posteriors(posteriors)
    sub, idx = _columns(T, interest)
    if not T.shape[0]:
        return np.zeros(0, dtype=np.int64)
    # argmax returns the first maximum, and idx is sorted ascending
    return np.asarray(idx, dtype=np.int64)[sub.argmax(axis=1)]


def thresholded_rule(posteriors, spec: RuleSpec) -> np.ndarray:
    """Classify a row iff its interest-restricted max posterior exceeds ``1 - alpha``."""
    T = check_posteriors(posteriors)
    labels = map_rule(T, spec.resolve(T.shape[1]))
    keep = tau_star(T, spec.resolve(T.shape[1])) > 1.0 - spec.alpha
    return np.where(keep, labels, 0)


def criterion(posteriors, spec: RuleSpec) -> np.ndarray:
    """Ranking statistic whose superlevel sets are the optimal regions.

    ======  ======  ===========================================
    risk    K       value
    ======  ======  ===========================================
    MNPR    K = P   tau*
    MNPR    K < P   sum_interest tau / (1 - tau*_K)   (+inf when tau*_K = 1)
    MFDR    K = P   tau* + alpha - 1
    MFDR    K < P   (tau*_K + alpha - 1) / sum_interest tau  (-inf when the sum is 0)
    ======  ======  ===========================================

    The MFDR values are non-positive wherever the row would be worth
    classifying under the thresholded rule; the sign of lambda is not
    constrained here.
    """
    T = check_posteriors(posteriors)
    sub, idx = _columns(T, spec.resolve(T.shape[1]))
    if not T.shape[0]:
        return np.zeros(0)
    full = len(idx) == T.shape[1]
    tmax = sub.max(axis=1)
    if spec.risk is Risk.MNPR:
        if full:
            return tmax
        mass = sub.sum(axis=1)
        gap = 1.0 - tmax
        out = np.full(T.shape[0], np.inf)
        pos = gap > 0
        out[pos] = mass[pos] / gap[pos]
        return out
    if full:
        return tmax + spec.alpha - 1.0
    mass = sub.sum(axis=1)
    out = np.full(T.shape[0], -np.inf)
    pos = mass > 0
    out[pos] = (tmax[pos] + spec.alpha - 1.0) / mass[pos]
    return out


def apply_lambda(posteriors, spec: RuleSpec, lam: float) -> np.ndarray:
    """Restricted MAP on the region ``criterion >= lam``.

    ``lam = +inf`` classifies nothing, even rows whose criterion is itself
    the ``+inf`` sentinel.
    """
    T = check_posteriors(posteriors)
    labels = map_rule(T, spec.resolve(T.shape[1]))
    if lam == np.inf:
        return np.zeros_like(labels)
    return np.where(criterion(T, spec) >= lam, labels, 0)
