"""Realized error rates from true labels, and replicate summaries."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

import numpy as np

RATES = ("mfdr", "mnpr", "mfnr")


@dataclass(frozen=True)
class EvalReport:
    realized_mfdr: float
    realized_mnpr: float
    realized_mfnr: float
    n_classified: int
    n_total: int
    n_interest: int

    @property
    def none_classified(self) -> bool:
        """MFDR is 0 by convention in this case, not because nothing went wrong."""
        return self.n_classified == 0

    def rate(self, name: str) -> float:
        return getattr(self, f"realized_{name}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["none_classified"] = self.none_classified
        return d


def evaluate(predictions: Sequence[int], true_labels: Sequence[int], interest: Iterable[int]) -> EvalReport:
    """Compare predicted labels (0 = abstain) to the true classes."""
    pred = np.asarray(predictions, dtype=np.int64).reshape(-1)
    z = np.asarray(true_labels, dtype=np.int64).reshape(-1)
    if pred.shape != z.shape:
        raise ValueError(f"{pred.shape[0]} predictions for {z.shape[0]} labels")
    allowed = np.asarray(sorted({int(k) for k in interest}), dtype=np.int64)
    stray = np.setdiff1d(pred[pred != 0], allowed)
    if stray.size:
        raise ValueError(f"predicted labels {stray.tolist()} are neither 0 nor of interest")
    n = pred.shape[0]
    classified = pred > 0
    n_cls = int(classified.sum())
    n_wrong = int((classified & (pred != z)).sum())
    of_interest = np.isin(z, allowed)
    missed = int((of_interest & ~classified).sum())
    mfdr = n_wrong / n_cls if n_cls else 0.0
    return EvalReport(
        realized_mfdr=mfdr,
        realized_mnpr=n_wrong / n if n else 0.0,
        realized_mfnr=missed / n if n else 0.0,
        n_classified=n_cls,
        n_total=n,
        n_interest=int(of_interest.sum()),
    )


@dataclass(frozen=True)
class RateSummary:
    mean: float
    sd: float
    median: float
    q25: float
    q75: float
    sd_defined: bool = True


def summarize(values: Sequence[float]) -> RateSummary:
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise ValueError("cannot summarise an empty list")
    q25, med, q75 = np.percentile(v, [25, 50, 75])
    # sample sd (n - 1); a single value gets 0 and is flagged
    sd = float(v.std(ddof=1)) if v.size > 1 else 0.0
    return RateSummary(float(v.mean()), sd, float(med), float(q25), float(q75), v.size > 1)


def aggregate(reports: Sequence[EvalReport]) -> dict[str, RateSummary]:
    """Mean, sd, median and quartiles of each realized rate across reports."""
    if not reports:
        raise ValueError("aggregate needs at least one report")
    return {name: summarize([r.rate(name) for r in reports]) for name in RATES}
