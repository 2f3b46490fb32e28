"""Input validation helpers shared by the estimators and functional API."""

from __future__ import annotations

from typing import Iterable, Optional, Sequence

import numpy as np
from sklearn.utils.validation import check_array

ROW_SUM_TOL = 1e-9


class ParameterError(ValueError):
    """Raised when model parameters violate their invariants."""


class FitError(RuntimeError):
    """Raised when every EM restart ends in a degenerate component."""


def check_posteriors(posteriors, *, allow_empty: bool = True) -> np.ndarray:
    """Validate an ``(n, P)`` posterior matrix and return it as float64.

    Rows must lie in ``[0, 1]`` and sum to one within ``1e-9``.
    """
    T = check_array(
        posteriors,
        dtype=np.float64,
        ensure_2d=True,
        ensure_min_samples=0 if allow_empty else 1,
        ensure_min_features=1,
    )
    if T.shape[1] < 2:
        raise ValueError(f"posterior matrix needs at least 2 columns, got {T.shape[1]}")
    if T.size:
        if T.min() < 0.0 or T.max() > 1.0:
            raise ValueError("posterior entries must lie in [0, 1]")
        dev = np.abs(T.sum(axis=1) - 1.0).max()
        if dev > ROW_SUM_TOL:
            raise ValueError(f"posterior rows must sum to 1 (max deviation {dev:.3g})")
    return T


def check_interest(interest: Optional[Iterable[int]], n_classes: int) -> tuple[int, ...]:
    """Normalise a set of 1-based class indices; ``None`` means every class."""
    if interest is None:
        return tuple(range(1, n_classes + 1))
    idx = [int(k) for k in interest]
    if not idx:
        raise ValueError("interest set must be nonempty")
    if len(set(idx)) != len(idx):
        raise ValueError(f"interest indices must be distinct, got {idx}")
    bad = [k for k in idx if k < 1 or k > n_classes]
    if bad:
        raise ValueError(f"interest indices {bad} outside 1..{n_classes}")
    return tuple(sorted(idx))


def check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    return alpha


def check_mask(mask, n: int) -> np.ndarray:
    m = np.asarray(mask, dtype=bool)
    if m.shape != (n,):
        raise ValueError(f"region mask must have shape ({n},), got {m.shape}")
    return m


def check_spd(matrix, name: str = "covariance", tol: float = 1e-12) -> np.ndarray:
    """Return ``matrix`` as a float array after checking symmetry and positive definiteness."""
    M = np.asarray(matrix, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ParameterError(f"{name} must be a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ParameterError(f"{name} has non-finite entries")
    if not np.allclose(M, M.T, rtol=0.0, atol=1e-10 * max(1.0, np.abs(M).max())):
        raise ParameterError(f"{name} must be symmetric")
    if np.linalg.eigvalsh(M).min() <= tol:
        raise ParameterError(f"{name} must be positive definite")
    return M


def check_labels(labels: Sequence[int], n_classes: Optional[int] = None) -> np.ndarray:
    z = np.asarray(labels)
    if z.ndim != 1:
        raise ValueError("labels must be one-dimensional")
    if z.size and not np.issubdtype(z.dtype, np.integer):
        if not np.all(np.equal(np.mod(z, 1), 0)):
            raise ValueError("labels must be integers")
    z = z.astype(np.int64)
    if n_classes is not None and z.size and (z.min() < 1 or z.max() > n_classes):
        raise ValueError(f"labels must lie in 1..{n_classes}")
    return z
