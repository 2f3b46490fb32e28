"""Finite mixtures of Gaussian or Student components.

Exact log-densities and posteriors, seeded stratified sampling, and an EM
fitter for full-covariance Gaussian mixtures. Everything downstream of this
module only sees the posterior matrix ``T[i, p] = tau_p(x_i)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.special import gammaln
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.cluster import kmeans_plusplus
from sklearn.utils.validation import check_array, check_is_fitted

from ._validation import FitError, ParameterError, check_spd

LOG_2PI = np.log(2.0 * np.pi)


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


def _chol_logdet(matrix: np.ndarray) -> tuple[np.ndarray, float]:
    L = np.linalg.cholesky(matrix)
    return L, 2.0 * float(np.log(np.diag(L)).sum())


def _mahalanobis_sq(X: np.ndarray, center: np.ndarray, L: np.ndarray) -> np.ndarray:
    # Solve L z = (x - mu) for every row at once.
    Z = np.linalg.solve(L, (X - center).T)
    return np.einsum("ij,ij->j", Z, Z)


@dataclass(frozen=True, eq=False)
class GaussianComponent:
    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        mean = _frozen(self.mean).reshape(-1)
        cov = _frozen(check_spd(self.covariance, "covariance"))
        if cov.shape[0] != mean.shape[0]:
            raise ParameterError("mean and covariance dimensions disagree")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)

    family = "gaussian"

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    @property
    def center(self) -> np.ndarray:
        return self.mean

    def logpdf(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        L, logdet = _chol_logdet(self.covariance)
        maha = _mahalanobis_sq(X, self.mean, L)
        return -0.5 * (self.dim * LOG_2PI + logdet + maha)

    def draw(self, n: int, rng: np.random.Generator) -> np.ndarray:
        L = np.linalg.cholesky(self.covariance)
        return self.mean + rng.standard_normal((n, self.dim)) @ L.T


@dataclass(frozen=True, eq=False)
class StudentComponent:
    """Multivariate t with location, scale matrix and ``dof > 2``.

    The covariance is ``dof / (dof - 2) * scale``.
    """

    location: np.ndarray
    scale: np.ndarray
    dof: float

    def __post_init__(self):
        loc = _frozen(self.location).reshape(-1)
        scale = _frozen(check_spd(self.scale, "scale"))
        if scale.shape[0] != loc.shape[0]:
            raise ParameterError("location and scale dimensions disagree")
        dof = float(self.dof)
        if not dof > 2.0:
            raise ParameterError(f"dof must exceed 2, got {dof}")
        object.__setattr__(self, "location", loc)
        object.__setattr__(self, "scale", scale)
        object.__setattr__(self, "dof", dof)

    family = "student"

    @property
    def dim(self) -> int:
        return self.location.shape[0]

    @property
    def center(self) -> np.ndarray:
        return self.location

    @property
    def covariance(self) -> np.ndarray:
        return self.dof / (self.dof - 2.0) * self.scale

    def logpdf(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        d, nu = self.dim, self.dof
        L, logdet = _chol_logdet(self.scale)
        maha = _mahalanobis_sq(X, self.location, L)
        log_norm = (
            gammaln(0.5 * (nu + d)) - gammaln(0.5 * nu)
            - 0.5 * d * np.log(nu * np.pi) - 0.5 * logdet
        )
        return log_norm - 0.5 * (nu + d) * np.log1p(maha / nu)

    def draw(self, n: int, rng: np.random.Generator) -> np.ndarray:
        # x = y / sqrt(u / nu) + mu, y ~ N(0, scale), u ~ chi2(nu)
        L = np.linalg.cholesky(self.scale)
        y = rng.standard_normal((n, self.dim)) @ L.T
        u = rng.chisquare(self.dof, size=n)
        return y / np.sqrt(u / self.dof)[:, None] + self.location


Component = Union[GaussianComponent, StudentComponent]


def component_density(component: Component, x) -> Union[float, np.ndarray]:
    """Density of ``component`` at a point (scalar) or at each row of a matrix."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != component.dim:
        raise ParameterError(f"point dimension {x.shape[-1]} != component dimension {component.dim}")
    vals = np.exp(component.logpdf(x))
    return float(vals[0]) if x.ndim == 1 else vals


@dataclass(frozen=True, eq=False)
class LabeledSample:
    points: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        lab = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        if pts.ndim != 2 or pts.shape[0] != lab.shape[0]:
            raise ValueError("points must be (n, d) with one label per row")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "labels", lab)

    def __len__(self) -> int:
        return self.labels.shape[0]


@dataclass(frozen=True, eq=False)
class MixtureModel:
    """Weights plus one component per class; labels are ``1..P``."""

    weights: np.ndarray
    components: tuple

    def __post_init__(self):
        w = _frozen(self.weights).reshape(-1)
        comps = tuple(self.components)
        if len(comps) < 2:
            raise ParameterError("a mixture needs at least 2 components")
        if len(comps) != w.shape[0]:
            raise ParameterError("one weight per component required")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ParameterError(f"weights must be nonnegative and sum to 1, got {w.tolist()}")
        families = {c.family for c in comps}
        if len(families) != 1:
            raise ParameterError("components must all be of the same family")
        if len({c.dim for c in comps}) != 1:
            raise ParameterError("components must share one dimension")
        if comps[0].family == "student" and len({c.dof for c in comps}) != 1:
            raise ParameterError("Student components must share one dof")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "components", comps)

    @property
    def family(self) -> str:
        return self.components[0].family

    @property
    def n_components(self) -> int:
        return len(self.components)

    @property
    def dim(self) -> int:
        return self.components[0].dim

    @property
    def centers(self) -> np.ndarray:
        return np.stack([c.center for c in self.components])

    def weighted_log_densities(self, X) -> np.ndarray:
        """``(n, P)`` matrix of ``log pi_p + log f_p(x_i)``."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.dim:
            raise ParameterError(f"points have dimension {X.shape[1]}, model has {self.dim}")
        with np.errstate(divide="ignore"):
            logw = np.log(self.weights)
        return np.column_stack([c.logpdf(X) for c in self.components]) + logw

    def posterior(self, X) -> np.ndarray:
        return _normalize_log(self.weighted_log_densities(X))[0]

    def log_likelihood(self, X) -> float:
        return float(_normalize_log(self.weighted_log_densities(X))[1].sum())

    def sample(self, n_per_class: Sequence[int], seed) -> LabeledSample:
        return sample(self, n_per_class, seed)

    def to_dict(self) -> dict:
        if self.family == "gaussian":
            comps = [{"mean": c.mean.tolist(), "covariance": c.covariance.tolist()}
                     for c in self.components]
        else:
            comps = [{"location": c.location.tolist(), "scale": c.scale.tolist(), "dof": c.dof}
                     for c in self.components]
        return {"family": self.family, "weights": self.weights.tolist(), "components": comps}

    @classmethod
    def from_dict(cls, data: dict) -> "MixtureModel":
        try:
            family = data["family"]
            weights = data["weights"]
            raw = data["components"]
            if family == "gaussian":
                comps = [GaussianComponent(c["mean"], c["covariance"]) for c in raw]
            elif family == "student":
                comps = [StudentComponent(c["location"], c["scale"], c["dof"]) for c in raw]
            else:
                raise ParameterError(f"unknown family {family!r}")
        except (KeyError, TypeError) as exc:
            raise ParameterError(f"malformed model description: {exc}") from exc
        return cls(weights, comps)


def _normalize_log(log_prob: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row-normalise log weights with the max-subtraction trick.

    Returns the posterior matrix and the per-row log normaliser.
    """
    m = log_prob.max(axis=1, keepdims=True)
    if not np.all(np.isfinite(m)):
        raise ParameterError("every component has zero density at some point")
    shifted = np.exp(log_prob - m)
    s = shifted.sum(axis=1, keepdims=True)
    return shifted / s, (m + np.log(s)).reshape(-1)


def posterior(model: MixtureModel, x) -> np.ndarray:
    """Posterior class probabilities; a vector for one point, a matrix for rows."""
    x = np.asarray(x, dtype=np.float64)
    T = model.posterior(x)
    return T[0] if x.ndim == 1 else T


def sample(model: MixtureModel, n_per_class: Sequence[int], seed) -> LabeledSample:
    """Draw exactly ``n_per_class[p]`` rows from component ``p``, grouped by class."""
    counts = [int(c) for c in n_per_class]
    if len(counts) != model.n_components:
        raise ValueError(f"need {model.n_components} class counts, got {len(counts)}")
    if any(c < 0 for c in counts):
        raise ValueError("class counts must be nonnegative")
    rng = np.random.default_rng(seed)
    blocks = [comp.draw(n, rng) for comp, n in zip(model.components, counts)]
    labels = np.repeat(np.arange(1, model.n_components + 1), counts)
    return LabeledSample(np.concatenate(blocks, axis=0).reshape(-1, model.dim), labels)


def match_components(fitted_centers, true_centers) -> np.ndarray:
    """Permutation ``perm`` with fitted component ``perm[p]`` matched to true class ``p``.

    Minimises the total Euclidean distance between matched centers.
    """
    F = np.asarray(fitted_centers, dtype=np.float64)
    C = np.asarray(true_centers, dtype=np.float64)
    cost = np.linalg.norm(C[:, None, :] - F[None, :, :], axis=2)
    rows, cols = linear_sum_assignment(cost)
    perm = np.empty(C.shape[0], dtype=np.int64)
    perm[rows] = cols
    return perm


# --------------------------------------------------------------------------
# EM for full-covariance Gaussian mixtures
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class EmConfig:
    max_iterations: int = 1000
    loglik_tolerance: float = 1e-6
    n_restarts: int = 5
    covariance_floor: float = 1e-6

    def __post_init__(self):
        if self.max_iterations < 1 or self.n_restarts < 1:
            raise ValueError("max_iterations and n_restarts must be positive")
        if not (self.loglik_tolerance > 0 and self.covariance_floor > 0):
            raise ValueError("loglik_tolerance and covariance_floor must be positive")


@dataclass(frozen=True, eq=False)
class EmResult:
    model: MixtureModel
    log_likelihood: float
    history: np.ndarray = field(repr=False)
    n_iter: int = 0
    converged: bool = False
    n_degenerate: int = 0


class _Degenerate(Exception):
    pass


def _floor_covariance(S: np.ndarray, floor: float) -> np.ndarray:
    S = 0.5 * (S + S.T)
    vals, vecs = np.linalg.eigh(S)
    if vals.min() >= floor:
        return S
    vals = np.maximum(vals, floor)
    return (vecs * vals) @ vecs.T


def _gauss_logpdf_all(X, means, covs) -> np.ndarray:
    n, d = X.shape
    out = np.empty((n, means.shape[0]))
    for p in range(means.shape[0]):
        L, logdet = _chol_logdet(covs[p])
        out[:, p] = -0.5 * (d * LOG_2PI + logdet + _mahalanobis_sq(X, means[p], L))
    return out


def _em_single(X, P, config: EmConfig, rng_state: int):
    n, d = X.shape
    means, _ = kmeans_plusplus(X, P, random_state=np.random.RandomState(rng_state))
    pooled = _floor_covariance(np.cov(X, rowvar=False, bias=True).reshape(d, d),
                               config.covariance_floor)
    covs = np.repeat(pooled[None], P, axis=0)
    weights = np.full(P, 1.0 / P)

    def estep(w, mu, S):
        with np.errstate(divide="ignore"):
            lp = _gauss_logpdf_all(X, mu, S) + np.log(w)
        resp, lognorm = _normalize_log(lp)
        return resp, float(lognorm.sum())

    resp, ll = estep(weights, means, covs)
    history = [ll]
    converged = False
    for _ in range(config.max_iterations):
        nk = resp.sum(axis=0)
        if nk.min() < d + 1:
            raise _Degenerate
        weights = nk / n
        means = (resp.T @ X) / nk[:, None]
        for p in range(P):
            diff = X - means[p]
            covs[p] = _floor_covariance((resp[:, p, None] * diff).T @ diff / nk[p],
                                        config.covariance_floor)
        resp, new_ll = estep(weights, means, covs)
        history.append(new_ll)
        if new_ll - ll < config.loglik_tolerance:
            converged = True
            ll = new_ll
            break
        ll = new_ll
    model = MixtureModel(weights / weights.sum(),
                         [GaussianComponent(m, S) for m, S in zip(means, covs)])
    return model, ll, np.asarray(history), len(history) - 1, converged


def fit_em(X, n_components: int, config: Optional[EmConfig] = None, seed=None) -> EmResult:
    """Fit a full-covariance Gaussian mixture by EM, keeping the best restart.

    Means are seeded k-means++ style, covariances start at the pooled sample
    covariance and weights start uniform. A restart is discarded when some
    component's responsibility mass drops below ``d + 1`` points.
    """
    config = config or EmConfig()
    X = check_array(X, dtype=np.float64)
    n, d = X.shape
    P = int(n_components)
    if P < 2:
        raise ValueError("n_components must be at least 2")
    if n < P * (d + 1):
        raise ValueError(f"need at least {P * (d + 1)} points for {P} components in {d} dims, got {n}")
    states = np.random.SeedSequence(seed).generate_state(config.n_restarts, dtype=np.uint32)
    best = None
    n_degenerate = 0
    for state in states:
        try:
            out = _em_single(X, P, config, int(state))
        except (_Degenerate, np.linalg.LinAlgError, ParameterError):
            n_degenerate += 1
            continue
        if best is None or out[1] > best[1]:
            best = out
    if best is None:
        raise FitError(f"all {config.n_restarts} EM restarts hit a degenerate component")
    model, ll, history, n_iter, converged = best
    return EmResult(model, ll, history, n_iter, converged, n_degenerate)


# --------------------------------------------------------------------------
# Estimator wrappers
# --------------------------------------------------------------------------


class GaussianMixtureEM(TransformerMixin, BaseEstimator):
    """EM-fitted Gaussian mixture whose ``transform`` yields posteriors.

    Parameters
    ----------
    n_components : int, default=3
        Number of mixture components, fixed in advance.
    max_iter : int, default=1000
    tol : float, default=1e-6
        Absolute log-likelihood improvement below which EM stops.
    n_init : int, default=5
        Restarts; the fit with the largest final log-likelihood is kept.
    covariance_floor : float, default=1e-6
        Lower bound on every covariance eigenvalue.
    random_state : int or None
    """

    def __init__(self, n_components=3, *, max_iter=1000, tol=1e-6, n_init=5,
                 covariance_floor=1e-6, random_state=None):
        self.n_components = n_components
        self.max_iter = max_iter
        self.tol = tol
        self.n_init = n_init
        self.covariance_floor = covariance_floor
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        cfg = EmConfig(self.max_iter, self.tol, self.n_init, self.covariance_floor)
        res = fit_em(X, self.n_components, cfg, seed=self.random_state)
        self.model_ = res.model
        self.log_likelihood_ = res.log_likelihood
        self.history_ = res.history
        self.n_iter_ = res.n_iter
        self.converged_ = res.converged
        self.n_features_in_ = X.shape[1]
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "model_")
        return self.model_.posterior(check_array(X, dtype=np.float64))

    def transform(self, X):
        return self.predict_proba(X)

    def predict(self, X):
        return self.predict_proba(X).argmax(axis=1) + 1

    def score(self, X, y=None):
        """Mean per-sample log-likelihood."""
        check_is_fitted(self, "model_")
        X = check_array(X, dtype=np.float64)
        return self.model_.log_likelihood(X) / X.shape[0]


class MixturePosterior(TransformerMixin, BaseEstimator):
    """Stateless transformer mapping points to posteriors under a known model."""

    def __init__(self, model=None):
        self.model = model

    def fit(self, X, y=None):
        if not isinstance(self.model, MixtureModel):
            raise ParameterError("MixturePosterior needs a MixtureModel")
        X = check_array(X, dtype=np.float64)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        return self.model.posterior(check_array(X, dtype=np.float64))

    predict_proba = transform

    def __sklearn_is_fitted__(self):
        return isinstance(self.model, MixtureModel)
