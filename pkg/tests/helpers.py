import numpy as np


def dirichlet_posteriors(rng, n, P, concentration=1.0):
    return rng.dirichlet(np.full(P, concentration), size=n)


def rows_from_tau(taus, P=3):
    """Posterior rows whose max is ``tau`` with the rest spread evenly."""
    taus = np.asarray(taus, dtype=float)
    rest = (1.0 - taus) / (P - 1)
    return np.column_stack([taus] + [rest] * (P - 1))
