"""Sufficient statistics of one path.

For drift multiplier phi the exact likelihood of a path depends on it only
through the pair

    U = integral of b(X)/sigma^2(X) dX      (Ito sum, left endpoints)
    V = integral of b^2(X)/sigma^2(X) ds    (Riemann sum, left endpoints)

computed here on the stored grid. Left-endpoint evaluation keeps the
unit-model identities U = X(T) - x0 and V = T exact, and makes the drift
decomposition below an identity rather than an approximation.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDiffusion, MissingPhi

# hard floor on sigma^2; integrability of b^2/sigma^2 is an assumption of
# the whole theory, so underflow is an error, never a clamp
SIGMA2_FLOOR = 1e-12


@dataclass(frozen=True)
class SuffStats:
    """The pair (U, V) for one subject; V is a sum of squares, so V >= 0."""

    u: float
    v: float
    subject_index: int

    def __post_init__(self):
        if not (np.isfinite(self.v) and self.v >= 0):
            raise ValueError("v must be finite and >= 0")
        if not np.isfinite(self.u):
            raise ValueError("u must be finite")


@dataclass(frozen=True)
class SuffStatsDecomposition:
    """Split of U into its drift and martingale parts: u = phi*u1 + u2.

    u1 equals V by construction and u2 is recovered residually as
    u - phi*u1, so the identity holds exactly at any step size.
    """

    u1: float
    u2: float
    phi: float


def suff_stats_rows(times, values, model):
    """U and V for each row of a (R, M+1) value matrix on a shared grid.

    Rows containing non-finite states yield NaN statistics; callers that
    tolerate divergence filter on finiteness.
    """
    values = np.atleast_2d(np.asarray(values, dtype=float))
    deltas = np.diff(np.asarray(times, dtype=float))
    body = values[:, :-1]
    with np.errstate(invalid="ignore", over="ignore"):
        bvals = model.b(body)
        svals = model.sigma(body)
        sig2 = svals * svals
        finite = np.isfinite(body).all(axis=1)
        if np.any(finite[:, None] & ((sig2 < SIGMA2_FLOOR) | ~(svals > 0))):
            raise DegenerateDiffusion(
                f"sigma^2 below {SIGMA2_FLOOR:g} on the grid for model {model.name!r}"
            )
        w = bvals / sig2
        u = np.sum(w * np.diff(values, axis=1), axis=1)
        v = np.sum((bvals * w) * deltas, axis=1)
    return u, v


def compute_suff_stats(path, model):
    """Left-endpoint sums for U and V on the path's own grid.

    Pure in (times, values, model): provenance fields never affect the
    result.
    """
    u, v = suff_stats_rows(path.times, path.values, model)
    return SuffStats(u=float(u[0]), v=float(v[0]), subject_index=path.subject_index)


def decompose(path, model, stats):
    """Split stats.u as phi*u1 + u2 for a simulation-produced path.

    u1 is the same left-endpoint sum as V; u2 is defined residually so the
    identity is exact. Raises MissingPhi for ingested paths.
    """
    if path.phi is None:
        raise MissingPhi("decomposition needs the realized phi of a simulated path")
    u1 = stats.v
    u2 = stats.u - path.phi * u1
    return SuffStatsDecomposition(u1=u1, u2=u2, phi=path.phi)


def stats_list(paths, model):
    """Sufficient statistics for every path of an ensemble."""
    return [compute_suff_stats(p, model) for p in paths]
