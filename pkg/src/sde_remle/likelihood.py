"""Exact per-subject likelihood, score, Hessian, and log density ratio.

Integrating the Girsanov factor exp(phi*U - phi^2*V/2) against the
N(mu, omega2) law of phi gives the closed-form per-subject likelihood

    lambda(U, V, theta) = (1 + w2*V)^(-1/2)
        * exp[(2*mu*U - mu^2*V + w2*U^2) / (2*(1 + w2*V))] * m(U, V)

where m is a theta-free factor exp(U^2/(2V)) absorbed into the dominating
measure. Everything here is written in that combined rational form, which
stays finite as V -> 0 and never divides by V.

With d = 1 + w2*V, the building blocks

    gamma = (U - mu*V) / d        (score in mu)
    I     = V / d                 (per-subject information weight)

give score = (gamma, (gamma^2 - I)/2) and the Hessian
[[-I, -gamma*I], [-gamma*I, -(2*gamma^2*I - I^2)/2]].

Degenerate hand-built inputs with V = 0 but U != 0 (impossible for stats
computed from an actual grid) make the theta-free factor infinite; for
those log_lambda reports +inf as a sentinel, which the optimizer refuses
to consume. Ratios and derivatives are unaffected because the factor
cancels there.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyEnsemble


@dataclass(frozen=True)
class ScoreHess:
    """Score vector and Hessian of one subject's log-likelihood.

    gamma and cap_i are the building blocks above; score is the length-2
    gradient in (mu, omega2) and hess the symmetric 2x2 second derivative.
    """

    gamma: float
    cap_i: float
    score: np.ndarray
    hess: np.ndarray


def uv_arrays(all_stats):
    """Extract (U, V) arrays from a list of SuffStats.

    A pre-built pair of float arrays passes through unchanged, so bulk
    callers can skip the per-subject objects.
    """
    if (
        isinstance(all_stats, tuple)
        and len(all_stats) == 2
        and isinstance(all_stats[0], np.ndarray)
    ):
        return all_stats
    u = np.array([s.u for s in all_stats], dtype=float)
    v = np.array([s.v for s in all_stats], dtype=float)
    return u, v


def loglik_terms(u, v, mu, omega2):
    """Per-subject log-likelihood terms, vectorized over (u, v).

    Returns +inf exactly where v == 0 and u != 0 (the degenerate-input
    sentinel); finite everywhere else.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    d = 1.0 + omega2 * v
    terms = -0.5 * np.log1p(omega2 * v) + (
        (2.0 * mu) * u - (mu * mu) * v + omega2 * (u * u)
    ) / (2.0 * d)
    sentinel = (v == 0.0) & (u != 0.0)
    if np.any(sentinel):
        terms = np.where(sentinel, np.inf, terms)
    return terms


def log_lambda(stats, theta):
    """Log of the exact mixed likelihood of one subject.

    Special values: omega2 = 0 collapses to mu*U - mu^2*V/2, and mu = U/V
    leaves -log(1 + w2*V)/2 + U^2/(2V); see the module docstring for the
    V = 0, U != 0 sentinel.
    """
    return float(loglik_terms(stats.u, stats.v, theta.mu, theta.omega2)[()])


def gamma_cap(u, v, mu, omega2):
    """The pair (gamma, I) vectorized over (u, v)."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    d = 1.0 + omega2 * v
    return (u - mu * v) / d, v / d


def score_terms(u, v, mu, omega2):
    """Per-subject score components (d/dmu, d/domega2), vectorized."""
    g, cap = gamma_cap(u, v, mu, omega2)
    return g, 0.5 * (g * g - cap)


def hess_terms(u, v, mu, omega2):
    """Per-subject Hessian entries (h_mumu, h_muw, h_ww), vectorized."""
    g, cap = gamma_cap(u, v, mu, omega2)
    return -cap, -g * cap, -0.5 * (2.0 * g * g * cap - cap * cap)


def score_hess(stats, theta):
    """Analytic score and Hessian of log_lambda at (stats, theta)."""
    g, cap = gamma_cap(stats.u, stats.v, theta.mu, theta.omega2)
    g = float(g[()])
    cap = float(cap[()])
    score = np.array([g, 0.5 * (g * g - cap)])
    h_mw = -g * cap
    hess = np.array([[-cap, h_mw], [h_mw, -0.5 * (2.0 * g * g * cap - cap * cap)]])
    return ScoreHess(gamma=g, cap_i=cap, score=score, hess=hess)


def ratio_terms(u, v, theta0, theta):
    """Per-subject log density ratio log f(x|theta0) - log f(x|theta).

    Implemented directly from the six-term expansion (not as a difference
    of two log_lambda calls), so the theta-free factor cancels by
    construction and the result is finite even at v = 0.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    mu0, w20 = theta0.mu, theta0.omega2
    mu, w2 = theta.mu, theta.omega2
    d0 = 1.0 + w20 * v
    d = 1.0 + w2 * v
    # paired grouping: each parenthesized difference vanishes exactly when
    # theta == theta0, so the self-ratio is identically zero
    return (
        0.5 * (np.log1p(w2 * v) - np.log1p(w20 * v))
        + 0.5 * (w20 - w2) * u * u / (d * d0)
        + ((mu * mu) * v / (2.0 * d) - (mu0 * mu0) * v / (2.0 * d0))
        + (mu0 * u / d0 - mu * u / d)
    )


def log_density_ratio(stats, theta0, theta):
    """Exact log density ratio for one subject; zero when theta == theta0."""
    return float(ratio_terms(stats.u, stats.v, theta0, theta)[()])


def _fsum(values):
    # exactly-rounded summation: totals are independent of term order and
    # of how an ensemble was partitioned across workers
    return math.fsum(values.tolist() if isinstance(values, np.ndarray) else values)


def total_loglik_uv(u, v, mu, omega2):
    """Ensemble log-likelihood from (U, V) arrays."""
    return _fsum(loglik_terms(u, v, mu, omega2))


def total_score_uv(u, v, mu, omega2):
    """Ensemble score vector from (U, V) arrays."""
    s_mu, s_w = score_terms(u, v, mu, omega2)
    return np.array([_fsum(s_mu), _fsum(s_w)])


def total_hess_uv(u, v, mu, omega2):
    """Ensemble Hessian from (U, V) arrays."""
    h_mm, h_mw, h_ww = hess_terms(u, v, mu, omega2)
    a = _fsum(h_mm)
    b = _fsum(h_mw)
    c = _fsum(h_ww)
    return np.array([[a, b], [b, c]])


def total_loglik(all_stats, theta):
    """Sum of log_lambda over an ensemble.

    The reduction is exactly rounded, so any ordering or partitioning of
    the same subjects produces the identical double.
    """
    if len(all_stats) == 0:
        raise EmptyEnsemble("no subjects to sum over")
    u, v = uv_arrays(all_stats)
    return total_loglik_uv(u, v, theta.mu, theta.omega2)


def total_score(all_stats, theta):
    """Ensemble score vector (same reduction contract as total_loglik)."""
    if len(all_stats) == 0:
        raise EmptyEnsemble("no subjects to sum over")
    u, v = uv_arrays(all_stats)
    return total_score_uv(u, v, theta.mu, theta.omega2)


def total_hess(all_stats, theta):
    """Ensemble Hessian (same reduction contract as total_loglik)."""
    if len(all_stats) == 0:
        raise EmptyEnsemble("no subjects to sum over")
    u, v = uv_arrays(all_stats)
    return total_hess_uv(u, v, theta.mu, theta.omega2)
