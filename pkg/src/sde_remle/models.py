"""Model vocabulary: drift/diffusion pairs, parameters, and designs.

The observation model for subject i is

    dX_i(t) = phi_i * b(X_i(t)) dt + sigma(X_i(t)) dW_i(t),   X_i(0) = x_i,

with phi_i drawn iid N(mu, omega2). A ModelSpec names the (b, sigma) pair
together with the growth metadata the theory relies on; Theta and ParamSpace
describe the random-effect law and the compact rectangle it is estimated
over; Design lists the subjects of one ensemble.
"""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import NotFound


@dataclass(frozen=True)
class ModelSpec:
    """A named drift factor b and diffusion coefficient sigma.

    Parameters
    ----------
    name : str
    b, sigma : callable
        Vectorized real functions; sigma must stay positive wherever paths go.
    tau : float
        Growth exponent such that b^2/sigma^2 <= k_const * (1 + |x|^tau).
    k_const : float
        The constant in the quadratic growth bounds for b^2 and b^2/sigma^2.
    """

    name: str
    b: Callable
    sigma: Callable
    tau: float
    k_const: float = 1.0

    def __post_init__(self):
        if self.tau < 1:
            raise ValueError("tau must be >= 1")


@dataclass(frozen=True)
class Theta:
    """Random-effect law parameters (mu, omega2) with omega2 >= 0."""

    mu: float
    omega2: float

    def __post_init__(self):
        if not np.isfinite(self.mu):
            raise ValueError("mu must be finite")
        if not (np.isfinite(self.omega2) and self.omega2 >= 0):
            raise ValueError("omega2 must be finite and >= 0")


@dataclass(frozen=True)
class ParamSpace:
    """Closed rectangle [mu_lo, mu_hi] x [omega2_lo, omega2_hi]."""

    mu_lo: float
    mu_hi: float
    omega2_lo: float
    omega2_hi: float

    def __post_init__(self):
        if not self.mu_lo < self.mu_hi:
            raise ValueError("need mu_lo < mu_hi")
        if not 0 <= self.omega2_lo < self.omega2_hi:
            raise ValueError("need 0 <= omega2_lo < omega2_hi")

    def contains(self, theta):
        return (
            self.mu_lo <= theta.mu <= self.mu_hi
            and self.omega2_lo <= theta.omega2 <= self.omega2_hi
        )

    def interior_contains(self, theta):
        return (
            self.mu_lo < theta.mu < self.mu_hi
            and self.omega2_lo < theta.omega2 < self.omega2_hi
        )

    def clamp_mu(self, mu):
        return min(max(mu, self.mu_lo), self.mu_hi)

    def clamp_omega2(self, omega2):
        return min(max(omega2, self.omega2_lo), self.omega2_hi)


def validate_theta(theta, space):
    """True iff theta lies in the closed rectangle."""
    return space.contains(theta)


@dataclass(frozen=True)
class Design:
    """Subjects of one ensemble plus the shared Euler step and master seed.

    subjects is a tuple of (x0, T). The step must resolve every horizon:
    dt <= min(T) / 10.
    """

    subjects: tuple
    dt: float
    seed: int
    x_range: Optional[tuple] = None
    t_range: Optional[tuple] = None

    def __post_init__(self):
        subjects = tuple((float(x0), float(t)) for x0, t in self.subjects)
        object.__setattr__(self, "subjects", subjects)
        if not subjects:
            raise ValueError("design needs at least one subject")
        ts = [t for _, t in subjects]
        xs = [x for x, _ in subjects]
        if min(ts) <= 0:
            raise ValueError("every T must be > 0")
        if not self.dt > 0:
            raise ValueError("dt must be > 0")
        if self.dt > min(ts) / 10:
            raise ValueError("dt must be <= min(T) / 10")
        x_range = self.x_range if self.x_range is not None else (min(xs), max(xs))
        t_range = self.t_range if self.t_range is not None else (min(ts), max(ts))
        object.__setattr__(self, "x_range", (float(x_range[0]), float(x_range[1])))
        object.__setattr__(self, "t_range", (float(t_range[0]), float(t_range[1])))
        if not all(x_range[0] <= x <= x_range[1] for x in xs):
            raise ValueError("x0 outside the declared compact range")
        if not all(t_range[0] <= t <= t_range[1] for t in ts):
            raise ValueError("T outside the declared compact range")
        if self.seed < 0:
            raise ValueError("seed must be a nonnegative integer")

    @property
    def n(self):
        return len(self.subjects)


@dataclass(frozen=True)
class RandomEffect:
    """One realized drift multiplier phi_i."""

    phi: float


def _unit_b(x):
    return np.ones_like(np.asarray(x, dtype=float))


def _unit_sigma(x):
    return np.ones_like(np.asarray(x, dtype=float))


def _identity(x):
    return np.asarray(x, dtype=float)


def _bounded_ratio_sigma(x):
    x = np.asarray(x, dtype=float)
    return np.sqrt(1.0 + x * x)


_REGISTRY = {}


def register_model(model):
    """Register a ModelSpec under its name; user models are trusted but
    must declare tau and k_const for the sample-probed growth checks."""
    _REGISTRY[model.name] = model
    return model


def builtin_model(name):
    """Look up a registered model by name.

    The built-ins are "unit" (b = 1, sigma = 1), "linear-drift" (b(x) = x,
    sigma = 1) and "bounded-ratio" (b(x) = x, sigma(x) = sqrt(1 + x^2)).
    All satisfy b^2 <= 1 + x^2 and b^2/sigma^2 <= 1 + |x|^tau with the
    recorded tau.
    """
    try:
        return _REGISTRY[name]
    except KeyError:
        raise NotFound(f"no model named {name!r}") from None


register_model(ModelSpec("unit", _unit_b, _unit_sigma, tau=1.0))
register_model(ModelSpec("linear-drift", _identity, _unit_sigma, tau=2.0))
register_model(ModelSpec("bounded-ratio", _identity, _bounded_ratio_sigma, tau=1.0))
