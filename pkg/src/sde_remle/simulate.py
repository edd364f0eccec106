"""Euler-Maruyama path generation with reproducible substreams.

The integration grid is uniform with step dt; when T is not a multiple of
dt the final step covers the remainder. All simulation funnels through one
batch kernel that advances many replicate rows in lockstep, so the scalar
path API and the Monte Carlo experiment engines share identical arithmetic.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DegenerateDiffusion, SimulationDiverged
from .models import RandomEffect
from .rng import PHI_STREAM_ID, RngStream, generator


@dataclass(frozen=True, eq=False)
class Path:
    """One discretized trajectory.

    times[0] = 0 and values[0] = x0; phi is retained for oracle tests on
    simulated paths and is None for ingested data.
    """

    times: np.ndarray
    values: np.ndarray
    x0: float
    phi: Optional[float]
    seed: int
    subject_index: int

    def __post_init__(self):
        if len(self.times) != len(self.values) or len(self.times) < 2:
            raise ValueError("need matching time/value grids with >= 2 points")
        if self.times[0] != 0.0:
            raise ValueError("grid must start at t = 0")
        if self.values[0] != self.x0:
            raise ValueError("values[0] must equal x0")


def time_grid(T, dt):
    """Uniform grid 0, dt, 2dt, ... ending exactly at T (last step partial)."""
    if not (T > 0 and dt > 0):
        raise ValueError("need T > 0 and dt > 0")
    # the 1e-9 slack keeps T/dt that is a multiple up to rounding from
    # gaining a spurious extra step
    steps = max(1, int(math.ceil(T / dt - 1e-9)))
    times = np.empty(steps + 1)
    times[:steps] = dt * np.arange(steps)
    times[steps] = T
    if not times[steps] > times[steps - 1]:
        raise ValueError("grid degenerate: T too close to a step multiple")
    return times


def _euler_rows(model, phis, x0, T, dt, normals, raise_errors=True, subject_index=None):
    """Advance R replicate rows of one subject through the full grid.

    Returns (times, values, first_bad) where values has shape (R, M+1) and
    first_bad[r] is the step at which row r stopped being finite, or -1.
    With raise_errors the first divergence aborts instead.
    """
    times = time_grid(T, dt)
    steps = len(times) - 1
    phis = np.asarray(phis, dtype=float)
    rows = phis.shape[0]
    if normals.shape != (rows, steps):
        raise ValueError(f"normals must have shape ({rows}, {steps})")
    values = np.empty((rows, steps + 1))
    values[:, 0] = x0
    state = np.full(rows, float(x0))
    first_bad = np.full(rows, -1, dtype=np.int64)
    alive = np.ones(rows, dtype=bool)
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(steps):
            delta = times[k + 1] - times[k]
            bvals = model.b(state)
            svals = model.sigma(state)
            bad_sigma = alive & ~(svals > 0)
            if bad_sigma.any():
                raise DegenerateDiffusion(
                    f"sigma <= 0 at step {k} for model {model.name!r}", step=k
                )
            state = state + phis * bvals * delta + svals * math.sqrt(delta) * normals[:, k]
            newly_bad = alive & ~np.isfinite(state)
            if newly_bad.any():
                if raise_errors:
                    raise SimulationDiverged(k + 1, subject_index=subject_index)
                first_bad[newly_bad] = k + 1
                alive &= ~newly_bad
            values[:, k + 1] = state
    return times, values, first_bad


def path_normals(seed, subject_index, replicate_ids, steps):
    """Standard-normal increments, one row per replicate substream."""
    z = np.empty((len(replicate_ids), steps))
    for j, rep in enumerate(replicate_ids):
        z[j] = generator(seed, subject_index, rep).standard_normal(steps)
    return z


def euler_maruyama(model, phi, x0, T, dt, rng, normals=None):
    """Simulate one path of dX = phi*b(X)dt + sigma(X)dW from x0 over [0, T].

    Parameters
    ----------
    rng : RngStream
        Substream supplying the standard-normal increments.
    normals : array, optional
        Test hook: explicit increments (length = number of steps) used
        instead of drawing from rng; forcing zeros yields the explicit
        Euler ODE solution.

    Raises
    ------
    SimulationDiverged
        If the state overflows or becomes NaN; the error carries the step.
    DegenerateDiffusion
        If sigma evaluates <= 0 along the path.
    """
    times = time_grid(T, dt)
    steps = len(times) - 1
    if normals is None:
        normals = rng.generator().standard_normal(steps)
    normals = np.asarray(normals, dtype=float).reshape(1, steps)
    times, values, _ = _euler_rows(
        model, [phi], x0, T, dt, normals,
        raise_errors=True, subject_index=rng.stream_id,
    )
    return Path(
        times=times,
        values=values[0],
        x0=float(x0),
        phi=float(phi),
        seed=rng.seed,
        subject_index=rng.stream_id,
    )


def draw_random_effects(theta0, n, rng):
    """Draw n iid N(mu0, omega2_0) effects from one substream."""
    scale = math.sqrt(theta0.omega2)
    draws = theta0.mu + scale * rng.generator().standard_normal(n)
    return [RandomEffect(phi=float(p)) for p in draws]


def phi_stream(seed, replicate_id):
    """The reserved substream that supplies an ensemble's random effects."""
    return RngStream(seed=seed, stream_id=PHI_STREAM_ID, replicate_id=replicate_id)


def simulate_ensemble(model, theta0, design, replicate_id=0):
    """Simulate one path per design subject.

    Subject i draws its increments from stream (design.seed, i, replicate_id)
    and the random effects come from the reserved phi stream, so ensembles
    are reproducible and independent of subject evaluation order.
    """
    effects = draw_random_effects(theta0, design.n, phi_stream(design.seed, replicate_id))
    paths = []
    for i, (x0, T) in enumerate(design.subjects):
        rng = RngStream(seed=design.seed, stream_id=i, replicate_id=replicate_id)
        try:
            paths.append(euler_maruyama(model, effects[i].phi, x0, T, design.dt, rng))
        except SimulationDiverged as err:
            raise SimulationDiverged(err.step, subject_index=i) from None
    return paths


def simulate_replicates(model, phis, x0, T, dt, seed, subject_index, replicate_ids,
                        raise_errors=True):
    """Simulate many replicates of one subject as a (R, M+1) value matrix.

    Row r uses the substream (seed, subject_index, replicate_ids[r]) and the
    drift multiplier phis[r]; the arithmetic is identical to euler_maruyama
    row by row. Returns (times, values, first_bad).
    """
    times = time_grid(T, dt)
    z = path_normals(seed, subject_index, replicate_ids, len(times) - 1)
    return _euler_rows(
        model, phis, x0, T, dt, z,
        raise_errors=raise_errors, subject_index=subject_index,
    )
