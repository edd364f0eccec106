import math

import numpy as np
import pytest

from sde_remle import (
    Design,
    SuffStats,
    Theta,
    builtin_model,
    compute_suff_stats,
    decompose,
    simulate_ensemble,
    stats_list,
)
from sde_remle.errors import DegenerateDiffusion, MissingPhi
from sde_remle.models import ModelSpec
from sde_remle.simulate import Path, path_normals, simulate_replicates, time_grid
from sde_remle.stats import SIGMA2_FLOOR, suff_stats_rows

UNIT = builtin_model("unit")
LINEAR = builtin_model("linear-drift")
BOUNDED = builtin_model("bounded-ratio")


def _path(times, values, phi=1.0, subject_index=0):
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    return Path(
        times=times,
        values=values,
        x0=float(values[0]),
        phi=phi,
        seed=0,
        subject_index=subject_index,
    )


def test_unit_model_identities_exact():
    # unit model has constant integrand, so U telescopes and V sums the grid;
    # summing rounded diffs can drift from the endpoints by an ulp, so U is
    # checked to 1e-14 relative and V, which is grid-only, bit-exactly
    for dt in (0.05, 1 / 3, 0.4):
        design = Design(subjects=((0.3, 4.0),), dt=dt, seed=5)
        p = simulate_ensemble(UNIT, Theta(mu=1.0, omega2=0.5), design)[0]
        s = compute_suff_stats(p, UNIT)
        assert math.isclose(s.u, p.values[-1] - p.x0, rel_tol=1e-14, abs_tol=0.0)
        assert s.v == 4.0


def test_unit_model_u_exact_on_dyadic_path():
    # every diff is a short dyadic rational, so the telescoped sum is exact
    p = _path([0.0, 0.25, 0.5, 1.0], [1.0, 1.5, 0.75, 2.0])
    s = compute_suff_stats(p, UNIT)
    assert s.u == 1.0
    assert s.v == 1.0


def test_constant_path():
    p = _path([0.0, 0.25, 0.5, 0.75, 1.0], [2.0] * 5, phi=0.0)
    s = compute_suff_stats(p, UNIT)
    assert s.u == 0.0
    assert s.v == 1.0


def test_v_and_u_additive_at_grid_point():
    """Splitting the grid at an interior point splits both sums exactly.

    The crafted values keep every term a short dyadic rational, so
    floating-point addition cannot reorder-round.
    """
    times = [0.0, 0.25, 0.5, 0.75, 1.0]
    values = [1.0, 2.0, 1.5, 3.0, 2.5]
    whole = compute_suff_stats(_path(times, values), LINEAR)
    left = compute_suff_stats(_path(times[:3], values[:3]), LINEAR)
    t_right = [t - 0.5 for t in times[2:]]
    right = compute_suff_stats(_path(t_right, values[2:]), LINEAR)
    assert whole.v == left.v + right.v
    assert whole.u == left.u + right.u


def test_stats_ignore_provenance_fields():
    times = time_grid(1.0, 0.1)
    values = np.cos(times) + 1.5
    a = _path(times, values, phi=0.3, subject_index=0)
    b = _path(times, values, phi=-2.0, subject_index=9)
    sa, sb = compute_suff_stats(a, BOUNDED), compute_suff_stats(b, BOUNDED)
    assert (sa.u, sa.v) == (sb.u, sb.v)
    assert sa.subject_index == 0 and sb.subject_index == 9


def test_stats_list_preserves_order():
    design = Design(subjects=((0.0, 1.0), (1.0, 2.0), (2.0, 0.5)), dt=0.05, seed=3)
    paths = simulate_ensemble(UNIT, Theta(mu=0.0, omega2=1.0), design)
    forward = stats_list(paths, UNIT)
    backward = stats_list(list(reversed(paths)), UNIT)
    assert [s.subject_index for s in forward] == [0, 1, 2]
    assert [(s.u, s.v) for s in backward] == [(s.u, s.v) for s in reversed(forward)]


def test_decompose_unit_model():
    design = Design(subjects=((0.5, 2.0),), dt=0.05, seed=11)
    p = simulate_ensemble(UNIT, Theta(mu=1.5, omega2=0.0), design)[0]
    s = compute_suff_stats(p, UNIT)
    d = decompose(p, UNIT, s)
    assert d.u1 == s.v
    assert s.u == d.phi * d.u1 + d.u2
    assert d.u2 == pytest.approx(p.values[-1] - p.x0 - p.phi * s.v, abs=1e-12)


def test_decompose_zero_phi():
    p = _path([0.0, 0.5, 1.0], [1.0, 1.2, 0.9], phi=0.0)
    s = compute_suff_stats(p, LINEAR)
    d = decompose(p, LINEAR, s)
    assert d.u2 == s.u


def test_decompose_requires_phi():
    p = _path([0.0, 0.5, 1.0], [1.0, 1.2, 0.9], phi=None)
    s = compute_suff_stats(p, LINEAR)
    with pytest.raises(MissingPhi):
        decompose(p, LINEAR, s)


def test_ito_isometry_unit_model():
    """u2 is the Brownian increment sum, so over replicates its mean is 0
    and its variance is E[V] = T (4 sigma MC window, 10^4 paths)."""
    R, T = 10_000, 1.0
    design = Design(subjects=((0.0, T),) * 1, dt=0.05, seed=41)
    u2s = []
    for rep in range(R):
        p = simulate_ensemble(UNIT, Theta(mu=0.8, omega2=0.2), design, replicate_id=rep)[0]
        s = compute_suff_stats(p, UNIT)
        u2s.append(decompose(p, UNIT, s).u2)
    u2s = np.asarray(u2s)
    assert abs(u2s.mean()) < 4.0 * math.sqrt(T / R)
    assert abs(u2s.var() - T) < 4.0 * T * math.sqrt(2.0 / R)


@pytest.mark.parametrize("model", [UNIT, LINEAR, BOUNDED], ids=lambda m: m.name)
def test_even_moments_finite_and_stable(model):
    # scaled statistic U/(1+omega2*V) keeps even moments bounded as the
    # ensemble grows
    theta0 = Theta(mu=0.5, omega2=0.25)
    estimates = {}
    for n in (1500, 3000):
        design = Design(subjects=((1.0, 1.0),) * n, dt=0.02, seed=23)
        stats = stats_list(simulate_ensemble(model, theta0, design), model)
        g = np.array([s.u for s in stats]) / (
            1.0 + theta0.omega2 * np.array([s.v for s in stats])
        )
        estimates[n] = [float(np.mean(g**2)), float(np.mean(g**4))]
    for k in (0, 1):
        lo, hi = estimates[1500][k], estimates[3000][k]
        assert np.isfinite(lo) and np.isfinite(hi)
        assert abs(hi - lo) < 0.5 * max(hi, lo)


def _euler_path(model, phi, x0, dt, dW):
    X = np.empty((dW.shape[0], dW.shape[1] + 1))
    X[:, 0] = x0
    for k in range(dW.shape[1]):
        X[:, k + 1] = X[:, k] + phi * model.b(X[:, k]) * dt + model.sigma(X[:, k]) * dW[:, k]
    return X


def test_v_refinement_error_window():
    """V on a dt grid vs the dt/16 refinement of the same Brownian path:
    relative error has mean <= 2*dt and 99th percentile <= 5*dt."""
    M, R, T, phi, x0 = 50, 2000, 1.0, 1.0, 1.0
    dt, dtf = T / M, T / (16 * M)
    z = path_normals(11, 0, range(R), 16 * M)
    dWf = z * math.sqrt(dtf)
    dWc = dWf.reshape(R, M, 16).sum(axis=2)
    _, vc = suff_stats_rows(np.arange(M + 1) * dt, _euler_path(LINEAR, phi, x0, dt, dWc), LINEAR)
    _, vf = suff_stats_rows(
        np.arange(16 * M + 1) * dtf, _euler_path(LINEAR, phi, x0, dtf, dWf), LINEAR
    )
    rel = np.abs(vc - vf) / vf
    assert rel.mean() <= 2.0 * dt
    assert np.quantile(rel, 0.99) <= 5.0 * dt


def test_sigma_floor_is_an_error():
    model = ModelSpec(name="thin", b=lambda x: np.ones_like(x), sigma=lambda x: x, tau=1.0)
    p = _path([0.0, 1.0], [1e-7, 1.0])
    with pytest.raises(DegenerateDiffusion) as exc:
        compute_suff_stats(p, model)
    assert f"{SIGMA2_FLOOR:g}" in str(exc.value)


def test_suffstats_validation():
    with pytest.raises(ValueError):
        SuffStats(u=float("nan"), v=1.0, subject_index=0)
    with pytest.raises(ValueError):
        SuffStats(u=0.0, v=-1e-9, subject_index=0)
    with pytest.raises(ValueError):
        SuffStats(u=0.0, v=float("inf"), subject_index=0)


def test_divergent_rows_yield_non_finite_stats():
    times = np.array([0.0, 0.5, 1.0])
    values = np.array([[1.0, 2.0, 3.0], [1.0, np.inf, 2.0]])
    u, v = suff_stats_rows(times, values, LINEAR)
    clean_u, clean_v = suff_stats_rows(times, values[:1], LINEAR)
    assert u[0] == clean_u[0] and v[0] == clean_v[0]
    assert not np.isfinite(u[1])
    assert not np.isfinite(v[1])


def test_replicate_rows_match_single_paths():
    # the batched simulator and per-path stats agree row by row
    phis = np.array([0.2, 0.7, 1.1])
    times, values, _ = simulate_replicates(LINEAR, phis, 1.0, 1.0, 0.1, 9, 0, np.arange(3))
    u_rows, v_rows = suff_stats_rows(times, values, LINEAR)
    for r in range(3):
        p = _path(times, values[r], phi=phis[r])
        s = compute_suff_stats(p, LINEAR)
        assert (s.u, s.v) == (u_rows[r], v_rows[r])
