"""Monte Carlo laboratory for the estimator's limit theory.

Estimates Fisher information and Kullback-Leibler divergence at single
design points, their averaged limits along convergent design sequences,
and runs the consistency / normality / moment-continuity experiments.
Replicates are independent work units; every reduction is performed in
replicate order with exactly-rounded sums, so reports are byte-identical
across runs and across worker counts.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict
from typing import Optional

import numpy as np
from scipy import stats as sp_stats

from .errors import EmptyExperiment, ExperimentFailed
from .estimator import FitOptions, fit_mle
from .likelihood import hess_terms, ratio_terms, score_terms
from .models import ParamSpace, Theta
from .rng import PHI_STREAM_ID, derive_seed, float_label, generator
from .simulate import simulate_replicates
from .stats import suff_stats_rows

# seed lanes for nested Monte Carlo passes; keeps information / divergence /
# probe estimation streams disjoint from the main experiment's path streams
_LANE_INFO = 1
_LANE_KL = 2
_LANE_LIMIT = 3
_LANE_PROBE = 4

_Z975 = 1.959963984540054


def _det_map(fn, items, threads):
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


def _mean_exact(values):
    # fsum keeps the mean independent of summation order; division by a
    # power-of-two count is exact, which the doubling schedules rely on
    return math.fsum(values) / len(values)


@dataclass(frozen=True)
class InfoEstimate:
    """Monte Carlo Fisher information at one design point.

    matrix is the sample covariance of per-subject scores under theta;
    neg_mean_hess is the matched -mean(Hessian) estimate and identity_se
    the jackknife standard error of their entrywise difference, used for
    information-identity checks.
    """

    matrix: np.ndarray
    mc_se: np.ndarray
    replicates: int
    design_point: tuple
    neg_mean_hess: np.ndarray
    identity_se: np.ndarray
    failures: int = 0


@dataclass(frozen=True)
class KlEstimate:
    """Monte Carlo Kullback-Leibler divergence at one design point."""

    value: float
    mc_se: float
    theta0: Theta
    theta: Theta
    design_point: tuple
    replicates: int
    failures: int = 0


@dataclass(frozen=True)
class ConvergenceTable:
    """Rows of running averages plus the estimated limit values."""

    rows: tuple
    limit: dict


@dataclass(frozen=True)
class ExperimentReport:
    """Everything one experiment produced.

    rows: per-replicate records (dicts with rep, n, mu_hat, omega2_hat,
    z_mu, z_omega2, boundary); summaries: one dict per n level; failures:
    (n, rep) pairs whose replicate was dropped; extras: experiment-specific
    diagnostics that do not go into the CSV schemas.
    """

    kind: str
    seed: int
    config: dict
    rows: tuple
    summaries: tuple
    failures: tuple
    extras: dict = field(default_factory=dict)

    @property
    def failed(self):
        return bool(self.extras.get("failed", False))


@dataclass(frozen=True)
class DesignFamily:
    """Subject layout: iid (every subject at (x0, T)) or harmonic
    (subject i at (x_inf + x_amp/i, T_inf + T_amp/i), i starting at 1)."""

    kind: str
    x0: float = 0.0
    T: float = 1.0
    x_inf: float = 0.0
    x_amp: float = 0.0
    T_inf: float = 1.0
    T_amp: float = 0.0

    def __post_init__(self):
        if self.kind not in ("iid", "harmonic"):
            raise ValueError("design kind must be 'iid' or 'harmonic'")
        if self.kind == "iid" and not self.T > 0:
            raise ValueError("iid design needs T > 0")
        if self.kind == "harmonic" and not (
            self.T_inf > 0 and self.T_inf + self.T_amp > 0
        ):
            raise ValueError("harmonic design needs positive horizons")

    def subjects(self, n):
        if self.kind == "iid":
            return tuple((self.x0, self.T) for _ in range(n))
        return tuple(
            (self.x_inf + self.x_amp / i, self.T_inf + self.T_amp / i)
            for i in range(1, n + 1)
        )

    def limit_point(self):
        if self.kind == "iid":
            return (self.x0, self.T)
        return (self.x_inf, self.T_inf)


@dataclass(frozen=True)
class ConsistencyConfig:
    model: object
    theta0: Theta
    space: ParamSpace
    design: DesignFamily
    n_schedule: tuple
    replicates: int
    dt: float
    seed: int
    threads: int = 1


@dataclass(frozen=True)
class NormalityConfig:
    model: object
    theta0: Theta
    space: ParamSpace
    design: DesignFamily
    n: int
    replicates: int
    info_replicates: int
    dt: float
    seed: int
    threads: int = 1


@dataclass(frozen=True)
class ContinuityConfig:
    model: object
    theta0: Theta
    psi: float
    xi: float
    x_limit: float
    T_limit: float
    x_amp: float
    T_amp: float
    m_schedule: tuple
    replicates: int
    limit_replicates: int
    dt: float
    seed: int
    threads: int = 1


def _draw_phis(theta0, count, seed, replicate_id=0):
    g = generator(seed, PHI_STREAM_ID, replicate_id)
    return theta0.mu + math.sqrt(theta0.omega2) * g.standard_normal(count)


def _point_uv(model, theta0, x0, T, dt, R, seed):
    """(U, V) for R independent subjects at one design point.

    Row r draws its path from stream (seed, 0, r) and the drift effects
    come from one reserved-stream draw, so the result is a pure function
    of the arguments.
    """
    phis = _draw_phis(theta0, R, seed)
    reps = np.arange(R)
    times, values, _ = simulate_replicates(
        model, phis, x0, T, dt, seed, 0, reps, raise_errors=False
    )
    u, v = suff_stats_rows(times, values, model)
    ok = np.isfinite(u) & np.isfinite(v)
    return u[ok], v[ok], int(R - ok.sum())


def fisher_info_mc(model, theta, x0, T, dt, R, seed):
    """Sample covariance of per-subject scores at one design point.

    Simulates R subjects under theta, evaluates the analytic score at
    theta, and returns the covariance estimate with jackknife standard
    errors, together with the matched -mean(Hessian) estimate for
    information-identity checks.
    """
    if R < 100:
        raise ValueError("information estimation needs R >= 100")
    u, v, failures = _point_uv(model, theta, x0, T, dt, R, seed)
    r = len(u)
    s_mu, s_w = score_terms(u, v, theta.mu, theta.omega2)
    scores = np.stack([s_mu, s_w], axis=1)
    h_mm, h_mw, h_ww = hess_terms(u, v, theta.mu, theta.omega2)
    hessians = np.empty((r, 2, 2))
    hessians[:, 0, 0] = h_mm
    hessians[:, 0, 1] = h_mw
    hessians[:, 1, 0] = h_mw
    hessians[:, 1, 1] = h_ww

    s1 = scores.sum(axis=0)
    outer = scores[:, :, None] * scores[:, None, :]
    s2 = outer.sum(axis=0)
    mean = s1 / r
    cov = (s2 - r * np.outer(mean, mean)) / (r - 1)

    hsum = hessians.sum(axis=0)
    neg_mean_hess = -hsum / r

    # leave-one-out replicas of both estimates, for jackknife errors of the
    # covariance entries and of the identity gap (cov + mean hess)
    loo_mean = (s1[None, :] - scores) / (r - 1)
    loo_outer = loo_mean[:, :, None] * loo_mean[:, None, :]
    loo_cov = (s2[None, :, :] - outer - (r - 1) * loo_outer) / (r - 2)
    loo_negh = -(hsum[None, :, :] - hessians) / (r - 1)

    def jack_se(replicas):
        center = replicas.mean(axis=0)
        dev = replicas - center[None, :, :]
        return np.sqrt((r - 1) / r * (dev * dev).sum(axis=0))

    return InfoEstimate(
        matrix=cov,
        mc_se=jack_se(loo_cov),
        replicates=r,
        design_point=(float(x0), float(T)),
        neg_mean_hess=neg_mean_hess,
        identity_se=jack_se(loo_cov - loo_negh),
        failures=failures,
    )


def kl_mc(model, theta0, theta, x0, T, dt, R, seed):
    """Mean log density ratio under theta0 at one design point."""
    if R < 100:
        raise ValueError("divergence estimation needs R >= 100")
    u, v, failures = _point_uv(model, theta0, x0, T, dt, R, seed)
    vals = ratio_terms(u, v, theta0, theta)
    r = len(vals)
    value = _mean_exact(vals.tolist())
    sd = float(np.std(vals, ddof=1)) if r > 1 else 0.0
    return KlEstimate(
        value=value,
        mc_se=sd / math.sqrt(r),
        theta0=theta0,
        theta=theta,
        design_point=(float(x0), float(T)),
        replicates=r,
        failures=failures,
    )


def sqrt_2x2_spd(m):
    """Symmetric square root of a 2x2 symmetric positive-definite matrix."""
    a, b, c = m[0, 0], m[0, 1], m[1, 1]
    det = a * c - b * b
    if det <= 0 or a + c <= 0:
        raise ValueError("matrix is not positive definite")
    s = math.sqrt(det)
    t = math.sqrt(a + c + 2.0 * s)
    return (m + s * np.eye(2)) / t


def _doubling_schedule(n):
    sched = []
    k = 1
    while k <= n:
        sched.append(k)
        k *= 2
    if sched[-1] != n:
        sched.append(n)
    return sched


def averaged_limits(model, designs, theta0, theta, dt, replicates,
                    limit_point, limit_replicates, seed, schedule=None,
                    threads=1):
    """Running design averages of divergence and information vs their limit.

    For each design point (x_k, T_k) the divergence K_k(theta0, theta) and
    information I_k(theta0) are estimated by Monte Carlo; the table reports
    n^-1 * sum_{k<=n} along a doubling schedule together with the estimates
    at limit_point. Point seeds are derived from the point's coordinates,
    so identical design points reuse identical streams and a constant
    design reproduces the single-point values exactly.
    """
    designs = [(float(x), float(T)) for x, T in designs]
    if schedule is None:
        schedule = _doubling_schedule(len(designs))

    def one_point(pt):
        x, T = pt
        kl = kl_mc(model, theta0, theta, x, T, dt, replicates,
                   derive_seed(seed, _LANE_KL, float_label(x), float_label(T)))
        info = fisher_info_mc(model, theta0, x, T, dt, replicates,
                              derive_seed(seed, _LANE_INFO, float_label(x), float_label(T)))
        return kl, info

    points = _det_map(one_point, designs, threads)

    xl, tl = limit_point
    kl_lim = kl_mc(model, theta0, theta, xl, tl, dt, limit_replicates,
                   derive_seed(seed, _LANE_KL, float_label(xl), float_label(tl)))
    info_lim = fisher_info_mc(model, theta0, xl, tl, dt, limit_replicates,
                              derive_seed(seed, _LANE_INFO, float_label(xl), float_label(tl)))

    kl_vals = [kl.value for kl, _ in points]
    kl_ses = [kl.mc_se for kl, _ in points]
    info_vals = {key: [float(info.matrix[i, j]) for _, info in points]
                 for key, (i, j) in (("i00", (0, 0)), ("i01", (0, 1)), ("i11", (1, 1)))}
    info_ses = {key: [float(info.mc_se[i, j]) for _, info in points]
                for key, (i, j) in (("i00", (0, 0)), ("i01", (0, 1)), ("i11", (1, 1)))}
    lim = {
        "kl": kl_lim.value,
        "kl_se": kl_lim.mc_se,
        "i00": float(info_lim.matrix[0, 0]),
        "i00_se": float(info_lim.mc_se[0, 0]),
        "i01": float(info_lim.matrix[0, 1]),
        "i01_se": float(info_lim.mc_se[0, 1]),
        "i11": float(info_lim.matrix[1, 1]),
        "i11_se": float(info_lim.mc_se[1, 1]),
    }

    def avg_and_se(vals, ses, n):
        avg = _mean_exact(vals[:n])
        se = math.sqrt(math.fsum(s * s for s in ses[:n])) / n
        return avg, se

    rows = []
    for n in schedule:
        row = {"n": n}
        avg, se = avg_and_se(kl_vals, kl_ses, n)
        row["kl"] = avg
        row["kl_se"] = se
        row["kl_gap"] = abs(avg - lim["kl"])
        row["kl_gap_se"] = math.sqrt(se * se + lim["kl_se"] ** 2)
        for key in ("i00", "i01", "i11"):
            avg, se = avg_and_se(info_vals[key], info_ses[key], n)
            row[key] = avg
            row[f"{key}_se"] = se
            row[f"{key}_gap"] = abs(avg - lim[key])
            row[f"{key}_gap_se"] = math.sqrt(se * se + lim[f"{key}_se"] ** 2)
        rows.append(row)
    return ConvergenceTable(rows=tuple(rows), limit=lim)


def _ensemble_uv(model, theta0, subjects, dt, seed, replicates, threads):
    """(U, V) matrices of shape (replicates, n) for a whole design.

    Subject i's replicate r uses path stream (seed, i, r); its drift
    effect is entry i of the reserved-stream draw for replicate r. This
    matches simulate_ensemble row for row.
    """
    n = len(subjects)
    reps = np.arange(replicates)
    phis = np.empty((replicates, n))
    for r in range(replicates):
        phis[r] = _draw_phis(theta0, n, seed, replicate_id=r)

    def one_subject(i):
        x0, T = subjects[i]
        times, values, _ = simulate_replicates(
            model, phis[:, i], x0, T, dt, seed, i, reps, raise_errors=False
        )
        return suff_stats_rows(times, values, model)

    cols = _det_map(one_subject, range(n), threads)
    u = np.stack([c[0] for c in cols], axis=1)
    v = np.stack([c[1] for c in cols], axis=1)
    return u, v


def _fit_rows(u, v, space, threads):
    """Fit each replicate row; returns (fits, ok_mask)."""
    ok = np.isfinite(u).all(axis=1) & np.isfinite(v).all(axis=1)
    opts = FitOptions()

    def one_fit(r):
        if not ok[r]:
            return None
        return fit_mle((u[r], v[r]), space, opts)

    return _det_map(one_fit, range(u.shape[0]), threads), ok


def _check_interior(theta0, space):
    if not space.interior_contains(theta0):
        raise ValueError(
            "the true theta must lie strictly inside the parameter rectangle"
        )


def _config_echo(config):
    echo = asdict(config)
    echo["model"] = config.model.name
    echo.pop("threads", None)
    return echo


def run_consistency_experiment(config):
    """Replicated fits along an n schedule; errors should shrink like 1/sqrt(n)."""
    _check_interior(config.theta0, config.space)
    if config.replicates == 0:
        raise EmptyExperiment("replicates = 0")
    theta0_vec = np.array([config.theta0.mu, config.theta0.omega2])
    rows = []
    summaries = []
    failures = []
    for n in config.n_schedule:
        u, v = _ensemble_uv(
            config.model, config.theta0, config.design.subjects(n),
            config.dt, config.seed, config.replicates, config.threads,
        )
        fits, ok = _fit_rows(u, v, config.space, config.threads)
        errs = []
        for r, fit in enumerate(fits):
            if fit is None:
                failures.append((n, r))
                continue
            diff = np.array([fit.theta_hat.mu, fit.theta_hat.omega2]) - theta0_vec
            errs.append(math.hypot(diff[0], diff[1]))
            rows.append({
                "rep": r,
                "n": n,
                "mu_hat": fit.theta_hat.mu,
                "omega2_hat": fit.theta_hat.omega2,
                "z_mu": None,
                "z_omega2": None,
                "boundary": fit.boundary,
            })
        errs = np.array(errs)
        summaries.append({
            "n": n,
            "med_err": float(np.quantile(errs, 0.5)) if errs.size else float("nan"),
            "p90_err": float(np.quantile(errs, 0.9)) if errs.size else float("nan"),
            "ks_mu": None,
            "ks_omega2": None,
            "cov_mu": None,
            "cov_omega2": None,
        })
    total = config.replicates * len(config.n_schedule)
    extras = {"failed": len(failures) > 0.01 * total}
    return ExperimentReport(
        kind="consistency",
        seed=config.seed,
        config=_config_echo(config),
        rows=tuple(rows),
        summaries=tuple(summaries),
        failures=tuple(failures),
        extras=extras,
    )


def _info_bar(config):
    """Plug-in information: single-point for iid designs, design-averaged
    (the largest-n running mean) for non-iid designs."""
    model, theta0, dt = config.model, config.theta0, config.dt
    pts = config.design.subjects(config.n)
    unique = sorted(set(pts))

    def one(pt):
        x, T = pt
        return pt, fisher_info_mc(
            model, theta0, x, T, dt, config.info_replicates,
            derive_seed(config.seed, _LANE_INFO, float_label(x), float_label(T)),
        )

    by_point = dict(_det_map(one, unique, config.threads))
    mats = np.stack([by_point[pt].matrix for pt in pts])
    ses = np.stack([by_point[pt].mc_se for pt in pts])
    bar = mats.mean(axis=0)
    bar_se = np.sqrt((ses * ses).sum(axis=0)) / len(pts)
    return bar, bar_se


def run_normality_experiment(config):
    """Standardized estimation errors vs the standard normal law.

    z_r = sqrt(n) * L (theta_hat_r - theta0) with L the symmetric square
    root of the plug-in information; reports per-coordinate KS p-values,
    Wald coverage, and a shifted-center negative control.
    """
    _check_interior(config.theta0, config.space)
    if config.replicates == 0:
        raise EmptyExperiment("replicates = 0")
    n = config.n
    info_bar, info_bar_se = _info_bar(config)
    L = sqrt_2x2_spd(info_bar)
    inv = np.linalg.inv(info_bar)

    u, v = _ensemble_uv(
        config.model, config.theta0, config.design.subjects(n),
        config.dt, config.seed, config.replicates, config.threads,
    )
    fits, ok = _fit_rows(u, v, config.space, config.threads)
    theta0_vec = np.array([config.theta0.mu, config.theta0.omega2])
    rows = []
    failures = []
    diffs = []
    covered = {"mu": 0, "omega2": 0}
    with_se = 0
    for r, fit in enumerate(fits):
        if fit is None:
            failures.append((n, r))
            continue
        hat = np.array([fit.theta_hat.mu, fit.theta_hat.omega2])
        diff = hat - theta0_vec
        z = math.sqrt(n) * (L @ diff)
        diffs.append(diff)
        if fit.wald_se is not None:
            with_se += 1
            if abs(diff[0]) <= _Z975 * fit.wald_se[0]:
                covered["mu"] += 1
            if abs(diff[1]) <= _Z975 * fit.wald_se[1]:
                covered["omega2"] += 1
        rows.append({
            "rep": r,
            "n": n,
            "mu_hat": fit.theta_hat.mu,
            "omega2_hat": fit.theta_hat.omega2,
            "z_mu": float(z[0]),
            "z_omega2": float(z[1]),
            "boundary": fit.boundary,
        })
    if not rows:
        raise ExperimentFailed("every replicate failed")
    diffs = np.array(diffs)
    z_mat = math.sqrt(n) * (diffs @ L)
    ks_mu = float(sp_stats.kstest(z_mat[:, 0], "norm").pvalue)
    ks_w2 = float(sp_stats.kstest(z_mat[:, 1], "norm").pvalue)

    # negative control: recenter mu by five standard errors of the mean
    # estimate; the standardized sample must now fail the normality test
    offset = 5.0 * math.sqrt(inv[0, 0] / n)
    z_off = math.sqrt(n) * ((diffs - np.array([offset, 0.0])) @ L)
    ks_off = float(sp_stats.kstest(z_off[:, 0], "norm").pvalue)

    errs = np.hypot(diffs[:, 0], diffs[:, 1])
    cov_mu = covered["mu"] / with_se if with_se else float("nan")
    cov_w2 = covered["omega2"] / with_se if with_se else float("nan")
    summary = {
        "n": n,
        "med_err": float(np.quantile(errs, 0.5)),
        "p90_err": float(np.quantile(errs, 0.9)),
        "ks_mu": ks_mu,
        "ks_omega2": ks_w2,
        "cov_mu": cov_mu,
        "cov_omega2": cov_w2,
    }
    extras = {
        "failed": len(failures) > 0.01 * config.replicates,
        "ks_mu_offset_center": ks_off,
        "info_bar": info_bar,
        "info_bar_se": info_bar_se,
        "wald_denominator": with_se,
    }
    return ExperimentReport(
        kind="normality",
        seed=config.seed,
        config=_config_echo(config),
        rows=tuple(rows),
        summaries=(summary,),
        failures=tuple(failures),
        extras=extras,
    )


def run_moment_continuity_probe(config):
    """MC means of h(U, V)^k along a design sequence vs its limit point.

    h(u, v) = exp(psi * u / (1 + xi * v)); est_m for k in {1, 2} at
    (x_limit + x_amp/m, T_limit + T_amp/m) is compared with the estimate
    at (x_limit, T_limit).
    """
    if config.replicates == 0:
        raise EmptyExperiment("replicates = 0")
    if not config.xi > 0:
        raise ValueError("xi must be > 0")

    def h_moments(x, T, R, seed):
        u, v, failures = _point_uv(
            config.model, config.theta0, x, T, config.dt, R, seed
        )
        with np.errstate(over="ignore"):
            h = np.exp(config.psi * u / (1.0 + config.xi * v))
        out = {}
        for k in (1, 2):
            hk = h ** k
            est = _mean_exact(hk.tolist())
            sd = float(np.std(hk, ddof=1)) if len(hk) > 1 else 0.0
            out[k] = (est, sd / math.sqrt(len(hk)))
        return out, failures

    lim_moments, _ = h_moments(
        config.x_limit, config.T_limit, config.limit_replicates,
        derive_seed(config.seed, _LANE_PROBE, 0),
    )

    def one_m(m):
        x = config.x_limit + config.x_amp / m
        T = config.T_limit + config.T_amp / m
        moments, failures = h_moments(
            x, T, config.replicates, derive_seed(config.seed, _LANE_PROBE, m)
        )
        return m, x, T, moments, failures

    results = _det_map(one_m, list(config.m_schedule), config.threads)
    rows = []
    for m, x, T, moments, _ in results:
        for k in (1, 2):
            est, se = moments[k]
            lim_est, lim_se = lim_moments[k]
            rows.append({
                "m": m,
                "x": x,
                "T": T,
                "k": k,
                "estimate": est,
                "se": se,
                "limit_estimate": lim_est,
                "limit_se": lim_se,
                "gap": abs(est - lim_est),
                "gap_se": math.sqrt(se * se + lim_se * lim_se),
            })
    limit = {
        "est_k1": lim_moments[1][0],
        "se_k1": lim_moments[1][1],
        "est_k2": lim_moments[2][0],
        "se_k2": lim_moments[2][1],
    }
    return ConvergenceTable(rows=tuple(rows), limit=limit)
