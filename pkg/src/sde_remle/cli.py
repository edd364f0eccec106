"""Command-line front end.

Subcommands: simulate, fit, experiment {consistency,normality,noniid,
continuity}. Each takes --config PATH (flat key=value file), --seed N
(overrides the config key and the SDE_REMLE_SEED environment variable),
--out DIR, and --threads N. Threads change wall time only; output files
are byte-identical for any worker count. Exit status: 0 success, 1
validation error, 2 runtime error.
"""

import argparse
import os
import sys

from . import config as config_mod
from . import io as io_mod
from .asymptotics import (
    ConsistencyConfig,
    ContinuityConfig,
    DesignFamily,
    NormalityConfig,
    averaged_limits,
    run_consistency_experiment,
    run_moment_continuity_probe,
    run_normality_experiment,
)
from .errors import (
    ConfigError,
    EmptyEnsemble,
    EmptyExperiment,
    ExperimentFailed,
    IngestError,
    NotFound,
    SdeRemleError,
)
from .estimator import fit_mle
from .models import Design, ParamSpace, Theta, builtin_model
from .simulate import simulate_ensemble
from .stats import stats_list

_VALIDATION_ERRORS = (
    ConfigError, IngestError, NotFound, ValueError,
    EmptyExperiment, EmptyEnsemble,
)


def _parser():
    p = argparse.ArgumentParser(
        prog="sde-remle",
        description="Simulation and exact-likelihood estimation for "
                    "mixed-effects SDEs with multiplicative random drift.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", required=True, metavar="PATH")
        sp.add_argument("--seed", type=int, default=None, metavar="N")
        sp.add_argument("--out", default=None, metavar="DIR")
        sp.add_argument("--threads", type=int, default=1, metavar="N")

    common(sub.add_parser("simulate", help="simulate an ensemble, dump paths and stats"))
    common(sub.add_parser("fit", help="fit the MLE to a dumped path file"))
    pe = sub.add_parser("experiment", help="run a Monte Carlo experiment")
    pe.add_argument(
        "kind", choices=("consistency", "normality", "noniid", "continuity")
    )
    common(pe)
    return p


def _theta0(cfg):
    return Theta(mu=cfg["mu0"], omega2=cfg["omega2_0"])


def _space(cfg):
    return ParamSpace(
        mu_lo=cfg["mu_lo"], mu_hi=cfg["mu_hi"],
        omega2_lo=cfg["omega2_lo"], omega2_hi=cfg["omega2_hi"],
    )


def _family(cfg):
    kind = cfg["design"]
    if kind == "iid":
        return DesignFamily(kind="iid", x0=cfg["x0"], T=cfg["T"])
    return DesignFamily(
        kind=kind, x_inf=cfg["x_inf"], x_amp=cfg["x_amp"],
        T_inf=cfg["T_inf"], T_amp=cfg["T_amp"],
    )


def _check_schedule(vals, name):
    if any(v < 1 for v in vals) or list(vals) != sorted(set(vals)):
        raise ValueError(f"{name} must be strictly increasing positive integers")


def _positive(cfg, *keys):
    for key in keys:
        if key in cfg and not cfg[key] > 0:
            raise ValueError(f"'{key}' must be > 0")


def cmd_simulate(cfg, seed, out_dir, threads):
    model = builtin_model(cfg["model"])
    theta0 = _theta0(cfg)
    _positive(cfg, "n", "dt")
    design = Design(
        subjects=_family(cfg).subjects(cfg["n"]), dt=cfg["dt"], seed=seed
    )
    paths = simulate_ensemble(model, theta0, design)
    all_stats = stats_list(paths, model)
    paths_file = os.path.join(out_dir, io_mod.PATHS_FILE)
    stats_file = os.path.join(out_dir, io_mod.STATS_FILE)
    io_mod.write_paths_csv(paths, paths_file)
    io_mod.write_stats_csv(all_stats, stats_file)
    print(
        f"simulate: model={model.name} n={design.n} dt={cfg['dt']!r} "
        f"seed={seed} -> {paths_file}, {stats_file}"
    )
    return 0


def cmd_fit(cfg, seed, out_dir, threads):
    model = builtin_model(cfg["model"])
    space = _space(cfg)
    paths = io_mod.read_paths_csv(cfg["data"])
    all_stats = stats_list(paths, model)
    fit = fit_mle(all_stats, space)
    stats_file = os.path.join(out_dir, io_mod.STATS_FILE)
    fit_file = os.path.join(out_dir, io_mod.FIT_FILE)
    io_mod.write_stats_csv(all_stats, stats_file)
    io_mod.write_fit_csv(fit, len(all_stats), fit_file)
    flags = "|".join(sorted(fit.boundary)) if fit.boundary else "-"
    print(
        f"fit: n={len(all_stats)} mu_hat={fit.theta_hat.mu!r} "
        f"omega2_hat={fit.theta_hat.omega2!r} loglik={fit.loglik!r} "
        f"boundary={flags} -> {fit_file}"
    )
    return 0


def _write_report(report, out_dir):
    rep_file = os.path.join(out_dir, io_mod.REPLICATES_FILE)
    sum_file = os.path.join(out_dir, io_mod.SUMMARY_FILE)
    io_mod.write_replicates_csv(report.rows, rep_file)
    io_mod.write_summary_csv(report.summaries, sum_file)
    return rep_file, sum_file


def _raise_if_failed(report, kind):
    if report.failed:
        raise ExperimentFailed(
            f"{kind}: more than 1% of replicates failed "
            f"({len(report.failures)} failures)"
        )


def cmd_experiment(kind, cfg, seed, out_dir, threads):
    model = builtin_model(cfg["model"])
    theta0 = _theta0(cfg)
    _positive(cfg, "dt", "replicates", "info_replicates", "limit_replicates", "n")

    if kind == "consistency":
        _check_schedule(cfg["n_schedule"], "n_schedule")
        report = run_consistency_experiment(ConsistencyConfig(
            model=model, theta0=theta0, space=_space(cfg), design=_family(cfg),
            n_schedule=tuple(cfg["n_schedule"]), replicates=cfg["replicates"],
            dt=cfg["dt"], seed=seed, threads=threads,
        ))
        rep_file, _ = _write_report(report, out_dir)
        last = report.summaries[-1]
        print(
            f"experiment consistency: n_schedule={list(cfg['n_schedule'])} "
            f"replicates={cfg['replicates']} med_err_final={last['med_err']!r} "
            f"-> {rep_file}"
        )
        _raise_if_failed(report, kind)
        return 0

    if kind == "normality":
        report = run_normality_experiment(NormalityConfig(
            model=model, theta0=theta0, space=_space(cfg), design=_family(cfg),
            n=cfg["n"], replicates=cfg["replicates"],
            info_replicates=cfg["info_replicates"],
            dt=cfg["dt"], seed=seed, threads=threads,
        ))
        rep_file, _ = _write_report(report, out_dir)
        s = report.summaries[0]
        print(
            f"experiment normality: n={s['n']} ks_mu={s['ks_mu']!r} "
            f"ks_omega2={s['ks_omega2']!r} cov_mu={s['cov_mu']!r} "
            f"cov_omega2={s['cov_omega2']!r} -> {rep_file}"
        )
        _raise_if_failed(report, kind)
        return 0

    if kind == "noniid":
        family = _family(cfg)
        if family.kind != "harmonic":
            raise ValueError("the noniid experiment needs design = harmonic")
        _check_schedule(cfg["n_schedule"], "n_schedule")
        theta_alt = Theta(mu=cfg["mu_alt"], omega2=cfg["omega2_alt"])
        schedule = tuple(cfg["n_schedule"])
        table = averaged_limits(
            model, family.subjects(schedule[-1]), theta0, theta_alt,
            cfg["dt"], cfg["replicates"], family.limit_point(),
            cfg["limit_replicates"], seed, schedule=schedule, threads=threads,
        )
        io_mod.write_limits_csv(
            table,
            os.path.join(out_dir, io_mod.LIMITS_FILE),
            os.path.join(out_dir, io_mod.LIMIT_FILE),
        )
        report = run_normality_experiment(NormalityConfig(
            model=model, theta0=theta0, space=_space(cfg), design=family,
            n=cfg["n"], replicates=cfg["replicates"],
            info_replicates=cfg["info_replicates"],
            dt=cfg["dt"], seed=seed, threads=threads,
        ))
        rep_file, _ = _write_report(report, out_dir)
        final = table.rows[-1]
        print(
            f"experiment noniid: n={final['n']} kl_gap={final['kl_gap']!r} "
            f"i00_gap={final['i00_gap']!r} ks_mu={report.summaries[0]['ks_mu']!r} "
            f"-> {rep_file}"
        )
        _raise_if_failed(report, kind)
        return 0

    _check_schedule(cfg["m_schedule"], "m_schedule")
    table = run_moment_continuity_probe(ContinuityConfig(
        model=model, theta0=theta0, psi=cfg["psi"], xi=cfg["xi"],
        x_limit=cfg["x_inf"], T_limit=cfg["T_inf"],
        x_amp=cfg["x_amp"], T_amp=cfg["T_amp"],
        m_schedule=tuple(cfg["m_schedule"]), replicates=cfg["replicates"],
        limit_replicates=cfg["limit_replicates"], dt=cfg["dt"],
        seed=seed, threads=threads,
    ))
    out_file = os.path.join(out_dir, io_mod.CONTINUITY_FILE)
    io_mod.write_continuity_csv(table, out_file)
    final_gap = table.rows[-1]["gap"]
    print(
        f"experiment continuity: m_schedule={list(cfg['m_schedule'])} "
        f"final_gap={final_gap!r} -> {out_file}"
    )
    return 0


def main(argv=None):
    args = _parser().parse_args(argv)
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return 1
    try:
        with open(args.config, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as err:
        print(f"error: cannot read config: {err}", file=sys.stderr)
        return 1
    command = args.command if args.command != "experiment" else args.kind
    try:
        cfg = config_mod.parse_config(text)
        config_mod.check_required(command, cfg, eof_line=len(text.split("\n")))
        seed = config_mod.resolve_seed(cfg, args.seed)
        if seed < 0:
            raise ValueError("seed must be >= 0")
        out_dir = args.out or cfg.get("output_dir") or "."
        io_mod.ensure_dir(out_dir)
        if args.command == "simulate":
            return cmd_simulate(cfg, seed, out_dir, args.threads)
        if args.command == "fit":
            return cmd_fit(cfg, seed, out_dir, args.threads)
        return cmd_experiment(args.kind, cfg, seed, out_dir, args.threads)
    except _VALIDATION_ERRORS as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except SdeRemleError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
