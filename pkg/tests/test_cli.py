import subprocess
import sys

import pytest

from sde_remle import Design, ParamSpace, Theta, builtin_model, simulate_ensemble
from sde_remle.cli import main
from sde_remle.estimator import fit_mle
from sde_remle.io import read_paths_csv
from sde_remle.stats import stats_list

SIM_CFG = """\
model = unit
mu0 = 1.0
omega2_0 = 0.5
design = iid
x0 = 0.0
T = 1.0
n = 12
dt = 0.05
seed = 4
"""

SPACE_CFG = """\
mu_lo = -3.0
mu_hi = 3.0
omega2_lo = 0.0
omega2_hi = 4.0
"""


def _cfg(tmp_path, text, name="run.cfg"):
    f = tmp_path / name
    f.write_text(text)
    return str(f)


def test_simulate_writes_paths_and_stats(tmp_path, capsys):
    cfg = _cfg(tmp_path, SIM_CFG)
    rc = main(["simulate", "--config", cfg, "--out", str(tmp_path)])
    assert rc == 0
    assert (tmp_path / "paths.csv").exists()
    assert (tmp_path / "stats.csv").exists()
    out = capsys.readouterr().out
    assert "model=unit" in out and "seed=4" in out


def test_simulate_matches_library_call(tmp_path):
    cfg = _cfg(tmp_path, SIM_CFG)
    main(["simulate", "--config", cfg, "--out", str(tmp_path)])
    back = read_paths_csv(tmp_path / "paths.csv")
    design = Design(subjects=((0.0, 1.0),) * 12, dt=0.05, seed=4)
    direct = simulate_ensemble(builtin_model("unit"), Theta(1.0, 0.5), design)
    assert len(back) == len(direct)
    for p, q in zip(back, direct):
        assert p.values.tolist() == q.values.tolist()


def test_fit_round_trips_through_csv(tmp_path, capsys):
    sim_dir = tmp_path / "sim"
    cfg = _cfg(tmp_path, SIM_CFG)
    main(["simulate", "--config", cfg, "--out", str(sim_dir)])

    fit_cfg = _cfg(
        tmp_path,
        f"model = unit\n{SPACE_CFG}data = {sim_dir / 'paths.csv'}\n",
        name="fit.cfg",
    )
    fit_dir = tmp_path / "fit"
    rc = main(["fit", "--config", fit_cfg, "--out", str(fit_dir)])
    assert rc == 0

    # the CSV carries full-precision reprs, so the round trip is exact
    model = builtin_model("unit")
    space = ParamSpace(mu_lo=-3.0, mu_hi=3.0, omega2_lo=0.0, omega2_hi=4.0)
    direct = fit_mle(stats_list(read_paths_csv(sim_dir / "paths.csv"), model), space)
    header, row = (tmp_path / "fit" / "fit.csv").read_text().splitlines()
    cells = dict(zip(header.split(","), row.split(",")))
    assert float(cells["mu_hat"]) == direct.theta_hat.mu
    assert float(cells["omega2_hat"]) == direct.theta_hat.omega2
    assert float(cells["loglik"]) == direct.loglik
    assert f"mu_hat={direct.theta_hat.mu!r}" in capsys.readouterr().out


def test_missing_config_file_is_validation_error(tmp_path, capsys):
    rc = main(["simulate", "--config", str(tmp_path / "absent.cfg")])
    assert rc == 1
    assert capsys.readouterr().err.startswith("error: cannot read config")


def test_unknown_key_reports_line(tmp_path, capsys):
    cfg = _cfg(tmp_path, SIM_CFG + "burnin = 7\n")
    rc = main(["simulate", "--config", cfg, "--out", str(tmp_path)])
    assert rc == 1
    err = capsys.readouterr().err
    assert "unknown key 'burnin'" in err and "line 10" in err


def test_missing_required_key(tmp_path, capsys):
    cfg = _cfg(tmp_path, "model = unit\nmu0 = 1.0\n")
    rc = main(["simulate", "--config", cfg, "--out", str(tmp_path)])
    assert rc == 1
    assert "missing required key" in capsys.readouterr().err


def test_unknown_model_is_validation_error(tmp_path, capsys):
    cfg = _cfg(tmp_path, SIM_CFG.replace("model = unit", "model = cir"))
    rc = main(["simulate", "--config", cfg, "--out", str(tmp_path)])
    assert rc == 1
    assert "cir" in capsys.readouterr().err


def test_bad_ingest_reports_subject_and_line(tmp_path, capsys):
    data = tmp_path / "bad.csv"
    data.write_text(
        "subject,k,t,x\n0,0,0.0,1.0\n0,1,0.5,1.1\n0,2,0.25,1.2\n"
    )
    cfg = _cfg(tmp_path, f"model = unit\n{SPACE_CFG}data = {data}\n")
    rc = main(["fit", "--config", cfg, "--out", str(tmp_path)])
    assert rc == 1
    err = capsys.readouterr().err
    assert "subject 0" in err and "line 4" in err


def test_threads_must_be_positive(capsys):
    rc = main(["simulate", "--config", "whatever.cfg", "--threads", "0"])
    assert rc == 1
    assert "--threads" in capsys.readouterr().err


def test_negative_seed_rejected(tmp_path, capsys):
    cfg = _cfg(tmp_path, SIM_CFG)
    rc = main(["simulate", "--config", cfg, "--out", str(tmp_path), "--seed", "-1"])
    assert rc == 1
    assert "seed" in capsys.readouterr().err


def test_seed_flag_overrides_config(tmp_path, capsys):
    cfg = _cfg(tmp_path, SIM_CFG)
    main(["simulate", "--config", cfg, "--out", str(tmp_path), "--seed", "9"])
    assert "seed=9" in capsys.readouterr().out


def test_out_defaults_to_config_output_dir(tmp_path, capsys):
    target = tmp_path / "from_cfg"
    cfg = _cfg(tmp_path, SIM_CFG + f"output_dir = {target}\n")
    rc = main(["simulate", "--config", cfg])
    assert rc == 0
    assert (target / "paths.csv").exists()
    capsys.readouterr()


CONS_CFG = """\
model = unit
mu0 = 1.0
omega2_0 = 0.5
""" + SPACE_CFG + """\
design = iid
x0 = 0.0
T = 1.0
n_schedule = 20,40
replicates = 12
dt = 0.1
seed = 3
"""


def test_consistency_experiment_outputs(tmp_path, capsys):
    cfg = _cfg(tmp_path, CONS_CFG)
    rc = main(["experiment", "consistency", "--config", cfg, "--out", str(tmp_path)])
    assert rc == 0
    assert (tmp_path / "replicates.csv").exists()
    assert (tmp_path / "summary.csv").exists()
    reps = (tmp_path / "replicates.csv").read_text().splitlines()
    assert reps[0] == "rep,n,mu_hat,omega2_hat,z_mu,z_omega2,boundary"
    assert len(reps) == 1 + 12 * 2
    capsys.readouterr()


def test_threads_do_not_change_output_bytes(tmp_path, capsys):
    cfg = _cfg(tmp_path, CONS_CFG)
    d1, d8 = tmp_path / "t1", tmp_path / "t8"
    main(["experiment", "consistency", "--config", cfg, "--out", str(d1),
          "--threads", "1"])
    main(["experiment", "consistency", "--config", cfg, "--out", str(d8),
          "--threads", "8"])
    for name in ("replicates.csv", "summary.csv"):
        assert (d1 / name).read_bytes() == (d8 / name).read_bytes()
    capsys.readouterr()


def test_unsorted_schedule_rejected(tmp_path, capsys):
    cfg = _cfg(tmp_path, CONS_CFG.replace("n_schedule = 20,40", "n_schedule = 40,20"))
    rc = main(["experiment", "consistency", "--config", cfg, "--out", str(tmp_path)])
    assert rc == 1
    assert "n_schedule" in capsys.readouterr().err


def test_noniid_requires_harmonic_design(tmp_path, capsys):
    cfg = _cfg(tmp_path, CONS_CFG + "mu_alt = 1.5\nomega2_alt = 0.25\n"
               "n = 16\ninfo_replicates = 100\nlimit_replicates = 100\n")
    rc = main(["experiment", "noniid", "--config", cfg, "--out", str(tmp_path)])
    assert rc == 1
    assert "harmonic" in capsys.readouterr().err


def test_experiment_failure_is_runtime_error(tmp_path, capsys):
    # growth 1 + phi*dt = 1e49 per step overflows float64 by step 8
    cfg = _cfg(tmp_path, CONS_CFG.replace("model = unit", "model = linear-drift")
               .replace("mu0 = 1.0", "mu0 = 1.0e50")
               .replace("mu_hi = 3.0", "mu_hi = 1.0e51"))
    rc = main(["experiment", "consistency", "--config", cfg, "--out", str(tmp_path)])
    assert rc == 2
    err = capsys.readouterr().err
    assert err.startswith("error:") and "fail" in err
    # partial outputs still land on disk for post-mortems
    assert (tmp_path / "replicates.csv").exists()


def test_console_script_runs():
    proc = subprocess.run(
        [sys.executable, "-m", "sde_remle.cli", "--help"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0
    assert "simulate" in proc.stdout and "experiment" in proc.stdout
