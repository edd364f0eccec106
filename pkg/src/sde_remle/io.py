"""CSV persistence and ingestion.

Every numeric cell is written with repr(), whose shortest-round-trip
decimals reparse to the identical double, so a dumped file is a faithful
serialization of the in-memory result and reruns can be compared byte for
byte. Absent values are empty cells. Boundary flags join with '|' in a
fixed order, '-' when none.
"""

import math
import os

import numpy as np

from .errors import IngestError
from .simulate import Path

PATHS_FILE = "paths.csv"
STATS_FILE = "stats.csv"
FIT_FILE = "fit.csv"
REPLICATES_FILE = "replicates.csv"
SUMMARY_FILE = "summary.csv"
LIMITS_FILE = "limits.csv"
LIMIT_FILE = "limit.csv"
CONTINUITY_FILE = "continuity.csv"


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    x = float(value)
    if math.isnan(x):
        return "nan"
    return repr(x)


def _boundary_cell(flags):
    return "|".join(sorted(flags)) if flags else "-"


def _write_rows(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def write_paths_csv(paths, out_path):
    """One row per grid point: subject,k,t,x."""
    rows = []
    for p in paths:
        for k in range(len(p.times)):
            rows.append((
                str(p.subject_index), str(k), _cell(p.times[k]), _cell(p.values[k]),
            ))
    _write_rows(out_path, ("subject", "k", "t", "x"), rows)


def write_stats_csv(all_stats, out_path):
    rows = [
        (str(s.subject_index), _cell(s.u), _cell(s.v)) for s in all_stats
    ]
    _write_rows(out_path, ("subject", "u", "v"), rows)


def write_fit_csv(fit, n, out_path):
    se_mu = fit.wald_se[0] if fit.wald_se is not None else None
    se_w2 = fit.wald_se[1] if fit.wald_se is not None else None
    row = (
        str(n),
        _cell(fit.theta_hat.mu),
        _cell(fit.theta_hat.omega2),
        _cell(fit.loglik),
        _cell(fit.score_norm),
        _boundary_cell(fit.boundary),
        _cell(se_mu),
        _cell(se_w2),
        str(fit.iterations),
    )
    _write_rows(
        out_path,
        ("n", "mu_hat", "omega2_hat", "loglik", "score_norm",
         "boundary", "se_mu", "se_omega2", "iterations"),
        [row],
    )


def write_replicates_csv(rows, out_path):
    out = []
    for r in rows:
        out.append((
            str(r["rep"]), str(r["n"]),
            _cell(r["mu_hat"]), _cell(r["omega2_hat"]),
            _cell(r["z_mu"]), _cell(r["z_omega2"]),
            _boundary_cell(r["boundary"]),
        ))
    _write_rows(
        out_path,
        ("rep", "n", "mu_hat", "omega2_hat", "z_mu", "z_omega2", "boundary"),
        out,
    )


def write_summary_csv(summaries, out_path):
    out = []
    for s in summaries:
        out.append((
            str(s["n"]),
            _cell(s["med_err"]), _cell(s["p90_err"]),
            _cell(s["ks_mu"]), _cell(s["ks_omega2"]),
            _cell(s["cov_mu"]), _cell(s["cov_omega2"]),
        ))
    _write_rows(
        out_path,
        ("n", "med_err", "p90_err", "ks_mu", "ks_omega2", "cov_mu", "cov_omega2"),
        out,
    )


_LIMITS_KEYS = (
    "kl", "kl_se", "kl_gap", "kl_gap_se",
    "i00", "i00_se", "i00_gap", "i00_gap_se",
    "i01", "i01_se", "i01_gap", "i01_gap_se",
    "i11", "i11_se", "i11_gap", "i11_gap_se",
)


def write_limits_csv(table, out_path, limit_path=None):
    """Running-average rows of a ConvergenceTable; the limit estimates go
    to limit_path when given."""
    rows = [
        tuple([str(r["n"])] + [_cell(r[k]) for k in _LIMITS_KEYS])
        for r in table.rows
    ]
    _write_rows(out_path, ("n",) + _LIMITS_KEYS, rows)
    if limit_path is not None:
        keys = ("kl", "kl_se", "i00", "i00_se", "i01", "i01_se", "i11", "i11_se")
        _write_rows(limit_path, keys, [tuple(_cell(table.limit[k]) for k in keys)])


def write_continuity_csv(table, out_path):
    keys = ("m", "x", "T", "k", "estimate", "se",
            "limit_estimate", "limit_se", "gap", "gap_se")
    rows = [
        tuple(str(r[k]) if k in ("m", "k") else _cell(r[k]) for k in keys)
        for r in table.rows
    ]
    _write_rows(out_path, keys, rows)


def _parse_float(token, line, what):
    try:
        x = float(token)
    except ValueError:
        raise IngestError(f"{what} is not a number: {token!r}", line=line)
    if not math.isfinite(x):
        raise IngestError(f"{what} is not finite", line=line)
    return x


def _parse_int(token, line, what):
    try:
        return int(token)
    except ValueError:
        raise IngestError(f"{what} is not an integer: {token!r}", line=line)


def read_paths_csv(in_path):
    """Parse a subject,k,t,x file back into Path objects.

    Per subject: k must count 0,1,2,... in file order, t must start at 0
    and strictly increase. Rows of different subjects may interleave.
    Returns paths sorted by subject id; phi and seed are unknown for
    external data and left as None.
    """
    by_subject = {}
    with open(in_path, "r", encoding="utf-8", newline="") as fh:
        header = fh.readline().rstrip("\n").rstrip("\r")
        if header != "subject,k,t,x":
            raise IngestError(
                "expected header 'subject,k,t,x'", line=1
            )
        for line_no, raw in enumerate(fh, start=2):
            text = raw.rstrip("\n").rstrip("\r")
            if not text:
                continue
            parts = text.split(",")
            if len(parts) != 4:
                raise IngestError(
                    f"expected 4 fields, got {len(parts)}",
                    line=line_no,
                )
            subject = _parse_int(parts[0], line_no, "subject")
            if subject < 0:
                raise IngestError("subject must be >= 0", line=line_no)
            k = _parse_int(parts[1], line_no, "k")
            t = _parse_float(parts[2], line_no, "t")
            x = _parse_float(parts[3], line_no, "x")
            rec = by_subject.setdefault(subject, {"t": [], "x": []})
            if k != len(rec["t"]):
                raise IngestError(
                    f"subject {subject} expected k={len(rec['t'])}, got {k}",
                    line=line_no,
                )
            if k == 0:
                if t != 0.0:
                    raise IngestError(
                        f"subject {subject} must start at t=0",
                        line=line_no,
                    )
            elif not t > rec["t"][-1]:
                raise IngestError(
                    f"subject {subject} time must increase "
                    f"(t={t!r} after t={rec['t'][-1]!r})",
                    line=line_no,
                )
            rec["t"].append(t)
            rec["x"].append(x)
    if not by_subject:
        raise IngestError("no data rows", line=1)
    paths = []
    for subject in sorted(by_subject):
        rec = by_subject[subject]
        if len(rec["t"]) < 2:
            raise IngestError(f"subject {subject} has fewer than 2 points")
        paths.append(Path(
            times=np.array(rec["t"]),
            values=np.array(rec["x"]),
            x0=rec["x"][0],
            phi=None,
            seed=None,
            subject_index=subject,
        ))
    return paths


def ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return path
