import pytest

from sde_remle.config import (
    COMMANDS,
    check_required,
    emit_config,
    parse_config,
    required_keys,
    resolve_seed,
)
from sde_remle.errors import MissingKey, ParseError, UnknownKey


def test_parse_theta_pair():
    cfg = parse_config("mu0 = 1.0\nomega2_0 = 0.5")
    assert cfg == {"mu0": 1.0, "omega2_0": 0.5}


def test_parse_skips_blanks_and_comments():
    cfg = parse_config("# run setup\n\n  model = unit  \n# trailing\nseed=7\n")
    assert cfg == {"model": "unit", "seed": 7}


def test_parse_int_list():
    cfg = parse_config("n_schedule = 50, 200,800")
    assert cfg["n_schedule"] == (50, 200, 800)


def test_unknown_key_carries_line_number():
    with pytest.raises(UnknownKey) as exc:
        parse_config("bogus = 1")
    assert exc.value.line == 1
    assert "bogus" in str(exc.value)


def test_duplicate_key_rejected():
    with pytest.raises(ParseError) as exc:
        parse_config("dt = 0.1\n# sep\ndt = 0.2")
    assert exc.value.line == 3


def test_missing_equals_sign():
    with pytest.raises(ParseError) as exc:
        parse_config("model unit")
    assert exc.value.line == 1


@pytest.mark.parametrize(
    "text,line",
    [
        ("n = 2.5", 1),
        ("dt = fast", 1),
        ("dt = inf", 1),
        ("model =", 1),
        ("seed = 1\nn_schedule = 10,,20", 2),
    ],
)
def test_typed_value_errors(text, line):
    with pytest.raises(ParseError) as exc:
        parse_config(text)
    assert exc.value.line == line


def test_emit_round_trip():
    cfg = parse_config(
        "seed = 3\nmodel = unit\ndt = 0.05\nmu0 = 1.0\nn_schedule = 50,200\nx0 = 0.0"
    )
    text = emit_config(cfg)
    assert parse_config(text) == cfg
    # canonical order puts model first and seed after dt
    keys = [ln.split(" = ")[0] for ln in text.strip().split("\n")]
    assert keys == ["model", "mu0", "x0", "n_schedule", "dt", "seed"]


def test_emit_floats_round_trip_exactly():
    cfg = {"dt": 1.0 / 3.0, "mu0": 0.1 + 0.2}
    again = parse_config(emit_config(cfg))
    assert again["dt"] == cfg["dt"]
    assert again["mu0"] == cfg["mu0"]


def test_required_keys_follow_design_kind():
    iid = required_keys("simulate", {"design": "iid"})
    assert "x0" in iid and "T" in iid
    harmonic = required_keys("simulate", {"design": "harmonic"})
    assert "x_inf" in harmonic and "T_amp" in harmonic and "x0" not in harmonic
    with pytest.raises(ValueError):
        required_keys("deploy", {})


def test_check_required_reports_at_eof():
    cfg = parse_config("model = unit\ndesign = iid")
    with pytest.raises(MissingKey) as exc:
        check_required("simulate", cfg, eof_line=12)
    assert exc.value.line == 12


def test_every_command_has_requirements():
    assert set(COMMANDS) == {
        "simulate",
        "fit",
        "consistency",
        "normality",
        "noniid",
        "continuity",
    }
    for command in COMMANDS:
        assert "model" in required_keys(command, {"design": "iid"})


def test_seed_precedence():
    assert resolve_seed({"seed": 5}, flag_seed=9, env={}) == 9
    assert resolve_seed({"seed": 5}, env={"SDE_REMLE_SEED": "3"}) == 5
    assert resolve_seed({}, env={"SDE_REMLE_SEED": "3"}) == 3
    assert resolve_seed({}, env={}) == 0
    assert resolve_seed({}, env={"SDE_REMLE_SEED": ""}) == 0
    with pytest.raises(ParseError):
        resolve_seed({}, env={"SDE_REMLE_SEED": "soon"})
