import json
import math

import numpy as np
import pytest

from heatctl.cli import (
    EXIT_CONFIG,
    EXIT_INITIAL_STATE,
    EXIT_OK,
    canonical_json,
    export_curve,
    main,
    parse_curve,
)
from heatctl.solvers import ValueCurve, ValuePoint

LINEAR_CONFIG = {
    "grid": {"ell": 1.0, "n": 127},
    "nonlinearity": {"kind": "zero", "L": 1.0},
    "y0": {"modes": {"1": 2.0}},
    "r": 0.5,
    "nt": 300,
    "experiment": {},
}


def write_config(tmp_path, name="config.json", **updates):
    cfg = json.loads(json.dumps(LINEAR_CONFIG))
    for key, value in updates.items():
        cfg[key] = value
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return path


def read_summary(out_dir):
    return json.loads((out_dir / "summary.json").read_text())


# ---------------------------------------------------------------------------
# Curve CSV round trip

def sample_curve(n_points):
    points = []
    for i in range(n_points):
        points.append(ValuePoint(
            parameter=0.1 * (i + 1) + 1e-17, value=math.exp(-i) / 3.0,
            bracket_lo=0.3 * i, bracket_hi=0.3 * i + 1e-3,
            iterations=5 * i, oracle_value=None if i % 2 else 1.0 / (i + 7.0)))
    return ValueCurve(points=tuple(points))


def test_export_empty_curve_is_header_only(tmp_path):
    path = tmp_path / "curve.csv"
    export_curve(ValueCurve(points=()), path)
    assert path.read_text() == "param,value,bracket_lo,bracket_hi,oracle_value,iterations\n"


def test_export_four_points_is_five_lines(tmp_path):
    path = tmp_path / "curve.csv"
    export_curve(sample_curve(4), path)
    assert len(path.read_text().splitlines()) == 5


def test_curve_roundtrip_full_precision(tmp_path):
    path = tmp_path / "curve.csv"
    curve = sample_curve(6)
    export_curve(curve, path)
    parsed = parse_curve(path)
    assert len(parsed.points) == 6
    for orig, back in zip(curve.points, parsed.points):
        assert back.parameter == orig.parameter
        assert back.value == orig.value
        assert back.bracket_lo == orig.bracket_lo
        assert back.bracket_hi == orig.bracket_hi
        assert back.oracle_value == orig.oracle_value
        assert back.iterations == orig.iterations


def test_parse_curve_rejects_other_files(tmp_path):
    path = tmp_path / "junk.csv"
    path.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        parse_curve(path)


# ---------------------------------------------------------------------------
# Subcommands

def test_mintime_zero_bound_equals_gamma(tmp_path):
    cfg = write_config(tmp_path, experiment={"M": 0.0})
    out = tmp_path / "out"
    assert main(["mintime", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    summary = read_summary(out)
    out2 = tmp_path / "out_gamma"
    cfg2 = write_config(tmp_path, name="config2.json", experiment={})
    assert main(["gamma", "--config", str(cfg2), "--out", str(out2)]) == EXIT_OK
    gamma = read_summary(out2)["outputs"]["gamma"]
    assert summary["outputs"]["tau"] == gamma
    assert (out / "control_norms.csv").exists()


def test_simulate_writes_norm_series(tmp_path):
    cfg = write_config(tmp_path, experiment={"horizon": 0.1})
    out = tmp_path / "out"
    assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    summary = read_summary(out)
    assert summary["outputs"]["envelope_passed"] is True
    lines = (out / "norms.csv").read_text().splitlines()
    assert lines[0] == "t,norm,envelope"
    assert len(lines) == 302  # header + nt + 1 samples


def test_minnorm_outputs_value_and_control(tmp_path):
    cfg = write_config(tmp_path, experiment={"T": 0.1})
    out = tmp_path / "out"
    assert main(["minnorm", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    summary = read_summary(out)
    assert summary["outputs"]["alpha"] == pytest.approx(3.86, rel=0.02)
    assert summary["outputs"]["bracket_hi"] >= summary["outputs"]["alpha"]


def test_determinism_byte_identical_excluding_wall_time(tmp_path):
    cfg = write_config(tmp_path, experiment={"M_values": [1.0, 10.0],
                                             "T_values": [0.1]})
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["oracle-compare", "--config", str(cfg), "--out", str(out1)]) == EXIT_OK
    assert main(["oracle-compare", "--config", str(cfg), "--out", str(out2)]) == EXIT_OK
    s1 = json.loads((out1 / "summary.json").read_text())
    s2 = json.loads((out2 / "summary.json").read_text())
    s1.pop("wall_time_s"), s2.pop("wall_time_s")
    assert canonical_json(s1) == canonical_json(s2)
    assert (out1 / "oracle_compare.csv").read_bytes() == (out2 / "oracle_compare.csv").read_bytes()


def test_oracle_compare_gap_small(tmp_path):
    cfg = write_config(tmp_path, experiment={"M_values": [1.0, 10.0],
                                             "T_values": [0.07, 0.1]})
    out = tmp_path / "out"
    assert main(["oracle-compare", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    summary = read_summary(out)
    assert summary["outputs"]["max_rel_gap"] <= 0.02
    lines = (out / "oracle_compare.csv").read_text().splitlines()
    assert lines[0] == "kind,param,solver,oracle,rel_gap"
    assert len(lines) == 5


def test_oracle_compare_refuses_out_of_scope_config(tmp_path):
    cfg = write_config(tmp_path, nonlinearity={"kind": "scaled_tanh", "L": 1.0},
                       experiment={"M_values": [1.0]})
    assert main(["oracle-compare", "--config", str(cfg),
                 "--out", str(tmp_path / "out")]) == EXIT_CONFIG


def test_equivalence_refuses_horizons_past_gamma(tmp_path, capsys):
    cfg = write_config(tmp_path, experiment={"T_grid": [0.1, 0.5], "M_grid": []})
    code = main(["equivalence", "--config", str(cfg), "--out", str(tmp_path / "out")])
    assert code == EXIT_CONFIG
    err = capsys.readouterr().err
    assert "free-decay" in err and "0.14" in err


def test_equivalence_runs_on_small_grids(tmp_path):
    cfg = write_config(tmp_path, experiment={"T_grid": [0.1], "M_grid": [10.0]})
    out = tmp_path / "out"
    assert main(["equivalence", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    summary = read_summary(out)
    assert summary["outputs"]["max_time_residual"] <= 0.02 * 0.1
    assert summary["outputs"]["max_bound_residual"] <= 0.02
    lines = (out / "equivalence.csv").read_text().splitlines()
    assert lines[0] == "kind,param,value,roundtrip,residual"
    assert len(lines) == 3


def test_sweep_exports_curves_with_oracle_column(tmp_path):
    cfg = write_config(tmp_path, experiment={"M_grid": [0.0, 1.0, 10.0]})
    out = tmp_path / "out"
    assert main(["sweep", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    summary = read_summary(out)
    assert summary["outputs"]["tau"]["strictly_decreasing"] is True
    curve = parse_curve(out / "tau_curve.csv")
    assert [p.parameter for p in curve.points] == [0.0, 1.0, 10.0]
    assert all(p.oracle_value is not None for p in curve.points)
    for p in curve.points:
        assert p.value == pytest.approx(p.oracle_value, rel=0.02, abs=1e-6)


def test_gradcheck_errors_small(tmp_path):
    cfg = write_config(tmp_path, omega=[0.3, 0.8],
                       nonlinearity={"kind": "scaled_tanh", "L": 1.0},
                       experiment={"T": 0.1, "pairs": 3, "seed": 1, "fd_step": 1e-3})
    out = tmp_path / "out"
    assert main(["gradcheck", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    assert read_summary(out)["outputs"]["max_rel_error"] <= 1e-6


def test_override_changes_result_and_hash(tmp_path):
    cfg = write_config(tmp_path, experiment={"M": 10.0})
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["mintime", "--config", str(cfg), "--out", str(out1)]) == EXIT_OK
    assert main(["mintime", "--config", str(cfg), "--out", str(out2),
                 "--override", "experiment.M=0"]) == EXIT_OK
    s1, s2 = read_summary(out1), read_summary(out2)
    assert s1["config_hash"] != s2["config_hash"]
    assert s2["outputs"]["M"] == 0.0
    assert s2["outputs"]["tau"] > s1["outputs"]["tau"]


# ---------------------------------------------------------------------------
# Config validation

def test_missing_radius_is_field_error(tmp_path, capsys):
    cfg = json.loads(json.dumps(LINEAR_CONFIG))
    del cfg["r"]
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    code = main(["gamma", "--config", str(path), "--out", str(tmp_path / "out")])
    assert code == EXIT_CONFIG
    assert "r:" in capsys.readouterr().err


def test_bad_omega_is_field_error(tmp_path, capsys):
    cfg = write_config(tmp_path, omega=[0.9, 0.2])
    code = main(["gamma", "--config", str(cfg), "--out", str(tmp_path / "out")])
    assert code == EXIT_CONFIG
    assert "omega" in capsys.readouterr().err


def test_initial_state_inside_ball_exit_code(tmp_path, capsys):
    cfg = write_config(tmp_path, y0={"modes": {"1": 0.4}})
    code = main(["gamma", "--config", str(cfg), "--out", str(tmp_path / "out")])
    assert code == EXIT_INITIAL_STATE
    assert "inside" in capsys.readouterr().err


def test_invalid_json_config(tmp_path, capsys):
    path = tmp_path / "config.json"
    path.write_text("{not json")
    code = main(["gamma", "--config", str(path), "--out", str(tmp_path / "out")])
    assert code == EXIT_CONFIG
    assert "JSON" in capsys.readouterr().err


def test_y0_from_vector_file(tmp_path):
    vec = 2.0 * np.sin(np.pi * np.arange(1, 128) / 128.0) * math.sqrt(2.0)
    vec_path = tmp_path / "y0.txt"
    vec_path.write_text(" ".join(format(float(v), ".17g") for v in vec))
    cfg = write_config(tmp_path, y0={"file": "y0.txt"}, experiment={})
    out = tmp_path / "out"
    assert main(["gamma", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    assert read_summary(out)["outputs"]["gamma"] == pytest.approx(0.14, abs=0.01)


def test_nonlinearity_failing_validation_rejected(tmp_path, capsys):
    cfg = write_config(tmp_path, nonlinearity={"kind": "unknown_kind"})
    code = main(["gamma", "--config", str(cfg), "--out", str(tmp_path / "out")])
    assert code == EXIT_CONFIG
    assert "nonlinearity" in capsys.readouterr().err
