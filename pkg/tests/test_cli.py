import json
import os
import subprocess
import sys

import numpy as np
import pytest

from polyflux.cli import main
from polyflux.config import ConfigError, config_hash, parse_config
from polyflux.io import HASH_PREFIX, read_json

ABS = {"breaks": [0], "slopes": [-1, 1], "anchor": 0}
SOLVE = {"flux": ABS, "data": {"kind": "quadratic"},
         "grid": {"x_min": -3, "x_max": 3, "points": 256, "t": [1.0]}, "search": {"M": 256}}
SHOCK = {"flux": {"breaks": [-1, 0, 1], "slopes": [-1, -0.5, 0.5, 1]},
         "data": {"kind": "piecewise_constant", "jumps": [0], "values": [1, -1]},
         "grid": {"x_min": -1.5, "x_max": 1.5, "points": 61, "t": [0.5, 1.0]}}


def write_cfg(tmp_path, obj, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return str(p)


def read_table(path):
    with open(path) as fh:
        lines = fh.read().splitlines()
    assert lines[0].startswith(HASH_PREFIX)
    header = lines[1].split(",")
    rows = [ln.split(",") for ln in lines[2:]]
    return header, rows


def run(tmp_path, command, cfg, *extra, out="out"):
    return main([command, "--config", write_cfg(tmp_path, cfg), "--out", str(tmp_path / out), *extra])


# --------------------------------------------------------------- parse_config

def test_minimal_solve_config():
    cfg = parse_config(SOLVE, command="solve")
    assert cfg.x_grid().size == 256 and cfg.times == [1.0]
    assert cfg.flux.slopes == (-1.0, 1.0)


def test_bad_slopes_named():
    bad = dict(SOLVE, flux={"breaks": [0], "slopes": [1, -1]})
    with pytest.raises(ConfigError, match="slopes"):
        parse_config(bad, command="solve")


def test_unknown_key_named():
    with pytest.raises(ConfigError, match="grid.step"):
        parse_config(dict(SOLVE, grid={"step": 0.1}), command="solve")


def test_hash_ignores_output_only():
    a = parse_config(SOLVE, command="solve")
    b = parse_config(dict(SOLVE, output={"dir": "elsewhere"}), command="solve")
    c = parse_config(dict(SOLVE, search={"M": 512}), command="solve")
    assert a.sha256 == b.sha256 != c.sha256
    assert config_hash(a.resolved) == a.sha256


def test_cli_seed_overrides():
    assert parse_config(dict(SOLVE, seed=3), command="solve", seed=5).seed == 5


# ------------------------------------------------------------------ exit codes

def test_unknown_command_exits_2(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate", "--config", write_cfg(tmp_path, SOLVE)])
    assert exc.value.code == 2


def test_config_error_exits_2(tmp_path, capsys):
    bad = dict(SOLVE, flux={"breaks": [0], "slopes": [1, -1]})
    assert run(tmp_path, "solve", bad) == 2
    assert "slopes" in capsys.readouterr().err


def test_inline_json_config(tmp_path):
    assert main(["conjugate", "--config", json.dumps({"flux": ABS}), "--out", str(tmp_path)]) == 0
    assert os.path.isfile(tmp_path / "conjugate.csv")


# ------------------------------------------------------------------- commands

def test_conjugate_table(tmp_path):
    dead = {"flux": {"breaks": [-1, 1], "slopes": [-1, 0, 1]}}
    assert run(tmp_path, "conjugate", dead) == 0
    header, rows = read_table(tmp_path / "out" / "conjugate.csv")
    assert header == ["p", "L", "slope_right"]
    assert [float(r[0]) for r in rows] == [-1.0, 0.0, 1.0]
    assert [float(r[1]) for r in rows] == [1.0, 0.0, 1.0]


def test_solve_matches_closed_form(tmp_path):
    assert run(tmp_path, "solve", SOLVE) == 0
    header, rows = read_table(tmp_path / "out" / "solve_t0.csv")
    assert header == ["x", "u", "w", "y_star", "kind"]
    x = np.array([float(r[0]) for r in rows])
    w = np.array([float(r[2]) for r in rows])
    expected = np.where(x > 1, 2 * (x - 1), np.where(x < -1, 2 * (x + 1), 0.0))
    assert np.max(np.abs(w - expected)) <= 1e-9
    body = read_json(tmp_path / "out" / "solve.json")
    assert body["config_sha256"] == parse_config(SOLVE, command="solve").sha256


def test_discrete_range(tmp_path):
    assert run(tmp_path, "discrete", SHOCK) == 0
    for k in (0, 1):
        _, rows = read_table(tmp_path / "out" / f"discrete_t{k}.csv")
        assert {float(r[2]) for r in rows} <= {-1.0, 1.0}
    _, rep = read_table(tmp_path / "out" / "discrete_report.csv")
    assert all(r[1] == "true" for r in rep)


def test_discrete_needs_step_data(tmp_path):
    assert run(tmp_path, "discrete", SOLVE) == 2


def test_every_file_has_hash_header(tmp_path):
    assert run(tmp_path, "discrete", SHOCK) == 0
    sha = parse_config(SHOCK, command="discrete").sha256
    files = os.listdir(tmp_path / "out")
    assert files
    for name in files:
        with open(tmp_path / "out" / name) as fh:
            assert fh.readline().strip() == HASH_PREFIX + sha


def test_idempotent(tmp_path):
    assert run(tmp_path, "solve", SOLVE, out="a") == 0
    assert run(tmp_path, "solve", SOLVE, out="b") == 0
    for name in os.listdir(tmp_path / "a"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_verify_from_field_file(tmp_path):
    assert run(tmp_path, "solve", SOLVE) == 0
    field = str(tmp_path / "out" / "solve_t0.csv")
    cfg = dict(SOLVE, verify={"field_file": field})
    assert run(tmp_path, "verify", cfg, out="v") == 0
    _, rows = read_table(tmp_path / "v" / "verify.csv")
    assert {r[0] for r in rows} == {"monotone_y_star", "w_equals_gprime_of_ystar", "tv_bound"}


def test_verify_corrupted_field_exits_1(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("# config_sha256=0\nx,u,w,y_star,kind\n0.0,1.0,oops,0.0,A\n")
    assert run(tmp_path, "verify", dict(SOLVE, verify={"field_file": str(bad)})) == 1
    # values that parse but are inconsistent: w != g'(y*)
    bad.write_text("# config_sha256=0\nx,u,w,y_star,kind\n0.0,0.0,5.0,0.0,A\n1.0,0.0,0.0,0.0,A\n")
    assert run(tmp_path, "verify", dict(SOLVE, verify={"field_file": str(bad)})) == 1


def test_verify_missing_field_file_exits_2(tmp_path):
    cfg = dict(SOLVE, verify={"field_file": str(tmp_path / "nope.csv")})
    assert run(tmp_path, "verify", cfg) == 2


def test_verify_computed(tmp_path):
    cfg = dict(SOLVE, grid={"x_min": -2, "x_max": 2, "points": 33, "t": [1.0, 1.5]},
               verify={"bumps": [[1.5, 1.0, 0.3, 0.3]], "h": [0.125]})
    assert run(tmp_path, "verify", cfg) == 0
    body = read_json(tmp_path / "out" / "verify.json")
    checks = {r["check"] for r in body["reports"]}
    assert {"lipschitz_x", "initial_trace", "lipschitz_t", "weak_residual", "entropy_constant"} <= checks


def test_mollify_table(tmp_path):
    cfg = dict(SOLVE, grid={"x_min": -2, "x_max": 2, "points": 17, "t": [1.0]},
               epsilons=[0.2, 0.1])
    assert run(tmp_path, "mollify", cfg) == 0
    header, rows = read_table(tmp_path / "out" / "mollify.csv")
    assert header == ["epsilon", "conj_gap", "w_err", "rate"]
    assert [float(r[0]) for r in rows] == [0.2, 0.1]


def test_stochastic_seeded(tmp_path):
    cfg = {"flux": ABS, "grid": {"t": [1.0]}, "search": {"M": 256},
           "stochastic": {"n_paths": 16, "x": [0, 1], "crosscheck": 2}}
    assert run(tmp_path, "stochastic", cfg, "--seed", "7", out="a") in (0, 1)
    assert run(tmp_path, "stochastic", cfg, "--seed", "7", out="b") in (0, 1)
    assert run(tmp_path, "stochastic", cfg, "--seed", "8", out="c") in (0, 1)
    a = (tmp_path / "a" / "stochastic.csv").read_bytes()
    assert a == (tmp_path / "b" / "stochastic.csv").read_bytes()
    assert a != (tmp_path / "c" / "stochastic.csv").read_bytes()
    body = read_json(tmp_path / "a" / "stochastic.json")
    mean_band = [c for c in body["checks"] if c["check"] == "mean_within_3se"][0]
    assert mean_band["passed"] is None


def test_console_script(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "polyflux.cli", "conjugate", "--config",
                           json.dumps({"flux": ABS}), "--out", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert proc.stdout.strip().endswith("conjugate.json")
