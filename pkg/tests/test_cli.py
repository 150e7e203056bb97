import csv
import json
from pathlib import Path

import pytest

from bmsruin.cli import main, read_solution
from bmsruin.solver import eval_psi

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def _config(tmp_path, name, **changes):
    cfg = json.loads((CONFIGS / f"{name}.json").read_text())
    for path, value in changes.items():
        node = cfg
        keys = path.split(".")
        for k in keys[:-1]:
            node = node.setdefault(k, {})
        node[keys[-1]] = value
    cfg.setdefault("output", {})["directory"] = str(tmp_path / "out")
    p = tmp_path / f"{name}.json"
    p.write_text(json.dumps(cfg))
    return str(p)


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_solve_gamma_example(tmp_path):
    cfg = _config(tmp_path, "gamma_bms")
    assert main(["solve", "--config", cfg]) == 0
    out = tmp_path / "out"
    report = (out / "report.txt").read_text()
    assert "closed_form: true" in report
    assert "condition_number:" in report and "lundberg_r0:" in report and "drift:" in report
    roots = _rows(out / "roots.csv")
    assert len(roots) == 3 and list(roots[0]) == ["re", "im", "abs_D", "abs_Dprime"]
    assert list(_rows(out / "solution.csv")[0]) == ["decay_rate", "frequency", "cos_coef", "sin_coef"]
    assert list(_rows(out / "psi.csv")[0]) == ["u", "psi", "lundberg_bound"]


def test_round_trip_verify(tmp_path):
    cfg = _config(tmp_path, "gamma_bms", **{"verify.mc.n_paths": 20000})
    assert main(["solve", "--config", cfg]) == 0
    assert main(["verify", "--config", cfg]) == 0
    rows = _rows(tmp_path / "out" / "verification.csv")
    assert list(rows[0]) == ["u", "residual", "mc_estimate", "mc_ci", "series_psi"]


def test_csv_round_trip_is_exact(tmp_path):
    cfg = _config(tmp_path, "halfnormal_bms", **{"solver.terms": 15})
    assert main(["solve", "--config", cfg]) == 0
    out = tmp_path / "out"
    sol = read_solution(out)
    for row in _rows(out / "psi.csv"):
        assert abs(eval_psi(sol, float(row["u"])) - float(row["psi"])) <= 1e-12


def test_truncated_chi_fails_strict_threshold(tmp_path):
    cfg = _config(tmp_path, "maxwell_bms", **{"verify.mc.n_paths": 0})
    assert main(["solve", "--config", cfg, "--terms", "1"]) == 0
    assert main(["verify", "--config", cfg]) == 4
    assert (tmp_path / "out" / "verification.csv").exists()


def test_bad_weights_exit_2(tmp_path, capsys):
    cfg = _config(tmp_path, "halfnormal_bms", **{"system.premium.weights": [0.09] * 10})
    assert main(["solve", "--config", cfg]) == 2
    assert "sum to 1" in capsys.readouterr().err


def test_zero_terms(tmp_path, caplog):
    cfg = _config(tmp_path, "gamma_bms")
    assert main(["solve", "--config", cfg, "--terms", "0"]) == 0
    assert all(float(r["psi"]) == 0 for r in _rows(tmp_path / "out" / "psi.csv"))
    assert "zero terms" in caplog.text


def test_empty_grid_exit_2(tmp_path):
    cfg = _config(tmp_path, "gamma_bms", **{"verify.grid.points": 0})
    assert main(["verify", "--config", cfg]) == 2


def test_solver_error_exit_3(tmp_path, capsys):
    cfg = _config(tmp_path, "exponential_ds", **{"solver.search": {"simple_tol": 1e6}})
    assert main(["solve", "--config", cfg]) == 3
    assert "MultipleRootDetected" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [["solve"], ["solve", "--preset", "nope"], ["solve", "--config", "/nonexistent.json"]])
def test_input_errors(argv):
    assert main(argv) == 2


def test_malformed_json(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    assert main(["solve", "--config", str(p)]) == 2


def test_two_premium_forms_rejected(tmp_path):
    cfg = _config(tmp_path, "gamma_bms", **{"system.premium.distribution": {"kind": "exponential", "rate": 1}})
    assert main(["solve", "--config", cfg]) == 2


def test_transition_matrix_config(tmp_path):
    cfg = _config(tmp_path, "gamma_bms", **{"system.premium": {"matrix": [[0.5, 0.5], [0.25, 0.75]],
                                                                 "premiums": [1.0, 2.0]}})
    assert main(["roots", "--config", cfg, "--terms", "3"]) == 0
    assert len(_rows(tmp_path / "out" / "roots.csv")) == 3


def test_simulate_is_deterministic(tmp_path):
    outs = []
    for k in range(2):
        d = tmp_path / f"s{k}"
        assert main(["simulate", "--preset", "gamma_bms", "--seed", "7", "--out", str(d)]) == 0
        outs.append((d / "simulation.csv").read_text())
    assert outs[0] == outs[1]


def test_preset_roots(tmp_path, capsys):
    assert main(["roots", "--preset", "gamma_bms", "--terms", "3", "--out", str(tmp_path)]) == 0
    assert "exhaustive: true" in capsys.readouterr().out
