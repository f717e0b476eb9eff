import json
import math
import subprocess
import sys

import numpy as np
import pytest

from fls.cli import main
from fls.model import hopping_alpha


def _ec1_config(L=2, J=0.8, gam=0.7, t=1.0, seed=11):
    alpha = hopping_alpha(L, 0, 1, J).tolist()
    s = math.sqrt(gam)
    b_loss = [[s / 2, 0.0], [0.0, s / 2], [0, 0], [0, 0]]
    b_gain = [[s / 2, 0.0], [0.0, -s / 2], [0, 0], [0, 0]]
    return {
        "L": L,
        "hamiltonian": [{"t_start": 0.0, "t_end": t, "alpha": alpha}],
        "lindblad": [{"b": b_loss}, {"b": b_gain}],
        "class": "auto",
        "initial": "10",
        "t_final": t,
        "target_epsilon": 0.1,
        "seed": seed,
    }


@pytest.fixture
def cfg_path(tmp_path):
    p = tmp_path / "exp.json"
    p.write_text(json.dumps(_ec1_config()))
    return str(p)


def _run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_compare_identical_files_prints_zero(tmp_path, capsys):
    f = tmp_path / "d.csv"
    f.write_text("bitstring,probability\n10,0.5\n01,0.5\n# config=x version=y\n")
    code, out, _ = _run(["compare", str(f), str(f)], capsys)
    assert code == 0
    assert float(out.strip()) == 0.0


def test_sample_deterministic_and_metadata(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps(_ec1_config(gam=0.0, seed=42)))
    out1 = tmp_path / "a.csv"
    out2 = tmp_path / "b.csv"
    assert main(["sample", "--config", str(cfg), "--n", "50", "--out", str(out1)]) == 0
    assert main(["sample", "--config", str(cfg), "--n", "50", "--out", str(out2)]) == 0
    b1, b2 = out1.read_bytes(), out2.read_bytes()
    assert b1 == b2
    lines = b1.decode().strip().split("\n")
    assert lines[0] == "bitstring"
    assert lines[-1].startswith("# config=") and "version=fls-v" in lines[-1]


def test_schema_violation_exit_2(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    doc = _ec1_config()
    doc["hamiltonian"][0]["alpha"] = np.eye(4).tolist()
    cfg.write_text(json.dumps(doc))
    code, _, err = _run(["oracle", "--config", str(cfg)], capsys)
    assert code == 2
    assert "$.hamiltonian" in err


def test_json_syntax_error_line_anchored(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text('{\n "L": 2,\n broken\n}')
    code, _, err = _run(["oracle", "--config", str(cfg)], capsys)
    assert code == 2
    assert "line 3" in err


def test_infeasible_dimension_exit_3(tmp_path, capsys):
    L = 14
    doc = {
        "L": L,
        "hamiltonian": [{"t_start": 0.0, "t_end": 1.0}],
        "lindblad": [],
        "initial": "0" * L,
        "t_final": 1.0,
    }
    cfg = tmp_path / "big.json"
    cfg.write_text(json.dumps(doc))
    code, _, err = _run(["oracle", "--config", str(cfg)], capsys)
    assert code == 3


def test_pipeline_simulate_oracle_compare_bound(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps(_ec1_config()))
    sim = tmp_path / "sim.csv"
    orc = tmp_path / "oracle.csv"
    assert main(["simulate", "--config", str(cfg), "--trajectories", "4000",
                 "--dt", "0.02", "--out", str(sim)]) == 0
    assert main(["oracle", "--config", str(cfg), "--out", str(orc)]) == 0
    code, out, _ = _run(["compare", str(sim), str(orc)], capsys)
    assert code == 0
    measured_tvd = float(out.strip())
    code, out, _ = _run(["bound", "--config", str(cfg), "--epsilon", "0.1",
                         "--trajectories", "4000"], capsys)
    assert code == 0
    rep = json.loads(out)
    # the a-priori bound at the chosen dt covers the measured end-to-end TVD
    assert measured_tvd < 0.05
    assert rep["epsilon_bound"] <= 0.1 + 1e-12
    assert rep["runtime_estimate_ops"] > 0


def test_simulate_thread_count_invariance(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps(_ec1_config(seed=5)))
    outs = []
    for threads in ("1", "8"):
        out = tmp_path / f"t{threads}.csv"
        assert main(["simulate", "--config", str(cfg), "--trajectories", "600",
                     "--dt", "0.05", "--threads", threads, "--out", str(out)]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_gate_demo_json(capsys):
    code, out, _ = _run(["gate-demo", "--scheme", "zeno", "--gamma-ratio", "100",
                         "--rtol", "1e-8"], capsys)
    assert code == 0
    rep = json.loads(out)
    assert rep["phase_11"] == pytest.approx(math.pi, abs=0.1)
    assert rep["basis_leakage_error"]["00"] == pytest.approx(2 * math.pi / 100, rel=0.3)


def test_sweep_csv(tmp_path):
    out = tmp_path / "fig2.csv"
    assert main(["sweep", "--p0", "0.01", "--points", "11", "--out", str(out)]) == 0
    lines = out.read_text().strip().split("\n")
    assert lines[0] == "gamma_prime_over_gamma,epsilon,label"
    assert any("EC1-easy" in ln for ln in lines)
    assert lines[-1].startswith("# config=")


def test_fig4b_csv(tmp_path):
    table = tmp_path / "in.csv"
    table.write_text("label,gamma,zeta\nB1,2.5e4,0.0\nB2,2.5e4,1.0\n")
    out = tmp_path / "fig4b.csv"
    assert main(["fig4b", "--gamma-prime", "1e-2", "--table", str(table),
                 "--out", str(out)]) == 0
    rows = [ln.split(",") for ln in out.read_text().strip().split("\n")[1:-1]]
    assert float(rows[0][3]) == pytest.approx(7.947e-3, rel=0.01)


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "fls.cli", "--version"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "fls-v" in proc.stdout
