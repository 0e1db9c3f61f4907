import csv
import io
import json
import math

import pytest

from brqw.cli import main


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_exact_sum_csv(capsys):
    code, out, _ = run(["exact-sum", "--graph", "lattice", "--d", "2", "--coin", "hadamard",
                        "--n", "4", "--alpha", "0,0.2"], capsys)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert list(rows[0]) == ["n", "alpha", "S_n", "class_count", "zero_class_count", "paths_in_zero_classes"]
    assert float(rows[0]["S_n"]) == pytest.approx(1.0, abs=1e-12)
    assert float(rows[1]["S_n"]) > 1


def test_report_bounds(capsys):
    code, out, _ = run(["report", "--bounds", "--d", "2"], capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["schema"] == 1
    assert doc["config"]["d"] == 2
    b = doc["bounds"]
    assert b["tree_saw_alpha_c"] == pytest.approx(math.log(4 / 3))
    assert b["tree_decorated_threshold"] == pytest.approx(math.log(52 / 45))
    assert b["lattice_alpha_c_upper"] == pytest.approx(math.log(2))
    assert b["forms_agree"] is True


def test_simulate_json(capsys):
    code, out, err = run(["simulate", "--n", "3", "--alpha", "0.2", "--samples", "100", "--seed", "7"], capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["schema"] == 1 and "runtime" not in doc
    assert {"mean", "stderr", "params", "config"} <= set(doc)
    assert "mean" in err   # summary table goes to stderr when data is on stdout


def test_simulate_timing_and_sweep(capsys):
    _, out, _ = run(["simulate", "--n", "2", "--samples", "10", "--timing", "--format", "json"], capsys)
    assert "runtime" in json.loads(out)
    _, out, _ = run(["simulate", "--n", "2", "--samples", "10", "--alpha", "0,0.1,0.2"], capsys)
    assert out.splitlines()[0] == "n,alpha,mean,stderr"
    assert len(out.splitlines()) == 4


def test_classes_dump(tmp_path, capsys):
    f = tmp_path / "c.json"
    code, out, _ = run(["classes", "--n", "6", "--dump", "--out", str(f)], capsys)
    assert code == 0
    assert "classes" in out   # summary on stdout
    doc = json.loads(f.read_text())
    assert doc["zero_class_count"] >= 1
    assert sum(c["cardinality"] for c in doc["classes"]) == 4 ** 6
    code, _, err = run(["classes", "--n", "7", "--dump"], capsys)
    assert code == 2 and "'n'" in err


def test_polymer_outputs(tmp_path, capsys):
    code, _, _ = run(["polymer", "--n-max", "5", "--alpha", "0,0.3", "--z", "0.1",
                      "--out-dir", str(tmp_path)], capsys)
    assert code == 0
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == ["alpha_c.csv", "free_energy.csv", "partition.csv", "summary.json", "susceptibility.csv"]
    assert (tmp_path / "partition.csv").read_text().splitlines()[0] == "n,alpha,Z_n"
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["alpha_c"]["upper"] == pytest.approx(math.log(2))


def test_mass_outputs(tmp_path, capsys):
    code, out, _ = run(["mass", "--d", "2", "--z-critical", "--n-max", "8", "--out-dir", str(tmp_path)], capsys)
    assert code == 0
    assert "over-estimated" in out
    doc = json.loads((tmp_path / "mass.json").read_text())
    assert doc["z"] == 0.25 and doc["mass"] > 0
    assert (tmp_path / "mass.csv").read_text().splitlines()[0] == "L,G_L,mass"


def test_crosscheck_passes(capsys):
    code, out, _ = run(["crosscheck", "--n", "4", "--samples", "2000", "--seed", "3"], capsys)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    for r in rows:
        if float(r["alpha"]) == 0 or r["n"] == "1":
            assert float(r["z_score"]) == 0.0
        assert abs(float(r["z_score"])) <= 4


@pytest.mark.parametrize("argv,field", [
    (["simulate", "--n", "3", "--d", "0"], "'d'"),
    (["simulate", "--n", "-1"], "'n'"),
    (["simulate", "--n", "3", "--samples", "0"], "'samples'"),
    (["simulate", "--n", "3", "--alpha", "-0.1"], "'alpha'"),
    (["polymer", "--z", "-1"], "'z'"),
    (["simulate", "--n", "3", "--norm", "depth"], "'norm'"),
    (["simulate", "--n", "3", "--coin", "hadamard", "--d", "3"], "'coin'"),
    (["simulate", "--n", "3", "--tau0", "9"], "'tau0'"),
])
def test_validation_names_field(argv, field, capsys):
    code, _, err = run(argv, capsys)
    assert code == 2
    assert field in err


def test_budget_exit_code(capsys):
    code, _, err = run(["exact-sum", "--n", "9", "--budget", "1000"], capsys)
    assert code == 3 and "budget" in err
    code, _, _ = run(["simulate", "--graph", "tree", "--n", "9", "--node-budget", "100"], capsys)
    assert code == 3


def test_io_exit_code(tmp_path, capsys):
    code, _, _ = run(["exact-sum", "--n", "2", "--out", str(tmp_path / "missing" / "x.csv")], capsys)
    assert code == 4
    code, _, _ = run(["simulate", "--n", "2", "--config", str(tmp_path / "none.cfg")], capsys)
    assert code == 4


def test_config_file(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# sweep\nn = 2\nalpha = 0.1\nsamples = 50\nformat = csv\n")
    _, out, _ = run(["simulate", "--config", str(cfg)], capsys)
    assert out.splitlines()[1].startswith("2,0.1,")
    _, out2, _ = run(["simulate", "--config", str(cfg), "--alpha", "0.3"], capsys)
    assert out2.splitlines()[1].startswith("2,0.3,")
    cfg.write_text("colour = blue\n")
    code, _, err = run(["simulate", "--n", "2", "--config", str(cfg)], capsys)
    assert code == 2 and "'colour'" in err


def test_workers_env_default(monkeypatch, capsys):
    monkeypatch.setenv("BRQW_WORKERS", "3")
    code, out, _ = run(["exact-sum", "--n", "3"], capsys)
    assert code == 0


DETERMINISM_RUNS = [
    ["simulate", "--n", "4", "--alpha", "0,0.2", "--samples", "500", "--seed", "7", "--format", "json"],
    ["simulate", "--graph", "tree", "--n", "4", "--alpha", "0.2", "--samples", "300", "--seed", "7"],
    ["exact-sum", "--n", "1:6", "--alpha", "0,0.2", "--coin", "fourier"],
    ["classes", "--n", "5", "--dump", "--coin", "fourier", "--graph", "tree"],
    ["polymer", "--family", "SP", "--n-max", "6", "--alpha", "0,0.3"],
    ["mass", "--d", "2", "--z", "0.2", "--n-max", "8"],
    ["report", "--bounds", "--d", "3"],
    ["crosscheck", "--n", "3", "--samples", "500"],
]


@pytest.mark.parametrize("argv", DETERMINISM_RUNS, ids=[a[0] + str(i) for i, a in enumerate(DETERMINISM_RUNS)])
def test_determinism_across_workers(argv, tmp_path, capsys):
    outputs = []
    for workers in ("1", "8", "1"):
        f = tmp_path / f"out{len(outputs)}"
        assert main(argv + ["--workers", workers, "--out", str(f)]) == 0
        outputs.append(f.read_bytes())
    capsys.readouterr()
    assert outputs[0] == outputs[1] == outputs[2]
