import csv
import json
import subprocess
import sys

import pytest

from tdrasb.cli import ConfigError, RunConfig, load_config, main


def write_config(tmp_path, data, name="cfg.json"):
    data = dict(data)
    data.setdefault("output", {"directory": str(tmp_path / "out"), "prefix": "run"})
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


def read_summary(tmp_path, prefix="run"):
    return json.loads((tmp_path / "out" / f"{prefix}_summary.json").read_text())


def test_defaults():
    cfg = RunConfig(particles=3)
    assert (cfg.grid.x_min, cfg.grid.x_max, cfg.grid.n_points) == (-8.0, 8.0, 101)
    assert cfg.trap_omega == 1.0
    assert cfg.integrator.method == "rk45" and cfg.integrator.dt == 1e-3
    assert cfg.integrator.abs_tol == cfg.integrator.rel_tol == 1e-10
    assert cfg.task.kind == "relax"


def test_m1_default_depends_on_scheme():
    assert RunConfig(particles=3, orbitals=3).ras_spec().m1 == 3
    assert RunConfig(particles=3, orbitals=3, scheme="general:2").ras_spec().m1 == 1


def test_dims_task(tmp_path, capsys):
    cfg = write_config(tmp_path, {"particles": 100, "orbitals": 5, "m1": 1, "scheme": "general:8",
                                  "task": {"kind": "dims"}})
    assert main(["run", cfg]) == 0
    summary = read_summary(tmp_path)
    assert summary["dim"] == 495
    assert summary["dim_full"] == 4598126
    assert '"dim": 495' in capsys.readouterr().out


def test_cost_task(tmp_path):
    cfg = write_config(tmp_path, {"particles": 10, "orbitals": 8, "m1": 1, "scheme": "general:8",
                                  "task": {"kind": "cost"}})
    assert main(["run", cfg]) == 0
    assert read_summary(tmp_path)["cost_delta"] < 0


def test_relax_task_outputs(tmp_path):
    cfg = write_config(tmp_path, {"particles": 10, "orbitals": 2, "scheme": "general:2",
                                  "interaction": {"kind": "contact", "strength": 0.0}})
    assert main(["run", cfg]) == 0
    summary = read_summary(tmp_path)
    assert summary["energy"] == pytest.approx(5.0, abs=1e-9)
    assert summary["relax"]["converged"]
    assert "regularization_flags" in summary and "wall_time_s" in summary
    assert summary["natural_occupations_percent"][0] == pytest.approx(100.0, abs=1e-6)
    with open(tmp_path / "out" / "run_series.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["t", "energy", "norm", "rho0", "n1", "n2"]
    assert len(rows) >= 2 and float(rows[-1][1]) == pytest.approx(5.0, abs=1e-9)
    with open(tmp_path / "out" / "run_density.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["x", "rho"] and len(rows) == 102
    # full double precision
    assert len(rows[1][1].replace("-", "").replace(".", "").split("e")[0]) >= 15


def test_runs_are_deterministic(tmp_path):
    data = {"particles": 4, "orbitals": 2, "scheme": "full", "seed": 5,
            "interaction": {"kind": "contact", "strength": 0.5}}
    results = []
    for k in range(2):
        cfg = write_config(tmp_path, dict(data, output={"directory": str(tmp_path / "out"), "prefix": f"r{k}"}))
        assert main(["run", cfg]) == 0
        s = read_summary(tmp_path, f"r{k}")
        s.pop("wall_time_s")
        results.append(s)
    assert results[0] == results[1]
    a = (tmp_path / "out" / "r0_series.csv").read_text()
    b = (tmp_path / "out" / "r1_series.csv").read_text()
    assert a == b


def test_quench_task(tmp_path):
    cfg = write_config(tmp_path, {"particles": 4, "orbitals": 1, "interaction": {"kind": "harmonic", "strength": 0.0},
                                  "task": {"kind": "quench", "strength": 0.1, "t_final": 8.0,
                                           "sample_interval": 0.05}})
    assert main(["run", cfg]) == 0
    s = read_summary(tmp_path)
    assert s["breathing_frequency_analytic"] == pytest.approx(2 * (1 + 2 * 4 * 0.1) ** 0.5)
    assert s["energy_drift"] < 1e-6 and s["norm_drift"] < 1e-8
    with open(tmp_path / "out" / "run_series.csv") as fh:
        assert sum(1 for _ in fh) == 162
    assert s["breathing_frequency"] > 0


@pytest.mark.parametrize("data,field", [
    ({"particles": 0}, "particles"),
    ({"particles": 3, "scheme": "odd:2"}, "scheme"),
    ({"particles": 3, "grid": {"x_min": 1, "x_max": -1}}, "grid"),
    ({"particles": 3, "integrator": {"dt": -1}}, "integrator.dt"),
    ({"particles": 3, "task": {"kind": "dance"}}, "task"),
    ({"particles": 3, "colour": "red"}, "colour"),
    ({"particles": 3, "orbitals": 2, "m1": 3}, "m1"),
])
def test_invalid_config_exits_2(tmp_path, capsys, data, field):
    assert main(["run", write_config(tmp_path, data)]) == 2
    err = capsys.readouterr().err
    assert "invalid config" in err
    assert field.split(".")[0] in err


def test_unreadable_config(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(str(bad))
    assert main(["run", str(bad)]) == 2
    assert main(["run", str(tmp_path / "missing.json")]) == 2


def test_propagation_failure_exits_3(tmp_path, capsys):
    cfg = write_config(tmp_path, {"particles": 2, "orbitals": 1,
                                  "integrator": {"abs_tol": 1e-300, "rel_tol": 1e-300},
                                  "task": {"kind": "quench", "strength": 0.5, "t_final": 1.0}})
    assert main(["run", cfg]) == 3
    assert "last good time" in capsys.readouterr().err


def test_tables_empty(tmp_path):
    cfg = write_config(tmp_path, {"particles": 4, "cells": []})
    assert main(["tables", cfg]) == 0
    assert json.loads((tmp_path / "out" / "run_table.json").read_text()) == []
    assert (tmp_path / "out" / "run_table.csv").read_text().splitlines() == [
        "label,orbitals,m1,scheme,energy,dim,status"]


def test_tables_cells_and_failures(tmp_path):
    cfg = write_config(tmp_path, {
        "particles": 4, "interaction": {"kind": "contact", "strength": 0.5},
        "cells": [
            {"label": "GP", "orbitals": 1},
            {"label": "full", "orbitals": 3},
            {"label": "top", "orbitals": 3, "m1": 1, "scheme": "general:4"},
            {"label": "broken", "orbitals": 2, "m1": 3, "scheme": "general:1"},
        ]})
    assert main(["tables", cfg]) == 0
    rows = {r["label"]: r for r in json.loads((tmp_path / "out" / "run_table.json").read_text())}
    assert rows["GP"]["dim"] == 1
    assert rows["full"]["dim"] == rows["top"]["dim"] == 15
    assert abs(rows["full"]["energy"] - rows["top"]["energy"]) < 1e-8
    assert rows["GP"]["energy"] > rows["full"]["energy"]
    assert rows["broken"]["status"].startswith("failed") and rows["broken"]["energy"] is None


def test_tables_parallel_matches_serial(tmp_path, monkeypatch):
    data = {"particles": 3, "interaction": {"kind": "contact", "strength": 0.5},
            "cells": [{"orbitals": 1}, {"orbitals": 2}]}
    assert main(["tables", write_config(tmp_path, dict(data, output={"directory": str(tmp_path / "s"),
                                                                       "prefix": "t"}))]) == 0
    monkeypatch.setenv("TDRASB_MAX_WORKERS", "2")
    assert main(["tables", write_config(tmp_path, dict(data, output={"directory": str(tmp_path / "p"),
                                                                       "prefix": "t"}))]) == 0
    serial = json.loads((tmp_path / "s" / "t_table.json").read_text())
    parallel = json.loads((tmp_path / "p" / "t_table.json").read_text())
    assert serial == parallel


def test_module_entry_point(tmp_path):
    cfg = write_config(tmp_path, {"particles": 100, "orbitals": 2, "m1": 1, "scheme": "even:2",
                                  "task": {"kind": "dims"}})
    out = subprocess.run([sys.executable, "-m", "tdrasb", "run", cfg], capture_output=True, text=True)
    assert out.returncode == 0
    assert json.loads(out.stdout)["dim"] == 2
