import json
import os
from importlib import resources

import numpy as np
import pytest

from nslab.cli import main
from nslab.config import canonical_json


def bundled(name):
    return str(resources.files("nslab") / "configs" / name)


@pytest.fixture()
def small_circle_config(tmp_path):
    cfg = {
        "dim": 2,
        "chart": {"family": "euclidean"},
        "symbol": {"coefficients": {"0": -1.0,
                                    "2": [[1.0, 0.0], [0.0, 1.0]]}},
        "front": {"family": "circle", "radius": 1.0, "samples": 16,
                  "orient_seed": [1.0, 0.0]},
        "flow": {"form": "modified", "t_end": 0.5, "dt": 0.005,
                 "snapshot_times": [0.25, 0.5], "record_every": 20},
        "output": {"formats": ["csv", "dat", "json"]},
    }
    path = tmp_path / "circle.json"
    path.write_text(json.dumps(cfg))
    return str(path), cfg


def read_bytes(path):
    with open(path, "rb") as fh:
        return fh.read()


def test_simulate_writes_expected_files(small_circle_config, tmp_path):
    path, _ = small_circle_config
    out = tmp_path / "out"
    assert main(["simulate", "--config", path, "--out", str(out)]) == 0
    names = sorted(os.listdir(out))
    assert names == ["fronts.csv", "fronts.dat", "report.json",
                     "trajectories.csv", "trajectories.dat"]
    lines = (out / "fronts.csv").read_text().splitlines()
    # header plus 16 samples for each of t = 0, 0.25, 0.5
    assert len(lines) == 1 + 16 * 3
    header = lines[0].split(",")
    assert header == ["t", "sample_index", "param1", "x1", "x2",
                      "N1", "N2", "nu", "phase"]
    # rows ordered by t then sample index
    keys = [(float(l.split(",")[0]), int(l.split(",")[1]))
            for l in lines[1:]]
    assert keys == sorted(keys)


def test_simulate_phase_column_is_flat(small_circle_config, tmp_path):
    path, _ = small_circle_config
    out = tmp_path / "out"
    main(["simulate", "--config", path, "--out", str(out)])
    lines = (out / "fronts.csv").read_text().splitlines()[1:]
    by_t = {}
    for line in lines:
        cells = line.split(",")
        by_t.setdefault(cells[0], []).append(float(cells[-1]))
    for t, phases in by_t.items():
        assert max(phases) - min(phases) <= 1e-8


def test_simulate_deterministic_bytes(small_circle_config, tmp_path):
    path, _ = small_circle_config
    out1, out2 = tmp_path / "a", tmp_path / "b"
    main(["simulate", "--config", path, "--out", str(out1)])
    main(["simulate", "--config", path, "--out", str(out2)])
    for name in os.listdir(out1):
        assert read_bytes(out1 / name) == read_bytes(out2 / name), name


def test_threads_do_not_change_bytes(small_circle_config, tmp_path,
                                     monkeypatch):
    path, _ = small_circle_config
    out1, out2 = tmp_path / "a", tmp_path / "b"
    main(["simulate", "--config", path, "--out", str(out1)])
    monkeypatch.setenv("NS_LAB_THREADS", "4")
    main(["simulate", "--config", path, "--out", str(out2)])
    for name in os.listdir(out1):
        assert read_bytes(out1 / name) == read_bytes(out2 / name), name


def test_report_echoes_config_canonically(small_circle_config, tmp_path):
    path, raw = small_circle_config
    out = tmp_path / "out"
    main(["simulate", "--config", path, "--out", str(out)])
    report = json.loads((out / "report.json").read_text())
    assert canonical_json(report["config"]) == canonical_json(raw)
    assert report["tool"]["name"] == "nslab"
    assert "conservation" in report["diagnostics"]


def test_config_error_exit_code(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"dim": 2}))
    assert main(["simulate", "--config", str(bad),
                 "--out", str(tmp_path / "o")]) == 1
    notjson = tmp_path / "notjson.json"
    notjson.write_text("{nope")
    assert main(["simulate", "--config", str(notjson),
                 "--out", str(tmp_path / "o")]) == 1


def test_numeric_error_exit_code(small_circle_config, tmp_path):
    path, raw = small_circle_config
    raw = dict(raw)
    raw["symbol"] = {"coefficients": {"0": 1.0,
                                      "2": [[1.0, 0.0], [0.0, 1.0]]}}
    bad = tmp_path / "no_root.json"
    bad.write_text(json.dumps(raw))
    rc = main(["simulate", "--config", str(bad),
               "--out", str(tmp_path / "o")])
    assert rc == 2


def test_nu_subcommand(small_circle_config, capsys):
    path, _ = small_circle_config
    assert main(["nu", "--config", path]) == 0
    out = capsys.readouterr().out
    lines = out.strip().splitlines()
    assert lines[0].startswith("sample_index,")
    assert len(lines) == 1 + 16 + 1     # header, rows, summary
    assert lines[-1].startswith("# min |nu|")
    nu_vals = [float(l.split(",")[3]) for l in lines[1:-1]]
    assert np.allclose(nu_vals, 1.0)


def test_derive_force_stdout_and_file(tmp_path, capsys):
    cfg = {
        "dim": 2,
        "chart": {"family": "euclidean"},
        "energy": {"W": "1/u^2 - (1 + 0.2*x1)^2"},
        "h": {"kind": "zero"},
        "front": {"family": "segment", "start": [-0.5, 0.0],
                  "end": [0.5, 0.0], "samples": 4,
                  "orient_seed": [0.0, 1.0]},
        "flow": {"form": "newtonian", "t_end": 0.1, "dt": 0.01},
    }
    path = tmp_path / "force.json"
    path.write_text(json.dumps(cfg))
    grid = "x1=0:0:1,x2=0:0:1,u1=1:1:1,u2=0:0:1"
    assert main(["derive-force", "--config", str(path),
                 "--grid", grid]) == 0
    out = capsys.readouterr().out.strip().splitlines()
    assert out[0] == "x1,x2,u1,u2,Fwf1,Fwf2,Fns1,Fns2"
    cells = out[1].split(",")
    # frozen oracle value; the expression-backed energy differentiates
    # with 4th-order stencils, hence the loosened tolerance
    assert float(cells[4]) == pytest.approx(-0.2, abs=1e-10)
    # h == 0: the general force column matches bitwise
    assert cells[6:8] == cells[4:6]

    outdir = tmp_path / "fout"
    assert main(["derive-force", "--config", str(path), "--grid",
                 "x1=-0.4:0.4:3,x2=0:0:1,u1=0.5:1.5:3,u2=-0.5:0.5:3",
                 "--out", str(outdir)]) == 0
    lines = (outdir / "force.csv").read_text().splitlines()
    assert len(lines) == 1 + 3 * 1 * 3 * 3


def test_derive_force_symbol_source_off_origin_chart(tmp_path, capsys):
    # symbol-derived energy chain, probed at a front point (the polar
    # chart has no origin to probe at)
    cfg = {
        "dim": 2,
        "chart": {"family": "polar"},
        "symbol": {"coefficients": {"0": -1.0, "2": "inverse_metric"}},
        "front": {"family": "expression", "embed": ["1", "t1"],
                  "ranges": [[0.0, 6.283185307179586]], "samples": [8],
                  "periodic": [True], "orient_seed": [1.0, 0.0]},
        "flow": {"form": "newtonian", "t_end": 0.1, "dt": 0.01},
    }
    path = tmp_path / "polar.json"
    path.write_text(json.dumps(cfg))
    assert main(["derive-force", "--config", str(path),
                 "--grid", "x1=1:2:2,x2=0:0:1,u1=0.3:0.6:2,u2=0:0:1"]) == 0
    out = capsys.readouterr().out.strip().splitlines()
    assert len(out) == 1 + 2 * 1 * 2 * 1
    # geodesic medium: no spatial gradient, the force vanishes
    for line in out[1:]:
        forces = [float(v) for v in line.split(",")[4:]]
        assert max(abs(f) for f in forces) < 1e-7


def test_derive_force_grid_errors(tmp_path):
    cfg = {
        "dim": 2, "chart": {"family": "euclidean"},
        "energy": {"W": "1/u^2 - 1"},
        "front": {"family": "segment", "start": [-0.5, 0.0],
                  "end": [0.5, 0.0], "samples": 4,
                  "orient_seed": [0.0, 1.0]},
        "flow": {"form": "newtonian", "t_end": 0.1, "dt": 0.01},
    }
    path = tmp_path / "force.json"
    path.write_text(json.dumps(cfg))
    assert main(["derive-force", "--config", str(path),
                 "--grid", "x1=0:0:1"]) == 1
    assert main(["derive-force", "--config", str(path),
                 "--grid", "garbage"]) == 1


def test_check_suite_fast(capsys):
    assert main(["check", "--suite", "hzero"]) == 0
    out = capsys.readouterr().out
    assert "PASS  5" in out


def test_check_determinism_suite(small_circle_config, capsys):
    path, _ = small_circle_config
    assert main(["check", "--suite", "determinism", "--config", path]) == 0
    out = capsys.readouterr().out
    assert "byte-identical" in out
    assert main(["check", "--suite", "determinism"]) == 1


def test_check_reports_failures(monkeypatch, capsys):
    import nslab.acceptance as acc
    from nslab.acceptance import CriterionResult

    def fake():
        return CriterionResult(5, "h-zero-coincidence", False, "forced")

    monkeypatch.setitem(acc.CRITERIA, 5, fake)
    assert main(["check", "--suite", "hzero"]) == 2
    assert "FAIL" in capsys.readouterr().out


def test_bundled_configs_validate():
    from nslab.config import load_config, validate
    for name in ("flat_circle.json", "linear_index_segment.json",
                 "sphere_latitude.json", "newtonian_linear_index.json"):
        sim = validate(load_config(bundled(name)))
        assert sim.stepper.t_end > 0
