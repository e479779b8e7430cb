#!/usr/bin/env python3
"""The configuration-file pipeline, end to end.

Writes a small config, runs the `simulate`, `nu` and `derive-force`
subcommands through the CLI entry point, and peeks at the exported
files.  Everything the CLI writes is byte-deterministic for a fixed
config, which the last step double-checks.
"""
import json
import pathlib
import tempfile

from nslab.cli import main


CONFIG = {
    "dim": 2,
    "chart": {"family": "euclidean"},
    "symbol": {"coefficients": {"0": "-(1 + 0.2*x1)^2",
                                "2": [[1.0, 0.0], [0.0, 1.0]]}},
    "front": {"family": "segment", "start": [-0.5, 0.0], "end": [0.5, 0.0],
              "samples": 32, "orient_seed": [0.0, 1.0],
              "branch": "positive"},
    "flow": {"form": "modified", "method": "rk4", "dt": 0.001,
             "t_end": 0.5, "snapshot_times": [0.25, 0.5],
             "record_every": 100},
    "output": {"formats": ["csv", "dat", "json"]},
}


def run(tmp):
    cfg_path = tmp / "run.json"
    cfg_path.write_text(json.dumps(CONFIG, indent=2))

    print("== simulate ==")
    main(["simulate", "--config", str(cfg_path), "--out", str(tmp / "out")])
    fronts = (tmp / "out" / "fronts.csv").read_text().splitlines()
    print(f"fronts.csv: {len(fronts) - 1} rows, header: {fronts[0]}")

    print("\n== nu report (first lines) ==")
    main(["nu", "--config", str(cfg_path)])

    print("\n== derive-force on a 2x1x2x2 state grid ==")
    force_cfg = dict(CONFIG)
    del force_cfg["symbol"]
    force_cfg["energy"] = {"W": "1/u^2 - (1 + 0.2*x1)^2"}
    force_cfg["h"] = {"kind": "zero"}
    force_cfg["flow"] = dict(CONFIG["flow"], form="newtonian")
    fpath = tmp / "force.json"
    fpath.write_text(json.dumps(force_cfg))
    main(["derive-force", "--config", str(fpath),
          "--grid", "x1=-0.4:0.4:2,x2=0:0:1,u1=0.6:1.2:2,u2=-0.3:0.3:2"])

    print("\n== determinism check ==")
    main(["check", "--suite", "determinism", "--config", str(cfg_path)])


if __name__ == "__main__":
    with tempfile.TemporaryDirectory() as tmpdir:
        run(pathlib.Path(tmpdir))
