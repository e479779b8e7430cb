"""Command-line entry point: simulate, check, nu, derive-force.

Outputs are bit-deterministic for a fixed config: iteration orders are
fixed, floats are printed with 17 significant digits, and report.json
echoes the input config under a canonical serialization.  Exit codes:
0 ok, 1 config error, 2 numeric failure, 3 I/O error.
"""
import argparse
import itertools
import math
import os
import sys

import numpy as np

from . import __version__
from .acceptance import SUITES, run_suite
from .config import (SimConfig, build_front_mesh, canonical_json,
                     load_config, validate)
from .errors import ConfigError, NslabError, NumericError
from .flow import conservation_report
from .forces import make_force
from .front import (NewtonianSetup, matched_initial, shell_initial,
                    shift_front, solve_nu)
from .legendre import StateU, build_energy, spherical_from_symbol

_EXIT_CONFIG = 1
_EXIT_NUMERIC = 2
_EXIT_IO = 3


def f17(value):
    """17-significant-digit rendering; NaN and None print as nan."""
    if value is None:
        return "nan"
    value = float(value)
    if math.isnan(value):
        return "nan"
    return f"{value:.17g}"


def _writer(path, lines):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for line in lines:
            fh.write(line)
            fh.write("\n")


def _param_names(mesh):
    return [f"param{a + 1}" for a in range(len(mesh.params))]


def _param_values(mesh):
    axes = [np.asarray(p) for p in mesh.params]
    grids = np.meshgrid(*axes, indexing="ij") if axes else []
    return np.stack([g.reshape(-1) for g in grids], axis=1)


def fronts_csv_lines(result):
    """Rows ordered by t then sample_index."""
    mesh0 = result.fronts[0][1]
    dim = mesh0.dim
    header = (["t", "sample_index"] + _param_names(mesh0)
              + [f"x{i + 1}" for i in range(dim)]
              + [f"N{i + 1}" for i in range(dim)] + ["nu", "phase"])
    lines = [",".join(header)]
    for t, mesh in result.fronts:
        pts = mesh.flat_points()
        nrm = mesh.flat_normals()
        nu = mesh.flat_nu()
        ph = mesh.flat_phase()
        pvals = _param_values(mesh)
        for i in range(mesh.n_samples):
            row = [f17(t), str(i)]
            row += [f17(v) for v in pvals[i]]
            row += [f17(v) for v in pts[i]]
            row += [f17(v) for v in nrm[i]]
            row.append(f17(None if nu is None else nu[i]))
            row.append(f17(ph[i]))
            lines.append(",".join(row))
    return lines


def trajectories_csv_lines(result, form):
    """Rows ordered by sample_index then t."""
    dim = result.fronts[0][1].dim
    fiber = "p" if form in ("hamilton", "modified") else "u"
    header = (["t", "sample_index"] + [f"x{i + 1}" for i in range(dim)]
              + [f"{fiber}{i + 1}" for i in range(dim)]
              + ["s", "H", "Omega", "W"])
    lines = [",".join(header)]
    for i, traj in enumerate(result.trajectories):
        mon = traj.monitors
        for k, t in enumerate(traj.times):
            st = traj.states[k]
            comps = st.p if fiber == "p" else st.u
            row = [f17(t), str(i)]
            row += [f17(v) for v in st.x]
            row += [f17(v) for v in comps]
            row.append(f17(st.s))
            row += [f17(mon["H"][k]), f17(mon["Omega"][k]),
                    f17(mon["W"][k])]
            lines.append(",".join(row))
    return lines


def _dat_from_csv(lines):
    """Gnuplot variant: comment header, space separation, blank line
    between blocks (change of the leading column)."""
    out = [f"# {lines[0].replace(',', ' ')}"]
    prev_key = None
    for line in lines[1:]:
        cells = line.split(",")
        key = cells[0]
        if prev_key is not None and key != prev_key:
            out.append("")
        out.append(" ".join(cells))
        prev_key = key
    return out


def _dat_trajectories(lines):
    out = [f"# {lines[0].replace(',', ' ')}"]
    prev = None
    for line in lines[1:]:
        cells = line.split(",")
        key = cells[1]
        if prev is not None and key != prev:
            out.append("")
        out.append(" ".join(cells))
        prev = key
    return out


def export(result, sim: SimConfig, out_dir):
    """Write fronts/trajectories/report files; returns written paths."""
    os.makedirs(out_dir, exist_ok=True)
    written = []
    front_lines = fronts_csv_lines(result)
    traj_lines = trajectories_csv_lines(result, sim.flow_form)
    if "csv" in sim.formats:
        for name, lines in (("fronts.csv", front_lines),
                            ("trajectories.csv", traj_lines)):
            path = os.path.join(out_dir, name)
            _writer(path, lines)
            written.append(name)
    if "dat" in sim.formats:
        path = os.path.join(out_dir, "fronts.dat")
        _writer(path, _dat_from_csv(front_lines))
        written.append("fronts.dat")
        path = os.path.join(out_dir, "trajectories.dat")
        _writer(path, _dat_trajectories(traj_lines))
        written.append("trajectories.dat")

    reports = [conservation_report(tr) for tr in result.trajectories]
    h_drifts = [r.h_drift for r in reports if r.h_drift is not None]
    w_drifts = [r.w_drift for r in reports if r.w_drift is not None]
    omega_mins = [r.omega_min for r in reports if r.omega_min is not None]
    report = {
        "tool": {"name": "nslab", "version": __version__},
        "config": sim.raw,
        "diagnostics": {
            "snapshots": [
                {"t": d["t"], "phase_spread": d["phase_spread"],
                 "normality_deviation": d["normality_deviation"]}
                for d in result.diagnostics],
            "conservation": {
                "H_drift": max(h_drifts) if h_drifts else None,
                "W_drift": max(w_drifts) if w_drifts else None,
                "Omega_min": min(omega_mins) if omega_mins else None,
            },
        },
        "outputs": sorted(written + ["report.json"])
        if "json" in sim.formats else sorted(written),
    }
    if "json" in sim.formats:
        path = os.path.join(out_dir, "report.json")
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(canonical_json(report))
            fh.write("\n")
        written.append("report.json")
    return written, report


def _dynamics_for(sim: SimConfig, mesh):
    """The shift_front dynamics argument plus the solved mesh."""
    chart = sim.chart
    if sim.flow_form in ("hamilton", "modified"):
        mesh = solve_nu(sim.symbol, chart, mesh,
                        branch=sim.front_spec.get("branch", "positive"),
                        guess=sim.front_spec.get("branch_guess"))
        return sim.symbol, mesh
    # newtonian
    if sim.source_kind == "energy":
        energy = sim.energy
        initial = shell_initial(energy)
    elif sim.source_kind == "lagrangian":
        lag = sim.lagrangian
        x_ref = mesh.flat_points()[0]
        v_ref = 0.5 * (lag.v_range[0] + lag.v_range[1])
        energy = build_energy(lag, x_ref=x_ref, v_ref=min(v_ref, 1.0))
        initial = shell_initial(energy)
    else:
        mesh = solve_nu(sim.symbol, chart, mesh,
                        branch=sim.front_spec.get("branch", "positive"),
                        guess=sim.front_spec.get("branch_guess"))
        lag = spherical_from_symbol(sim.symbol, chart,
                                    probes=[mesh.flat_points()[0]])
        energy = build_energy(lag, x_ref=mesh.flat_points()[0], v_ref=1.0)
        initial = matched_initial(sim.symbol)
    force = make_force(energy, chart, h=sim.h)
    return NewtonianSetup(force=force, initial_u=initial), mesh


def _threads():
    raw = os.environ.get("NS_LAB_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"NS_LAB_THREADS must be an integer, got {raw!r}")


def run(sim: SimConfig, out_dir):
    """Full simulate pipeline on a validated config."""
    stage = "front"
    try:
        mesh = build_front_mesh(sim)
        stage = "solve_nu"
        dynamics, mesh = _dynamics_for(sim, mesh)
        stage = "shift"
        result = shift_front(dynamics, sim.chart, mesh, sim.flow_form,
                             sim.stepper, snapshot_times=sim.snapshot_times,
                             threads=_threads())
        stage = "export"
        written, report = export(result, sim, out_dir)
    except NumericError as exc:
        raise NumericError(f"stage {stage}: {exc}") from exc
    return written, report


# -- subcommands ---------------------------------------------------------------

def _cmd_simulate(args):
    sim = validate(load_config(args.config))
    written, report = run(sim, args.out)
    for d in report["diagnostics"]["snapshots"]:
        print(f"t={f17(d['t'])} phase_spread={f17(d['phase_spread'])} "
              f"normality_deviation={f17(d['normality_deviation'])}")
    print(f"wrote {', '.join(sorted(written))} to {args.out}")
    return 0


def _cmd_check(args):
    if args.suite == "determinism":
        return _check_determinism(args)
    results = run_suite(args.suite)
    failed = 0
    for res in results:
        print(res.line())
        failed += 0 if res.passed else 1
    if failed:
        print(f"{failed} criterion(s) failed")
        return _EXIT_NUMERIC
    return 0


def _check_determinism(args):
    if not args.config:
        raise ConfigError("check --suite determinism needs --config")
    import tempfile
    sim = validate(load_config(args.config))
    with tempfile.TemporaryDirectory() as tmp:
        dir_a = os.path.join(tmp, "a")
        dir_b = os.path.join(tmp, "b")
        files_a, _ = run(sim, dir_a)
        files_b, _ = run(validate(load_config(args.config)), dir_b)
        if sorted(files_a) != sorted(files_b):
            print("FAIL determinism: file sets differ")
            return _EXIT_NUMERIC
        for name in sorted(files_a):
            with open(os.path.join(dir_a, name), "rb") as fh:
                blob_a = fh.read()
            with open(os.path.join(dir_b, name), "rb") as fh:
                blob_b = fh.read()
            if blob_a != blob_b:
                print(f"FAIL determinism: {name} differs between runs")
                return _EXIT_NUMERIC
    print(f"PASS determinism: {len(files_a)} files byte-identical")
    return 0


def _cmd_nu(args):
    sim = validate(load_config(args.config))
    if sim.symbol is None:
        raise ConfigError("nu solving needs a symbol source")
    mesh = build_front_mesh(sim)
    mesh = solve_nu(sim.symbol, sim.chart, mesh,
                    branch=sim.front_spec.get("branch", "positive"),
                    guess=sim.front_spec.get("branch_guess"))
    pts = mesh.flat_points()
    nrm = mesh.flat_normals()
    nu = mesh.flat_nu()
    print("sample_index," + ",".join(f"x{i+1}" for i in range(mesh.dim))
          + ",nu,Omega")
    omegas = []
    for i in range(mesh.n_samples):
        p = nu[i] * sim.chart.lower(pts[i], nrm[i])
        omega = sim.symbol.phase_rate(pts[i], p)
        omegas.append(omega)
        print(f"{i}," + ",".join(f17(v) for v in pts[i])
              + f",{f17(nu[i])},{f17(omega)}")
    print(f"# min |nu| = {f17(np.min(np.abs(nu)))}, "
          f"min |Omega| = {f17(np.min(np.abs(omegas)))}")
    return 0


def _parse_grid(spec, dim):
    """'x1=a:b:n,...,u2=a:b:n' -> ordered axis list for x and u."""
    axes = {}
    for part in spec.split(","):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise ConfigError(f"grid entry {part!r} must look like "
                              f"var=lo:hi:count")
        name, rng = part.split("=", 1)
        pieces = rng.split(":")
        if len(pieces) != 3:
            raise ConfigError(f"grid entry {part!r} must look like "
                              f"var=lo:hi:count")
        lo, hi, count = float(pieces[0]), float(pieces[1]), int(pieces[2])
        if count < 1:
            raise ConfigError(f"grid entry {part!r}: count must be >= 1")
        axes[name.strip()] = np.linspace(lo, hi, count)
    names = [f"x{i+1}" for i in range(dim)] + [f"u{i+1}" for i in range(dim)]
    missing = [n for n in names if n not in axes]
    if missing:
        raise ConfigError(f"grid is missing axes: {missing}")
    return names, [axes[n] for n in names]


def _cmd_derive_force(args):
    sim = validate(load_config(args.config))
    chart = sim.chart
    if sim.source_kind == "energy":
        energy = sim.energy
    elif sim.source_kind == "lagrangian":
        lag = sim.lagrangian
        x_ref = build_front_mesh(sim).flat_points()[0]
        v_mid = min(0.5 * (lag.v_range[0] + lag.v_range[1]), 1.0)
        energy = build_energy(lag, x_ref=x_ref, v_ref=v_mid)
    else:
        x_ref = build_front_mesh(sim).flat_points()[0]
        lag = spherical_from_symbol(sim.symbol, chart, probes=[x_ref])
        energy = build_energy(lag, x_ref=x_ref, v_ref=1.0)
    wf = make_force(energy, chart, h=None)
    h_fn = sim.h if sim.h is not None else (lambda w: 0.0)
    ns = make_force(energy, chart, h=h_fn)

    names, axes = _parse_grid(args.grid, chart.dim)
    dim = chart.dim
    header = (names + [f"Fwf{i+1}" for i in range(dim)]
              + [f"Fns{i+1}" for i in range(dim)])
    lines = [",".join(header)]
    for values in itertools.product(*axes):
        x = np.array(values[:dim])
        u = np.array(values[dim:])
        st = StateU(x=x, u=u)
        fa = wf.eval(st)
        fb = ns.eval(st)
        lines.append(",".join([f17(v) for v in values]
                              + [f17(v) for v in fa]
                              + [f17(v) for v in fb]))
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, "force.csv")
        _writer(path, lines)
        print(f"wrote force.csv ({len(lines) - 1} states) to {args.out}")
    else:
        for line in lines:
            print(line)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="nslab",
        description="Wave-front dynamics and normal-shift force fields")
    parser.add_argument("--version", action="version",
                        version=f"nslab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run a configured front shift")
    p_sim.add_argument("--config", required=True)
    p_sim.add_argument("--out", required=True)
    p_sim.set_defaults(fn=_cmd_simulate)

    p_chk = sub.add_parser("check", help="run invariant suites")
    p_chk.add_argument("--suite", required=True,
                       choices=sorted(SUITES) + ["determinism"])
    p_chk.add_argument("--config")
    p_chk.set_defaults(fn=_cmd_check)

    p_nu = sub.add_parser("nu", help="solve and report front momentum "
                                     "scales")
    p_nu.add_argument("--config", required=True)
    p_nu.set_defaults(fn=_cmd_nu)

    p_df = sub.add_parser("derive-force",
                          help="tabulate force fields on a state grid")
    p_df.add_argument("--config", required=True)
    p_df.add_argument("--grid", required=True)
    p_df.add_argument("--out")
    p_df.set_defaults(fn=_cmd_derive_force)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return _EXIT_CONFIG
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return _EXIT_NUMERIC
    except NslabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _EXIT_NUMERIC
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return _EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
