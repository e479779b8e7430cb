"""Sampled hypersurface fronts: construction, unit normals, eikonal
initial data, whole-front shifting and the coincidence/normality
diagnostics.

Fronts are parametric sample lattices, not level-set grids: every
sample is shifted along its own ray and the phase is carried along the
trajectory, so the phase function is reconstructed constructively
rather than by PDE solving.  Per-sample integrations share no mutable
state and may fan out across threads.
"""
import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq

from .errors import (FrontShiftError, IrregularDataError, NoAdmissibleNuError,
                     NumericError, OrientationError,
                     SingularParametrizationError)
from .flow import (HamiltonFlow, NewtonianFlow, StepperConfig, WavefrontFlow,
                   integrate)
from .forces import ForceField
from .legendre import StateP, StateU

_NU_FLOOR = 1e-8


@dataclass(frozen=True, eq=False)
class FrontMesh:
    """A sampled parametric hypersurface.

    ``params`` holds one uniformly spaced 1-D array per parameter axis;
    ``points`` and ``normals`` have shape grid_shape + (n,), ``nu`` and
    ``phase`` shape grid_shape.  ``nu`` is None until solved.  Normals
    are metric-unit and consistently oriented.  Axes flagged periodic
    (closed curves) use wrap-around tangent stencils.
    """
    params: tuple
    points: np.ndarray
    normals: np.ndarray
    phase: np.ndarray
    nu: Optional[np.ndarray] = None
    periodic: tuple = ()

    @property
    def grid_shape(self):
        return tuple(len(p) for p in self.params)

    @property
    def n_samples(self):
        return int(np.prod(self.grid_shape))

    @property
    def dim(self):
        return self.points.shape[-1]

    def flat_points(self):
        return self.points.reshape(self.n_samples, self.dim)

    def flat_normals(self):
        return self.normals.reshape(self.n_samples, self.dim)

    def flat_nu(self):
        return None if self.nu is None else self.nu.reshape(self.n_samples)

    def flat_phase(self):
        return self.phase.reshape(self.n_samples)

    def spacings(self):
        return tuple(p[1] - p[0] for p in self.params)

    def tangents(self):
        """Discrete tangents d(point)/d(param_a), shape grid + (axes, n).

        Second-order central differences inside; periodic axes wrap,
        open axes use one-sided three-point boundary stencils (plain
        difference on two-sample axes).
        """
        return _lattice_tangents(self.points, self.spacings(),
                                 self.periodic)


def _lattice_tangents(points, spacings, periodic=()):
    shape = points.shape[:-1]
    n_axes = len(shape)
    wrap = tuple(periodic) + (False,) * (n_axes - len(periodic))
    out = np.empty(shape + (n_axes, points.shape[-1]))
    for a, h in enumerate(spacings):
        pts = np.moveaxis(points, a, 0)
        dst = np.moveaxis(out[..., a, :], a, 0)
        m = pts.shape[0]
        if m < 2:
            raise SingularParametrizationError(
                "parameter axis needs at least 2 samples")
        if wrap[a]:
            dst[:] = (np.roll(pts, -1, axis=0)
                      - np.roll(pts, 1, axis=0)) / (2.0 * h)
            continue
        if m == 2:
            dst[0] = dst[1] = (pts[1] - pts[0]) / h
            continue
        dst[1:-1] = (pts[2:] - pts[:-2]) / (2.0 * h)
        dst[0] = (-3.0 * pts[0] + 4.0 * pts[1] - pts[2]) / (2.0 * h)
        dst[-1] = (3.0 * pts[-1] - 4.0 * pts[-2] + pts[-3]) / (2.0 * h)
    return out


def _unsigned_normal(chart, x, tangent_rows):
    """Metric Gram-Schmidt: unit vector g-orthogonal to all tangents."""
    g = chart.metric_at(x)
    frame = []
    for t_vec in tangent_rows:
        w = np.array(t_vec, dtype=float)
        t_norm = np.sqrt(max(float(t_vec @ g @ t_vec), 0.0))
        for b in frame:
            w = w - float(b @ g @ w) * b
        w_norm = np.sqrt(max(float(w @ g @ w), 0.0))
        if w_norm <= 1e-10 * max(t_norm, 1e-300):
            raise SingularParametrizationError(
                f"singular parametrization at x={x}")
        frame.append(w / w_norm)
    best, best_norm = None, -1.0
    for k in range(chart.dim):
        w = np.zeros(chart.dim)
        w[k] = 1.0
        for b in frame:
            w = w - float(b @ g @ w) * b
        w_norm = np.sqrt(max(float(w @ g @ w), 0.0))
        if w_norm > best_norm:
            best, best_norm = w, w_norm
    if best_norm <= 1e-12:
        raise SingularParametrizationError(
            f"no direction transversal to the tangent frame at x={x}")
    return best / best_norm


def _orient(chart, points, normals, seed):
    """Sign normals consistently: the seed fixes the sign at the first
    lattice sample, adjacency propagation does the rest."""
    shape = points.shape[:-1]
    flat_pts = points.reshape(-1, points.shape[-1])
    flat_nrm = normals.reshape(-1, points.shape[-1])
    n_flat = flat_pts.shape[0]
    anchor = 0
    align = chart.inner(flat_pts[anchor], flat_nrm[anchor], seed)
    if abs(align) <= 1e-10:
        raise OrientationError(
            "orientation ambiguity: normal at the first sample is "
            "orthogonal to orient_seed")
    if align < 0:
        flat_nrm[anchor] = -flat_nrm[anchor]

    multi = np.unravel_index(np.arange(n_flat), shape)
    coords = np.stack(multi, axis=1)
    index_of = {tuple(c): i for i, c in enumerate(coords)}
    seen = np.zeros(n_flat, dtype=bool)
    seen[anchor] = True
    queue = [anchor]
    while queue:
        i = queue.pop()
        ci = coords[i]
        for a in range(len(shape)):
            for step in (-1, 1):
                cj = ci.copy()
                cj[a] += step
                j = index_of.get(tuple(cj))
                if j is None or seen[j]:
                    continue
                d = float(flat_nrm[i] @ flat_nrm[j])
                if abs(d) <= 1e-8 * float(
                        np.linalg.norm(flat_nrm[i]) *
                        np.linalg.norm(flat_nrm[j])):
                    raise OrientationError(
                        "orientation ambiguity between adjacent samples")
                if d < 0:
                    flat_nrm[j] = -flat_nrm[j]
                seen[j] = True
                queue.append(j)
    return flat_nrm.reshape(points.shape)


def build_front(chart, embed, params, orient_seed, s0=0.0, periodic=()):
    """Sample an embedded hypersurface and equip it with unit normals.

    ``embed`` maps one parameter value per axis to chart coordinates;
    ``params`` is a sequence of uniformly spaced 1-D parameter arrays
    (one per axis, n-1 of them); ``periodic`` flags axes that close on
    themselves (the sample after the last is the first).  Normals are
    metric-unit, g-orthogonal to the discrete tangents, and oriented
    from ``orient_seed`` at the first sample.
    """
    params = tuple(np.asarray(p, dtype=float) for p in params)
    if len(params) != chart.dim - 1:
        raise SingularParametrizationError(
            f"need {chart.dim - 1} parameter axes, got {len(params)}")
    for p in params:
        if p.size < 2:
            raise SingularParametrizationError(
                "grid needs at least 2 samples per axis")
        steps = np.diff(p)
        if np.max(np.abs(steps - steps[0])) > 1e-9 * max(abs(steps[0]), 1e-12):
            raise SingularParametrizationError(
                "parameter axes must be uniformly spaced")

    periodic = tuple(bool(b) for b in periodic)
    if periodic and len(periodic) != len(params):
        raise SingularParametrizationError(
            "periodic flags must match the number of parameter axes")

    shape = tuple(p.size for p in params)
    points = np.empty(shape + (chart.dim,))
    for idx in itertools.product(*(range(m) for m in shape)):
        vals = [params[a][idx[a]] for a in range(len(shape))]
        points[idx] = chart.check_point(embed(*vals))

    tangents = _lattice_tangents(points, tuple(p[1] - p[0] for p in params),
                                 periodic)
    normals = np.empty_like(points)
    for idx in itertools.product(*(range(m) for m in shape)):
        normals[idx] = _unsigned_normal(chart, points[idx], tangents[idx])
    seed = np.asarray(orient_seed, dtype=float)
    normals = _orient(chart, points, normals, seed)
    return FrontMesh(params=params, points=points, normals=normals,
                     phase=np.full(shape, float(s0)), nu=None,
                     periodic=periodic)


# -- embedding families -------------------------------------------------------

def circle_embedding(center=(0.0, 0.0), radius=1.0):
    cx, cy = center

    def embed(tau):
        return np.array([cx + radius * np.cos(tau),
                         cy + radius * np.sin(tau)])
    return embed


def segment_embedding(start, end):
    a = np.asarray(start, dtype=float)
    b = np.asarray(end, dtype=float)

    def embed(tau):
        return a + tau * (b - a)
    return embed


def latitude_embedding(theta0):
    def embed(phi):
        return np.array([float(theta0), phi])
    return embed


def plane_embedding(origin, spans):
    origin = np.asarray(origin, dtype=float)
    spans = [np.asarray(s, dtype=float) for s in spans]

    def embed(*taus):
        out = origin.copy()
        for tau, span in zip(taus, spans):
            out = out + tau * span
        return out
    return embed


def circle_params(samples):
    """Open periodic parameter row for closed curves: [0, 2pi)."""
    return [np.linspace(0.0, 2.0 * np.pi, samples, endpoint=False)]


# -- eikonal initial data -----------------------------------------------------

def _scan_roots(f, lo, hi, n_scan=48):
    """Sign-change brackets of f on [lo, hi], resolved by brentq."""
    grid = np.linspace(lo, hi, n_scan)
    vals = np.array([f(g) for g in grid])
    roots = []
    for i in range(n_scan - 1):
        a, b, fa, fb = grid[i], grid[i + 1], vals[i], vals[i + 1]
        if fa == 0.0:
            roots.append(a)
        elif fa * fb < 0.0:
            roots.append(brentq(f, a, b, xtol=1e-15,
                                rtol=4 * np.finfo(float).eps))
    if vals[-1] == 0.0:
        roots.append(hi)
    return roots


def _solve_branch(f, branch, guess, nu_floor):
    if branch == "positive":
        lo, hi = nu_floor, 1.0
        for _ in range(24):
            roots = _scan_roots(f, lo, hi)
            if roots:
                return roots[0]
            lo, hi = hi, hi * 2.0
        raise NoAdmissibleNuError("no admissible nu on the positive branch")
    if branch == "negative":
        root = _solve_branch(lambda t: f(-t), "positive", None, nu_floor)
        return -root
    if branch == "nearest":
        if guess is None:
            raise NumericError("nearest branch needs a guess")
        radius = 0.5 * (1.0 + abs(guess))
        for _ in range(8):
            roots = _scan_roots(f, guess - radius, guess + radius, 96)
            roots = [r for r in roots if abs(r) >= nu_floor]
            if roots:
                return min(roots, key=lambda r: abs(r - guess))
            radius *= 2.0
        raise NoAdmissibleNuError(
            f"no admissible nu near guess {guess}")
    raise NumericError(f"unknown branch {branch!r}")


def solve_nu(sym, chart, mesh: FrontMesh, branch="positive", guess=None,
             nu_floor=_NU_FLOOR, omega_floor=None):
    """Momentum scale per sample: nu with H(x, nu * n_cov) = 0.

    The unit normal is lowered to a covector and the polynomial root on
    the requested branch is found by scan-and-bisect.  Regularity is
    then asserted: |nu| >= nu_floor and |Omega| at the front momentum
    above the transversality floor; violations name the failing
    condition.  Returns a copy of the mesh with nu populated.
    """
    flat_pts = mesh.flat_points()
    flat_nrm = mesh.flat_normals()
    nu_vals = np.empty(mesh.n_samples)
    for i in range(mesh.n_samples):
        x = flat_pts[i]
        n_cov = chart.lower(x, flat_nrm[i])

        def f(t):
            return sym.value(x, t * n_cov)

        try:
            nu_i = _solve_branch(f, branch, guess, nu_floor)
        except NoAdmissibleNuError as exc:
            raise NoAdmissibleNuError(f"sample {i}: {exc}") from None
        if abs(nu_i) < nu_floor:
            raise IrregularDataError(
                f"irregular boundary data at sample {i}: nu vanishes")
        omega = sym.phase_rate(x, nu_i * n_cov)
        floor = omega_floor if omega_floor is not None else \
            1e-10 * (1.0 + abs(omega))
        if abs(omega) < floor:
            raise IrregularDataError(
                f"irregular boundary data at sample {i}: transversality "
                f"fails (|Omega|={abs(omega):.3e})")
        nu_vals[i] = nu_i
    return replace(mesh, nu=nu_vals.reshape(mesh.grid_shape))


# -- front shifting -----------------------------------------------------------

@dataclass(frozen=True)
class NewtonianSetup:
    """Force field plus the rule producing the initial actual velocity."""
    force: ForceField
    initial_u: Callable


def matched_initial(sym):
    """Initial u from the front momentum: u = v / Omega at p = nu * n."""
    def initial(chart, x, n_unit, nu):
        if nu is None:
            raise IrregularDataError("matched initial data need solved nu")
        p = nu * chart.lower(x, n_unit)
        v = sym.momentum_gradient(x, p)
        omega = float(p @ v)
        if omega == 0.0:
            raise IrregularDataError("transversality fails at initial data")
        return v / omega
    return initial


def shell_initial(energy):
    """Initial u along the normal with the speed solving W(x, u) = 0."""
    def initial(chart, x, n_unit, nu):
        speed = energy.on_shell_speed(x)
        return speed * np.asarray(n_unit, dtype=float)
    return initial


@dataclass
class ShiftResult:
    """Shifted fronts, per-sample trajectories, per-snapshot diagnostics.

    fronts: list of (t, FrontMesh), t=0 first and equal to the input;
    trajectories: flat C-order list; diagnostics: one dict per front
    with keys t, phase_spread, normality_deviation.
    """
    fronts: list
    trajectories: list
    diagnostics: list


def _front_flow(dynamics, chart, form):
    if form == "hamilton":
        return HamiltonFlow(dynamics, chart)
    if form == "modified":
        return WavefrontFlow(dynamics, chart)
    if form == "newtonian":
        if not isinstance(dynamics, NewtonianSetup):
            raise NumericError("newtonian shift needs a NewtonianSetup")
        return NewtonianFlow(dynamics.force, chart)
    raise NumericError(f"unknown flow form {form!r}")


def shift_front(dynamics, chart, mesh: FrontMesh, form,
                cfg: StepperConfig, snapshot_times=(), threads=1):
    """Shift every mesh sample along its ray and reassemble fronts.

    ``dynamics`` is the PolySymbol for the hamilton/modified forms (nu
    must be solved on the mesh) or a NewtonianSetup.  Snapshot times
    are forced onto the step grid; at each one the evolved points are
    assembled into a FrontMesh with recomputed tangents and normals
    (oriented along the ray velocities) and carried phase.  Any
    per-sample failure aborts the shift with the collected errors and
    the completed trajectories attached.
    """
    snapshot_times = sorted({float(t) for t in snapshot_times})
    if snapshot_times and (snapshot_times[0] < 0.0
                           or snapshot_times[-1] > cfg.t_end + 1e-12):
        raise NumericError("snapshot times must lie within [0, t_end]")

    flow = _front_flow(dynamics, chart, form)
    flat_pts = mesh.flat_points()
    flat_nrm = mesh.flat_normals()
    flat_nu = mesh.flat_nu()
    flat_phase = mesh.flat_phase()

    initial_states = []
    for i in range(mesh.n_samples):
        if form in ("hamilton", "modified"):
            if flat_nu is None:
                raise IrregularDataError(
                    "front has no nu; run solve_nu before shifting")
            p0 = flat_nu[i] * chart.lower(flat_pts[i], flat_nrm[i])
            initial_states.append(StateP(x=flat_pts[i].copy(), p=p0,
                                         s=float(flat_phase[i])))
        else:
            nu_i = None if flat_nu is None else flat_nu[i]
            u0 = dynamics.initial_u(chart, flat_pts[i], flat_nrm[i], nu_i)
            initial_states.append(StateU(x=flat_pts[i].copy(),
                                         u=np.asarray(u0, dtype=float),
                                         s=float(flat_phase[i])))

    def run_one(i):
        return integrate(flow, initial_states[i], cfg,
                         stop_times=snapshot_times)

    results = [None] * mesh.n_samples
    failures = []
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = {pool.submit(run_one, i): i
                       for i in range(mesh.n_samples)}
            for fut, i in futures.items():
                try:
                    results[i] = fut.result()
                except NumericError as exc:
                    failures.append((i, exc))
    else:
        for i in range(mesh.n_samples):
            try:
                results[i] = run_one(i)
            except NumericError as exc:
                failures.append((i, exc))
    if failures:
        failures.sort(key=lambda pair: pair[0])
        partial = {i: tr for i, tr in enumerate(results) if tr is not None}
        raise FrontShiftError(
            f"{len(failures)} of {mesh.n_samples} samples failed "
            f"(first: sample {failures[0][0]}: {failures[0][1]})",
            failures=failures, partial=partial)

    fronts = [(0.0, mesh)]
    diagnostics = [_diagnose(chart, flow, mesh, initial_states, 0.0)]
    for t in snapshot_times:
        if t == 0.0:
            continue
        snap_states = [tr.state_at(t) for tr in results]
        snap_mesh = _assemble(chart, flow, mesh, snap_states, form)
        fronts.append((t, snap_mesh))
        diagnostics.append(_diagnose(chart, flow, snap_mesh, snap_states, t))
    return ShiftResult(fronts=fronts, trajectories=results,
                       diagnostics=diagnostics)


def _assemble(chart, flow, mesh, states, form):
    shape = mesh.grid_shape
    dim = mesh.dim
    points = np.array([st.x for st in states]).reshape(shape + (dim,))
    phase = np.array([st.s for st in states]).reshape(shape)
    tangents = _lattice_tangents(points, mesh.spacings(), mesh.periodic)
    normals = np.empty_like(points)
    nu_vals = np.empty(shape)
    flat_idx = 0
    for idx in itertools.product(*(range(m) for m in shape)):
        st = states[flat_idx]
        vel = flow.velocity(st)
        normal = _unsigned_normal(chart, points[idx], tangents[idx])
        sign = chart.inner(points[idx], normal, vel)
        vel_norm = chart.norm(points[idx], vel)
        if abs(sign) <= 1e-10 * max(vel_norm, 1e-300):
            raise OrientationError(
                f"orientation ambiguity on shifted front at sample "
                f"{flat_idx}: ray tangent to the front")
        if sign < 0:
            normal = -normal
        normals[idx] = normal
        if form in ("hamilton", "modified"):
            nu_vals[idx] = float(np.asarray(st.p) @ normal)
        else:
            speed = chart.norm(points[idx], st.u)
            nu_vals[idx] = flow.force.energy.epsilon / speed
        flat_idx += 1
    return FrontMesh(params=mesh.params, points=points, normals=normals,
                     phase=phase, nu=nu_vals, periodic=mesh.periodic)


def _diagnose(chart, flow, mesh, states, t):
    vels = np.array([flow.velocity(st) for st in states]).reshape(
        mesh.grid_shape + (mesh.dim,))
    return {"t": float(t),
            "phase_spread": phase_spread(mesh),
            "normality_deviation": normality_deviation(chart, mesh, vels)}


def normality_deviation(chart, front: FrontMesh, velocities):
    """Worst cosine between per-sample velocities and front tangents.

    Zero means the rays pierce the front orthogonally everywhere.
    """
    velocities = np.asarray(velocities, dtype=float).reshape(
        front.grid_shape + (front.dim,))
    tangents = front.tangents()
    worst = 0.0
    flat_pts = front.flat_points()
    flat_vel = velocities.reshape(front.n_samples, front.dim)
    flat_tan = tangents.reshape(front.n_samples, len(front.params),
                                front.dim)
    for i in range(front.n_samples):
        x = flat_pts[i]
        u = flat_vel[i]
        un = chart.norm(x, u)
        if un <= 0.0:
            raise NumericError("degenerate velocity in normality check")
        for a in range(flat_tan.shape[1]):
            t_vec = flat_tan[i, a]
            tn = chart.norm(x, t_vec)
            if tn <= 0.0:
                raise NumericError("degenerate tangent in normality check")
            worst = max(worst, abs(chart.inner(x, u, t_vec)) / (un * tn))
    return worst


def phase_spread(front: FrontMesh):
    """max - min of the carried phase across the front samples."""
    ph = front.flat_phase()
    return float(np.max(ph) - np.min(ph))
