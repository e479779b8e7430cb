"""The acceptance suite: nine numbered numeric criteria with pinned
tolerances, shared between the test suite and the `check` subcommand.

Every criterion runs at desk scale (seconds, one process) and returns a
CriterionResult; nothing here writes files.  The bundled setup is the
linear refractive index n(x) = 1 + 0.2*x1 on the flat chart with the
quadratic medium symbol H = |p|^2 - n(x)^2, plus the round sphere with
the inverse-metric symbol.
"""
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .fd import central, central4, grad_central
from .flow import (HamiltonFlow, NewtonianFlow, StepperConfig, WavefrontFlow,
                   conservation_report, integrate)
from .forces import make_force, normal_shift_force, wavefront_force
from .front import (build_front, latitude_embedding, circle_params,
                    normality_deviation, segment_embedding, shift_front,
                    solve_nu)
from .geometry import euclidean_chart, polar_chart, sphere_chart
from .legendre import (StateP, StateU, StateV, build_energy,
                       energy_from_function, check_gradient_identity,
                       lagrangian_value, spherical_from_symbol, to_momentum,
                       to_velocity)
from .symbol import (PhaseField, apply_transport, half_quadratic,
                     isotropic_medium, linear_index, metric_eikonal,
                     quartic_medium, quartic_norm)

# frozen fine-step oracle value for the Hamilton-flow phase spread of the
# bundled setup at t = 0.5 (notes are in the repo-external build log)
ORACLE_HAMILTON_SPREAD = 0.40537616290140654


@dataclass(frozen=True)
class CriterionResult:
    index: int
    name: str
    passed: bool
    detail: str

    def line(self):
        tag = "PASS" if self.passed else "FAIL"
        return f"{tag} {self.index:2d} {self.name}: {self.detail}"


def _rel_err(a, b):
    """Worst of |a-b| / (1 + max(|a|,|b|)) elementwise."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    denom = 1.0 + np.maximum(np.abs(a), np.abs(b))
    return float(np.max(np.abs(a - b) / denom))


# -- bundled setup -------------------------------------------------------------

@lru_cache(maxsize=None)
def _medium():
    chart = euclidean_chart(2)
    n_fn, grad_n = linear_index(0.2, axis=0)
    sym = isotropic_medium(n_fn, grad_n)
    return chart, sym, n_fn, grad_n


@lru_cache(maxsize=None)
def _analytic_energy():
    """W(x,u) = 1/u^2 - n(x)^2 with analytic derivatives."""
    _, _, n_fn, grad_n = _medium()

    def value(x, u):
        return 1.0 / u ** 2 - n_fn(x) ** 2

    def du(x, u):
        return -2.0 / u ** 3

    def grad_x(x, u):
        return -2.0 * n_fn(x) * np.asarray(grad_n(x), dtype=float)

    return energy_from_function(value, dw_du=du, grad_x=grad_x, epsilon=1.0)


@lru_cache(maxsize=None)
def _segment_mesh():
    """64-sample segment of the x1-axis with rays toward +x2."""
    chart, sym, _, _ = _medium()
    mesh = build_front(chart, segment_embedding((-0.5, 0.0), (0.5, 0.0)),
                       [np.linspace(0.0, 1.0, 64)], orient_seed=(0.0, 1.0))
    return solve_nu(sym, chart, mesh, branch="positive")


_SNAPSHOTS = (0.1, 0.25, 0.5)
_CFG_FRONT = StepperConfig(t_end=0.5, dt=1e-3, record_every=50)


@lru_cache(maxsize=None)
def _front_shift(form):
    chart, sym, _, _ = _medium()
    return shift_front(sym, chart, _segment_mesh(), form, _CFG_FRONT,
                       snapshot_times=_SNAPSHOTS)


@lru_cache(maxsize=None)
def _matched_initial_data():
    chart, sym, n_fn, _ = _medium()
    ang = np.pi / 6
    x0 = np.array([0.0, 0.0])
    n0 = n_fn(x0)
    p0 = n0 * np.array([np.cos(ang), np.sin(ang)])
    v0 = sym.momentum_gradient(x0, p0)
    omega0 = float(p0 @ v0)
    u0 = v0 / omega0
    return x0, p0, u0


@lru_cache(maxsize=None)
def _equivalence_trajectories():
    chart, sym, _, _ = _medium()
    x0, p0, u0 = _matched_initial_data()
    cfg = StepperConfig(t_end=1.0, dt=1e-3, record_every=10)
    traj_mod = integrate(WavefrontFlow(sym, chart), StateP(x0, p0), cfg)
    force = make_force(_analytic_energy(), chart)
    traj_newt = integrate(NewtonianFlow(force, chart), StateU(x0, u0), cfg)
    return traj_mod, traj_newt


# -- criteria -----------------------------------------------------------------

def criterion_1():
    """Front coincidence: phase spread under the two flows."""
    res_mod = _front_shift("modified")
    spread_mod = max(d["phase_spread"] for d in res_mod.diagnostics)
    res_ham = _front_shift("hamilton")
    spread_ham = res_ham.diagnostics[-1]["phase_spread"]
    ok = (spread_mod <= 1e-7 and spread_ham >= 1e-3
          and abs(spread_ham - ORACLE_HAMILTON_SPREAD) <= 1e-6)
    detail = (f"modified spread {spread_mod:.2e} (<=1e-7), hamilton spread "
              f"{spread_ham:.6f} (>=1e-3, oracle "
              f"{ORACLE_HAMILTON_SPREAD:.6f})")
    return CriterionResult(1, "front-coincidence", ok, detail)


def criterion_2():
    """Normality preservation on the flat chart and on the sphere."""
    res_mod = _front_shift("modified")
    dev_flat = max(d["normality_deviation"] for d in res_mod.diagnostics)

    chart = sphere_chart()
    sym = metric_eikonal(chart)
    mesh = build_front(chart, latitude_embedding(np.pi / 4),
                       circle_params(64), orient_seed=(1.0, 0.0),
                       periodic=(True,))
    mesh = solve_nu(sym, chart, mesh, branch="positive")
    cfg = StepperConfig(t_end=0.5, dt=1e-3, record_every=100)
    res = shift_front(sym, chart, mesh, "modified", cfg,
                      snapshot_times=(0.25, 0.5))
    dev_sphere = max(d["normality_deviation"] for d in res.diagnostics)
    sphere_phase = max(d["phase_spread"] for d in res.diagnostics)
    polar_spread = 0.0
    geodesic_err = 0.0
    for t, front in res.fronts:
        thetas = front.flat_points()[:, 0]
        polar_spread = max(polar_spread, float(thetas.max() - thetas.min()))
        geodesic_err = max(geodesic_err,
                           float(np.max(np.abs(thetas - (np.pi / 4 + t)))))
    ok = (dev_flat <= 1e-5 and dev_sphere <= 1e-5
          and polar_spread <= 1e-6 and geodesic_err <= 1e-8
          and sphere_phase <= 1e-7)
    detail = (f"flat deviation {dev_flat:.2e}, sphere deviation "
              f"{dev_sphere:.2e} (<=1e-5), polar-angle spread "
              f"{polar_spread:.2e} (<=1e-6), meridian-oracle error "
              f"{geodesic_err:.2e} (<=1e-8), sphere phase spread "
              f"{sphere_phase:.2e} (<=1e-7)")
    return CriterionResult(2, "normality-preservation", ok, detail)


def criterion_3():
    """Form equivalence: reparametrized vs Newtonian trajectories."""
    traj_mod, traj_newt = _equivalence_trajectories()
    if traj_mod.times.size != traj_newt.times.size or np.max(
            np.abs(traj_mod.times - traj_newt.times)) > 1e-12:
        return CriterionResult(3, "form-equivalence", False,
                               "recorded time grids differ")
    dist = max(float(np.max(np.abs(a.x - b.x)))
               for a, b in zip(traj_mod.states, traj_newt.states))
    ok = dist <= 1e-6
    return CriterionResult(3, "form-equivalence", ok,
                           f"sup |x_mod - x_newt| = {dist:.2e} (<=1e-6)")


def criterion_4():
    """First integrals: W along the Newtonian flow, H along Hamilton."""
    chart, sym, _, _ = _medium()
    _, traj_newt = _equivalence_trajectories()
    w_drift = conservation_report(traj_newt).w_drift
    x0, p0, _ = _matched_initial_data()
    cfg = StepperConfig(t_end=1.0, dt=1e-3, record_every=10)
    traj_h = integrate(HamiltonFlow(sym, chart), StateP(x0, p0), cfg)
    h_drift = conservation_report(traj_h).h_drift
    ok = w_drift <= 1e-8 and h_drift <= 1e-8
    return CriterionResult(4, "first-integral", ok,
                           f"W drift {w_drift:.2e}, H drift {h_drift:.2e} "
                           f"(<=1e-8)")


def criterion_5():
    """h = 0 reduction is bitwise on a 10^3 state grid."""
    chart, _, _, _ = _medium()
    energy = _analytic_energy()
    zero = lambda w: 0.0
    exact = 0
    total = 0
    for x1 in np.linspace(-0.5, 0.5, 10):
        for u1 in np.linspace(0.2, 1.4, 10):
            for u2 in np.linspace(-0.6, 0.6, 10):
                st = StateU(x=np.array([x1, 0.3]), u=np.array([u1, u2]))
                a = wavefront_force(energy, chart, st)
                b = normal_shift_force(energy, zero, chart, st)
                total += 1
                exact += int(np.array_equal(a, b))
    ok = exact == total
    return CriterionResult(5, "h-zero-coincidence", ok,
                           f"{exact}/{total} states bitwise equal")


def _legendre_cases():
    chart2 = euclidean_chart(2)
    pol = polar_chart()
    n_fn, grad_n = linear_index(0.2, axis=0)
    return [
        ("half-quadratic", half_quadratic(2), chart2, 0.0),
        ("isotropic-medium", isotropic_medium(n_fn, grad_n), chart2, 0.0),
        ("quartic", quartic_norm(2), chart2, 0.3),
        ("quartic-medium", quartic_medium(n_fn, grad_n), chart2, 0.3),
        ("metric-eikonal", metric_eikonal(pol), pol, 0.0),
    ]


def _random_states(sym, chart, rng, count, p_min):
    states = []
    while len(states) < count:
        if chart.name == "polar":
            x = np.array([rng.uniform(0.6, 2.0), rng.uniform(-3.0, 3.0)])
        else:
            x = rng.uniform(-0.8, 0.8, size=chart.dim)
        p = rng.uniform(-1.5, 1.5, size=chart.dim)
        if np.linalg.norm(p) < max(p_min, 1e-3):
            continue
        states.append(StateP(x=x, p=p))
    return states


def criterion_6():
    """Legendre suite: round trips, gradient identity, W identities,
    cross-representation phase rate, h-consistency."""
    rng = np.random.default_rng(61)
    worst_round = 0.0
    for name, sym, chart, p_min in _legendre_cases():
        for st in _random_states(sym, chart, rng, 100, p_min):
            stv = to_velocity(sym, st)
            guess = st.p * (1.0 + 0.05 * rng.uniform(-1, 1, st.p.size))
            back = to_momentum(sym, stv, guess=guess)
            err = float(np.max(np.abs(back.p - st.p))) / (
                1.0 + float(np.max(np.abs(st.p))))
            worst_round = max(worst_round, err)
    round_ok = worst_round <= 1e-10

    chart, sym, n_fn, grad_n = _medium()
    qsym = quartic_medium(n_fn, grad_n)
    id_res = 0.0
    for s, p_min in ((sym, 0.0), (qsym, 0.4)):
        samples = _random_states(s, chart, rng, 20, p_min)
        rep = check_gradient_identity(s, chart, samples)
        id_res = max(id_res, rep.max_residual)
    id_ok = id_res <= 1e-6

    lag = spherical_from_symbol(sym, chart, probes=[np.array([0.1, -0.2])],
                                v_range=(0.05, 20.0))
    energy = build_energy(lag, x_ref=np.array([0.0, 0.0]), v_ref=1.0)
    w_res = 0.0
    omega_res = 0.0
    h_res = 0.0
    for _ in range(10):
        x = rng.uniform(-0.5, 0.5, size=2)
        v = rng.uniform(0.5, 2.5)
        slope = lag.dv(x, v)
        u = energy.epsilon / slope
        w_res = max(w_res, abs(energy.du(x, u)
                               - (-energy.epsilon * v * slope ** 2)))
        w_res = max(w_res, float(np.max(np.abs(energy.grad_x(x, u)
                                               + lag.grad_x(x, v)))))
        # matched full states for the cross-representation checks
        direction = rng.uniform(-1.0, 1.0, size=2)
        direction /= np.linalg.norm(direction)
        v_vec = v * direction
        stp = to_momentum(sym, StateV(x=x, v=v_vec), guess=v_vec / 2.0)
        omega_p = sym.phase_rate(x, stp.p)
        omega_lag = v * slope

        def l_along(k, t):
            w = v_vec.copy()
            w[k] = t
            return lagrangian_value(
                sym, x, to_momentum(sym, StateV(x=x, v=w),
                                    guess=stp.p).p)

        dl_dv = np.array([central4(lambda t, k=k: l_along(k, t), v_vec[k],
                                   1e-3 * (1 + abs(v_vec[k])))
                          for k in range(2)])
        omega_v = float(v_vec @ dl_dv)
        omega_res = max(omega_res, abs(omega_p - omega_lag),
                        abs(omega_p - omega_v))
        h_res = max(h_res, abs((v * slope - lag.value(x, v))
                               - sym.value(x, stp.p)))
    w_ok = w_res <= 1e-8
    omega_ok = omega_res <= 1e-9
    h_ok = h_res <= 1e-9

    ok = round_ok and id_ok and w_ok and omega_ok and h_ok
    detail = (f"round trip {worst_round:.2e} (<=1e-10), gradient identity "
              f"{id_res:.2e} (<=1e-6), W identities {w_res:.2e} (<=1e-8), "
              f"phase-rate agreement {omega_res:.2e} (<=1e-9), "
              f"h-consistency {h_res:.2e} (<=1e-9)")
    return CriterionResult(6, "legendre-suite", ok, detail)


def _poly_eval(coeffs, x):
    return sum(c * x[0] ** i * x[1] ** j for (i, j), c in coeffs.items())


def _poly_grad(coeffs, x):
    g = np.zeros(2)
    for (i, j), c in coeffs.items():
        if i:
            g[0] += c * i * x[0] ** (i - 1) * x[1] ** j
        if j:
            g[1] += c * j * x[0] ** i * x[1] ** (j - 1)
    return g


def _poly_hess(coeffs, x):
    h = np.zeros((2, 2))
    for (i, j), c in coeffs.items():
        if i >= 2:
            h[0, 0] += c * i * (i - 1) * x[0] ** (i - 2) * x[1] ** j
        if j >= 2:
            h[1, 1] += c * j * (j - 1) * x[0] ** i * x[1] ** (j - 2)
        if i and j:
            h[0, 1] += c * i * j * x[0] ** (i - 1) * x[1] ** (j - 1)
    h[1, 0] = h[0, 1]
    return h


def _random_poly(rng):
    return {(i, j): rng.uniform(-1, 1)
            for i in range(4) for j in range(4) if i + j <= 3}


def criterion_7():
    """Transport operator vs the hand-expanded flat quadratic form."""
    rng = np.random.default_rng(7)
    sym = isotropic_medium(lambda x: 1.0, lambda x: np.zeros(2))
    worst = 0.0
    for _ in range(50):
        s_coef = _random_poly(rng)
        a_coef = _random_poly(rng)
        x = rng.uniform(-1.0, 1.0, size=2)
        phase = PhaseField(lambda y, c=s_coef: _poly_eval(c, y),
                           lambda y, c=s_coef: _poly_grad(c, y),
                           lambda y, c=s_coef: _poly_hess(c, y))
        amp = _poly_eval(a_coef, x)
        amp_grad = _poly_grad(a_coef, x)
        got = apply_transport(sym, phase, amp, amp_grad, x)
        grad_s = _poly_grad(s_coef, x)
        lap_s = np.trace(_poly_hess(s_coef, x))
        ref = 2.0 * float(grad_s @ amp_grad) + lap_s * amp
        worst = max(worst, abs(got - ref))
    ok = worst <= 1e-8
    return CriterionResult(7, "transport-operator", ok,
                           f"max |R1 - hand expansion| = {worst:.2e} "
                           f"(<=1e-8)")


def criterion_8():
    """Gradient evaluators vs plain central differences."""
    rng = np.random.default_rng(8)
    chart, sym, n_fn, grad_n = _medium()

    worst_p = worst_x = 0.0
    for _ in range(100):
        x = rng.uniform(-0.8, 0.8, size=2)
        p = rng.uniform(-1.5, 1.5, size=2)
        fd_p = grad_central(lambda q: sym.value(x, q), p, 1e-6)
        worst_p = max(worst_p, _rel_err(sym.momentum_gradient(x, p), fd_p))
        fd_x = grad_central(lambda y: sym.value(y, p), x, 1e-6)
        worst_x = max(worst_x,
                      _rel_err(sym.spatial_gradient(chart, x, p), fd_x))

    # inverse-metric symbol on the polar chart: the covariant spatial
    # gradient must vanish identically (metric compatibility)
    pol = polar_chart()
    geo = metric_eikonal(pol)
    worst_compat = 0.0
    for _ in range(100):
        x = np.array([rng.uniform(0.6, 2.0), rng.uniform(-3.0, 3.0)])
        p = rng.uniform(-1.5, 1.5, size=2)
        worst_compat = max(worst_compat, float(np.max(np.abs(
            geo.spatial_gradient(pol, x, p)))))

    lag = spherical_from_symbol(sym, chart, probes=[np.array([0.1, -0.2])],
                                v_range=(0.05, 20.0))
    worst_l1 = worst_l2 = 0.0
    for _ in range(100):
        x = rng.uniform(-0.5, 0.5, size=2)
        v = rng.uniform(0.4, 2.5)
        fd1 = central(lambda t: lag.value(x, t), v, 1e-5 * (1 + v))
        worst_l1 = max(worst_l1, _rel_err(lag.dv(x, v), fd1))
        fd2 = central(lambda t: lag.dv(x, t), v, 1e-5 * (1 + v))
        worst_l2 = max(worst_l2, _rel_err(lag.dv2(x, v), fd2))

    energy = _analytic_energy()
    checked = energy_from_function(energy.value)  # stencil-backed derivatives
    worst_w1 = worst_wx = 0.0
    for _ in range(100):
        x = rng.uniform(-0.5, 0.5, size=2)
        u = rng.uniform(0.4, 2.0)
        fd1 = central(lambda t: energy.value(x, t), u, 1e-6 * (1 + u))
        worst_w1 = max(worst_w1, _rel_err(checked.du(x, u), fd1))
        fdx = grad_central(lambda y: energy.value(y, u), x, 1e-6)
        worst_wx = max(worst_wx, _rel_err(checked.grad_x(x, u), fdx))

    worst = max(worst_p, worst_x, worst_compat, worst_l1, worst_l2,
                worst_w1, worst_wx)
    ok = worst <= 1e-6
    detail = (f"dH/dp {worst_p:.1e}, grad H {worst_x:.1e}, metric "
              f"compatibility {worst_compat:.1e}, L' {worst_l1:.1e}, "
              f"L'' {worst_l2:.1e}, W' {worst_w1:.1e}, grad W "
              f"{worst_wx:.1e} (all <=1e-6)")
    return CriterionResult(8, "gradient-checks", ok, detail)


def criterion_9():
    """Observed RK4 convergence order on the bundled medium."""
    chart, sym, _, _ = _medium()
    x0, p0, _ = _matched_initial_data()

    def endpoint(dt):
        cfg = StepperConfig(t_end=1.0, dt=dt, record_every=10 ** 9)
        traj = integrate(HamiltonFlow(sym, chart), StateP(x0, p0), cfg)
        return traj.states[-1].x

    ref = endpoint(1e-3)
    e1 = float(np.max(np.abs(endpoint(0.02) - ref)))
    e2 = float(np.max(np.abs(endpoint(0.01) - ref)))
    order = math.log2(e1 / e2)
    ok = order >= 3.8
    return CriterionResult(9, "integrator-order", ok,
                           f"observed order {order:.3f} (>=3.8, errors "
                           f"{e1:.2e} -> {e2:.2e})")


CRITERIA = {
    1: criterion_1,
    2: criterion_2,
    3: criterion_3,
    4: criterion_4,
    5: criterion_5,
    6: criterion_6,
    7: criterion_7,
    8: criterion_8,
    9: criterion_9,
}

SUITES = {
    "coincidence": [1],
    "normality": [2],
    "equivalence": [3],
    "conservation": [4],
    "hzero": [5],
    "legendre": [6],
    "transport": [7],
    "gradients": [8],
    "order": [9],
    "all": list(range(1, 10)),
}


def run_suite(name):
    """Run a named suite and return the CriterionResults."""
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from "
                       f"{sorted(SUITES)}")
    return [CRITERIA[k]() for k in SUITES[name]]
