import numpy as np
import pytest
from scipy.integrate import solve_ivp

import nslab as ns


def linear_setup():
    chart = ns.euclidean_chart(2)
    n_fn, grad_n = ns.linear_index(0.2)
    sym = ns.isotropic_medium(n_fn, grad_n)
    return chart, sym, n_fn


def test_hamilton_rates_flat_example():
    chart = ns.euclidean_chart(2)
    sym = ns.free_eikonal(2)
    xdot, pdot, sdot = ns.hamilton_rates(
        sym, chart, ns.StateP(np.zeros(2), np.array([1.0, 0.0])))
    assert np.allclose(xdot, [2.0, 0.0])
    assert np.allclose(pdot, [0.0, 0.0])
    assert sdot == pytest.approx(2.0)


def test_hamilton_rates_x_independent_momentum_constant():
    chart = ns.euclidean_chart(2)
    sym = ns.quartic_norm(2)
    rng = np.random.default_rng(3)
    for _ in range(10):
        st = ns.StateP(rng.uniform(-1, 1, 2), rng.uniform(-1, 1, 2))
        _, pdot, _ = ns.hamilton_rates(sym, chart, st)
        assert np.max(np.abs(pdot)) < 1e-12


def test_hamilton_rates_polar_geodesic_term():
    # inverse-metric symbol: spatial gradient vanishes, momentum rate is
    # purely the connection term
    pol = ns.polar_chart()
    sym = ns.metric_eikonal(pol)
    x = np.array([1.5, 0.3])
    p = np.array([0.4, -0.6])
    xdot, pdot, _ = ns.hamilton_rates(sym, pol, ns.StateP(x, p))
    gamma = pol.christoffel(x)
    expect = np.einsum("kij,k,j->i", gamma, p, xdot)
    assert np.max(np.abs(pdot - expect)) < 1e-10


def test_wavefront_rates_examples():
    chart = ns.euclidean_chart(2)
    sym = ns.free_eikonal(2)
    xdot, pdot, sdot = ns.wavefront_rates(
        sym, chart, ns.StateP(np.zeros(2), np.array([1.0, 0.0])))
    assert np.allclose(xdot, [1.0, 0.0])
    assert sdot == 1.0
    rng = np.random.default_rng(5)
    for _ in range(10):
        st = ns.StateP(rng.uniform(-1, 1, 2),
                       rng.uniform(0.3, 1.5, 2))
        _, _, sdot = ns.wavefront_rates(sym, chart, st)
        assert sdot == 1.0


def test_wavefront_transversality_guard():
    chart = ns.euclidean_chart(2)
    sym = ns.free_eikonal(2)
    with pytest.raises(ns.TransversalityError) as info:
        ns.wavefront_rates(sym, chart,
                           ns.StateP(np.zeros(2), np.array([1e-9, 0.0])),
                           omega_floor=1e-10)
    assert info.value.state is not None


def test_newtonian_rates_free_flat():
    chart = ns.euclidean_chart(2)
    en = ns.energy_from_function(lambda x, u: 1.0 / u ** 2 - 1.0,
                                 dw_du=lambda x, u: -2.0 / u ** 3,
                                 grad_x=lambda x, u: np.zeros(2))
    force = ns.make_force(en, chart)
    st = ns.StateU(np.zeros(2), np.array([0.4, -0.2]))
    xdot, udot = ns.newtonian_rates(force, chart, st)
    assert np.allclose(xdot, st.u)
    assert np.all(udot == 0.0)


def test_newtonian_sphere_geodesics():
    # force-free motion on the sphere: speed conserved, equator stays
    sph = ns.sphere_chart()
    en = ns.energy_from_function(lambda x, u: 1.0 / u ** 2 - 1.0,
                                 dw_du=lambda x, u: -2.0 / u ** 3,
                                 grad_x=lambda x, u: np.zeros(2))
    force = ns.make_force(en, sph)
    cfg = ns.StepperConfig(t_end=1.0, dt=1e-3, record_every=50)

    st0 = ns.StateU(np.array([np.pi / 4, 0.0]), np.array([0.3, 0.4]))
    traj = ns.integrate(ns.NewtonianFlow(force, sph), st0, cfg)
    speed0 = sph.norm(st0.x, st0.u)
    drift = max(abs(sph.norm(s.x, s.u) - speed0) for s in traj.states)
    assert drift < 1e-8

    eq = ns.StateU(np.array([np.pi / 2, 0.0]), np.array([0.0, 0.7]))
    traj = ns.integrate(ns.NewtonianFlow(force, sph), eq, cfg)
    assert max(abs(s.x[0] - np.pi / 2) for s in traj.states) < 1e-12


def test_integrate_exact_solutions():
    chart = ns.euclidean_chart(2)
    sym = ns.free_eikonal(2)
    st0 = ns.StateP(np.zeros(2), np.array([1.0, 0.0]), s=0.25)
    cfg = ns.StepperConfig(t_end=1.0, dt=1e-3, record_every=100)

    traj = ns.integrate(ns.WavefrontFlow(sym, chart), st0, cfg)
    assert np.allclose(traj.states[-1].x, [1.0, 0.0], atol=1e-12)
    assert traj.states[-1].s == pytest.approx(1.25, abs=1e-12)

    traj = ns.integrate(ns.HamiltonFlow(sym, chart), st0, cfg)
    assert np.allclose(traj.states[-1].x, [2.0, 0.0], atol=1e-12)
    assert traj.states[-1].s == pytest.approx(2.25, abs=1e-12)


def test_integrate_t_end_zero():
    chart = ns.euclidean_chart(2)
    sym = ns.free_eikonal(2)
    st0 = ns.StateP(np.zeros(2), np.array([1.0, 0.0]), s=0.7)
    traj = ns.integrate(ns.HamiltonFlow(sym, chart),
                        st0, ns.StepperConfig(t_end=0.0, dt=1e-3))
    assert len(traj.states) == 1
    assert traj.states[0].s == 0.7
    assert traj.times[0] == 0.0


def test_phase_law_modified_exact():
    chart, sym, _ = linear_setup()
    st0 = ns.StateP(np.array([0.1, 0.0]),
                    np.array([0.0, 1.02]))
    cfg = ns.StepperConfig(t_end=0.5, dt=1e-3, record_every=25)
    traj = ns.integrate(ns.WavefrontFlow(sym, chart), st0, cfg)
    for t, s in zip(traj.times, traj.phases):
        assert abs(s - st0.s - t) < 1e-13


def test_hamilton_phase_matches_scipy_oracle():
    chart, sym, n_fn = linear_setup()
    x0 = np.array([-0.2, 0.1])
    nu = n_fn(x0)
    p0 = nu * np.array([0.0, 1.0])

    def rhs(t, y):
        x, p = y[:2], y[2:4]
        n = n_fn(x)
        return [2 * p[0], 2 * p[1], 2 * n * 0.2, 0.0,
                2 * (p[0] ** 2 + p[1] ** 2)]

    sol = solve_ivp(rhs, (0, 0.7), np.concatenate([x0, p0, [0.0]]),
                    rtol=1e-12, atol=1e-14)
    cfg = ns.StepperConfig(t_end=0.7, dt=1e-3, record_every=10 ** 9)
    traj = ns.integrate(ns.HamiltonFlow(sym, chart), ns.StateP(x0, p0), cfg)
    assert np.max(np.abs(traj.states[-1].x - sol.y[:2, -1])) < 1e-9
    assert np.max(np.abs(traj.states[-1].p - sol.y[2:4, -1])) < 1e-9
    assert abs(traj.states[-1].s - sol.y[4, -1]) < 1e-9


def test_conservation_report_flat_free():
    chart = ns.euclidean_chart(2)
    sym = ns.free_eikonal(2)
    cfg = ns.StepperConfig(t_end=1.0, dt=1e-2, record_every=5)
    traj = ns.integrate(ns.HamiltonFlow(sym, chart),
                        ns.StateP(np.zeros(2), np.array([0.6, 0.8])), cfg)
    rep = ns.conservation_report(traj)
    assert rep.h_drift <= 1e-14
    assert rep.omega_min == pytest.approx(2.0, abs=1e-12)
    assert rep.w_drift is None


def test_conservation_linear_medium():
    chart, sym, n_fn = linear_setup()
    x0 = np.array([0.0, 0.0])
    p0 = n_fn(x0) * np.array([np.cos(0.4), np.sin(0.4)])
    cfg = ns.StepperConfig(t_end=1.0, dt=1e-3, record_every=20)
    traj = ns.integrate(ns.HamiltonFlow(sym, chart), ns.StateP(x0, p0), cfg)
    assert ns.conservation_report(traj).h_drift <= 1e-8

    en = ns.energy_from_function(
        lambda x, u: 1.0 / u ** 2 - n_fn(x) ** 2,
        dw_du=lambda x, u: -2.0 / u ** 3,
        grad_x=lambda x, u: -2.0 * n_fn(x) * np.array([0.2, 0.0]))
    force = ns.make_force(en, chart)
    u0 = p0 / n_fn(x0) ** 2
    traj = ns.integrate(ns.NewtonianFlow(force, chart),
                        ns.StateU(x0, u0), cfg)
    assert ns.conservation_report(traj).w_drift <= 1e-8


def test_monitor_w_along_momentum_flow():
    # attaching the energy field lets the p-flows monitor W too
    chart, sym, n_fn = linear_setup()
    en = ns.energy_from_function(
        lambda x, u: 1.0 / u ** 2 - n_fn(x) ** 2,
        dw_du=lambda x, u: -2.0 / u ** 3,
        grad_x=lambda x, u: -2.0 * n_fn(x) * np.array([0.2, 0.0]))
    x0 = np.zeros(2)
    p0 = n_fn(x0) * np.array([0.6, 0.8])
    cfg = ns.StepperConfig(t_end=0.5, dt=1e-3, record_every=50)
    traj = ns.integrate(ns.WavefrontFlow(sym, chart, energy=en),
                        ns.StateP(x0, p0), cfg)
    w_vals = traj.monitors["W"]
    assert np.all(np.isfinite(w_vals))
    assert np.max(np.abs(w_vals)) < 1e-8   # on-shell start stays on shell
    # eikonal persistence: the shell H = 0 survives the integration
    assert np.max(np.abs(traj.monitors["H"])) < 1e-8


def test_eikonal_persistence_over_unit_time():
    chart, sym, n_fn = linear_setup()
    x0 = np.zeros(2)
    p0 = n_fn(x0) * np.array([np.cos(1.1), np.sin(1.1)])
    cfg = ns.StepperConfig(t_end=1.0, dt=1e-3, record_every=20)
    for flow in (ns.HamiltonFlow(sym, chart),
                 ns.WavefrontFlow(sym, chart)):
        traj = ns.integrate(flow, ns.StateP(x0, p0), cfg)
        assert np.max(np.abs(traj.monitors["H"])) <= 1e-8
        # positive phase rate makes the accumulated phase monotone
        assert np.all(np.diff(traj.phases) > 0)


def test_newtonian_linear_medium_against_fine_reference():
    # the ray bends toward larger index; endpoint vs an independent
    # tight-tolerance integration of the same force law
    chart, _, n_fn = linear_setup()
    en = ns.energy_from_function(
        lambda x, u: 1.0 / u ** 2 - n_fn(x) ** 2,
        dw_du=lambda x, u: -2.0 / u ** 3,
        grad_x=lambda x, u: -2.0 * n_fn(x) * np.array([0.2, 0.0]))
    force = ns.make_force(en, chart)
    x0 = np.zeros(2)
    u0 = np.array([0.0, 1.0])   # on shell: |u| = 1/n = 1

    def rhs(t, y):
        x, u = y[:2], y[2:]
        speed = np.linalg.norm(u)
        n_up = u / speed
        gw = -2.0 * n_fn(x) * np.array([0.2, 0.0])
        wp = -2.0 / speed ** 3
        f = -speed * (2.0 * float((gw / wp) @ n_up) * n_up - gw / wp)
        return np.concatenate([u, f])

    ref = solve_ivp(rhs, (0, 1.0), np.concatenate([x0, u0]),
                    rtol=1e-12, atol=1e-14).y[:, -1]
    cfg = ns.StepperConfig(t_end=1.0, dt=1e-3, record_every=10 ** 9)
    traj = ns.integrate(ns.NewtonianFlow(force, chart),
                        ns.StateU(x0, u0), cfg)
    end = traj.states[-1]
    assert np.max(np.abs(end.x - ref[:2])) < 1e-6
    assert end.x[0] > 1e-3   # bent toward increasing index


def test_rk45_adaptive_matches_rk4():
    chart, sym, _ = linear_setup()
    x0 = np.zeros(2)
    p0 = np.array([0.3, 1.0])
    ref = ns.integrate(ns.HamiltonFlow(sym, chart), ns.StateP(x0, p0),
                       ns.StepperConfig(t_end=1.0, dt=1e-4,
                                        record_every=10 ** 9))
    ada = ns.integrate(ns.HamiltonFlow(sym, chart), ns.StateP(x0, p0),
                       ns.StepperConfig(t_end=1.0, dt=1e-2,
                                        method="rk45-adaptive",
                                        atol=1e-11, rtol=1e-11,
                                        record_every=10 ** 9))
    assert np.max(np.abs(ada.states[-1].x - ref.states[-1].x)) < 1e-8
    assert ada.times[-1] == pytest.approx(1.0, abs=1e-12)


def test_stop_times_are_recorded_exactly():
    chart, sym, _ = linear_setup()
    st0 = ns.StateP(np.zeros(2), np.array([0.0, 1.0]))
    cfg = ns.StepperConfig(t_end=0.5, dt=1e-3, record_every=10 ** 9)
    traj = ns.integrate(ns.WavefrontFlow(sym, chart), st0,
                        stop_times=(0.1237, 0.25), cfg=cfg)
    for t in (0.1237, 0.25, 0.5):
        assert traj.state_at(t) is not None
    with pytest.raises(KeyError):
        traj.index_at(0.3)


def test_integration_error_carries_time_and_state():
    chart = ns.euclidean_chart(2)
    sym = ns.free_eikonal(2)
    flow = ns.WavefrontFlow(sym, chart, omega_floor=10.0)  # unreachable
    with pytest.raises(ns.IntegrationError) as info:
        ns.integrate(flow, ns.StateP(np.zeros(2), np.array([1.0, 0.0])),
                     ns.StepperConfig(t_end=1.0, dt=1e-2))
    assert info.value.time is not None
    assert info.value.last_state is not None
    assert isinstance(info.value.__cause__, ns.TransversalityError)


def test_stepper_config_validation():
    with pytest.raises(ns.NumericError):
        ns.StepperConfig(t_end=-1.0)
    with pytest.raises(ns.NumericError):
        ns.StepperConfig(t_end=1.0, dt=0.0)
    with pytest.raises(ns.NumericError):
        ns.StepperConfig(t_end=1.0, record_every=0)
    with pytest.raises(ns.NumericError):
        ns.StepperConfig(t_end=1.0, method="euler")
    cfg = ns.StepperConfig(t_end=1.0, method="rk45-adaptive")
    assert cfg.method == "rk45"


def test_rk4_step_halving_order():
    chart, sym, _ = linear_setup()
    st0 = ns.StateP(np.zeros(2), np.array([0.5, 0.9]))

    def endpoint(dt):
        cfg = ns.StepperConfig(t_end=1.0, dt=dt, record_every=10 ** 9)
        return ns.integrate(ns.HamiltonFlow(sym, chart), st0, cfg).states[-1].x

    ref = endpoint(1e-3)
    e1 = np.max(np.abs(endpoint(0.02) - ref))
    e2 = np.max(np.abs(endpoint(0.01) - ref))
    assert np.log2(e1 / e2) >= 3.8
