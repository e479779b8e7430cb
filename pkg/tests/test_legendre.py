import numpy as np
import pytest

import nslab as ns
from nslab.fd import central4
from nslab.legendre import radial_momentum
from nslab.symbol import anisotropic_quadratic


def test_to_velocity_examples():
    x = np.zeros(2)
    hq = ns.half_quadratic(2)
    st = ns.to_velocity(hq, ns.StateP(x, np.array([0.7, -1.2]), s=0.4))
    assert np.allclose(st.v, [0.7, -1.2])
    assert st.s == 0.4

    med = ns.isotropic_medium(*ns.linear_index(0.2))
    st = ns.to_velocity(med, ns.StateP(x, np.array([0.5, 0.5])))
    assert np.allclose(st.v, [1.0, 1.0])

    q = ns.quartic_norm(2)
    st = ns.to_velocity(q, ns.StateP(x, np.array([1.0, 0.0])))
    assert np.allclose(st.v, [4.0, 0.0])


def test_to_momentum_examples():
    x = np.zeros(2)
    hq = ns.half_quadratic(2)
    st = ns.to_momentum(hq, ns.StateV(x, np.array([1.0, 2.0])),
                        guess=np.zeros(2), max_iter=2)
    assert np.allclose(st.p, [1.0, 2.0], atol=1e-12)

    med = ns.isotropic_medium(*ns.linear_index(0.2))
    st = ns.to_momentum(med, ns.StateV(x, np.array([2.0, 0.0])),
                        guess=np.array([1.0, 1.0]))
    assert np.allclose(st.p, [1.0, 0.0], atol=1e-11)

    q = ns.quartic_norm(2)
    st = ns.to_momentum(q, ns.StateV(x, np.array([4.0, 0.0])),
                        guess=np.array([0.5, 0.0]))
    assert np.allclose(st.p, [1.0, 0.0], atol=1e-11)


def test_to_momentum_singular_hessian():
    q = ns.quartic_norm(2)
    with pytest.raises(ns.LegendreInversionError):
        ns.to_momentum(q, ns.StateV(np.zeros(2), np.array([1.0, 0.0])),
                       guess=np.zeros(2))


def test_to_momentum_reports_convergence_failure():
    q = ns.quartic_norm(2)
    with pytest.raises(ns.NewtonConvergenceError) as info:
        ns.to_momentum(q, ns.StateV(np.zeros(2), np.array([4.0, 0.0])),
                       guess=np.array([0.01, 0.0]), max_iter=2)
    assert info.value.residual is not None


def roundtrip_cases():
    n_fn, grad_n = ns.linear_index(0.2)
    pol = ns.polar_chart()
    return [
        ("half-quadratic", ns.half_quadratic(2), None, 0.0),
        ("medium", ns.isotropic_medium(n_fn, grad_n), None, 0.0),
        ("quartic", ns.quartic_norm(2), None, 0.3),
        ("quartic-medium", ns.quartic_medium(n_fn, grad_n), None, 0.3),
        ("geodesic", ns.metric_eikonal(pol), pol, 0.0),
    ]


@pytest.mark.parametrize("name,sym,chart,p_min", roundtrip_cases(),
                         ids=lambda v: v if isinstance(v, str) else "")
def test_roundtrip_property(name, sym, chart, p_min):
    rng = np.random.default_rng(59)
    done = 0
    while done < 100:
        if chart is not None and chart.name == "polar":
            x = np.array([rng.uniform(0.6, 2.0), rng.uniform(-3, 3)])
        else:
            x = rng.uniform(-0.8, 0.8, 2)
        p = rng.uniform(-1.5, 1.5, 2)
        if np.linalg.norm(p) < max(p_min, 1e-3):
            continue
        done += 1
        stv = ns.to_velocity(sym, ns.StateP(x, p, s=0.2))
        guess = p * (1.0 + 0.05 * rng.uniform(-1, 1, 2))
        back = ns.to_momentum(sym, stv, guess=guess)
        assert np.max(np.abs(back.p - p)) < 1e-10 * (1 + np.max(np.abs(p)))
        assert back.s == 0.2


def test_lagrangian_value_examples():
    x = np.zeros(2)
    hq = ns.half_quadratic(2)
    assert ns.lagrangian_value(hq, x, [1.0, 0.0]) == pytest.approx(0.5)

    n_fn, grad_n = ns.linear_index(0.2)
    med = ns.isotropic_medium(n_fn, grad_n)
    p = np.array([0.4, -0.3])
    expect = float(p @ p) + n_fn(x) ** 2
    assert ns.lagrangian_value(med, x, p) == pytest.approx(expect)

    const = ns.symbol.constant_symbol(3.0)
    assert ns.lagrangian_value(const, x, [5.0, 5.0]) == pytest.approx(-3.0)


@pytest.fixture(scope="module")
def medium_lagrangian():
    chart = ns.euclidean_chart(2)
    n_fn, grad_n = ns.linear_index(0.2)
    sym = ns.isotropic_medium(n_fn, grad_n)
    lag = ns.spherical_from_symbol(sym, chart,
                                   probes=[np.array([0.1, -0.2])],
                                   v_range=(0.05, 20.0))
    return chart, sym, n_fn, grad_n, lag


def test_spherical_from_symbol_quadratic(medium_lagrangian):
    _, _, n_fn, _, lag = medium_lagrangian
    x = np.array([0.3, 0.1])
    v = 1.4
    assert lag.value(x, v) == pytest.approx(v * v / 4 + n_fn(x) ** 2,
                                            abs=1e-10)
    assert lag.dv(x, v) == pytest.approx(v / 2, abs=1e-9)
    assert lag.dv2(x, v) == pytest.approx(0.5, abs=1e-7)


def test_spherical_half_quadratic():
    chart = ns.euclidean_chart(2)
    lag = ns.spherical_from_symbol(ns.half_quadratic(2), chart,
                                   probes=[np.zeros(2)],
                                   v_range=(0.05, 20.0))
    assert lag.value(np.zeros(2), 1.2) == pytest.approx(0.72, abs=1e-10)
    assert lag.dv(np.zeros(2), 1.2) == pytest.approx(1.2, abs=1e-9)
    assert lag.dv2(np.zeros(2), 1.2) == pytest.approx(1.0, abs=1e-7)


def test_spherical_rejects_anisotropy():
    chart = ns.euclidean_chart(2)
    with pytest.raises(ns.AnisotropyError):
        ns.spherical_from_symbol(anisotropic_quadratic([1.0, 2.0]), chart,
                                 probes=[np.zeros(2)])


def test_spherical_matches_vector_inversion(medium_lagrangian):
    # independent route: full Newton inversion along random directions
    chart, sym, _, _, lag = medium_lagrangian
    rng = np.random.default_rng(61)
    for _ in range(20):
        x = rng.uniform(-0.5, 0.5, 2)
        speed = rng.uniform(0.3, 3.0)
        d = rng.uniform(-1, 1, 2)
        d /= chart.norm(x, d)
        stp = ns.to_momentum(sym, ns.StateV(x, speed * d),
                             guess=0.5 * speed * d)
        via_newton = ns.lagrangian_value(sym, x, stp.p)
        assert abs(lag.value(x, speed) - via_newton) < 1e-8


def test_spherical_agrees_with_analytic_fast_path(medium_lagrangian):
    _, _, n_fn, grad_n, lag = medium_lagrangian
    fast = ns.quadratic_medium_lagrangian(n_fn, grad_n)
    rng = np.random.default_rng(67)
    for _ in range(10):
        x = rng.uniform(-0.5, 0.5, 2)
        v = rng.uniform(0.3, 3.0)
        assert abs(lag.value(x, v) - fast.value(x, v)) < 1e-9
        assert abs(lag.dv(x, v) - fast.dv(x, v)) < 1e-8
        assert np.max(np.abs(lag.grad_x(x, v) - fast.grad_x(x, v))) < 1e-8


def test_build_energy_quadratic(medium_lagrangian):
    _, _, n_fn, _, lag = medium_lagrangian
    energy = ns.build_energy(lag, x_ref=np.zeros(2), v_ref=1.0)
    assert energy.epsilon == 1.0
    x = np.array([0.2, -0.3])
    u = 0.9
    assert energy.value(x, u) == pytest.approx(1 / u ** 2 - n_fn(x) ** 2,
                                               abs=1e-9)
    # x-independent Lagrangian: zero spatial gradient
    flat = ns.quadratic_medium_lagrangian(lambda x: 1.0,
                                          lambda x: np.zeros(2))
    en0 = ns.build_energy(flat, x_ref=np.zeros(2), v_ref=1.0)
    assert np.max(np.abs(en0.grad_x(x, u))) < 1e-12
    # eikonal shell W = 0 at u = 1/n
    shell = energy.value(x, 1.0 / n_fn(x))
    assert abs(shell) < 1e-10
    assert energy.on_shell_speed(x) == pytest.approx(1.0 / n_fn(x),
                                                     abs=1e-10)


def test_build_energy_velocity_range(medium_lagrangian):
    _, _, _, _, lag = medium_lagrangian
    energy = ns.build_energy(lag, x_ref=np.zeros(2), v_ref=1.0)
    with pytest.raises(ns.VelocityRangeError):
        energy.value(np.zeros(2), 1e-9)   # needs v above v_range
    with pytest.raises(ns.VelocityRangeError):
        energy.value(np.zeros(2), -1.0)


def test_energy_identities(medium_lagrangian):
    # W' = -eps |v| (L')^2 and grad W = -grad L at matched states
    _, _, _, _, lag = medium_lagrangian
    energy = ns.build_energy(lag, x_ref=np.zeros(2), v_ref=1.0)
    rng = np.random.default_rng(71)
    for _ in range(10):
        x = rng.uniform(-0.5, 0.5, 2)
        v = rng.uniform(0.5, 2.5)
        slope = lag.dv(x, v)
        u = energy.epsilon / slope
        assert abs(energy.du(x, u) + energy.epsilon * v * slope ** 2) < 1e-8
        assert np.max(np.abs(energy.grad_x(x, u) + lag.grad_x(x, v))) < 1e-8


def test_h_consistency(medium_lagrangian):
    # v L' - L equals the symbol value at the matched momentum
    chart, sym, _, _, lag = medium_lagrangian
    rng = np.random.default_rng(73)
    for _ in range(15):
        x = rng.uniform(-0.5, 0.5, 2)
        v = rng.uniform(0.4, 2.5)
        d = rng.uniform(-1, 1, 2)
        d /= chart.norm(x, d)
        stp = ns.to_momentum(sym, ns.StateV(x, v * d), guess=0.5 * v * d)
        h_val = v * lag.dv(x, v) - lag.value(x, v)
        assert abs(h_val - sym.value(x, stp.p)) < 1e-9


def test_phase_rate_across_representations(medium_lagrangian):
    # p.v in momentum form, v . dL/dv in velocity form, |v| L' spherical
    chart, sym, _, _, lag = medium_lagrangian
    rng = np.random.default_rng(79)
    for _ in range(15):
        x = rng.uniform(-0.5, 0.5, 2)
        v = rng.uniform(0.5, 2.5)
        d = rng.uniform(-1, 1, 2)
        d /= chart.norm(x, d)
        v_vec = v * d
        stp = ns.to_momentum(sym, ns.StateV(x, v_vec), guess=0.5 * v_vec)
        omega_p = sym.phase_rate(x, stp.p)

        def l_along(k, t):
            w = v_vec.copy()
            w[k] = t
            return ns.lagrangian_value(
                sym, x, ns.to_momentum(sym, ns.StateV(x, w),
                                       guess=stp.p).p)

        dl = np.array([central4(lambda t, k=k: l_along(k, t), v_vec[k],
                                1e-3 * (1 + abs(v_vec[k])))
                       for k in range(2)])
        omega_v = float(v_vec @ dl)
        omega_sph = v * lag.dv(x, v)
        assert abs(omega_p - omega_v) < 1e-9 * (1 + abs(omega_p))
        assert abs(omega_p - omega_sph) < 1e-9 * (1 + abs(omega_p))


def test_gradient_identity_report():
    chart = ns.euclidean_chart(2)
    n_fn, grad_n = ns.linear_index(0.2)
    rng = np.random.default_rng(83)

    free = ns.free_eikonal(2)
    samples = [ns.StateP(rng.uniform(-0.5, 0.5, 2),
                         rng.uniform(-1.5, 1.5, 2)) for _ in range(10)]
    rep = ns.check_gradient_identity(free, chart, samples)
    assert rep.max_residual < 1e-10
    assert not rep.failures

    med = ns.isotropic_medium(n_fn, grad_n)
    rep = ns.check_gradient_identity(med, chart, samples)
    assert rep.max_residual < 1e-6

    qmed = ns.quartic_medium(n_fn, grad_n)
    strong = [ns.StateP(rng.uniform(-0.5, 0.5, 2),
                        rng.uniform(0.5, 1.5, 2) * rng.choice([-1, 1], 2))
              for _ in range(10)]
    rep = ns.check_gradient_identity(qmed, chart, strong)
    assert rep.max_residual < 1e-6


def test_radial_momentum_solves_speed():
    chart = ns.euclidean_chart(2)
    q = ns.quartic_norm(2)
    x = np.zeros(2)
    p = radial_momentum(q, chart, x, 4.0)
    assert chart.norm(x, q.momentum_gradient(x, p)) == pytest.approx(
        4.0, abs=1e-12)
    assert np.allclose(p, [1.0, 0.0], atol=1e-12)
