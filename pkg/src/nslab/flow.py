"""Time integration of the three dynamical forms with phase accumulation
and conservation monitors.

The covariant rates of the Hamilton and Newtonian systems are converted
to raw coordinate rates inside each right-hand side, so the explicit
steppers stay geometry-agnostic.  None of the flows is integrated
symplectically: the reparametrized and Newtonian systems are not
Hamiltonian, so conservation is monitored, never enforced.
"""
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import IntegrationError, NumericError, TransversalityError
from .forces import ForceField
from .legendre import StateP, StateU

_T_MATCH = 1e-9


@dataclass(frozen=True)
class StepperConfig:
    """Stepper selection: fixed-step classic RK4 or adaptive RKF4(5).

    ``dt`` is the fixed step (and the initial step of the adaptive
    pair); ``atol``/``rtol`` activate for the adaptive method.
    ``record_every`` thins the recorded samples; forced stop times and
    the final time are always recorded.
    """
    t_end: float
    dt: float = 1e-3
    method: str = "rk4"
    atol: float = 1e-10
    rtol: float = 1e-8
    record_every: int = 1

    def __post_init__(self):
        if self.t_end < 0:
            raise NumericError("t_end must be nonnegative")
        if self.dt <= 0:
            raise NumericError("dt must be positive")
        if self.record_every < 1:
            raise NumericError("record_every must be >= 1")
        if self.atol <= 0 or self.rtol < 0:
            raise NumericError("tolerances must be positive")
        method = self.method.lower().replace("-adaptive", "")
        if method not in ("rk4", "rk45"):
            raise NumericError(f"unknown stepper method {self.method!r}")
        object.__setattr__(self, "method", method)


@dataclass
class Trajectory:
    """Recorded samples of one integrated curve.

    ``states`` are StateP or StateU instances (phase included);
    ``monitors`` holds H, Omega and W at the recorded times with NaN
    where a quantity is undefined for the form.
    """
    form: str
    times: np.ndarray
    states: list
    monitors: dict

    @property
    def phases(self):
        return np.array([st.s for st in self.states])

    def index_at(self, t):
        hits = np.nonzero(np.abs(self.times - t) <=
                          _T_MATCH * max(1.0, abs(t)))[0]
        if hits.size == 0:
            raise KeyError(f"time {t} not recorded")
        return int(hits[0])

    def state_at(self, t):
        return self.states[self.index_at(t)]


class _FlowBase:
    def prepare(self, st0):
        """Hook for per-run parameter resolution; default is identity."""
        return self


class HamiltonFlow(_FlowBase):
    """Hamilton equations with covariant momentum rate and phase rate
    ds/dt = Omega."""

    form = "hamilton"

    def __init__(self, sym, chart, energy=None):
        self.sym = sym
        self.chart = chart
        self.energy = energy
        self.dim = chart.dim

    def pack(self, st: StateP):
        return np.concatenate([st.x, st.p, [st.s]])

    def unpack(self, y):
        n = self.dim
        return StateP(x=y[:n].copy(), p=y[n:2 * n].copy(), s=float(y[2 * n]))

    def _pieces(self, y):
        n = self.dim
        x, p = y[:n], y[n:2 * n]
        xdot = self.sym.momentum_gradient(x, p)
        gamma = self.chart.christoffel(x)
        # spatial gradient with the momentum gradient reused:
        # nabla_q H = dH/dx^q + p_a Gamma^a_qb (dH/dp_b)
        grad = self.sym.partial_x(x, p) + np.einsum("a,aqb,b->q", p, gamma,
                                                    xdot)
        pdot = -grad + np.einsum("kij,k,j->i", gamma, p, xdot)
        omega = float(p @ xdot)
        return x, p, xdot, pdot, omega

    def rates(self, t, y):
        _, _, xdot, pdot, omega = self._pieces(y)
        return np.concatenate([xdot, pdot, [omega]])

    def velocity(self, st: StateP):
        """Coordinate velocity of the trajectory through st."""
        y = self.pack(st)
        n = self.dim
        return self.rates(0.0, y)[:n]

    def monitors(self, t, y):
        n = self.dim
        x, p = y[:n], y[n:2 * n]
        h_val = self.sym.value(x, p)
        omega = self.sym.phase_rate(x, p)
        w_val = math.nan
        if self.energy is not None and omega != 0.0:
            u = self.sym.momentum_gradient(x, p) / omega
            speed = self.chart.norm(x, u)
            if speed > 0.0:
                w_val = self.energy.value(x, speed)
        return {"H": h_val, "Omega": omega, "W": w_val}


class WavefrontFlow(HamiltonFlow):
    """Hamilton rates divided by Omega; time equals accumulated phase.

    ``omega_floor`` defaults to 1e-10*(1+|Omega(0)|), resolved when the
    integration starts; crossing it raises TransversalityError rather
    than integrating through a fold.
    """

    form = "modified"

    def __init__(self, sym, chart, energy=None, omega_floor=None):
        super().__init__(sym, chart, energy)
        self.omega_floor = omega_floor

    def prepare(self, st0):
        if self.omega_floor is not None:
            return self
        omega0 = self.sym.phase_rate(st0.x, st0.p)
        flow = WavefrontFlow(self.sym, self.chart, self.energy,
                             omega_floor=1e-10 * (1.0 + abs(omega0)))
        return flow

    def rates(self, t, y):
        floor = self.omega_floor if self.omega_floor is not None else 1e-10
        x, p, xdot, pdot, omega = self._pieces(y)
        if abs(omega) < floor:
            raise TransversalityError(
                f"transversality lost: |Omega|={abs(omega):.3e} below "
                f"floor {floor:.3e}", state=StateP(x.copy(), p.copy()))
        return np.concatenate([xdot / omega, pdot / omega, [1.0]])


class NewtonianFlow(_FlowBase):
    """Newtonian point dynamics driven by a covariant force field."""

    form = "newtonian"

    def __init__(self, force: ForceField, chart):
        self.force = force
        self.chart = chart
        self.dim = chart.dim

    def pack(self, st: StateU):
        return np.concatenate([st.x, st.u, [st.s]])

    def unpack(self, y):
        n = self.dim
        return StateU(x=y[:n].copy(), u=y[n:2 * n].copy(), s=float(y[2 * n]))

    def rates(self, t, y):
        n = self.dim
        x, u = y[:n], y[n:2 * n]
        f_cov = self.force.eval(StateU(x=x, u=u))
        f_up = self.chart.raise_index(x, f_cov)
        gamma = self.chart.christoffel(x)
        udot = f_up - np.einsum("ijk,j,k->i", gamma, u, u)
        return np.concatenate([u, udot, [1.0]])

    def velocity(self, st: StateU):
        return np.asarray(st.u, dtype=float)

    def monitors(self, t, y):
        n = self.dim
        x, u = y[:n], y[n:2 * n]
        speed = self.chart.norm(x, u)
        w_val = math.nan
        if speed > 0.0:
            w_val = self.force.energy.value(x, speed)
        return {"H": math.nan, "Omega": math.nan, "W": w_val}


def hamilton_rates(sym, chart, st: StateP):
    """(xdot, pdot_raw, sdot) of the Hamilton system at one state."""
    flow = HamiltonFlow(sym, chart)
    y = flow.pack(st)
    dy = flow.rates(0.0, y)
    n = chart.dim
    return dy[:n], dy[n:2 * n], float(dy[2 * n])


def wavefront_rates(sym, chart, st: StateP, omega_floor=None):
    """(xdot, pdot_raw, sdot) of the phase-reparametrized system."""
    flow = WavefrontFlow(sym, chart, omega_floor=omega_floor).prepare(st)
    y = flow.pack(st)
    dy = flow.rates(0.0, y)
    n = chart.dim
    return dy[:n], dy[n:2 * n], float(dy[2 * n])


def newtonian_rates(force, chart, st: StateU):
    """(xdot, udot_raw) of the Newtonian system."""
    flow = NewtonianFlow(force, chart)
    dy = flow.rates(0.0, flow.pack(st))
    n = chart.dim
    return dy[:n], dy[n:2 * n]


def _rk4_step(f, t, y, h):
    k1 = f(t, y)
    k2 = f(t + 0.5 * h, y + 0.5 * h * k1)
    k3 = f(t + 0.5 * h, y + 0.5 * h * k2)
    k4 = f(t + h, y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


# Fehlberg 4(5) tableau; the 4th-order solution is propagated.
_FB_C = (0.0, 0.25, 3.0 / 8.0, 12.0 / 13.0, 1.0, 0.5)
_FB_A = (
    (),
    (0.25,),
    (3.0 / 32.0, 9.0 / 32.0),
    (1932.0 / 2197.0, -7200.0 / 2197.0, 7296.0 / 2197.0),
    (439.0 / 216.0, -8.0, 3680.0 / 513.0, -845.0 / 4104.0),
    (-8.0 / 27.0, 2.0, -3544.0 / 2565.0, 1859.0 / 4104.0, -11.0 / 40.0),
)
_FB_B4 = (25.0 / 216.0, 0.0, 1408.0 / 2565.0, 2197.0 / 4104.0, -0.2, 0.0)
_FB_B5 = (16.0 / 135.0, 0.0, 6656.0 / 12825.0, 28561.0 / 56430.0,
          -9.0 / 50.0, 2.0 / 55.0)


def _rkf45_step(f, t, y, h):
    ks = []
    for i in range(6):
        yi = y
        for j, a in enumerate(_FB_A[i]):
            yi = yi + h * a * ks[j]
        ks.append(f(t + _FB_C[i] * h, yi))
    y4 = y + h * sum(b * k for b, k in zip(_FB_B4, ks))
    y5 = y + h * sum(b * k for b, k in zip(_FB_B5, ks))
    return y4, y5 - y4


def integrate(flow, st0, cfg: StepperConfig, stop_times=()):
    """Integrate one state and return a Trajectory.

    ``stop_times`` are forced onto the step grid (useful for snapshot
    assembly); they are recorded regardless of record_every.  Failures
    raise IntegrationError carrying the time stamp and the last good
    state; right-hand-side errors keep their cause chained.
    """
    flow = flow.prepare(st0)
    y = flow.pack(st0).astype(float)
    t = 0.0
    t_end = float(cfg.t_end)

    targets = sorted({float(ts) for ts in stop_times
                      if 0.0 < ts <= t_end + _T_MATCH} | {t_end})

    times = [0.0]
    states = [flow.unpack(y)]
    monitors = {"t": [0.0]}
    for key, val in flow.monitors(0.0, y).items():
        monitors[key] = [val]

    def rhs(tt, yy):
        try:
            return flow.rates(tt, yy)
        except NumericError as exc:
            raise IntegrationError(
                f"right-hand side failed at t={tt:.6g}: {exc}",
                time=tt, last_state=flow.unpack(y)) from exc

    def record(tt, yy):
        times.append(tt)
        states.append(flow.unpack(yy))
        monitors["t"].append(tt)
        for key, val in flow.monitors(tt, yy).items():
            monitors[key].append(val)

    if t_end == 0.0:
        return Trajectory(form=flow.form, times=np.array(times),
                          states=states,
                          monitors={k: np.array(v)
                                    for k, v in monitors.items()})

    steps = 0
    h_next = cfg.dt
    target_idx = 0
    while t < t_end - _T_MATCH:
        next_target = targets[target_idx]
        h = min(h_next, next_target - t)
        if cfg.method == "rk4":
            y_new = _rk4_step(rhs, t, y, h)
            accept = True
        else:
            y_new, err_vec = _rkf45_step(rhs, t, y, h)
            scale = cfg.atol + cfg.rtol * np.maximum(np.abs(y),
                                                     np.abs(y_new))
            err = float(np.max(np.abs(err_vec) / scale))
            accept = err <= 1.0
            factor = 0.9 * (1.0 / err) ** 0.2 if err > 0 else 5.0
            h_next = h * min(5.0, max(0.2, factor))
            if h_next < 1e-14 * max(1.0, t_end):
                raise IntegrationError(
                    f"step size underflow at t={t:.6g}", time=t,
                    last_state=flow.unpack(y))
        if not accept:
            continue
        if not np.all(np.isfinite(y_new)):
            raise IntegrationError(
                f"non-finite state at t={t + h:.6g}", time=t,
                last_state=flow.unpack(y))
        t = t + h
        y = y_new
        steps += 1
        at_target = abs(t - next_target) <= _T_MATCH * max(1.0, t_end)
        if at_target:
            t = next_target
            target_idx = min(target_idx + 1, len(targets) - 1)
        if (steps % cfg.record_every == 0 or at_target) and \
                abs(times[-1] - t) > _T_MATCH * max(1.0, t_end):
            record(t, y)

    if abs(times[-1] - t_end) > _T_MATCH * max(1.0, t_end):
        record(t_end, y)

    return Trajectory(form=flow.form, times=np.array(times), states=states,
                      monitors={k: np.array(v) for k, v in monitors.items()})


@dataclass(frozen=True)
class ConservationReport:
    """Worst-case monitor drifts along a trajectory."""
    h_drift: Optional[float]
    w_drift: Optional[float]
    omega_min: Optional[float]


def _drift(vals):
    vals = np.asarray(vals, dtype=float)
    finite = vals[np.isfinite(vals)]
    if finite.size == 0:
        return None
    return float(np.max(np.abs(finite - finite[0])))


def conservation_report(traj: Trajectory) -> ConservationReport:
    """Max |H - H0|, max |W - W0| and min |Omega| over recorded samples."""
    omega = np.asarray(traj.monitors.get("Omega", []), dtype=float)
    finite_omega = omega[np.isfinite(omega)]
    return ConservationReport(
        h_drift=_drift(traj.monitors.get("H", [])),
        w_drift=_drift(traj.monitors.get("W", [])),
        omega_min=float(np.min(np.abs(finite_omega)))
        if finite_omega.size else None)
