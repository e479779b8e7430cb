"""Closed-form force fields of the Newtonian front dynamics.

Forces are returned in covariant components F_k; the flow module
raises the index when forming coordinate rates.  All formulas use
metric norms and metric index lowering, so they hold on any chart.
"""
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import DegenerateSlopeError, NumericError
from .legendre import EnergyField, StateU

_SLOPE_FLOOR = 1e-14


def projectors(chart, x, v):
    """Orthogonal projectors onto span(v) and its g-orthogonal complement.

    Returns (Q, P) as mixed (1,1) tensors: Q^i_k = v^i v_k / |v|^2 and
    P = 1 - Q, so Q + P = 1 and Q P = P Q = 0.
    """
    v = np.asarray(v, dtype=float)
    v_low = chart.lower(x, v)
    v2 = float(v @ v_low)
    if v2 <= 0.0:
        raise NumericError("projector undefined at zero velocity")
    q = np.outer(v, v_low) / v2
    return q, np.eye(chart.dim) - q


def _unit_velocity(chart, st: StateU):
    x = np.asarray(st.x, dtype=float)
    u = np.asarray(st.u, dtype=float)
    u_low = chart.lower(x, u)
    u2 = float(u @ u_low)
    if u2 <= 0.0:
        raise NumericError("force undefined at zero velocity")
    speed = float(np.sqrt(u2))
    return x, speed, u / speed, u_low / speed


def wavefront_force(energy: EnergyField, chart, st: StateU):
    """Covariant force of the wave-front Newtonian system.

    F_k = -|u| sum_i (grad_i W / W') (2 N^i N_k - delta^i_k), with N the
    metric-unit direction of u and W evaluated at (x, |u|).
    """
    x, speed, n_up, n_low = _unit_velocity(chart, st)
    slope = float(energy.du(x, speed))
    if abs(slope) < _SLOPE_FLOOR:
        raise DegenerateSlopeError(
            f"degenerate W slope at x={x}, |u|={speed}")
    grad_w = np.asarray(energy.grad_x(x, speed), dtype=float)
    ratio = grad_w / slope
    return -speed * (2.0 * float(ratio @ n_up) * n_low - ratio)


def normal_shift_force(energy: EnergyField, h: Callable, chart, st: StateU):
    """General normal-shift force: h(W) N_k / W' added to the wave-front
    force.  With h identically zero the result is bitwise the
    wave-front force.

    The classification behind this formula assumes dimension >= 3; it
    is still evaluated for n = 2.
    """
    base = wavefront_force(energy, chart, st)
    x, speed, _, n_low = _unit_velocity(chart, st)
    slope = float(energy.du(x, speed))
    w = float(energy.value(x, speed))
    return base + (float(h(w)) / slope) * n_low


@dataclass(frozen=True)
class ForceField:
    """A covariant force evaluator with its source energy field.

    ``h`` is None for the conservative wave-front force.
    """
    eval: Callable
    energy: EnergyField
    h: Optional[Callable] = None
    name: str = "force"


def make_force(energy: EnergyField, chart, h=None, name=None):
    """ForceField wrapping wavefront_force or normal_shift_force."""
    if h is None:
        fn = lambda st: wavefront_force(energy, chart, st)
        label = name or "wavefront"
    else:
        fn = lambda st: normal_shift_force(energy, h, chart, st)
        label = name or "normal-shift"
    return ForceField(eval=fn, energy=energy, h=h, name=label)
