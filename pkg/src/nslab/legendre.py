"""Legendre transformations between momentum, velocity and actual-velocity
representations, spherical Lagrangians, and the conserved energy field.

States carry the accumulated phase s alongside the point and the fiber
component, so the transformations can thread a trajectory sample
through unchanged.
"""
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from .errors import (AnisotropyError, DegenerateSlopeError,
                     LegendreInversionError, NewtonConvergenceError,
                     NumericError, VelocityRangeError)
from .fd import central4, grad_central4, scaled_step, second4


@dataclass(frozen=True, eq=False)
class StateP:
    """Point, momentum covector, accumulated phase."""
    x: np.ndarray
    p: np.ndarray
    s: float = 0.0


@dataclass(frozen=True, eq=False)
class StateV:
    """Point, Legendre velocity vector, accumulated phase."""
    x: np.ndarray
    v: np.ndarray
    s: float = 0.0


@dataclass(frozen=True, eq=False)
class StateU:
    """Point, actual velocity vector, accumulated phase."""
    x: np.ndarray
    u: np.ndarray
    s: float = 0.0


def to_velocity(sym, st: StateP) -> StateV:
    """Inverse Legendre map: v^i = dH/dp_i at (x, p)."""
    return StateV(x=np.asarray(st.x, dtype=float),
                  v=sym.momentum_gradient(st.x, st.p), s=st.s)


def to_momentum(sym, st: StateV, guess, max_iter=50, tol=1e-12) -> StateP:
    """Direct Legendre map: solve dH/dp = v for p by damped Newton.

    The solve is local; with several preimages the returned root is the
    one in the basin of ``guess``.  Raises LegendreInversionError on a
    singular momentum Hessian and NewtonConvergenceError (carrying the
    final residual) when max_iter is exhausted or damping stalls.
    """
    x = np.asarray(st.x, dtype=float)
    v = np.asarray(st.v, dtype=float)
    p = np.asarray(guess, dtype=float).copy()
    target = tol * (1.0 + float(np.max(np.abs(v))))

    res = sym.momentum_gradient(x, p) - v
    rnorm = float(np.max(np.abs(res)))
    for _ in range(max_iter):
        if rnorm <= target:
            return StateP(x=x, p=p, s=st.s)
        hess = sym.momentum_hessian(x, p)
        try:
            dp = np.linalg.solve(hess, -res)
        except np.linalg.LinAlgError:
            raise LegendreInversionError(
                f"Legendre map not invertible here (singular momentum "
                f"Hessian at x={x}, p={p})")
        if not np.all(np.isfinite(dp)):
            raise LegendreInversionError(
                f"Legendre map not invertible here (unbounded Newton step "
                f"at x={x}, p={p})")
        step = 1.0
        while True:
            p_new = p + step * dp
            res_new = sym.momentum_gradient(x, p_new) - v
            rnorm_new = float(np.max(np.abs(res_new)))
            if rnorm_new < rnorm or step <= 2 ** -30:
                break
            step *= 0.5
        if rnorm_new >= rnorm:
            raise NewtonConvergenceError(
                f"Legendre inversion stalled at residual {rnorm:.3e}",
                residual=rnorm)
        p, res, rnorm = p_new, res_new, rnorm_new
    if rnorm <= target:
        return StateP(x=x, p=p, s=st.s)
    raise NewtonConvergenceError(
        f"Legendre inversion did not converge in {max_iter} iterations "
        f"(residual {rnorm:.3e}, target {target:.3e})", residual=rnorm)


def lagrangian_value(sym, x, p):
    """l = p . dH/dp - H, the Lagrange function at the image point."""
    p = np.asarray(p, dtype=float)
    return float(p @ sym.momentum_gradient(x, p)) - sym.value(x, p)


@dataclass(frozen=True)
class SphericalLagrangian:
    """Fiberwise spherically symmetric Lagrangian L(x, v), v = |v|_g.

    ``dv`` and ``dv2`` are the first and second radial derivatives,
    ``grad_x`` the spatial gradient at fixed radial coordinate (for a
    spherical fiber function the connection correction cancels, so this
    is the covariant spatial gradient), ``grad_x_dv`` the spatial
    gradient of the radial slope.
    """
    value: Callable
    dv: Callable
    dv2: Callable
    grad_x: Callable
    grad_x_dv: Callable
    v_range: tuple

    @classmethod
    def from_scalar(cls, l_fn, v_range, fd_v=1e-4, fd_x=1e-4):
        """Build all derivative fields from L(x, v) by 4th-order stencils."""
        def dv(x, v):
            return central4(lambda t: l_fn(x, t), v, scaled_step(fd_v, v))

        def dv2(x, v):
            return second4(lambda t: l_fn(x, t), v,
                           scaled_step(10 * fd_v, v))

        def grad_x(x, v):
            x = np.asarray(x, dtype=float)
            return grad_central4(lambda y: l_fn(y, v), x,
                                 scaled_step(fd_x, x))

        def grad_x_dv(x, v):
            x = np.asarray(x, dtype=float)
            return grad_central4(lambda y: dv(y, v), x,
                                 scaled_step(fd_x, x))

        return cls(value=l_fn, dv=dv, dv2=dv2, grad_x=grad_x,
                   grad_x_dv=grad_x_dv, v_range=tuple(v_range))


def quadratic_medium_lagrangian(index_fn, index_grad, v_range=(1e-6, 1e6)):
    """Analytic Lagrangian of H = |p|^2 - n(x)^2: L = v^2/4 + n^2."""
    def value(x, v):
        return v * v / 4.0 + float(index_fn(x)) ** 2

    def dv(x, v):
        return v / 2.0

    def dv2(x, v):
        return 0.5

    def grad_x(x, v):
        return 2.0 * float(index_fn(x)) * np.asarray(index_grad(x),
                                                     dtype=float)

    def grad_x_dv(x, v):
        return np.zeros(np.asarray(index_grad(np.zeros(2))).size)

    return SphericalLagrangian(value=value, dv=dv, dv2=dv2, grad_x=grad_x,
                               grad_x_dv=grad_x_dv, v_range=tuple(v_range))


def _unit_pair(chart, x, direction):
    """Metric-unit vector along ``direction`` and its lowered covector."""
    d = np.asarray(direction, dtype=float)
    nd = chart.norm(x, d)
    if nd == 0.0:
        raise NumericError("zero direction")
    unit = d / nd
    return unit, chart.lower(x, unit)


def radial_momentum(sym, chart, x, speed, direction=None, rho_max=1e8):
    """Momentum p = rho * n_hat with |dH/dp|_g = speed, solved radially.

    ``direction`` picks the unit covector axis (first basis vector by
    default).  Assumes the speed is monotone in rho on the bracket,
    which holds for the bundled spherically symmetric symbols.
    """
    x = np.asarray(x, dtype=float)
    if direction is None:
        direction = np.eye(chart.dim)[0]
    _, n_cov = _unit_pair(chart, x, direction)

    def f(rho):
        return chart.norm(x, sym.momentum_gradient(x, rho * n_cov)) - speed

    lo, hi = 1e-12, 1.0
    flo = f(lo)
    while f(hi) * flo > 0.0:
        hi *= 2.0
        if hi > rho_max:
            raise VelocityRangeError(
                f"no radial momentum reaches speed {speed} at x={x}")
    rho = brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    return rho * n_cov


_PROBE_WEIGHTS = [(1.0, 0.0), (0.0, 1.0), (1.0, 1.0), (1.0, -1.0),
                  (0.3, 1.0), (-1.0, 0.7)]


def _probe_directions(dim):
    """Deterministic direction set covering all coordinate planes."""
    dirs = [np.eye(dim)[i] for i in range(dim)]
    for i in range(dim):
        for j in range(i + 1, dim):
            for wa, wb in _PROBE_WEIGHTS[2:]:
                d = np.zeros(dim)
                d[i], d[j] = wa, wb
                dirs.append(d)
    return dirs


def spherical_from_symbol(sym, chart, probes, v_range=(1e-2, 20.0),
                          speeds=(0.5, 1.0, 2.0), iso_tol=1e-8,
                          fd_v=1e-4, fd_x=1e-4):
    """Spherical Lagrangian of a symbol whose Lagrange function is
    fiberwise spherically symmetric.

    The value is computed by a radial 1-D inversion of the momentum
    gradient; the independent check against the full vector Newton
    inversion lives in the test suite.  ``probes`` are chart points at
    which directional independence is verified; the spread of L over a
    deterministic direction fan must stay below iso_tol.
    """
    def l_scalar(x, v):
        p = radial_momentum(sym, chart, x, v)
        return lagrangian_value(sym, x, p)

    for x in probes:
        x = np.asarray(x, dtype=float)
        for speed in speeds:
            values = []
            for d in _probe_directions(chart.dim):
                p = radial_momentum(sym, chart, x, speed, direction=d)
                values.append(lagrangian_value(sym, x, p))
            spread = max(values) - min(values)
            if spread > iso_tol * (1.0 + abs(values[0])):
                raise AnisotropyError(
                    f"symbol not fiberwise spherically symmetric "
                    f"(L spread {spread:.3e} at x={x}, |v|={speed})")

    return SphericalLagrangian.from_scalar(l_scalar, v_range, fd_v=fd_v,
                                           fd_x=fd_x)


@dataclass(frozen=True)
class EnergyField:
    """First integral W(x, u) with radial slope and spatial gradient.

    ``epsilon`` is the fixed sign of the radial Lagrangian slope used
    when trading v for the actual speed u = epsilon / L'; ``u_range``
    bounds the speeds at which the field is defined.
    """
    value: Callable
    du: Callable
    grad_x: Callable
    epsilon: float
    u_range: tuple = (1e-3, 1e3)

    def on_shell_speed(self, x, bracket=None):
        """Solve W(x, u) = 0 for the speed u (eikonal shell).

        Scans a geometric grid over ``bracket`` (the field's u_range by
        default) for a sign change, then bisects.
        """
        lo, hi = bracket if bracket is not None else self.u_range
        grid = np.geomspace(lo, hi, 128)
        vals = np.array([self.value(x, u) for u in grid])
        for i in range(grid.size - 1):
            if vals[i] == 0.0:
                return float(grid[i])
            if vals[i] * vals[i + 1] < 0.0:
                return brentq(lambda u: self.value(x, u), grid[i],
                              grid[i + 1], xtol=1e-15,
                              rtol=4 * np.finfo(float).eps)
        if vals[-1] == 0.0:
            return float(grid[-1])
        raise VelocityRangeError(
            f"no speed with vanishing energy at x={x} within "
            f"[{lo:g}, {hi:g}]")


def energy_from_function(w_fn, dw_du=None, grad_x=None, epsilon=1.0,
                         u_range=(1e-3, 1e3), fd_u=1e-4, fd_x=1e-4):
    """EnergyField from an explicit W(x, u), derivatives by stencil
    unless supplied."""
    du = dw_du or (lambda x, u: central4(lambda t: w_fn(x, t), u,
                                         scaled_step(fd_u, u)))
    gx = grad_x or (lambda x, u: grad_central4(
        lambda y: w_fn(y, u), np.asarray(x, dtype=float),
        scaled_step(fd_x, np.asarray(x, dtype=float))))
    return EnergyField(value=w_fn, du=du, grad_x=gx, epsilon=float(epsilon),
                       u_range=tuple(u_range))


def build_energy(lag: SphericalLagrangian, x_ref, v_ref, fd_u=1e-4,
                 fd_x=1e-4):
    """Energy field W(x, u) of a spherical Lagrangian.

    u and v are traded through u = epsilon / L'(x, v) with epsilon the
    sign of L' at the reference state, asserted constant: a sign flip
    inside the declared v-range raises rather than silently switching
    branches.  W itself is v L' - L evaluated at the solved v.
    """
    slope_ref = lag.dv(np.asarray(x_ref, dtype=float), float(v_ref))
    if slope_ref == 0.0:
        raise DegenerateSlopeError("degenerate W slope (L' = 0 at the "
                                   "reference state)")
    eps = 1.0 if slope_ref > 0 else -1.0
    v_lo, v_hi = lag.v_range

    def solve_v(x, u):
        if u <= 0.0:
            raise VelocityRangeError(f"speed must be positive, got {u}")
        target = eps / u

        def f(v):
            return lag.dv(x, v) - target

        flo, fhi = f(v_lo), f(v_hi)
        if flo * fhi > 0.0:
            raise VelocityRangeError(
                f"velocity out of range for requested u={u} at x={x}")
        v = brentq(f, v_lo, v_hi, xtol=1e-15,
                   rtol=4 * np.finfo(float).eps)
        if lag.dv(x, v) * eps <= 0.0:
            raise DegenerateSlopeError(
                "energy sign flipped inside the velocity range")
        return v

    def value(x, u):
        x = np.asarray(x, dtype=float)
        v = solve_v(x, u)
        return v * (eps / u) - lag.value(x, v)

    def du(x, u):
        return central4(lambda t: value(x, t), u, scaled_step(fd_u, u))

    def grad_x(x, u):
        x = np.asarray(x, dtype=float)
        return grad_central4(lambda y: value(y, u), x,
                             scaled_step(fd_x, x))

    # speeds representable through u = eps/L' at the reference point,
    # shrunk for bracketing headroom
    ends = sorted((eps / lag.dv(np.asarray(x_ref, dtype=float), v_lo),
                   eps / lag.dv(np.asarray(x_ref, dtype=float), v_hi)))
    u_range = (ends[0] * 1.05, ends[1] * 0.95)

    return EnergyField(value=value, du=du, grad_x=grad_x, epsilon=eps,
                       u_range=u_range)


@dataclass(frozen=True)
class GradientIdentityReport:
    """Residuals of the Lagrangian/Hamiltonian spatial-gradient identity."""
    residuals: np.ndarray
    max_residual: float
    failures: list


def check_gradient_identity(sym, chart, samples, fd_x=1e-4, fd_v=1e-4):
    """Residual of grad_x L (at the Legendre image) + grad_x H.

    For each StateP sample, L is evaluated as a function of (x, v) via
    warm-started Newton inversion; its covariant spatial gradient is
    formed by 4th-order stencils plus the connection correction, and
    compared against the symbol's own spatial gradient.  Returns a
    report with per-sample max-abs residuals.
    """
    residuals = np.zeros((len(samples), chart.dim))
    failures = []
    for i, st in enumerate(samples):
        x = np.asarray(st.x, dtype=float)
        p = np.asarray(st.p, dtype=float)
        try:
            v = sym.momentum_gradient(x, p)

            def l_of(y, w):
                stp = to_momentum(sym, StateV(np.asarray(y, dtype=float),
                                              np.asarray(w, dtype=float)),
                                  guess=p)
                return lagrangian_value(sym, stp.x, stp.p)

            hx = scaled_step(fd_x, x)
            dl_dx = grad_central4(lambda y: l_of(y, v), x, hx)
            hv = scaled_step(fd_v, v)
            dl_dv = grad_central4(lambda w: l_of(x, w), v, hv)
            gamma = chart.christoffel(x)
            # contravariant-representation connection term:
            # nabla_q L = dL/dx^q - v^a Gamma^b_qa dL/dv^b
            grad_l = dl_dx - np.einsum("a,bqa,b->q", v, gamma, dl_dv)
            residuals[i] = grad_l + sym.spatial_gradient(chart, x, p)
        except NumericError as exc:
            failures.append((i, exc))
            residuals[i] = np.nan
    finite = residuals[np.isfinite(residuals).all(axis=1)]
    max_res = float(np.max(np.abs(finite))) if finite.size else np.nan
    return GradientIdentityReport(residuals=residuals, max_residual=max_res,
                                  failures=failures)
