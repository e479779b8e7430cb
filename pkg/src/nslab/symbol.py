"""Polynomial Hamiltonian symbols and phase fields.

A symbol is H(x, p) = sum_r a_r^{k1..kr}(x) p_k1 ... p_kr with fully
symmetric contravariant coefficient arrays.  Coefficients are stored
dense (dimensions here are tiny) and symmetrized on construction, so
evaluation never depends on how the caller ordered the indices.
"""
import itertools

import numpy as np

from .errors import ShapeError
from .fd import grad_central, grad_central4, scaled_step


def symmetrize(arr):
    """Average an order-r array over all index permutations."""
    arr = np.asarray(arr, dtype=float)
    r = arr.ndim
    if r <= 1:
        return arr
    out = np.zeros_like(arr)
    perms = list(itertools.permutations(range(r)))
    for perm in perms:
        out += arr.transpose(perm)
    return out / len(perms)


def _contract_all(arr, p, times):
    """Contract the last axis with p repeatedly."""
    out = arr
    for _ in range(times):
        out = out @ p
    return out


class PolySymbol:
    """Polynomial symbol with per-order coefficient evaluators.

    Parameters
    ----------
    dim : int
    coeffs : sequence
        Entry r is the order-r coefficient: a constant scalar/array, or
        a callable Point -> array of shape (dim,)*r.  Use None for a
        vanishing order.
    coeff_partials : dict, optional
        Maps r -> callable Point -> array of shape (dim,)+(dim,)*r with
        the derivative index first.  Orders not listed are treated as
        x-independent.  When None entirely, spatial derivatives fall
        back to central differences of the evaluated symbol.
    """

    def __init__(self, dim, coeffs, coeff_partials=None, fd_step=1e-6,
                 name=""):
        self.dim = int(dim)
        self.name = name or "symbol"
        self.fd_step = float(fd_step)
        self._analytic_partials = coeff_partials
        self._coeffs = []
        for r, c in enumerate(coeffs):
            self._coeffs.append(self._wrap(r, c))
        if not self._coeffs:
            raise ShapeError("symbol needs at least the order-0 coefficient")

    def _wrap(self, r, c):
        shape = (self.dim,) * r
        if c is None:
            const = np.zeros(shape) if r else 0.0
            return ("const", const)
        if callable(c):
            def fn(x, _c=c, _r=r, _shape=shape):
                arr = np.asarray(_c(x), dtype=float)
                if _r == 0:
                    return float(arr)
                if arr.shape != _shape:
                    raise ShapeError(
                        f"order-{_r} coefficient returned shape {arr.shape}")
                return symmetrize(arr)
            return ("fn", fn)
        arr = np.asarray(c, dtype=float)
        if r == 0:
            return ("const", float(arr))
        if arr.shape != shape:
            raise ShapeError(f"order-{r} coefficient has shape {arr.shape}, "
                             f"expected {shape}")
        return ("const", symmetrize(arr))

    @property
    def degree(self):
        return len(self._coeffs) - 1

    def coefficient(self, r, x):
        """Symmetrized order-r coefficient array at x."""
        kind, c = self._coeffs[r]
        return c if kind == "const" else c(x)

    def value(self, x, p):
        """H(x, p)."""
        p = np.asarray(p, dtype=float)
        tot = 0.0
        for r in range(self.degree + 1):
            c = self.coefficient(r, x)
            tot += c if r == 0 else float(_contract_all(c, p, r))
        return float(tot)

    def momentum_gradient(self, x, p):
        """dH/dp_q as a vector (upper index q)."""
        p = np.asarray(p, dtype=float)
        out = np.zeros(self.dim)
        for r in range(1, self.degree + 1):
            c = self.coefficient(r, x)
            out += r * np.atleast_1d(_contract_all(c, p, r - 1))
        return out

    def momentum_hessian(self, x, p):
        """d2H/dp_q dp_s as an (n, n) array."""
        p = np.asarray(p, dtype=float)
        out = np.zeros((self.dim, self.dim))
        for r in range(2, self.degree + 1):
            c = self.coefficient(r, x)
            out += r * (r - 1) * np.atleast_2d(_contract_all(c, p, r - 2))
        return out

    def partial_x(self, x, p):
        """dH/dx^q at fixed p (no connection term)."""
        x = np.asarray(x, dtype=float)
        p = np.asarray(p, dtype=float)
        if self._analytic_partials is not None:
            out = np.zeros(self.dim)
            for r, dfn in self._analytic_partials.items():
                da = np.asarray(dfn(x), dtype=float)
                out += np.atleast_1d(_contract_all(da, p, r))
            return out
        h = scaled_step(self.fd_step, x)
        return grad_central(lambda y: self.value(y, p), x, h)

    def spatial_gradient(self, chart, x, p):
        """Covariant spatial gradient of the symbol as extended scalar.

        nabla_q H = dH/dx^q + p_a Gamma^a_qb dH/dp_b
        """
        p = np.asarray(p, dtype=float)
        gamma = chart.christoffel(x)
        corr = np.einsum("a,aqb,b->q", p, gamma, self.momentum_gradient(x, p))
        return self.partial_x(x, p) + corr

    def phase_rate(self, x, p):
        """Omega(x, p) = p . dH/dp, the phase accumulation rate."""
        p = np.asarray(p, dtype=float)
        return float(p @ self.momentum_gradient(x, p))


class ExtendedScalar:
    """Scalar function of (point, covector) with optional analytic
    gradients and finite-difference fallbacks.

    Serves as the independent differentiation route when checking the
    analytic gradients of PolySymbol, and as the generic wrapper for
    user-supplied extended scalars.  ``grad_p`` is d/dp; ``grad_x`` is
    the plain d/dx (the connection correction is added here).
    """

    def __init__(self, value, grad_p=None, grad_x=None, fd_step=1e-6):
        self.value = value
        self._grad_p = grad_p
        self._grad_x = grad_x
        self.fd_step = float(fd_step)

    def momentum_gradient(self, x, p):
        p = np.asarray(p, dtype=float)
        if self._grad_p is not None:
            return np.asarray(self._grad_p(x, p), dtype=float)
        h = scaled_step(self.fd_step, p)
        return grad_central(lambda q: self.value(x, q), p, h)

    def spatial_gradient(self, chart, x, p):
        x = np.asarray(x, dtype=float)
        if self._grad_x is not None:
            base = np.asarray(self._grad_x(x, p), dtype=float)
        else:
            h = scaled_step(self.fd_step, x)
            base = grad_central(lambda y: self.value(y, p), x, h)
        gamma = chart.christoffel(x)
        corr = np.einsum("a,aqb,b->q", np.asarray(p, dtype=float), gamma,
                         self.momentum_gradient(x, p))
        return base + corr


class PhaseField:
    """A phase function S with gradient and covariant Hessian evaluators.

    ``hessian`` must return the covariant second derivative (connection
    term already subtracted); ``from_function`` builds both evaluators
    by finite differences and handles that subtraction.
    """

    def __init__(self, value, gradient, hessian):
        self.value = value
        self.gradient = gradient
        self.hessian = hessian

    @classmethod
    def from_function(cls, s_fn, chart, fd_step=1e-4):
        def gradient(x):
            x = np.asarray(x, dtype=float)
            h = scaled_step(fd_step, x)
            return grad_central4(s_fn, x, h)

        def hessian(x):
            x = np.asarray(x, dtype=float)
            h = scaled_step(fd_step, x)
            n = x.size
            hess = np.empty((n, n))
            for j in range(n):
                e = np.zeros(n)
                e[j] = h
                hess[:, j] = (gradient(x + e) - gradient(x - e)) / (2.0 * h)
            hess = 0.5 * (hess + hess.T)
            gamma = chart.christoffel(x)
            return hess - np.einsum("kij,k->ij", gamma, gradient(x))

        return cls(s_fn, gradient, hessian)


def eikonal_residual(sym, phase, x):
    """H(x, grad S).  Zero exactly where the eikonal equation holds."""
    return sym.value(x, phase.gradient(x))


def apply_transport(sym, phase, amp_value, amp_grad, x):
    """Apply the first transport operator to an amplitude at a point.

    The first-order part contracts the momentum gradient of the symbol
    (evaluated at p = grad S) with the amplitude gradient; the
    zeroth-order part is half the trace of the momentum Hessian against
    the covariant Hessian of S, times the amplitude:

        (dH/dp . grad amp) + 0.5 * tr(d2H/dp2 . hess S) * amp

    For the flat quadratic symbol this reduces to the familiar
    2 grad S . grad amp + (lap S) amp.
    """
    p = phase.gradient(x)
    amp_grad = np.asarray(amp_grad, dtype=float)
    first = float(sym.momentum_gradient(x, p) @ amp_grad)
    hess_p = sym.momentum_hessian(x, p)
    zeroth = 0.5 * float(np.sum(hess_p * phase.hessian(x))) * float(amp_value)
    return first + zeroth


# -- bundled symbol families --------------------------------------------------

def constant_symbol(c, dim=2):
    """H = c."""
    return PolySymbol(dim, [float(c)], coeff_partials={}, name="constant")


def free_eikonal(dim=2):
    """H = |p|^2 - 1 on a flat chart."""
    return PolySymbol(dim, [-1.0, None, np.eye(dim)], coeff_partials={},
                      name="free-eikonal")


def half_quadratic(dim=2):
    """H = |p|^2 / 2."""
    return PolySymbol(dim, [0.0, None, 0.5 * np.eye(dim)], coeff_partials={},
                      name="half-quadratic")


def quartic_norm(dim=2):
    """H = |p|^4 (flat chart)."""
    eye = np.eye(dim)
    a4 = np.einsum("ij,kl->ijkl", eye, eye)
    return PolySymbol(dim, [0.0, None, None, None, a4], coeff_partials={},
                      name="quartic")


def anisotropic_quadratic(diag_entries):
    """H = sum_i d_i p_i^2; anisotropic unless all d_i equal."""
    d = np.asarray(diag_entries, dtype=float)
    return PolySymbol(d.size, [0.0, None, np.diag(d)], coeff_partials={},
                      name="anisotropic")


def isotropic_medium(index_fn, index_grad=None, dim=2):
    """H = |p|^2 - n(x)^2 on a flat chart (isotropic refracting medium)."""
    def a0(x):
        return -float(index_fn(x)) ** 2

    partials = None
    if index_grad is not None:
        def d0(x):
            return -2.0 * float(index_fn(x)) * np.asarray(index_grad(x),
                                                          dtype=float)
        partials = {0: d0}

    return PolySymbol(dim, [a0, None, np.eye(dim)], coeff_partials=partials,
                      name="isotropic-medium")


def quartic_medium(index_fn, index_grad=None, dim=2):
    """H = |p|^4 + n(x)^2 (quartic with an x-dependent shift)."""
    eye = np.eye(dim)
    a4 = np.einsum("ij,kl->ijkl", eye, eye)

    def a0(x):
        return float(index_fn(x)) ** 2

    partials = None
    if index_grad is not None:
        def d0(x):
            return 2.0 * float(index_fn(x)) * np.asarray(index_grad(x),
                                                         dtype=float)
        partials = {0: d0}

    return PolySymbol(dim, [a0, None, None, None, a4],
                      coeff_partials=partials, name="quartic-medium")


def metric_eikonal(chart, offset=-1.0):
    """H = g^{ij}(x) p_i p_j + offset; rays are geodesics of the chart."""
    def a2(x):
        return chart.inverse_metric(x)

    def d2(x):
        ginv = chart.inverse_metric(x)
        dg = chart.partials_at(x)
        # d_q g^{ij} = -g^{ia} (d_q g_ab) g^{bj}
        return -np.einsum("ia,qab,bj->qij", ginv, dg, ginv)

    return PolySymbol(chart.dim, [float(offset), None, a2],
                      coeff_partials={2: d2}, name="metric-eikonal")


def linear_index(slope=0.2, axis=0, dim=2):
    """The bundled linear refractive index n(x) = 1 + slope*x^axis.

    Returns (n, grad_n) callables.
    """
    grad = np.zeros(dim)
    grad[axis] = slope

    def n_fn(x):
        return 1.0 + slope * float(np.asarray(x)[axis])

    def grad_fn(x):
        return grad.copy()

    return n_fn, grad_fn
