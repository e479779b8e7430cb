"""Coordinate-chart Riemannian geometry.

A chart is a single coordinate patch with a metric evaluator.  Points,
vectors (upper index) and covectors (lower index) are plain 1-D numpy
arrays; all functions here are pure and safe for concurrent read-only
use.

Index conventions:
    metric(x)[i, j]          = g_ij
    metric_partials(x)[k, i, j] = d g_ij / d x^k
    christoffel(x)[k, i, j]  = Gamma^k_ij   (symmetric in i, j)
"""
import numpy as np

from .errors import DegenerateMetricError, DomainError, ShapeError
from .fd import scaled_step

_SYM_TOL = 1e-12


def as_components(a, dim, what="components"):
    """Coerce to a float vector of length dim, validating shape and finiteness."""
    arr = np.asarray(a, dtype=float).reshape(-1)
    if arr.size != dim:
        raise ShapeError(f"{what}: expected {dim} components, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise ShapeError(f"{what}: non-finite entries {arr}")
    return arr


class MetricChart:
    """A coordinate chart with metric, derived connection, and domain box.

    Parameters
    ----------
    dim : int
        Chart dimension n >= 2.
    metric : callable
        Point -> (n, n) symmetric positive-definite array.
    metric_partials : callable, optional
        Point -> (n, n, n) array of d g_ij / d x^k (k first).  When
        absent, partials come from central differences with step
        fd_step*(1 + |x|_inf).
    domain : array-like, optional
        (n, 2) per-axis closed interval box; defaults to all of R^n.
    fd_step : float
        Base step for the finite-difference partials.
    constant : bool
        Declare the metric x-independent; caches g, g^-1 and Gamma.
    """

    def __init__(self, dim, metric, metric_partials=None, domain=None,
                 fd_step=1e-5, constant=False, name=""):
        if dim < 2:
            raise ShapeError("chart dimension must be at least 2")
        self.dim = int(dim)
        self._metric = metric
        self._partials = metric_partials
        self.fd_step = float(fd_step)
        self.name = name or "chart"
        self.constant = bool(constant)
        if domain is None:
            domain = [(-np.inf, np.inf)] * self.dim
        self.domain = np.asarray(domain, dtype=float).reshape(self.dim, 2)
        self._cache = {}

    def __repr__(self):
        return f"MetricChart({self.name}, dim={self.dim})"

    # -- domain ------------------------------------------------------------

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.domain[:, 0]) and np.all(x <= self.domain[:, 1]))

    def check_point(self, x):
        x = as_components(x, self.dim, "point")
        if not self.contains(x):
            raise DomainError(
                f"point {x} outside domain box of {self.name}")
        return x

    # -- metric ------------------------------------------------------------

    def metric_at(self, x):
        """Validated metric matrix at x (symmetric, positive definite)."""
        if self.constant and "g" in self._cache:
            return self._cache["g"]
        x = self.check_point(x)
        g = np.asarray(self._metric(x), dtype=float)
        if g.shape != (self.dim, self.dim):
            raise ShapeError(f"metric returned shape {g.shape}")
        scale = np.max(np.abs(g))
        if np.max(np.abs(g - g.T)) > _SYM_TOL * max(1.0, scale):
            raise DegenerateMetricError(f"metric not symmetric at {x}")
        g = 0.5 * (g + g.T)
        try:
            np.linalg.cholesky(g)
        except np.linalg.LinAlgError:
            raise DegenerateMetricError(f"degenerate metric at {x}")
        if self.constant:
            self._cache["g"] = g
        return g

    def inverse_metric(self, x):
        if self.constant and "ginv" in self._cache:
            return self._cache["ginv"]
        g = self.metric_at(x)
        try:
            ginv = np.linalg.inv(g)
        except np.linalg.LinAlgError:
            raise DegenerateMetricError(f"degenerate metric at {x}")
        if self.constant:
            self._cache["ginv"] = ginv
        return ginv

    def partials_at(self, x):
        """d g_ij / d x^k as array [k, i, j]."""
        if self.constant:
            return np.zeros((self.dim,) * 3)
        x = self.check_point(x)
        if self._partials is not None:
            dg = np.asarray(self._partials(x), dtype=float)
            if dg.shape != (self.dim,) * 3:
                raise ShapeError(f"metric_partials returned shape {dg.shape}")
            return dg
        h = scaled_step(self.fd_step, x)
        dg = np.empty((self.dim,) * 3)
        for k in range(self.dim):
            e = np.zeros(self.dim)
            e[k] = h
            gp = np.asarray(self._metric(x + e), dtype=float)
            gm = np.asarray(self._metric(x - e), dtype=float)
            dg[k] = (gp - gm) / (2.0 * h)
        return dg

    def christoffel(self, x):
        """Gamma^k_ij of the metric connection, stored symmetric in (i, j)."""
        if self.constant:
            if "gamma" not in self._cache:
                self._cache["gamma"] = np.zeros((self.dim,) * 3)
            return self._cache["gamma"]
        ginv = self.inverse_metric(x)
        dg = self.partials_at(x)
        # 0.5 * g^{ks} (d_j g_si + d_i g_sj - d_s g_ij)
        term = dg.transpose(2, 1, 0) + dg.transpose(1, 2, 0) - dg
        gamma = 0.5 * np.einsum("ks,sij->kij", ginv, term)
        return 0.5 * (gamma + gamma.transpose(0, 2, 1))

    # -- index gymnastics ----------------------------------------------------

    def lower(self, x, v):
        """v^j -> p_i = g_ij v^j."""
        v = as_components(v, self.dim, "vector")
        return self.metric_at(x) @ v

    def raise_index(self, x, p):
        """p_j -> v^i = g^{ij} p_j."""
        p = as_components(p, self.dim, "covector")
        return self.inverse_metric(x) @ p

    def inner(self, x, a, b):
        """Metric inner product of two vectors."""
        return float(np.asarray(a) @ self.metric_at(x) @ np.asarray(b))

    def norm(self, x, v):
        """Metric norm of a vector."""
        q = self.inner(x, v, v)
        return float(np.sqrt(max(q, 0.0)))

    def conorm(self, x, p):
        """Metric norm of a covector, sqrt(p g^{-1} p)."""
        p = np.asarray(p, dtype=float)
        q = float(p @ self.inverse_metric(x) @ p)
        return float(np.sqrt(max(q, 0.0)))


def christoffel_at(chart, x):
    """Gamma^k_ij at x; thin functional alias of MetricChart.christoffel."""
    return chart.christoffel(x)


def covariant_rate(chart, x, xdot, p, pdot_raw):
    """Covariant time derivative of a covector along a curve.

    nabla_t p_i = pdot_i - Gamma^k_ij p_k xdot^j
    """
    gamma = chart.christoffel(x)
    p = as_components(p, chart.dim, "covector")
    xdot = as_components(xdot, chart.dim, "vector")
    pdot_raw = as_components(pdot_raw, chart.dim, "covector rate")
    return pdot_raw - np.einsum("kij,k,j->i", gamma, p, xdot)


def raw_covector_rate(chart, x, xdot, p, cov_rate):
    """Invert covariant_rate: pdot_i = nabla_t p_i + Gamma^k_ij p_k xdot^j."""
    gamma = chart.christoffel(x)
    return np.asarray(cov_rate, dtype=float) + np.einsum(
        "kij,k,j->i", gamma, np.asarray(p, dtype=float),
        np.asarray(xdot, dtype=float))


def vector_covariant_rate(chart, x, xdot, u, udot_raw):
    """nabla_t u^i = udot^i + Gamma^i_jk u^j xdot^k."""
    gamma = chart.christoffel(x)
    return np.asarray(udot_raw, dtype=float) + np.einsum(
        "ijk,j,k->i", gamma, np.asarray(u, dtype=float),
        np.asarray(xdot, dtype=float))


def raw_vector_rate(chart, x, xdot, u, cov_rate):
    """Invert vector_covariant_rate: udot^i = nabla_t u^i - Gamma^i_jk u^j xdot^k."""
    gamma = chart.christoffel(x)
    return np.asarray(cov_rate, dtype=float) - np.einsum(
        "ijk,j,k->i", gamma, np.asarray(u, dtype=float),
        np.asarray(xdot, dtype=float))


# -- bundled chart families -------------------------------------------------

def euclidean_chart(dim=2):
    """Flat chart, identity metric."""
    eye = np.eye(dim)
    return MetricChart(dim, lambda x: eye, constant=True, name="euclidean")


def diagonal_chart(entries, entry_grads=None, domain=None, name="diagonal"):
    """Diagonal metric g = diag(f_1(x), ..., f_n(x)).

    entries: callables Point -> float.  entry_grads, when given, is a
    matching list of callables Point -> gradient vector (length n).
    """
    dim = len(entries)

    def metric(x):
        return np.diag([float(f(x)) for f in entries])

    partials = None
    if entry_grads is not None:
        def partials(x):
            dg = np.zeros((dim, dim, dim))
            for i, gfn in enumerate(entry_grads):
                grad = np.asarray(gfn(x), dtype=float)
                for k in range(dim):
                    dg[k, i, i] = grad[k]
            return dg

    return MetricChart(dim, metric, metric_partials=partials, domain=domain,
                       name=name)


def polar_chart(r_min=1e-9, r_max=np.inf):
    """Plane in polar coordinates (r, phi): g = diag(1, r^2)."""
    chart = diagonal_chart(
        [lambda x: 1.0, lambda x: x[0] ** 2],
        entry_grads=[lambda x: np.zeros(2),
                     lambda x: np.array([2.0 * x[0], 0.0])],
        domain=[(r_min, r_max), (-np.inf, np.inf)],
        name="polar")
    return chart


def sphere_chart(radius=1.0, theta_margin=1e-8):
    """Round sphere in (theta, phi): g = diag(R^2, R^2 sin^2 theta)."""
    r2 = float(radius) ** 2

    def metric(x):
        return np.diag([r2, r2 * np.sin(x[0]) ** 2])

    def partials(x):
        dg = np.zeros((2, 2, 2))
        dg[0, 1, 1] = r2 * np.sin(2.0 * x[0])
        return dg

    return MetricChart(2, metric, metric_partials=partials,
                       domain=[(theta_margin, np.pi - theta_margin),
                               (-np.inf, np.inf)],
                       name="sphere")


def conformal_chart(dim, phi, grad_phi=None, domain=None, fd_step=1e-5):
    """Conformally flat metric g = exp(2 phi(x)) * identity."""
    eye = np.eye(dim)

    def metric(x):
        return np.exp(2.0 * float(phi(x))) * eye

    partials = None
    if grad_phi is not None:
        def partials(x):
            factor = 2.0 * np.exp(2.0 * float(phi(x)))
            grad = np.asarray(grad_phi(x), dtype=float)
            dg = np.zeros((dim, dim, dim))
            for k in range(dim):
                dg[k] = factor * grad[k] * eye
            return dg

    return MetricChart(dim, metric, metric_partials=partials, domain=domain,
                       fd_step=fd_step, name="conformal")
