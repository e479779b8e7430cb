"""Finite-difference stencils shared across modules.

Scalar first derivatives come in a 2nd-order flavor (plain central) and
a 4th-order flavor (five-point); the 4th-order one is what internal
derivative fields use so that 1e-8 identity tolerances hold with room
to spare.  Steps are always scaled as base*(1 + |t|) to stay meaningful
across magnitudes.
"""
import numpy as np


def scaled_step(base, ref):
    """Step base*(1 + max-norm of ref)."""
    return base * (1.0 + float(np.max(np.abs(ref))))


def central(f, t, h):
    return (f(t + h) - f(t - h)) / (2.0 * h)


def central4(f, t, h):
    """Five-point first derivative, O(h^4)."""
    return (f(t - 2 * h) - 8 * f(t - h) + 8 * f(t + h) - f(t + 2 * h)) / (12.0 * h)


def second4(f, t, h):
    """Five-point second derivative, O(h^4)."""
    return (-f(t - 2 * h) + 16 * f(t - h) - 30 * f(t)
            + 16 * f(t + h) - f(t + 2 * h)) / (12.0 * h * h)


def grad_central(f, x, h):
    """Componentwise 2nd-order gradient of a scalar function of a vector."""
    x = np.asarray(x, dtype=float)
    out = np.empty(x.size)
    for q in range(x.size):
        e = np.zeros(x.size)
        e[q] = h
        out[q] = (f(x + e) - f(x - e)) / (2.0 * h)
    return out


def grad_central4(f, x, h):
    """Componentwise 4th-order gradient."""
    x = np.asarray(x, dtype=float)
    out = np.empty(x.size)
    for q in range(x.size):
        e = np.zeros(x.size)
        e[q] = 1.0
        out[q] = central4(lambda s: f(x + s * e), 0.0, h)
    return out
