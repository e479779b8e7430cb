#!/usr/bin/env python3
"""The symbol layer on its own: eikonal residuals and the leading
amplitude transport.

A phase function S solves the eikonal equation of a symbol H when
H(x, grad S) = 0 pointwise.  The residual evaluator makes that a
one-liner, and the transport operator applies the first-order equation
governing the leading amplitude along the rays of S:

    (dH/dp . grad a) + 0.5 tr(d2H/dp2 . hess S) a

which for the flat quadratic symbol is 2 grad S . grad a + (lap S) a.
A cylindrical wave from the origin illustrates both: its phase |x|
solves the eikonal equation away from the source, and the amplitude
a = |x|^(-1/2) kills the transport expression, which is exactly the
classical 2-D ray-amplitude decay law.
"""
import numpy as np

import nslab as ns


def main():
    chart = ns.euclidean_chart(2)
    sym = ns.free_eikonal(2)        # H = |p|^2 - 1

    # plane wave: S = x1 solves the eikonal equation everywhere
    plane = ns.PhaseField(lambda x: x[0],
                          lambda x: np.array([1.0, 0.0]),
                          lambda x: np.zeros((2, 2)))
    x = np.array([0.7, -0.3])
    print("plane-wave eikonal residual:",
          ns.eikonal_residual(sym, plane, x))

    # cylindrical wave: S = |x|, built from the scalar field alone with
    # stencil gradients and the covariant Hessian
    radial = ns.PhaseField.from_function(lambda x: np.hypot(x[0], x[1]),
                                         chart)
    print("radial eikonal residual at |x|=1.3:",
          f"{ns.eikonal_residual(sym, radial, np.array([1.2, 0.5])):.2e}")

    # amplitude transport along the radial rays: a = r^(-1/2) is the
    # annihilated profile in two dimensions
    def transported(amp, amp_grad, pt):
        return ns.apply_transport(sym, radial, amp, amp_grad, pt)

    pts = [np.array([1.0, 0.0]), np.array([0.8, 0.9]),
           np.array([-1.4, 0.3])]
    print("\n   point            r^(-1/2) profile    constant profile")
    for pt in pts:
        r = np.hypot(pt[0], pt[1])
        amp = r ** -0.5
        amp_grad = -0.5 * r ** -1.5 * pt / r
        good = transported(amp, amp_grad, pt)
        bad = transported(1.0, np.zeros(2), pt)
        print(f"  {np.round(pt, 2)!s:<16} {good:>12.2e}      {bad:>12.4f}")

    print("\nThe decaying profile is transported to ~0 (it solves the "
          "amplitude\nequation); a constant amplitude is not, by exactly "
          "the wavefront\nspreading rate 1/r.")


if __name__ == "__main__":
    main()
