#!/usr/bin/env python3
"""Rays versus fronts in a graded-index medium.

A straight front sits on the x1-axis of a flat chart filled with the
refractive index n(x) = 1 + 0.2*x1, so the phase speed varies along the
front.  Shifting every sample along its ray with the plain Hamilton
equations gives fixed-time images whose phase is NOT constant: the
accumulated phase s = integral of Omega dt differs from ray to ray.
Reparametrizing the same equations by phase (dividing the rates by
Omega) makes every snapshot a true constant-phase front.

Run:  python demos/01_rays_vs_fronts.py [--plot]
"""
import argparse

import numpy as np

import nslab as ns


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--plot", action="store_true",
                    help="draw the fronts with matplotlib")
    args = ap.parse_args()

    chart = ns.euclidean_chart(2)
    n_fn, grad_n = ns.linear_index(0.2)
    sym = ns.isotropic_medium(n_fn, grad_n)

    mesh = ns.build_front(chart, ns.segment_embedding((-0.5, 0), (0.5, 0)),
                          [np.linspace(0.0, 1.0, 64)],
                          orient_seed=(0.0, 1.0))
    mesh = ns.solve_nu(sym, chart, mesh, branch="positive")
    print("front momentum scale nu ranges over "
          f"[{mesh.flat_nu().min():.3f}, {mesh.flat_nu().max():.3f}] "
          "(equal to the local index)")

    cfg = ns.StepperConfig(t_end=0.5, dt=1e-3, record_every=100)
    snapshots = (0.1, 0.25, 0.5)

    results = {}
    for form in ("hamilton", "modified"):
        res = ns.shift_front(sym, chart, mesh, form, cfg,
                             snapshot_times=snapshots)
        results[form] = res
        print(f"\n{form} flow:")
        for diag in res.diagnostics:
            print(f"  t={diag['t']:<5} phase spread "
                  f"{diag['phase_spread']:.3e}   normality deviation "
                  f"{diag['normality_deviation']:.3e}")

    print("\nThe phase-parametrized flow keeps the spread at zero and the "
          "rays orthogonal;\nthe raw Hamilton flow accumulates a spread of "
          f"{results['hamilton'].diagnostics[-1]['phase_spread']:.3f} "
          "by t=0.5, so its images\nare not constant-phase fronts.")

    if args.plot:
        import matplotlib.pyplot as plt
        fig, axes = plt.subplots(1, 2, figsize=(10, 4), sharey=True)
        for ax, form in zip(axes, ("hamilton", "modified")):
            for t, front in results[form].fronts:
                pts = front.flat_points()
                ax.plot(pts[:, 0], pts[:, 1], label=f"t={t}")
            ax.set_title(f"{form} flow")
            ax.set_xlabel("x1")
            ax.legend()
        axes[0].set_ylabel("x2")
        fig.tight_layout()
        fig.savefig("rays_vs_fronts.png", dpi=140)
        print("wrote rays_vs_fronts.png")


if __name__ == "__main__":
    main()
