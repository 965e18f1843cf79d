"""Sweep a Jacobi-breaking perturbation of so(3) and compare d^2 with the Jacobiator.

The table is perturbed by [e1, e2] = e3 + eps e1. Both defects should equal
eps; the rescaling [e1, e2] = (1 + eps) e3 is shown alongside as a control
that stays a Lie algebra.
"""
import argparse
from dataclasses import dataclass

import numpy as np

from algebroids.algebroid import constant_structure, d_squared_defect, dual_frame_form, jacobi_defect
from algebroids.bundle import AnchoredBundleSpec


@dataclass
class Config:
    eps: tuple = (0.0, 1e-3, 1e-2, 0.1, 0.5, 1.0)


def so3_table():
    C = np.zeros((3, 3, 3))
    for a, b, g in [(0, 1, 2), (1, 2, 0), (2, 0, 1)]:
        C[g, a, b], C[g, b, a] = 1.0, -1.0
    return C


def defects(C):
    A = constant_structure(AnchoredBundleSpec(0, 3, ("U",), {}), C)
    d2 = max(d_squared_defect(A, dual_frame_form(A.bundle, g)).value for g in range(3))
    return d2, jacobi_defect(A, *A.frame()).value


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--eps", type=float, nargs="*", default=list(Config.eps))
    args = p.parse_args()
    print(f"{'eps':>8} {'d2(e1 term)':>12} {'jacobi':>12} {'d2(rescale)':>12}")
    for eps in args.eps:
        C = so3_table()
        C[0, 0, 1], C[0, 1, 0] = eps, -eps
        R = so3_table()
        R[2, 0, 1], R[2, 1, 0] = 1 + eps, -1 - eps
        d2, jac = defects(C)
        print(f"{eps:8.3g} {d2:12.3e} {jac:12.3e} {defects(R)[0]:12.3e}")


if __name__ == "__main__":
    main()
