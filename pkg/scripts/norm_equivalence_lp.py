"""Compare the sampled norm-equivalence constant on Pol(d, 1) with a linear-program bound.

The LP maximizes |p'(x*)| subject to |p| <= 1 on the evaluation grid, at the
endpoints and the midpoint; the grid relaxation can slightly exceed the
continuous Markov constant d^2.

Usage: python scripts/norm_equivalence_lp.py [MAX_DEGREE]
"""

import sys

import numpy as np
from scipy.optimize import linprog

from closure_lab.jets import NormSpec, norm_equivalence_constant


def lp_bound(d, grid):
    xs = np.linspace(-1, 1, grid)
    V = np.vander(xs, d + 1, increasing=True)
    A, b = np.vstack([V, -V]), np.ones(2 * grid)
    best = 1.0
    for x in (xs[0], xs[-1], 0.0):
        row = np.hstack([0.0, x ** np.arange(d) * np.arange(1, d + 1)])
        res = linprog(-row, A_ub=A, b_ub=b, bounds=[(None, None)] * (d + 1), method="highs")
        best = max(best, -res.fun)
    return best


def main(max_degree=6):
    spec = NormSpec()
    print("d  sampled_C       markov_d^2  lp_grid")
    for d in range(1, max_degree + 1):
        ne = norm_equivalence_constant(d, 1, 1, spec)
        print(f"{d}  {ne.constant:<14.10g}  {d * d:<10d}  {lp_bound(d, spec.grid_per_axis):.10g}")


if __name__ == "__main__":
    main(*(int(a) for a in sys.argv[1:2]))
