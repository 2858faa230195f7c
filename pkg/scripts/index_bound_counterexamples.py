"""Tabulate brackets of homogeneous vector monomials that break the additive
ladder-index bound index([X, Y]) >= index(X) + index(Y), while the multiplier
product law m([X, Y]) = m(X) m(Y) holds for all of them.

Usage: python scripts/index_bound_counterexamples.py [COUNT] [SEED]
"""

import sys

import numpy as np

from closure_lab.grading import GradedComponent, grading_check, ladder_index, multiplier
from closure_lab.jets import VFJet, monomials

SPECTRA = {1: (0.5,), 2: (0.2, 0.5), 3: (0.2, 0.5, 0.7)}


def fmt_monomial(l, alpha):
    xs = "".join(f"x{i + 1}" + (f"^{a}" if a > 1 else "") for i, a in enumerate(alpha) if a)
    return f"{xs or '1'} d{l + 1}"


def main(count=1000, seed=2024):
    rng = np.random.default_rng(seed)
    product_ok = index_ok = vacuous = 0
    examples = []
    for _ in range(count):
        n = int(rng.integers(1, 4))
        lam = SPECTRA[n]
        mons = monomials(n, 4)
        comps = []
        for _ in range(2):
            l, alpha = int(rng.integers(n)), mons[int(rng.integers(len(mons)))]
            m = multiplier(l, alpha, lam)
            comps.append((l, alpha, GradedComponent(m, ladder_index(m, lam),
                                                    VFJet.from_terms(n, 4, {(l, alpha): 1.0}))))
        (l1, a1, X), (l2, a2, Y) = comps
        v = grading_check(X, Y, lam)
        vacuous += v.vacuous
        product_ok += v.product_law
        index_ok += v.index_bound
        if not v.index_bound and len(examples) < 10:
            row = min(v.rows, key=lambda r: r[4] - r[5])
            examples.append((lam, fmt_monomial(l1, a1), X.index, fmt_monomial(l2, a2), Y.index,
                             fmt_monomial(row[0], row[1]), row[4]))
    print(f"pairs={count} vacuous={vacuous} product_law_ok={product_ok} index_bound_ok={index_ok}")
    print("lambda | X (j1) | Y (j2) | bracket monomial (index)")
    for lam, x, j1, y, j2, z, j in examples:
        print(f"{lam} | {x} ({j1}) | {y} ({j2}) | {z} ({j} < {j1 + j2})")


if __name__ == "__main__":
    args = [int(a) for a in sys.argv[1:3]]
    main(*args)
