"""F-multipliers and the graded structure they put on polynomial vector fields.

The vector monomial x^alpha e_l has F-multiplier |lambda^alpha / lambda_l|;
pulling back by F scales it by exactly that factor.  Multiplier values are
grouped with a relative tolerance of 1e-12 (products of floats that agree as
real numbers may differ in the last bit).
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .groups import Contraction
from .jets import VFJet, lie_bracket, monomials
from .report import fmt

__all__ = [
    "MultiplierLadder",
    "GradedComponent",
    "GradingVerdict",
    "multiplier",
    "ladder",
    "ladder_index",
    "decompose",
    "recompose",
    "pullback",
    "renormalized_pullback",
    "tail_mass",
    "leading_limit",
    "grading_check",
    "ladder_csv",
    "components_csv",
]

RTOL = 1e-12


def _lam(lam) -> tuple:
    return lam.eigenvalues if isinstance(lam, Contraction) else tuple(float(x) for x in np.atleast_1d(lam))


def multiplier(l: int, alpha, lam) -> float:
    """|lambda^alpha / lambda_l| for the 0-based component l."""
    lam = np.array(_lam(lam))
    alpha = np.asarray(alpha)
    if alpha.shape != lam.shape or not 0 <= l < len(lam) or np.any(alpha < 0):
        raise ValidationError(f"bad vector monomial (l={l}, alpha={tuple(alpha)}) for n={len(lam)}")
    return float(abs(np.prod(lam**alpha) / lam[l]))


def _raw_table(lam, d):
    lam = np.array(lam)
    e = np.array(monomials(len(lam), d)).reshape(-1, len(lam))
    return np.abs(np.prod(lam[None, :] ** e, axis=1)[None, :] / lam[:, None])


def _same(a: float, b: float) -> bool:
    return math.isclose(a, b, rel_tol=RTOL, abs_tol=0.0)


def _degree_for(lam: tuple, cutoff: float) -> int:
    """Smallest D with lambda_n^(D+1) / lambda_1 < cutoff."""
    lo, hi = min(lam), max(lam)
    D = 0
    while hi ** (D + 1) / lo >= cutoff:
        D += 1
        if D > 10_000:
            raise ValidationError("cutoff too small for a finite ladder")
    return D


@dataclass(frozen=True)
class MultiplierLadder:
    eigenvalues: tuple
    cutoff: float
    degree_cap: int
    entries: tuple  # ((m, ((l, alpha), ...)), ...) strictly descending in m
    certified: bool

    @property
    def values(self) -> list:
        return [m for m, _ in self.entries]

    def index(self, m: float) -> int:
        """1-based position of the multiplier value m."""
        for j, (v, _) in enumerate(self.entries, start=1):
            if _same(v, m):
                return j
        raise ValidationError(f"multiplier {m!r} is not on the ladder")

    def as_dict(self) -> dict:
        return {m: list(mons) for m, mons in self.entries}


@functools.lru_cache(maxsize=256)
def _ladder(lam: tuple, cutoff: float, degree_cap: int) -> MultiplierLadder:
    n = len(lam)
    table = _raw_table(lam, degree_cap)
    mons = monomials(n, degree_cap)
    items = []
    for l in range(n):
        for j, alpha in enumerate(mons):
            m = float(table[l, j])
            if m >= cutoff or _same(m, cutoff):
                items.append((m, l, alpha))
    items.sort(key=lambda t: (-t[0], t[1], [-a for a in t[2]]))
    entries = []
    for m, l, alpha in items:
        if entries and _same(entries[-1][0], m):
            entries[-1][1].append((l, alpha))
        else:
            entries.append((m, [(l, alpha)]))
    certified = max(lam) ** (degree_cap + 1) / min(lam) < cutoff
    return MultiplierLadder(lam, cutoff, degree_cap, tuple((m, tuple(ms)) for m, ms in entries), certified)


def ladder(lam, cutoff: float, degree_cap: int | None = None, strict: bool = True) -> MultiplierLadder:
    """All multiplier values >= cutoff over monomials of order <= degree_cap.

    Completeness (no monomial of higher order reaches the cutoff) is certified
    when lambda_n^(degree_cap+1) / lambda_1 < cutoff.  ``degree_cap=None``
    picks the smallest certified degree.
    """
    lam = _lam(lam)
    if cutoff <= 0:
        raise ValidationError("cutoff must be positive")
    if degree_cap is None:
        degree_cap = _degree_for(lam, cutoff)
    out = _ladder(lam, float(cutoff), int(degree_cap))
    if strict and not out.certified:
        raise ValidationError(f"degree_cap {degree_cap} does not certify completeness above {cutoff}; "
                              f"need {_degree_for(lam, cutoff)}")
    return out


def ladder_index(m: float, lam) -> int:
    """1-based position of m among all multiplier values (every degree)."""
    return ladder(lam, m * (1 - 1e-9)).index(m)


@dataclass(frozen=True)
class GradedComponent:
    multiplier: float
    index: int
    field: VFJet
    tail_ratio: float | None = None
    tail_bound: float | None = None

    @property
    def certified(self) -> bool | None:
        if self.tail_ratio is None:
            return None
        return self.tail_ratio <= self.tail_bound


def decompose(X: VFJet, lam) -> list:
    """Split X by exact multiplier value, descending; components sum back to X."""
    lam = _lam(lam)
    if len(lam) != X.dim:
        raise ValidationError("dimension mismatch")
    table = _raw_table(lam, X.degree)
    nz = list(zip(*np.nonzero(X.coeffs)))
    if not nz:
        return []
    vals = sorted({float(table[l, j]) for l, j in nz}, reverse=True)
    groups = []
    for v in vals:
        if not groups or not _same(groups[-1], v):
            groups.append(v)
    out = []
    for m in groups:
        mask = np.zeros_like(X.coeffs, dtype=bool)
        for l, j in nz:
            if _same(float(table[l, j]), m):
                mask[l, j] = True
        out.append(GradedComponent(m, ladder_index(m, lam), VFJet(X.dim, X.degree, np.where(mask, X.coeffs, 0.0))))
    return out


def recompose(components, dim: int, degree: int) -> VFJet:
    total = VFJet.zero(dim, degree)
    for c in components:
        total = total + c.field.with_degree(max(degree, c.field.degree))
    return total


def pullback(k: int, X: VFJet, lam) -> VFJet:
    """(F^k)^* X: each monomial scaled by its multiplier to the k."""
    table = _raw_table(_lam(lam), X.degree)
    return VFJet(X.dim, X.degree, X.coeffs * table**k)


def _leading(X: VFJet, lam) -> float:
    table = _raw_table(_lam(lam), X.degree)
    present = X.coeffs != 0
    if not present.any():
        raise ValidationError("zero field has no leading multiplier")
    return float(table[present].max())


def renormalized_pullback(Y: VFJet, lam, k: int) -> VFJet:
    """(F^k)^* Y / (m1)^k with m1 the leading multiplier of Y."""
    table = _raw_table(_lam(lam), Y.degree)
    m1 = _leading(Y, lam)
    return VFJet(Y.dim, Y.degree, Y.coeffs * (table / m1) ** k)


def tail_mass(Y: VFJet, lam, k: int) -> float:
    """l1 coefficient mass off the leading component, relative to the leading one."""
    Z = renormalized_pullback(Y, lam, k)
    table = _raw_table(_lam(lam), Y.degree)
    m1 = _leading(Y, lam)
    lead = np.isclose(table, m1, rtol=RTOL, atol=0.0)
    return float(np.abs(Z.coeffs[~lead]).sum() / np.abs(Z.coeffs[lead]).sum())


def leading_limit(Y: VFJet, lam, tol: float = 1e-12, k: int = 10) -> GradedComponent:
    """Leading homogeneous component of Y, with the decay certificate at step k."""
    comps = decompose(Y, lam)
    if not comps:
        raise ValidationError("zero field has no leading component")
    top = comps[0]
    ratio = tail_mass(Y, lam, k)
    if len(comps) > 1:
        rest = sum(np.abs(c.field.coeffs).sum() for c in comps[1:])
        bound = (comps[1].multiplier / top.multiplier) ** k * rest / np.abs(top.field.coeffs).sum() + tol
    else:
        bound = tol
    return GradedComponent(top.multiplier, top.index, top.field, ratio, bound)


@dataclass(frozen=True)
class GradingVerdict:
    product_law: bool
    index_bound: bool
    vacuous: bool
    rows: tuple = field(default=(), repr=False)

    @property
    def ok(self) -> bool:
        return self.product_law and self.index_bound


def grading_check(X: GradedComponent, Y: GradedComponent, lam, atol: float = 1e-12) -> GradingVerdict:
    """Bracket of homogeneous components: multiplier product law and ladder-index bound.

    Each row is (l, alpha, multiplier, X.m * Y.m, index, j1 + j2).
    """
    lam = _lam(lam)
    Z = lie_bracket(X.field, Y.field)
    table = _raw_table(lam, Z.degree)
    expected = X.multiplier * Y.multiplier
    j1, j2 = ladder_index(X.multiplier, lam), ladder_index(Y.multiplier, lam)
    rows = []
    product_ok, index_ok = True, True
    for l, j in zip(*np.nonzero(Z.coeffs)):
        m = float(table[l, j])
        idx = ladder_index(m, lam)
        product_ok &= abs(m - expected) <= atol * max(1.0, expected)
        index_ok &= idx >= j1 + j2
        rows.append((int(l), monomials(Z.dim, Z.degree)[j], m, expected, idx, j1 + j2))
    return GradingVerdict(bool(product_ok), bool(index_ok), not rows, tuple(rows))


# ---------------------------------------------------------------------------
# CSV


def _header(n: int) -> list:
    return ["multiplier", "index", "component_l", *[f"alpha{i + 1}" for i in range(n)], "coeff"]


def ladder_csv(lad: MultiplierLadder, path=None) -> str:
    n = len(lad.eigenvalues)
    lines = [",".join(_header(n))]
    for j, (m, mons) in enumerate(lad.entries, start=1):
        for l, alpha in mons:
            lines.append(",".join([fmt(m), str(j), str(l + 1), *map(str, alpha), ""]))
    text = "\n".join(lines) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


def components_csv(components, n: int, path=None) -> str:
    lines = [",".join(_header(n))]
    for c in components:
        for (l, alpha), v in c.field.terms().items():
            lines.append(",".join([fmt(c.multiplier), str(c.index), str(l + 1), *map(str, alpha), fmt(v)]))
    text = "\n".join(lines) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text
