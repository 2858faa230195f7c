"""Truncated polynomial maps and vector fields on R^n.

A jet of dimension ``n`` and degree ``d`` stores one coefficient per target
component and monomial ``x^alpha`` with ``|alpha| <= d``.  Coefficients are a
dense ``(n, M)`` array over a fixed graded monomial basis, so arithmetic is
plain array work and every result states the degree through which it is exact.

Norms are grid sups over an axis-aligned box (see :class:`NormSpec`).
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

__all__ = [
    "Jet",
    "VFJet",
    "NormSpec",
    "NormEquivalence",
    "monomials",
    "compose",
    "invert",
    "cnorm",
    "lie_bracket",
    "norm_equivalence_constant",
    "difference_field",
    "dumps",
    "loads",
]


# ---------------------------------------------------------------------------
# monomial bookkeeping


@functools.lru_cache(maxsize=None)
def monomials(n: int, d: int) -> tuple[tuple[int, ...], ...]:
    """All exponent tuples of order <= d, graded by order then lex (x1 first)."""
    out = []
    for order in range(d + 1):
        level = [a for a in itertools.product(range(order, -1, -1), repeat=n) if sum(a) == order]
        level.sort(reverse=True)
        out.extend(level)
    return tuple(out)


@functools.lru_cache(maxsize=None)
def _index(n: int, d: int) -> dict:
    return {a: i for i, a in enumerate(monomials(n, d))}


@functools.lru_cache(maxsize=None)
def _exponents(n: int, d: int) -> np.ndarray:
    e = np.array(monomials(n, d), dtype=np.int64).reshape(-1, n)
    e.setflags(write=False)
    return e


@functools.lru_cache(maxsize=None)
def _orders(n: int, d: int) -> np.ndarray:
    return _exponents(n, d).sum(axis=1)


@functools.lru_cache(maxsize=None)
def _mul_table(n: int, d: int):
    """Index triples (i, j, k) with x^a_i * x^a_j = x^a_k and order <= d."""
    mons = monomials(n, d)
    idx = _index(n, d)
    ii, jj, kk = [], [], []
    for i, a in enumerate(mons):
        for j, b in enumerate(mons):
            if sum(a) + sum(b) > d:
                continue
            ii.append(i)
            jj.append(j)
            kk.append(idx[tuple(x + y for x, y in zip(a, b))])
    return np.array(ii), np.array(jj), np.array(kk)


@functools.lru_cache(maxsize=None)
def _diff_matrix(n: int, d: int, m: int) -> np.ndarray:
    """Matrix D with (p @ D.T) the coefficients of d p / d x_m."""
    mons = monomials(n, d)
    idx = _index(n, d)
    D = np.zeros((len(mons), len(mons)))
    for j, a in enumerate(mons):
        if a[m] == 0:
            continue
        b = list(a)
        b[m] -= 1
        D[idx[tuple(b)], j] = a[m]
    D.setflags(write=False)
    return D


@functools.lru_cache(maxsize=None)
def _scatter(n: int, d: int) -> np.ndarray:
    _, _, k = _mul_table(n, d)
    S = np.zeros((len(k), len(monomials(n, d))))
    S[np.arange(len(k)), k] = 1.0
    S.setflags(write=False)
    return S


def _mul(a: np.ndarray, b: np.ndarray, n: int, d: int) -> np.ndarray:
    """Truncated product of polynomial coefficient vectors (broadcasts)."""
    i, j, _ = _mul_table(n, d)
    return (a[..., i] * b[..., j]) @ _scatter(n, d)


def _resize(coeffs: np.ndarray, n: int, d_from: int, d_to: int) -> np.ndarray:
    """Re-express coefficients in the basis of another degree (truncating)."""
    if d_from == d_to:
        return coeffs.copy()
    src = monomials(n, d_from)
    dst = _index(n, d_to)
    out = np.zeros(coeffs.shape[:-1] + (len(dst),))
    for j, a in enumerate(src):
        k = dst.get(a)
        if k is not None:
            out[..., k] = coeffs[..., j]
    return out


# ---------------------------------------------------------------------------
# jets


@dataclass(frozen=True, eq=False)
class _Poly:
    dim: int
    degree: int
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float)
        M = len(monomials(self.dim, self.degree))
        if c.shape != (self.dim, M):
            raise ValidationError(f"coefficient table must have shape {(self.dim, M)}, got {c.shape}")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    # construction -----------------------------------------------------------

    @classmethod
    def zero(cls, n, d):
        return cls(n, d, np.zeros((n, len(monomials(n, d)))))

    @classmethod
    def from_terms(cls, n, d, terms):
        """Build from ``{(l, alpha): value}`` with 0-based component ``l``."""
        idx = _index(n, d)
        c = np.zeros((n, len(idx)))
        for (l, alpha), v in terms.items():
            alpha = tuple(alpha)
            if len(alpha) != n or sum(alpha) > d:
                raise ValidationError(f"monomial {alpha} outside Pol({d},{n})")
            if not 0 <= l < n:
                raise ValidationError(f"component {l} out of range")
            c[l, idx[alpha]] += v
        return cls(n, d, c)

    @classmethod
    def identity(cls, n, d):
        idx = _index(n, d)
        c = np.zeros((n, len(idx)))
        for l in range(n):
            e = [0] * n
            e[l] = 1
            c[l, idx[tuple(e)]] = 1.0
        return cls(n, d, c)

    # inspection -------------------------------------------------------------

    def terms(self) -> dict:
        mons = monomials(self.dim, self.degree)
        out = {}
        for l, j in zip(*np.nonzero(self.coeffs)):
            out[(int(l), mons[j])] = float(self.coeffs[l, j])
        return out

    def coefficient(self, l, alpha) -> float:
        return float(self.coeffs[l, _index(self.dim, self.degree)[tuple(alpha)]])

    @property
    def effective_degree(self) -> int:
        """Highest order carrying a nonzero coefficient (-1 for zero)."""
        nz = np.nonzero(np.any(self.coeffs != 0, axis=0))[0]
        return int(_orders(self.dim, self.degree)[nz].max()) if len(nz) else -1

    def with_degree(self, d):
        return type(self)(self.dim, d, _resize(self.coeffs, self.dim, self.degree, d))

    def __call__(self, x):
        """Evaluate at points ``x`` of shape ``(..., n)``."""
        x = np.asarray(x, dtype=float)
        e = _exponents(self.dim, self.degree)
        vals = np.prod(x[..., None, :] ** e, axis=-1)
        return vals @ self.coeffs.T

    # arithmetic -------------------------------------------------------------

    def _check(self, other):
        if self.dim != other.dim:
            raise ValidationError(f"dimension mismatch: {self.dim} vs {other.dim}")

    def _binop(self, other, op):
        self._check(other)
        d = max(self.degree, other.degree)
        a = _resize(self.coeffs, self.dim, self.degree, d)
        b = _resize(other.coeffs, other.dim, other.degree, d)
        return type(self)(self.dim, d, op(a, b))

    def __add__(self, other):
        return self._binop(other, np.add)

    def __sub__(self, other):
        return self._binop(other, np.subtract)

    def __mul__(self, s):
        return type(self)(self.dim, self.degree, self.coeffs * float(s))

    __rmul__ = __mul__

    def __truediv__(self, s):
        return type(self)(self.dim, self.degree, self.coeffs / float(s))

    def __neg__(self):
        return type(self)(self.dim, self.degree, -self.coeffs)

    def equals(self, other, tol=0.0) -> bool:
        if self.dim != other.dim:
            return False
        d = max(self.degree, other.degree)
        a = _resize(self.coeffs, self.dim, self.degree, d)
        b = _resize(other.coeffs, other.dim, other.degree, d)
        return bool(np.max(np.abs(a - b), initial=0.0) <= tol)

    def __repr__(self):
        return f"{type(self).__name__}(n={self.dim}, d={self.degree}, terms={self.terms()})"


class Jet(_Poly):
    """Truncated polynomial self-map of R^n."""

    def compose(self, other: "Jet") -> "Jet":
        return compose(self, other)

    def inverse(self) -> "Jet":
        return invert(self)

    def identity_like(self) -> "Jet":
        return Jet.identity(self.dim, self.degree)

    def minus_identity(self) -> "VFJet":
        return VFJet(self.dim, self.degree, (self - Jet.identity(self.dim, self.degree)).coeffs)


class VFJet(_Poly):
    """Polynomial vector field on R^n, components as in :class:`Jet`."""

    def flow_step(self) -> Jet:
        """The map x -> x + X(x)."""
        return Jet(self.dim, self.degree, (Jet.identity(self.dim, self.degree).coeffs + self.coeffs))


# ---------------------------------------------------------------------------
# composition, inversion, bracket


def _powers_of(g: _Poly, d: int) -> np.ndarray:
    """Coefficients of x^alpha o g for every basis monomial alpha, truncated at d."""
    n = g.dim
    mons = monomials(n, d)
    idx = _index(n, d)
    gc = _resize(g.coeffs, n, g.degree, d)
    P = np.zeros((len(mons), len(mons)))
    P[0, 0] = 1.0
    for k, a in enumerate(mons[1:], start=1):
        i = next(t for t in range(n) if a[t] > 0)
        b = list(a)
        b[i] -= 1
        P[k] = _mul(P[idx[tuple(b)]], gc[i], n, d)
    return P


def compose(f: Jet, g: Jet) -> Jet:
    """Truncation of f o g to degree max(deg f, deg g).

    The result is exact as a polynomial computation; it is a faithful jet of
    the underlying germs only when g(0) = 0.
    """
    if f.dim != g.dim:
        raise ValidationError(f"dimension mismatch: {f.dim} vs {g.dim}")
    d = max(f.degree, g.degree)
    P = _powers_of(g, d)
    fc = _resize(f.coeffs, f.dim, f.degree, d)
    return type(f)(f.dim, d, fc @ P)


def _linear_part(f: _Poly) -> np.ndarray:
    idx = _index(f.dim, f.degree)
    L = np.zeros((f.dim, f.dim))
    for m in range(f.dim):
        e = [0] * f.dim
        e[m] = 1
        L[:, m] = f.coeffs[:, idx[tuple(e)]]
    return L


def invert(f: Jet) -> Jet:
    """Left inverse of f: compose(invert(f), f) = id through degree d."""
    n, d = f.dim, f.degree
    L = _linear_part(f)
    if f.degree < 1 or abs(np.linalg.det(L)) < 1e-300 or np.linalg.cond(L) > 1e14:
        raise ValidationError("linear part of the jet is singular")
    Linv = np.linalg.inv(L)
    c = f.coeffs[:, 0].copy()
    idx = _index(n, d)
    ident = Jet.identity(n, d)
    # nonlinear part of f - f(0)
    N = f.coeffs.copy()
    N[:, 0] = 0.0
    for m in range(n):
        e = [0] * n
        e[m] = 1
        N[:, idx[tuple(e)]] = 0.0
    Njet = Jet(n, d, N)
    h = Jet(n, d, Linv @ ident.coeffs)
    for _ in range(d):
        h = Jet(n, d, Linv @ (ident.coeffs - compose(Njet, h).coeffs))
    if not np.any(c):
        return h
    shift = Jet(n, d, ident.coeffs.copy())
    sc = shift.coeffs.copy()
    sc[:, 0] = -c
    return compose(h, Jet(n, d, sc))


def lie_bracket(X: VFJet, Y: VFJet, degree: int | None = None) -> VFJet:
    """[X, Y]^l = sum_m X^m d_m Y^l - Y^m d_m X^l.

    The default output degree ``deg X + deg Y - 1`` keeps every term, so the
    result is exact.  An explicit ``degree`` caps it; terms above the cap are
    dropped and the result is exact through that degree.
    """
    if X.dim != Y.dim:
        raise ValidationError(f"dimension mismatch: {X.dim} vs {Y.dim}")
    n = X.dim
    d = max(X.degree + Y.degree - 1, X.degree, Y.degree) if degree is None else degree
    x = _resize(X.coeffs, n, X.degree, d)
    y = _resize(Y.coeffs, n, Y.degree, d)
    out = np.zeros_like(x)
    for m in range(n):
        D = _diff_matrix(n, d, m)
        dy = y @ D.T
        dx = x @ D.T
        for l in range(n):
            out[l] += _mul(x[m], dy[l], n, d) - _mul(y[m], dx[l], n, d)
    return VFJet(n, d, out)


# ---------------------------------------------------------------------------
# norms


@dataclass(frozen=True)
class NormSpec:
    """C^r grid-sup norm on an axis-aligned box.

    ``domain`` is ``None`` (the box [-1, 1]^n), a single ``(lo, hi)`` pair
    applied to every axis, or one pair per axis.
    """

    order: int = 0
    domain: tuple | None = None
    grid_per_axis: int = 33

    def __post_init__(self):
        if self.order < 0:
            raise ValidationError("norm order must be >= 0")
        if self.grid_per_axis < 2:
            raise ValidationError("grid_per_axis must be >= 2")
        if self.grid_per_axis % 2 == 0:
            raise ValidationError("grid_per_axis must be odd")
        if self.domain is not None:
            object.__setattr__(self, "domain", _as_box(self.domain))

    def box(self, n: int) -> tuple:
        if self.domain is None:
            return ((-1.0, 1.0),) * n
        if len(self.domain) == 1:
            return self.domain * n
        if len(self.domain) != n:
            raise ValidationError(f"domain has {len(self.domain)} axes, need {n}")
        return self.domain

    def grid(self, n: int) -> np.ndarray:
        return _grid(self.box(n), self.grid_per_axis)

    def with_order(self, r: int) -> "NormSpec":
        return NormSpec(r, self.domain, self.grid_per_axis)


def _as_box(domain) -> tuple:
    arr = np.asarray(domain, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != 2 or np.any(arr[:, 0] >= arr[:, 1]):
        raise ValidationError(f"invalid box {domain!r}")
    return tuple((float(lo), float(hi)) for lo, hi in arr)


@functools.lru_cache(maxsize=64)
def _grid(box: tuple, k: int) -> np.ndarray:
    axes = [np.linspace(lo, hi, k) for lo, hi in box]
    g = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(box))
    g.setflags(write=False)
    return g


@functools.lru_cache(maxsize=64)
def _eval_matrix(n: int, d: int, box: tuple, k: int, beta: tuple) -> np.ndarray:
    """E with (coeffs @ E.T) = d^beta of the polynomial on the grid."""
    grid = _grid(box, k)
    e = _exponents(n, d)
    b = np.array(beta)
    ok = np.all(e >= b, axis=1)
    fact = np.array([math.prod(math.perm(int(a), int(bb)) for a, bb in zip(row, b)) for row in e], dtype=float)
    red = np.where(ok[:, None], e - b, 0)
    E = np.prod(grid[:, None, :] ** red[None, :, :], axis=-1) * (fact * ok)[None, :]
    E.setflags(write=False)
    return E


def _sup_norms(coeffs: np.ndarray, n: int, d: int, spec: NormSpec) -> np.ndarray:
    """C^r grid sup for a batch of coefficient tables of shape (..., n, M)."""
    box = spec.box(n)
    out = np.zeros(coeffs.shape[:-2])
    for beta in monomials(n, min(spec.order, d)):
        E = _eval_matrix(n, d, box, spec.grid_per_axis, beta)
        vals = coeffs @ E.T
        out = np.maximum(out, np.abs(vals).max(axis=(-2, -1)))
    return out


def cnorm(f: _Poly, minus_id: bool = False, spec: NormSpec = NormSpec()) -> float:
    """max over |beta| <= r and components of the grid sup of d^beta (f - id or f)."""
    c = f.coeffs
    if minus_id:
        c = c - Jet.identity(f.dim, f.degree).coeffs
    return float(_sup_norms(c, f.dim, f.degree, spec))


def difference_field(h: Jet, spec: NormSpec = NormSpec()) -> VFJet:
    """(h - id) / C with C the C^0 grid sup of h - id on the NormSpec box."""
    C = cnorm(h, minus_id=True, spec=spec.with_order(0))
    if C == 0.0:
        raise ValidationError("difference field of the identity is undefined")
    return h.minus_identity() / C


# ---------------------------------------------------------------------------
# norm equivalence on Pol(d, n)


@dataclass(frozen=True)
class NormEquivalence:
    degree: int
    dim: int
    order: int
    constant: float
    witness: Jet = field(repr=False)
    witness_ratio: float = 0.0
    samples: int = 0


def _candidates(n: int, d: int, box: tuple) -> np.ndarray:
    """Deterministic extremal candidates: monomials, sign patterns, Chebyshev."""
    mons = monomials(n, d)
    M = len(mons)
    cands = []
    for l in range(n):
        for j in range(M):
            c = np.zeros((n, M))
            c[l, j] = 1.0
            cands.append(c)
        orders = np.array([sum(a) for a in mons])
        for pattern in ((-1.0) ** orders, (-1.0) ** np.arange(M), np.ones(M)):
            c = np.zeros((n, M))
            c[l] = pattern
            cands.append(c)
        # Chebyshev polynomials along each axis, rescaled to the box
        for i, (lo, hi) in enumerate(box):
            mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
            # affine u = (x_i - mid) / half as a jet, then T_k(u) by recurrence
            u = np.zeros(M)
            e = [0] * n
            e[i] = 1
            u[_index(n, d)[tuple(e)]] = 1.0 / half
            u[0] = -mid / half
            t_prev, t_cur = np.zeros(M), u.copy()
            t_prev[0] = 1.0
            for _ in range(2, d + 1):
                t_prev, t_cur = t_cur, 2.0 * _mul(u, t_cur, n, d) - t_prev
            for t in (t_cur, t_prev):
                c = np.zeros((n, M))
                c[l] = t
                cands.append(c)
    return np.array(cands)


def norm_equivalence_constant(
    d: int, n: int, r: int, spec: NormSpec = NormSpec(), samples: int = 1000, seed: int = 0
) -> NormEquivalence:
    """Empirical max of ||P||_r / ||P||_0 over Pol(d, n).

    Random coefficient vectors (Gaussian, normalized to unit C^0 norm) plus the
    deterministic candidates of :func:`_candidates`.  The maximizer records its
    witness so callers can reproduce the ratio.
    """
    if d < 1 or n < 1 or r < 1:
        raise ValidationError("d, n, r must all be >= 1")
    box = spec.box(n)
    M = len(monomials(n, d))
    rng = np.random.default_rng(seed)
    pool = np.concatenate([_candidates(n, d, box), rng.standard_normal((samples, n, M))])
    s0 = spec.with_order(0)
    sr = spec.with_order(r)
    best_ratio, best = -1.0, None
    for chunk in np.array_split(pool, max(1, len(pool) // 512)):
        n0 = _sup_norms(chunk, n, d, s0)
        keep = n0 > 0
        ratios = np.zeros(len(chunk))
        ratios[keep] = _sup_norms(chunk[keep], n, d, sr) / n0[keep]
        j = int(np.argmax(ratios))
        if ratios[j] > best_ratio:
            best_ratio = float(ratios[j])
            best = chunk[j] / n0[j]
    witness = Jet(n, d, best)
    return NormEquivalence(d, n, r, best_ratio, witness, best_ratio, samples)


# ---------------------------------------------------------------------------
# text form


def dumps(f: _Poly) -> str:
    head = "jet" if isinstance(f, Jet) else "vfjet"
    lines = [f"{head} n={f.dim} d={f.degree}"]
    for (l, alpha), v in f.terms().items():
        lines.append(" ".join([str(l + 1), *map(str, alpha), format(v, ".17g")]))
    return "\n".join(lines) + "\n"


def loads(text: str) -> _Poly:
    rows = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    rows = [r for r in rows if r]
    if not rows:
        raise ValidationError("empty jet text")
    head = rows[0].split()
    if len(head) != 3 or head[0] not in ("jet", "vfjet"):
        raise ValidationError(f"bad jet header {rows[0]!r}")
    try:
        n = int(head[1].removeprefix("n="))
        d = int(head[2].removeprefix("d="))
    except ValueError as exc:
        raise ValidationError(f"bad jet header {rows[0]!r}") from exc
    terms = {}
    for r in rows[1:]:
        parts = r.split()
        if len(parts) != n + 2:
            raise ValidationError(f"bad coefficient line {r!r}")
        key = (int(parts[0]) - 1, tuple(int(p) for p in parts[1:-1]))
        terms[key] = terms.get(key, 0.0) + float(parts[-1])
    cls = Jet if head[0] == "jet" else VFJet
    return cls.from_terms(n, d, terms)
