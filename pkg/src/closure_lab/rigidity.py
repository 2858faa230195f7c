"""Orbit-equivalence rigidity checks.

A candidate conjugacy H carries near-identity elements of one group to the
other; the normalized difference fields on both sides then converge to fields
X1, X2 that H should conjugate up to a time scale sigma.  Sphere elements are
handled in the stereographic chart, where a Möbius map is a convergent power
series truncated to a real 2-dimensional jet.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .closure import closure_field, euler_flow
from .errors import ChartInversionError, NotConverged, ValidationError
from .groups import Mobius, _from_homogeneous, _homogeneous, chordal, to_vectors
from .jets import Jet, NormSpec, VFJet, cnorm, compose, invert

__all__ = [
    "Conjugacy",
    "SyncPair",
    "ChartSpec",
    "FlowChart",
    "mobius_jet",
    "synchronized_pair",
    "conjugacy_residual",
    "flow_chart",
    "readout_grid",
    "identity_readout",
    "recover_mobius",
]


def mobius_jet(g: Mobius, degree: int) -> Jet:
    """Taylor jet at 0 of z -> (a z + b) / (c z + d) as a map of R^2 (x + i y = z)."""
    if g.d == 0:
        raise ValidationError("map has a pole at 0")
    # (a z + b) / d * sum (-c z / d)^k, truncated
    r = -g.c / g.d
    series = np.zeros(degree + 1, dtype=complex)
    for k in range(degree + 1):
        series[k] += g.b / g.d * r**k
        if k >= 1:
            series[k] += g.a / g.d * r ** (k - 1)
    terms = {}
    for k, w in enumerate(series):
        # z^k = sum_j C(k, j) x^(k-j) (i y)^j
        for j in range(k + 1):
            coef = math.comb(k, j) * w * (1j) ** j
            alpha = (k - j, j)
            for l, v in ((0, coef.real), (1, coef.imag)):
                if v != 0:
                    terms[(l, alpha)] = terms.get((l, alpha), 0.0) + v
    return Jet.from_terms(2, degree, terms)


# ---------------------------------------------------------------------------
# conjugacies


@dataclass
class Conjugacy:
    """Forward/inverse maps on arrays (..., n), optionally with exact jets."""

    forward: object
    inverse: object
    dim: int
    forward_jet: Jet | None = None
    inverse_jet: Jet | None = None

    def __call__(self, x):
        return self.forward(np.asarray(x, dtype=float))

    @classmethod
    def from_jet(cls, f: Jet) -> "Conjugacy":
        g = invert(f)
        return cls(f, g, f.dim, f, g)

    @classmethod
    def identity(cls, n: int) -> "Conjugacy":
        return cls.from_jet(Jet.identity(n, 1))

    @classmethod
    def from_mobius(cls, m: Mobius, degree: int = 8) -> "Conjugacy":
        """Action in the stereographic chart; the jets are Taylor jets at 0."""

        def act(g):
            def f(x):
                x = np.asarray(x, dtype=float)
                w = g.apply_z(x[..., 0] + 1j * x[..., 1])
                return np.stack([np.real(w), np.imag(w)], axis=-1)

            return f

        inv = m.inverse()
        exact = m.c == 0 and inv.c == 0
        fj = mobius_jet(m, degree) if exact else None
        ij = mobius_jet(inv, degree) if exact else None
        return cls(act(m), act(inv), 2, fj, ij)

    @classmethod
    def translation(cls, v) -> "Conjugacy":
        v = np.asarray(v, dtype=float)
        n = len(v)
        terms = {(l, tuple(int(i == l) for i in range(n))): 1.0 for l in range(n)}
        f = Jet.from_terms(n, 1, {**terms, **{(l, (0,) * n): v[l] for l in range(n)}})
        return cls.from_jet(f)

    def verify(self, points, tol: float = 1e-8) -> float:
        points = np.asarray(points, dtype=float)
        err = float(np.abs(self.forward(self.inverse(points)) - points).max())
        if err > tol:
            raise ValidationError(f"forward o inverse deviates from the identity by {err:.3g}")
        return err


@dataclass
class SyncPair:
    X1: VFJet
    X2: VFJet
    sigma: float
    sigma_seq: list = field(default_factory=list)
    c1: list = field(default_factory=list)
    c2: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "sigma": self.sigma,
            "sigma_seq": self.sigma_seq,
            "c1": self.c1,
            "c2": self.c2,
            "X1": {f"{l + 1}:{''.join(map(str, a))}": v for (l, a), v in self.X1.terms().items()},
            "X2": {f"{l + 1}:{''.join(map(str, a))}": v for (l, a), v in self.X2.terms().items()},
        }


def _as_jet(h, degree: int) -> Jet:
    if isinstance(h, Jet):
        return h
    if isinstance(h, Mobius):
        return mobius_jet(h, degree)
    raise ValidationError(f"cannot use {type(h).__name__} as a group element")


def _pull_back(h2: Jet, H: Conjugacy, spec: NormSpec) -> Jet:
    """h1 = H^-1 o h2 o H: exact through jets when H has them, else a grid fit."""
    if H.forward_jet is not None and H.inverse_jet is not None:
        d = max(h2.degree, H.forward_jet.degree)
        return compose(H.inverse_jet.with_degree(d), compose(h2.with_degree(d), H.forward_jet.with_degree(d)))
    from .jets import _exponents

    pts = spec.grid(h2.dim)
    vals = H.inverse(h2(H(pts)))
    E = np.prod(pts[:, None, :] ** _exponents(h2.dim, h2.degree)[None], axis=-1)
    coef, *_ = np.linalg.lstsq(E, vals, rcond=None)
    return Jet(h2.dim, h2.degree, coef.T)


def synchronized_pair(h2_seq, H: Conjugacy, spec: NormSpec = NormSpec(), tol: float = 1e-8,
                      degree: int = 4, window: int = 3) -> SyncPair:
    """Limit fields on both sides of H and the norm-ratio time scale sigma."""
    h2 = [_as_jet(h, degree) for h in h2_seq]
    if len(h2) < 2:
        raise ValidationError("need at least two elements")
    h1 = [_pull_back(h, H, spec) for h in h2]
    X2 = closure_field(h2, spec, tol, window=window)
    X1 = closure_field(h1, spec, tol, window=window)
    c2 = [cnorm(h, True, spec.with_order(0)) for h in h2]
    c1 = [cnorm(h, True, spec.with_order(0)) for h in h1]
    sig = [a / b for a, b in zip(c2, c1)]
    osc = [abs(b - a) for a, b in zip(sig, sig[1:])]
    if max(osc[-window:]) > tol * max(1.0, abs(sig[-1])):
        raise NotConverged("norm ratio sequence is not Cauchy", sigma_seq=sig, tol=tol)
    return SyncPair(X1, X2, sig[-1], sig, c1, c2)


def conjugacy_residual(H: Conjugacy, pair: SyncPair, t_grid, x_grid, steps: int = 10_000,
                       sigma: float | None = None, domain=None) -> float:
    """sup over (t, x) of |H(phi_1^t(x)) - phi_2^(sigma t)(H(x))|."""
    sigma = pair.sigma if sigma is None else sigma
    x = np.array(x_grid, dtype=float, ndmin=2).reshape(-1, pair.X1.dim)
    Hx = H(x)
    worst = 0.0
    for t in np.atleast_1d(np.asarray(t_grid, dtype=float)):
        a = H(euler_flow(pair.X1, x, t, steps, domain))
        b = euler_flow(pair.X2, Hx, sigma * t, steps, domain)
        worst = max(worst, float(np.linalg.norm(a - b, axis=1).max()))
    return worst


# ---------------------------------------------------------------------------
# flow charts


@dataclass(frozen=True)
class ChartSpec:
    base: tuple
    fields: tuple
    s_box: tuple
    steps: int = 1000
    gram_floor: float = 1e-8

    def __post_init__(self):
        q = np.atleast_1d(np.asarray(self.base, dtype=float))
        fields = tuple(self.fields)
        n = len(q)
        if len(fields) != n or any(f.dim != n for f in fields):
            raise ValidationError("need n fields on R^n")
        J = np.stack([f(q) for f in fields], axis=1)
        gram = float(np.linalg.det(J.T @ J))
        if gram <= self.gram_floor:
            raise ValidationError(f"fields are degenerate at the base point (Gram determinant {gram:.3g})")
        box = np.asarray(self.s_box, dtype=float).reshape(-1, 2)
        if len(box) == 1:
            box = np.repeat(box, n, axis=0)
        object.__setattr__(self, "base", tuple(q))
        object.__setattr__(self, "fields", fields)
        object.__setattr__(self, "s_box", tuple(map(tuple, box)))


class FlowChart:
    """s -> phi_Xn^sn o ... o phi_X1^s1 (q)."""

    def __init__(self, spec: ChartSpec):
        self.spec = spec
        self.q = np.array(spec.base)
        self.J = np.stack([f(self.q) for f in spec.fields], axis=1)
        self.Jinv = np.linalg.inv(self.J)

    def __call__(self, s) -> np.ndarray:
        s = np.array(s, dtype=float, ndmin=2)
        x = np.repeat(self.q[None, :], len(s), axis=0)
        for i, X in enumerate(self.spec.fields):
            for p in range(len(s)):
                if s[p, i] != 0:
                    x[p] = euler_flow(X, x[p], s[p, i], self.spec.steps)
        return x

    def inverse(self, p, s0=None, tol: float = 1e-11, max_iter: int = 200) -> np.ndarray:
        """Damped fixed-point iteration with the frozen base-point Jacobian."""
        p = np.asarray(p, dtype=float)
        s = self.Jinv @ (p - self.q) if s0 is None else np.asarray(s0, dtype=float)
        r = float(np.linalg.norm(self(s)[0] - p))
        damp = 1.0
        for _ in range(max_iter):
            if r <= tol:
                return s
            trial = s + damp * (self.Jinv @ (p - self(s)[0]))
            rt = float(np.linalg.norm(self(trial)[0] - p))
            if rt < r:
                s, r = trial, rt
                damp = min(1.0, 2 * damp)
            else:
                damp /= 2
                if damp < 1e-6:
                    break
        if r <= tol:
            return s
        raise ChartInversionError(f"chart inversion stalled at residual {r:.3g}", point=p.tolist(), residual=r)


def flow_chart(spec: ChartSpec) -> FlowChart:
    return FlowChart(spec)


def _s_grid(box, per_axis: int) -> np.ndarray:
    axes = [np.linspace(lo, hi, per_axis) for lo, hi in box]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(box))


def readout_grid(H, chart1: FlowChart, chart2: FlowChart, per_axis: int = 5) -> np.ndarray:
    """Rows (s_1..s_n, |chart2^-1(H(chart1(s))) - s|) over the chart1 s-box grid."""
    S = _s_grid(chart1.spec.s_box, per_axis)
    img = H(chart1(S))
    rows = []
    for s, p in zip(S, img):
        back = chart2.inverse(p, s0=s)
        rows.append([*s, float(np.linalg.norm(back - s))])
    return np.array(rows)


def identity_readout(H, chart1: FlowChart, chart2: FlowChart, per_axis: int = 5) -> float:
    return float(readout_grid(H, chart1, chart2, per_axis)[:, -1].max())


# ---------------------------------------------------------------------------
# Möbius recovery


def _hom(p) -> np.ndarray:
    """Homogeneous coordinates (2,) for a SpherePoint, complex number or unit vector."""
    from .groups import SpherePoint

    if isinstance(p, SpherePoint):
        v = p.vector
    else:
        arr = np.asarray(p)
        v = arr.astype(float) if arr.shape == (3,) and arr.dtype.kind == "f" else to_vectors(arr)
    w1, w2 = _homogeneous(v)
    return np.array([complex(w1), complex(w2)])


def _frame(p1, p2, p3, tol):
    A = np.stack([p1, p2], axis=1)
    if abs(np.linalg.det(A)) <= tol * np.linalg.norm(p1) * np.linalg.norm(p2):
        raise ValidationError("degenerate triple: repeated points")
    a, b = np.linalg.solve(A, p3)
    if abs(a) <= tol * np.linalg.norm(p3) or abs(b) <= tol * np.linalg.norm(p3):
        raise ValidationError("degenerate triple: repeated points")
    return np.stack([a * p1, b * p2], axis=1)


def recover_mobius(pairs, tol: float = 1e-12):
    """Möbius map through the first three pairs, and the max chordal error on the rest."""
    pairs = list(pairs)
    if len(pairs) < 3:
        raise ValidationError("need at least three point pairs")
    src = [_hom(p) for p, _ in pairs]
    dst = [_hom(q) for _, q in pairs]
    M = _frame(*dst[:3], tol) @ np.linalg.inv(_frame(*src[:3], tol))
    m = Mobius.from_matrix(M)
    resid = 0.0
    for s, d in zip(src[3:], dst[3:]):
        u = M @ s
        resid = max(resid, float(chordal(_from_homogeneous(u[0], u[1]), _from_homogeneous(d[0], d[1]))))
    return m, resid
