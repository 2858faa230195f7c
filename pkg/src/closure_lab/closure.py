"""Renormalization by a contraction, limit fields, and flow-versus-iterate checks.

Conjugating a jet by the diagonal contraction F multiplies the coefficient of
each vector monomial x^alpha e_l by its F-multiplier lambda^alpha / lambda_l,
so F^-k o g o F^k is computed exactly from the coefficient table.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from ._kernels import march
from .errors import EscapeError, NotConverged, NotCrossed, ValidationError
from .groups import Contraction
from .jets import Jet, NormSpec, VFJet, _exponents, cnorm, difference_field, dumps, norm_equivalence_constant

__all__ = [
    "RenormSchedule",
    "RenormReport",
    "FlowSpec",
    "conjugate",
    "renormalize",
    "closure_field",
    "euler_flow",
    "iterate",
    "iterate_flow_compare",
]

DELTA_FLOOR = 1e-12


@dataclass(frozen=True)
class RenormSchedule:
    order: int = 0
    delta_seq: tuple = (DELTA_FLOOR,)
    threshold_factor: float = 10.0
    norm_constant: float | None = None
    k_max: int = 200
    threshold: float | None = None
    synthetic_remainder: float = 0.0
    norm_spec: NormSpec = NormSpec()
    concentration: float = 0.99
    tail_length: int = 20

    def __post_init__(self):
        deltas = tuple(max(float(x), DELTA_FLOOR) for x in np.atleast_1d(self.delta_seq))
        if not deltas or any(b > a for a, b in zip(deltas, deltas[1:])):
            raise ValidationError("delta_seq must be non-empty and non-increasing")
        object.__setattr__(self, "delta_seq", deltas)
        if self.threshold_factor < 1:
            raise ValidationError("threshold_factor must be >= 1")
        if self.order < 0 or self.k_max < 1:
            raise ValidationError("order must be >= 0 and k_max >= 1")
        if self.threshold is not None and self.threshold <= 0:
            raise ValidationError("threshold must be positive")
        if self.synthetic_remainder < 0:
            raise ValidationError("synthetic_remainder must be >= 0")
        if not 0 < self.concentration <= 1:
            raise ValidationError("concentration must lie in (0, 1]")

    def delta(self, i: int = 0) -> float:
        return self.delta_seq[min(i, len(self.delta_seq) - 1)]

    def constant(self, degree: int, dim: int) -> float:
        if self.norm_constant is not None:
            return float(self.norm_constant)
        if self.order == 0:
            return 1.0
        return norm_equivalence_constant(degree, dim, self.order, self.norm_spec).constant

    def threshold_for(self, i: int, degree: int, dim: int) -> float:
        if self.threshold is not None:
            return float(self.threshold)
        d = self.delta(i)
        return self.threshold_factor * max(d, self.constant(degree, dim) * d)


@dataclass
class RenormReport:
    case: str
    k: int
    threshold: float
    delta: float
    norm_constant: float
    h: Jet
    polynomial: Jet
    remainder_bound: float
    displacement: float
    previous_displacement: float | None
    norm_r: float
    order: int
    max_multiplier: float
    displacement_tail: list = field(default_factory=list)
    converges_to_identity: bool = False
    lower_bound: float | None = None
    upper_bound: float | None = None

    @property
    def minimal(self) -> bool:
        """Threshold crossed at k and not before."""
        if self.case != "Case1":
            return True
        prev_ok = self.previous_displacement is None or self.previous_displacement <= self.threshold
        return prev_ok and self.displacement > self.threshold

    @property
    def sandwich(self) -> bool:
        if self.case != "Case1":
            return True
        return self.displacement >= self.lower_bound and self.norm_r <= self.upper_bound

    def to_dict(self) -> dict:
        return {
            "case": self.case,
            "k": self.k,
            "threshold": self.threshold,
            "delta": self.delta,
            "norm_constant": self.norm_constant,
            "order": self.order,
            "displacement": self.displacement,
            "previous_displacement": self.previous_displacement,
            "norm_r": self.norm_r,
            "remainder_bound": self.remainder_bound,
            "max_multiplier": self.max_multiplier,
            "minimal": self.minimal,
            "sandwich": self.sandwich,
            "lower_bound": self.lower_bound,
            "upper_bound": self.upper_bound,
            "converges_to_identity": self.converges_to_identity,
            "displacement_tail": list(self.displacement_tail),
            "h": dumps(self.h),
        }

    def to_json(self) -> str:
        from .report import dumps_json

        return dumps_json(self.to_dict())


def conjugate(g: Jet, F: Contraction, k: int) -> Jet:
    """F^-k o g o F^k, exact coefficientwise."""
    if g.dim != F.dim:
        raise ValidationError(f"dimension mismatch: jet {g.dim} vs contraction {F.dim}")
    ident = Jet.identity(g.dim, g.degree).coeffs
    m = F.multipliers(g.degree)
    return Jet(g.dim, g.degree, ident + (g.coeffs - ident) * m**k)


def _displacement(g: Jet, spec: NormSpec) -> float:
    return cnorm(g, minus_id=True, spec=spec.with_order(0))


def renormalize(g: Jet, F: Contraction, sched: RenormSchedule = RenormSchedule(), i: int = 0) -> RenormReport:
    """Blow up a near-identity jet by conjugation until its displacement is visible.

    Case1: constant term or a multiplier above 1.  k is the smallest k >= 1
    with ||F^-k g F^k - id||_0 above the threshold.
    Case2_concentrated / Case2_contracting: the largest multiplier present is
    1 / below 1.  k is the smallest k >= 0 for which the top multiplier block
    carries at least ``sched.concentration`` of the displacement.
    """
    if not F.resonance_free:
        raise ValidationError(f"contraction is resonant: {F.resonances()[:3]}")
    n, d = g.dim, g.degree
    spec = sched.norm_spec
    T = sched.threshold_for(i, d, n)
    delta = sched.delta(i)
    C = sched.constant(d, n)
    disp0 = _displacement(g, spec)
    if disp0 == 0:
        raise ValidationError("g is the identity")
    if disp0 > T:
        raise ValidationError(f"g is not near the identity: displacement {disp0:.3g} exceeds threshold {T:.3g}")
    ident = Jet.identity(n, d).coeffs
    diff = g.coeffs - ident
    mult = F.multipliers(d)
    present = diff != 0
    m_max = float(mult[present].max())
    has_constant = bool(np.any(diff[:, 0] != 0))
    remainder = sched.synthetic_remainder

    if has_constant or m_max > 1:
        prev = disp0
        for k in range(1, sched.k_max + 1):
            P = conjugate(g, F, k)
            disp = _displacement(P, spec)
            if disp > T:
                break
            prev = disp
        else:
            raise NotCrossed(f"threshold {T:.3g} not crossed within k_max={sched.k_max}",
                             k_max=sched.k_max, threshold=T, last_displacement=disp)
        # conjugating by F scales C^0 displacements by at most 1/lambda_1
        lower = 0.9 * T
        upper = C * T / F.eigenvalues[0] + delta
        return RenormReport("Case1", k, T, delta, C, P, P, remainder, disp, prev,
                            cnorm(P, minus_id=True, spec=spec.with_order(sched.order)), sched.order,
                            m_max, lower_bound=lower, upper_bound=upper)

    top = np.isclose(mult, m_max, rtol=1e-12, atol=0.0) & present
    case = "Case2_concentrated" if math.isclose(m_max, 1.0, rel_tol=1e-12) else "Case2_contracting"
    for k in range(0, sched.k_max + 1):
        scaled = diff * mult**k
        a = float(np.max(np.abs(_grid_values(np.where(top, scaled, 0.0), n, d, spec))))
        b = float(np.max(np.abs(_grid_values(np.where(top, 0.0, scaled), n, d, spec))))
        if a + b == 0 or a / (a + b) >= sched.concentration:
            break
    else:
        raise NotCrossed(f"top block never carries {sched.concentration:.0%} of the displacement",
                         k_max=sched.k_max)
    P = conjugate(g, F, k)
    tail = [_displacement(conjugate(g, F, k + j), spec) for j in range(sched.tail_length)]
    return RenormReport(case, k, T, delta, C, P, P, remainder, _displacement(P, spec), None,
                        cnorm(P, minus_id=True, spec=spec.with_order(sched.order)), sched.order, m_max,
                        displacement_tail=tail, converges_to_identity=case == "Case2_contracting")


def _grid_values(coeffs, n, d, spec):
    from .jets import _eval_matrix

    return coeffs @ _eval_matrix(n, d, spec.box(n), spec.grid_per_axis, (0,) * n).T


# ---------------------------------------------------------------------------
# limit fields


def closure_field(h_seq, spec: NormSpec = NormSpec(), tol: float = 1e-8, norm_constant: float | None = None,
                  window: int = 3) -> VFJet:
    """Limit of the normalized difference fields (h_i - id) / ||h_i - id||_0.

    Every input must satisfy ||h_i - id||_r <= Const ||h_i - id||_0 (Const from
    norm_equivalence_constant unless given).  The sequence converges when the
    last ``window`` consecutive C^{r-1} differences are all <= tol.
    """
    h_seq = list(h_seq)
    if len(h_seq) < 2:
        raise ValidationError("need at least two elements")
    r = spec.order
    fields, ratios = [], []
    for idx, h in enumerate(h_seq):
        c0 = cnorm(h, minus_id=True, spec=spec.with_order(0))
        if c0 == 0:
            raise ValidationError(f"element {idx} is the identity")
        const = norm_constant
        if const is None:
            const = 1.0 if r == 0 else norm_equivalence_constant(h.degree, h.dim, r, spec).constant
        cr = cnorm(h, minus_id=True, spec=spec)
        if cr > const * c0 * (1 + 1e-12):
            raise ValidationError(f"element {idx}: C^{r} norm {cr:.3g} exceeds {const:.3g} x C^0 norm {c0:.3g}")
        fields.append(difference_field(h, spec))
    d = max(f.degree for f in fields)
    fields = [f.with_degree(d) for f in fields]
    lower = spec.with_order(max(r - 1, 0))
    osc = [cnorm(b - a, spec=lower) for a, b in zip(fields, fields[1:])]
    tail = osc[-window:]
    if max(tail) > tol:
        raise NotConverged(f"difference fields not Cauchy: last oscillation {osc[-1]:.3g} > tol {tol:.3g}",
                           oscillation=osc, tol=tol)
    return fields[-1]


# ---------------------------------------------------------------------------
# flows and iterations


def _as_points(x0, n):
    x = np.array(x0, dtype=float, copy=True)
    single = x.ndim == 1
    x = x.reshape(-1, n)
    return x, single


def _box(domain, n):
    if domain is None:
        return np.full(n, -np.inf), np.full(n, np.inf), False
    box = NormSpec(domain=domain).box(n)
    return np.array([b[0] for b in box]), np.array([b[1] for b in box]), True


def euler_flow(X: VFJet, x0, t: float, steps: int, domain=None) -> np.ndarray:
    """Euler polygon x_{m+1} = x_m + (t / steps) X(x_m); points of shape (n,) or (P, n)."""
    if steps < 1:
        raise ValidationError("steps must be >= 1")
    n = X.dim
    x, single = _as_points(x0, n)
    if t == 0:
        return x[0] if single else x
    lo, hi, check = _box(domain, n)
    esc = march(x, np.ascontiguousarray(X.coeffs), _exponents(n, X.degree), 1.0,
                np.full(len(x), t / steps), int(steps), lo, hi, check)
    if np.any(esc >= 0):
        p = int(np.argmax(esc >= 0))
        raise EscapeError(f"Euler orbit left the domain at step {int(esc[p])}", point=p, step=int(esc[p]))
    return x[0] if single else x


def iterate(h: Jet, x0, N: int, domain=None) -> np.ndarray:
    """h^N applied to points."""
    n = h.dim
    x, single = _as_points(x0, n)
    if N < 0:
        raise ValidationError("iteration count must be >= 0")
    lo, hi, check = _box(domain, n)
    esc = march(x, np.ascontiguousarray(h.coeffs), _exponents(n, h.degree), 0.0,
                np.ones(len(x)), int(N), lo, hi, check)
    if np.any(esc >= 0):
        p = int(np.argmax(esc >= 0))
        raise EscapeError(f"iterate left the domain at iteration {int(esc[p])}", point=p, step=int(esc[p]))
    return x[0] if single else x


@dataclass(frozen=True)
class FlowSpec:
    """Comparison setup: time t, Euler steps (None = automatic), grid on U0, escape box U."""

    t: float = 1.0
    steps: int | None = None
    grid: tuple = ((0.0, 0.5),)
    grid_points: int = 21
    domain: tuple | None = None
    step_factor: float = 100.0

    def __post_init__(self):
        if self.steps is not None and self.steps < 1:
            raise ValidationError("steps must be >= 1")
        if self.grid_points < 1:
            raise ValidationError("grid_points must be >= 1")

    def points(self, n: int) -> np.ndarray:
        box = self.grid if len(self.grid) == n else tuple(self.grid) * n
        if len(box) != n:
            raise ValidationError("grid box dimension mismatch")
        axes = [np.linspace(lo, hi, self.grid_points) for lo, hi in box]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)

    def euler_steps(self, C: float) -> int:
        """Explicit budget, or enough steps to put Euler error well below C."""
        if self.steps is not None:
            return self.steps
        return max(10_000, math.ceil(self.step_factor * abs(self.t) / C))


def iterate_flow_compare(X: VFJet, h: Jet, C: float, t: float | None = None, spec: FlowSpec = FlowSpec()) -> float:
    """sup over the grid of |h^floor(t/C)(x) - phi_X^t(x)| (Euclidean)."""
    if C <= 0:
        raise ValidationError("C must be positive")
    t = spec.t if t is None else t
    if t < 0:
        raise ValidationError("t must be >= 0")
    pts = spec.points(h.dim)
    if t == 0:
        return 0.0
    N = math.floor(t / C + 1e-9)
    it = iterate(h, pts, N, spec.domain)
    fl = euler_flow(X, pts, t, spec.euler_steps(C), spec.domain)
    return float(np.linalg.norm(it - fl, axis=1).max())
