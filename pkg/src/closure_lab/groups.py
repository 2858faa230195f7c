"""Concrete group actions: PSL(2, C) on the sphere, linear contractions, words.

Sphere points are handled as unit 3-vectors internally; the complex
coordinate is stereographic projection from the north pole, so ``z = 0`` is
the south pole and ``z = inf`` the north pole.  Möbius maps act through
homogeneous coordinates, which keeps every point (including infinity)
well conditioned.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import TowerBlowup, ValidationError
from .jets import Jet, NormSpec, monomials

__all__ = [
    "Mobius",
    "SpherePoint",
    "Contraction",
    "Word",
    "FixedPointData",
    "GhysTower",
    "TowerVerdict",
    "SphereMetric",
    "BoxMetric",
    "HitReport",
    "icosphere",
    "rotation",
    "random_mobius",
    "loxodromic",
    "commutator",
    "to_vectors",
    "to_complex",
    "chordal",
    "word_evaluate",
    "ghys_tower",
    "pseudo_solvable_verdict",
    "local_model",
    "orbit_accumulation",
    "load_generators",
    "parse_generators",
]

INF = complex(math.inf, 0.0)


# ---------------------------------------------------------------------------
# sphere coordinates


def _homogeneous(v: np.ndarray):
    """Unit vectors (..., 3) -> homogeneous pair (w1, w2) with w1/w2 = z."""
    x, y, z = v[..., 0], v[..., 1], v[..., 2]
    north = z > 0
    w1 = np.where(north, 1.0 + z, x + 1j * y)
    w2 = np.where(north, x - 1j * y, 1.0 - z)
    return w1.astype(complex), w2.astype(complex)


def _from_homogeneous(w1, w2) -> np.ndarray:
    p = w1 * np.conj(w2)
    a, b = np.abs(w1) ** 2, np.abs(w2) ** 2
    N = a + b
    return np.stack([2 * p.real / N, 2 * p.imag / N, (a - b) / N], axis=-1)


def to_vectors(z) -> np.ndarray:
    """Complex coordinates (inf allowed) -> unit vectors of shape (..., 3)."""
    z = np.asarray(z, dtype=complex)
    inf = ~np.isfinite(z)
    w1 = np.where(inf, 1.0, z)
    w2 = np.where(inf, 0.0, 1.0).astype(complex)
    return _from_homogeneous(w1, w2)


def to_complex(v) -> np.ndarray:
    """Unit vectors -> complex coordinates, with the north pole mapped to inf."""
    w1, w2 = _homogeneous(np.asarray(v, dtype=float))
    with np.errstate(divide="ignore", invalid="ignore"):
        z = w1 / w2
    return np.where(w2 == 0, INF, z)


def chordal(u, v) -> np.ndarray:
    """Euclidean distance between unit vectors (chordal metric, range [0, 2])."""
    return np.linalg.norm(np.asarray(u) - np.asarray(v), axis=-1)


@dataclass(frozen=True)
class SpherePoint:
    """A point of the Riemann sphere; ``z`` is ``inf`` for the north pole."""

    z: complex

    def __post_init__(self):
        z = complex(self.z)
        object.__setattr__(self, "z", INF if not cmath.isfinite(z) else z)

    @property
    def at_infinity(self) -> bool:
        return not cmath.isfinite(self.z)

    @property
    def vector(self) -> np.ndarray:
        return to_vectors(self.z)

    @classmethod
    def from_vector(cls, v) -> "SpherePoint":
        v = np.asarray(v, dtype=float)
        return cls(complex(to_complex(v / np.linalg.norm(v))))

    def distance(self, other: "SpherePoint") -> float:
        return float(chordal(self.vector, other.vector))


# ---------------------------------------------------------------------------
# PSL(2, C)


def _canonical(M: np.ndarray) -> np.ndarray:
    M = np.asarray(M, dtype=complex).reshape(2, 2)
    det = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
    if det == 0:
        raise ValidationError("singular Möbius matrix")
    M = M / cmath.sqrt(det)
    for x in M.ravel():
        if x != 0:
            if x.real < 0 or (x.real == 0 and x.imag < 0):
                M = -M
            break
    return M


@dataclass(frozen=True, eq=False)
class Mobius:
    """z -> (a z + b) / (c z + d), stored with ad - bc = 1 and a canonical sign."""

    a: complex = 1
    b: complex = 0
    c: complex = 0
    d: complex = 1

    def __post_init__(self):
        M = _canonical([[self.a, self.b], [self.c, self.d]])
        for name, v in zip("abcd", M.ravel()):
            object.__setattr__(self, name, complex(v))

    @classmethod
    def from_matrix(cls, M) -> "Mobius":
        M = np.asarray(M, dtype=complex)
        return cls(M[0, 0], M[0, 1], M[1, 0], M[1, 1])

    @classmethod
    def identity(cls) -> "Mobius":
        return cls()

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.c, self.d]])

    @property
    def is_identity(self) -> bool:
        return self.b == 0 and self.c == 0 and self.a == self.d

    @property
    def trace(self) -> complex:
        return self.a + self.d

    def compose(self, other: "Mobius") -> "Mobius":
        """self o other."""
        return Mobius.from_matrix(self.matrix @ other.matrix)

    __matmul__ = compose

    def inverse(self) -> "Mobius":
        return Mobius(self.d, -self.b, -self.c, self.a)

    def power(self, k: int) -> "Mobius":
        M = np.linalg.matrix_power(self.matrix if k >= 0 else self.inverse().matrix, abs(k))
        return Mobius.from_matrix(M)

    def equals(self, other: "Mobius", tol: float = 1e-12) -> bool:
        """Equality in PSL(2, C), i.e. up to the sign of the matrix."""
        A, B = self.matrix, other.matrix
        return bool(min(np.abs(A - B).max(), np.abs(A + B).max()) <= tol)

    def apply_z(self, z):
        """Action on complex coordinates, with inf <-> the point at infinity."""
        z = np.asarray(z, dtype=complex)
        inf = ~np.isfinite(z)
        zz = np.where(inf, 0.0, z)
        w1 = np.where(inf, self.a, self.a * zz + self.b)
        w2 = np.where(inf, self.c, self.c * zz + self.d)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(w2 == 0, INF, w1 / np.where(w2 == 0, 1.0, w2))
        return out if out.ndim else complex(out)

    def apply_vec(self, v) -> np.ndarray:
        """Action on unit vectors of shape (..., 3)."""
        v = np.asarray(v, dtype=float)
        if self.is_identity:
            return v.copy()
        w1, w2 = _homogeneous(v)
        return _from_homogeneous(self.a * w1 + self.b * w2, self.c * w1 + self.d * w2)

    def apply(self, p):
        if isinstance(p, SpherePoint):
            return SpherePoint(self.apply_z(p.z))
        return self.apply_z(p)

    __call__ = apply

    def stretch(self, v) -> np.ndarray:
        """Conformal stretch factor of the map at unit vectors v (round metric)."""
        w1, w2 = _homogeneous(np.asarray(v, dtype=float))
        u1, u2 = self.a * w1 + self.b * w2, self.c * w1 + self.d * w2
        return (np.abs(w1) ** 2 + np.abs(w2) ** 2) / (np.abs(u1) ** 2 + np.abs(u2) ** 2)

    def __repr__(self):
        return f"Mobius(a={self.a:.6g}, b={self.b:.6g}, c={self.c:.6g}, d={self.d:.6g})"


def rotation(axis, angle: float) -> Mobius:
    """Rigid rotation of the sphere by ``angle`` (right-handed) about ``axis``."""
    n = np.asarray(axis, dtype=float)
    norm = np.linalg.norm(n)
    if norm == 0:
        raise ValidationError("rotation axis must be nonzero")
    nx, ny, nz = n / norm
    c, s = math.cos(angle / 2), math.sin(angle / 2)
    # SU(2) lift: cos(t/2) I + i sin(t/2) (n . sigma)
    return Mobius(c + 1j * s * nz, 1j * s * (nx - 1j * ny), 1j * s * (nx + 1j * ny), c - 1j * s * nz)


def random_mobius(rng: np.random.Generator, scale: float = 1.0) -> Mobius:
    M = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    return Mobius.from_matrix(np.eye(2) + scale * M)


def loxodromic(fixed_attracting, fixed_repelling, k: complex) -> Mobius:
    """The Möbius map with the given fixed points and multiplier k at the attractor."""
    p, q = complex(fixed_attracting), complex(fixed_repelling)
    if not (cmath.isfinite(p) and cmath.isfinite(q)) or p == q:
        raise ValidationError("need two distinct finite fixed points")
    # conjugate w -> k w by S(z) = (z - p) / (z - q)
    S = np.array([[1, -p], [1, -q]])
    return Mobius.from_matrix(np.linalg.inv(S) @ np.diag([k, 1]) @ S)


# ---------------------------------------------------------------------------
# meshes and displacement metrics


def icosphere(subdivisions: int = 3) -> np.ndarray:
    """Vertices of the subdivided icosahedron (642 nodes for 3 subdivisions)."""
    t = (1 + 5**0.5) / 2
    verts = [(-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0), (0, -1, t), (0, 1, t),
             (0, -1, -t), (0, 1, -t), (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1)]
    faces = [(0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11), (1, 5, 9), (5, 11, 4),
             (11, 10, 2), (10, 7, 6), (7, 1, 8), (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8),
             (3, 8, 9), (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1)]
    verts = [np.array(v, dtype=float) / np.linalg.norm(v) for v in verts]
    for _ in range(subdivisions):
        cache = {}

        def mid(i, j):
            key = (min(i, j), max(i, j))
            if key not in cache:
                m = verts[i] + verts[j]
                verts.append(m / np.linalg.norm(m))
                cache[key] = len(verts) - 1
            return cache[key]

        new = []
        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new
    out = np.array(verts)
    out.setflags(write=False)
    return out


class SphereMetric:
    """Chordal sup distance over a fixed icosphere mesh."""

    def __init__(self, subdivisions: int = 3):
        self.nodes = icosphere(subdivisions)

    def images(self, g) -> np.ndarray:
        return g.apply_vec(self.nodes)

    def pointwise(self, A, B) -> np.ndarray:
        return chordal(A, B)

    def displacement(self, g, refine: bool = False) -> float:
        dist = chordal(self.images(g), self.nodes)
        best = float(dist.max())
        if not refine:
            return best
        from scipy.optimize import minimize

        for i in np.argsort(-dist, kind="stable")[:4]:
            p = self.nodes[i]
            e1 = np.cross(p, [1.0, 0.0, 0.0] if abs(p[0]) < 0.9 else [0.0, 1.0, 0.0])
            e1 /= np.linalg.norm(e1)
            e2 = np.cross(p, e1)

            def neg(st, p=p, e1=e1, e2=e2):
                v = p + st[0] * e1 + st[1] * e2
                v = v / np.linalg.norm(v)
                return -float(np.sum((g.apply_vec(v) - v) ** 2))

            res = minimize(neg, np.zeros(2), method="BFGS", options={"gtol": 1e-13})
            best = max(best, math.sqrt(max(-res.fun, 0.0)))
        return best

    def distance(self, g, h) -> float:
        return float(chordal(self.images(g), self.images(h)).max())


class BoxMetric:
    """Componentwise C^0 sup over the grid of a NormSpec (jets acting on a box)."""

    def __init__(self, n: int, spec: NormSpec = NormSpec()):
        self.nodes = spec.grid(n)

    def images(self, g) -> np.ndarray:
        return g(self.nodes)

    def pointwise(self, A, B) -> np.ndarray:
        return np.abs(A - B).max(axis=-1)

    def displacement(self, g, refine: bool = False) -> float:
        return float(self.pointwise(self.images(g), self.nodes).max())

    def distance(self, g, h) -> float:
        return float(self.pointwise(self.images(g), self.images(h)).max())


# ---------------------------------------------------------------------------
# contractions


@dataclass(frozen=True)
class Contraction:
    """Linear contraction diag(lambda_1, ..., lambda_n), 0 < l_1 < ... < l_n < 1."""

    eigenvalues: tuple
    resonance_degree: int = 5
    resonance_free: bool = field(init=False)

    def __post_init__(self):
        lam = tuple(float(x) for x in np.atleast_1d(self.eigenvalues))
        if not lam or lam[0] <= 0 or lam[-1] >= 1 or any(x >= y for x, y in zip(lam, lam[1:])):
            raise ValidationError(f"eigenvalues must satisfy 0 < l1 < ... < ln < 1, got {lam}")
        object.__setattr__(self, "eigenvalues", lam)
        object.__setattr__(self, "resonance_free", not self.resonances())

    @property
    def dim(self) -> int:
        return len(self.eigenvalues)

    def resonances(self, degree: int | None = None, rtol: float = 1e-12):
        """All (l, alpha) with lambda_l = lambda^alpha and 2 <= |alpha| <= degree."""
        d = self.resonance_degree if degree is None else degree
        lam = np.array(self.eigenvalues)
        out = []
        for alpha in monomials(self.dim, d):
            if sum(alpha) < 2:
                continue
            v = float(np.prod(lam ** np.array(alpha)))
            for l, x in enumerate(lam):
                if abs(v - x) <= rtol * x:
                    out.append((l, alpha))
        return out

    def jet(self, d: int, power: int = 1) -> Jet:
        """F^power as a degree-d jet (power may be negative)."""
        lam = np.array(self.eigenvalues) ** power
        terms = {}
        for l in range(self.dim):
            e = [0] * self.dim
            e[l] = 1
            terms[(l, tuple(e))] = lam[l]
        return Jet.from_terms(self.dim, d, terms)

    def multiplier(self, l: int, alpha) -> float:
        lam = np.array(self.eigenvalues)
        return float(abs(np.prod(lam ** np.array(alpha)) / lam[l]))

    def multipliers(self, d: int) -> np.ndarray:
        """Multiplier table of shape (n, M) for the degree-d monomial basis."""
        lam = np.array(self.eigenvalues)
        e = np.array(monomials(self.dim, d)).reshape(-1, self.dim)
        mono = np.prod(lam[None, :] ** e, axis=1)
        return np.abs(mono[None, :] / lam[:, None])


# ---------------------------------------------------------------------------
# words


@dataclass(frozen=True)
class Word:
    """Freely reduced word; letters are (generator index, +1 or -1)."""

    letters: tuple = ()

    def __post_init__(self):
        stack = []
        for i, e in self.letters:
            i, e = int(i), int(e)
            if e not in (1, -1) or i < 0:
                raise ValidationError(f"bad letter {(i, e)}")
            if stack and stack[-1] == (i, -e):
                stack.pop()
            else:
                stack.append((i, e))
        object.__setattr__(self, "letters", tuple(stack))

    def __len__(self):
        return len(self.letters)

    def __add__(self, other: "Word") -> "Word":
        return Word(self.letters + other.letters)

    def inverse(self) -> "Word":
        return Word(tuple((i, -e) for i, e in reversed(self.letters)))

    @classmethod
    def power(cls, i: int, m: int) -> "Word":
        return cls(((i, 1 if m > 0 else -1),) * abs(m))

    @classmethod
    def random(cls, rng: np.random.Generator, ngens: int, length: int) -> "Word":
        letters = []
        while len(letters) < length:
            i, e = int(rng.integers(ngens)), int(rng.choice((-1, 1)))
            if letters and letters[-1] == (i, -e):
                continue
            letters.append((i, e))
        return cls(tuple(letters))

    def __str__(self):
        return " ".join(f"g{i}{'' if e > 0 else '^-1'}" for i, e in self.letters) or "e"


def _identity_like(g):
    if isinstance(g, Mobius):
        return Mobius.identity()
    if isinstance(g, Jet):
        return Jet.identity(g.dim, g.degree)
    if isinstance(g, np.ndarray):
        return np.eye(g.shape[0])
    raise ValidationError(f"no identity known for {type(g).__name__}")


def _compose(f, g):
    return f @ g if isinstance(f, np.ndarray) else f.compose(g)


def _inverse(g):
    return np.linalg.inv(g) if isinstance(g, np.ndarray) else g.inverse()


def word_evaluate(w: Word, gens):
    """Left-to-right product g_{i1}^{e1} g_{i2}^{e2} ... (rightmost acts first)."""
    if not gens:
        raise ValidationError("empty generating set")
    for i, _ in w.letters:
        if i >= len(gens):
            raise ValidationError(f"generator index {i} out of range for {len(gens)} generators")
    inverses = {}
    out = _identity_like(gens[0])
    for i, e in w.letters:
        if e < 0 and i not in inverses:
            inverses[i] = _inverse(gens[i])
        out = _compose(out, gens[i] if e > 0 else inverses[i])
    return out


# ---------------------------------------------------------------------------
# Ghys towers


def commutator(a, b):
    """[a, b] = a b a^-1 b^-1."""
    return _compose(_compose(a, b), _compose(_inverse(a), _inverse(b)))


@dataclass
class GhysTower:
    levels: list
    displacements: list
    identity_flags: list
    raw_counts: list
    pruned: list
    dedup_tol: float

    @property
    def depth(self) -> int:
        return len(self.levels) - 1

    def sizes(self) -> list:
        return [len(level) for level in self.levels]

    def summary(self) -> list:
        return [
            {
                "level": j,
                "size": len(self.levels[j]),
                "raw": self.raw_counts[j],
                "identities": int(np.sum(self.identity_flags[j])),
                "max_displacement": float(np.max(self.displacements[j], initial=0.0)),
                "min_displacement": float(np.min(self.displacements[j], initial=np.inf))
                if len(self.levels[j]) else 0.0,
                "pruned": self.pruned[j],
            }
            for j in range(len(self.levels))
        ]


def _dedup(cands, metric, tol):
    """Drop candidates within ``tol`` of an earlier kept one (sup distance)."""
    kept, disps = [], []
    order = []  # kept indices sorted by displacement
    keys = []
    import bisect

    for g in cands:
        img = metric.images(g)
        d = float(metric.pointwise(img, metric.nodes).max())
        lo = bisect.bisect_left(keys, d - tol)
        hi = bisect.bisect_right(keys, d + tol)
        dup = False
        for pos in range(lo, hi):
            m = kept[order[pos]]
            if float(metric.pointwise(img, metric.images(m)).max()) < tol:
                dup = True
                break
        if dup:
            continue
        pos = bisect.bisect_left(keys, d)
        keys.insert(pos, d)
        order.insert(pos, len(kept))
        kept.append(g)
        disps.append(d)
    return kept, np.array(disps)


def _stack_images(Ms: np.ndarray, nodes) -> np.ndarray:
    w1, w2 = _homogeneous(nodes) if isinstance(nodes, np.ndarray) else nodes
    u1 = Ms[:, 0, 0, None] * w1 + Ms[:, 0, 1, None] * w2
    u2 = Ms[:, 1, 0, None] * w1 + Ms[:, 1, 1, None] * w2
    return _from_homogeneous(u1, u2)


def _sup_chordal(A, B) -> float:
    D = A - B
    return math.sqrt(float(np.max(np.einsum("...i,...i->...", D, D))))


def _mobius_level(F1, F2, metric, tol, chunk=512):
    """Batched commutators of Möbius maps, same order and dedup rule as the generic path."""
    import bisect

    def with_inverses(F):
        M = np.array([f.matrix for f in F])
        Minv = np.array([f.inverse().matrix for f in F])
        return np.stack([M, Minv], axis=1).reshape(-1, 2, 2)

    A, B = with_inverses(F1), with_inverses(F2)
    Ainv = np.linalg.inv(A)
    Binv = np.linalg.inv(B)
    AB = np.einsum("iab,jbc->ijac", A, B)
    AiBi = np.einsum("iab,jbc->ijac", Ainv, Binv)
    C = np.einsum("ijab,ijbc->ijac", AB, AiBi).reshape(-1, 2, 2)
    det = C[:, 0, 0] * C[:, 1, 1] - C[:, 0, 1] * C[:, 1, 0]
    C = C / np.sqrt(det)[:, None, None]
    nodes = metric.nodes
    disps = np.concatenate([
        chordal(_stack_images(C[k:k + chunk], nodes), nodes).max(axis=1)
        for k in range(0, len(C), chunk)
    ])
    # a few probe nodes give a cheap lower bound on the sup distance
    probe = _stack_images(C, nodes[:12])
    full = {}

    hom = _homogeneous(nodes)

    def image(i):
        if i not in full:
            full[i] = _stack_images(C[i:i + 1], hom)[0]
        return full[i]

    keys, order, kept = [], [], []
    for i, d in enumerate(disps):
        lo = bisect.bisect_left(keys, d - tol)
        hi = bisect.bisect_right(keys, d + tol)
        dup = False
        for p in range(lo, hi):
            k = kept[order[p]]
            if _sup_chordal(probe[i], probe[k]) < tol and _sup_chordal(image(i), image(k)) < tol:
                dup = True
                break
        if dup:
            continue
        pos = bisect.bisect_left(keys, d)
        keys.insert(pos, d)
        order.insert(pos, len(kept))
        kept.append(i)
    return [Mobius.from_matrix(C[i]) for i in kept], disps[kept]


def ghys_tower(S, depth: int, metric=None, dedup_tol: float = 1e-14, cap: int = 250_000,
               max_level_size: int | None = None, batched: bool = True) -> GhysTower:
    """Levels S(0) = S, S(j+1) = {[F1^+-1, F2^+-1] : F1 in S(j), F2 in S(j) u S(j-1)}.

    ``cap`` bounds the number of raw commutators per level; above it the
    build aborts with :class:`TowerBlowup`.  With ``max_level_size`` each
    level keeps only its largest-displacement members (ties by generation
    order), which makes deep towers tractable; see
    :func:`pseudo_solvable_verdict` for what that does to certification.
    """
    if depth < 0:
        raise ValidationError("depth must be >= 0")
    S = list(S)
    if not S:
        raise ValidationError("empty generating set")
    metric = metric or SphereMetric()
    disp0 = np.array([metric.displacement(g) for g in S])
    levels, displacements = [S], [disp0]
    flags, raw, pruned = [disp0 < dedup_tol], [len(S)], [False]
    fast = batched and isinstance(metric, SphereMetric) and all(isinstance(g, Mobius) for g in S)
    for j in range(depth):
        F1 = levels[j]
        F2 = levels[j] + (levels[j - 1] if j >= 1 else [])
        n_raw = 4 * len(F1) * len(F2)
        if n_raw > cap:
            raise TowerBlowup(f"level {j + 1} would need {n_raw} commutators (cap {cap})",
                              level=j + 1, candidates=n_raw, cap=cap)
        if fast:
            kept, disps = _mobius_level(F1, F2, metric, dedup_tol)
        else:
            F1s = [(f, _inverse(f)) for f in F1]
            F2s = [(f, _inverse(f)) for f in F2]
            cands = [commutator(a, b) for pair1 in F1s for a in pair1 for pair2 in F2s for b in pair2]
            kept, disps = _dedup(cands, metric, dedup_tol)
        was_pruned = False
        if max_level_size is not None and len(kept) > max_level_size:
            top = np.sort(np.argsort(-disps, kind="stable")[:max_level_size])
            kept, disps = [kept[i] for i in top], disps[top]
            was_pruned = True
        levels.append(kept)
        displacements.append(disps)
        flags.append(disps < dedup_tol)
        raw.append(n_raw)
        pruned.append(was_pruned)
    return GhysTower(levels, displacements, flags, raw, pruned, dedup_tol)


@dataclass(frozen=True)
class TowerVerdict:
    level: int | None
    certified: bool
    max_displacements: tuple

    @property
    def pseudo_solvable(self) -> bool:
        return self.level is not None

    def __str__(self):
        return f"pseudo_solvable_at_level {self.level}" if self.pseudo_solvable else "not_within_depth"


def pseudo_solvable_verdict(tower: GhysTower, tol: float) -> TowerVerdict:
    """First level whose members all have displacement <= tol.

    A ``not_within_depth`` answer is always sound: every retained element is a
    genuine member of its level.  A positive answer is certified only when no
    earlier level was pruned (pruning may hide members of later levels).
    """
    maxima = tuple(float(np.max(d, initial=0.0)) for d in tower.displacements)
    for j, m in enumerate(maxima):
        if m <= tol:
            return TowerVerdict(j, not any(tower.pruned[:j]), maxima)
    return TowerVerdict(None, True, maxima)


# ---------------------------------------------------------------------------
# fixed points


@dataclass(frozen=True)
class FixedPointData:
    fixed_points: tuple
    multipliers: tuple
    classification: str
    attracting: SpherePoint | None = None
    repelling: SpherePoint | None = None

    @property
    def k(self) -> complex | None:
        """Multiplier at the attracting point (loxodromic only)."""
        if self.attracting is None:
            return None
        return self.multipliers[self.fixed_points.index(self.attracting)]

    @property
    def rate(self) -> float | None:
        return None if self.k is None else abs(self.k)


def local_model(g: Mobius, tol: float = 1e-12) -> FixedPointData:
    """Fixed points, derivatives there, and the elliptic/parabolic/loxodromic type."""
    if g.is_identity or g.equals(Mobius.identity(), 1e-15):
        raise ValidationError("identity has no isolated fixed points")
    a, b, c, d = g.a, g.b, g.c, g.d
    tr = a + d
    if abs(c) <= tol * max(1.0, abs(a), abs(d)):
        # infinity is fixed
        if abs(a - d) <= tol:
            return FixedPointData((SpherePoint(INF),), (1.0 + 0j,), "parabolic")
        z0 = b / (d - a)
        pts = (SpherePoint(z0), SpherePoint(INF))
        ks = (a / d, d / a)
    else:
        disc = cmath.sqrt(tr * tr - 4)
        if abs(disc) <= math.sqrt(tol):
            z0 = (a - d) / (2 * c)
            return FixedPointData((SpherePoint(z0),), (1.0 + 0j,), "parabolic")
        # roots of c z^2 + (d - a) z - b = 0 via the stable pair formula
        p = -(d - a)
        q = p + disc if abs(p + disc) >= abs(p - disc) else p - disc
        z1 = q / (2 * c)
        z2 = -b / (c * z1) if z1 != 0 else (p - (q - p)) / (2 * c)
        pts = (SpherePoint(z1), SpherePoint(z2))
        ks = tuple(1 / (c * z + d) ** 2 for z in (z1, z2))
    r0, r1 = abs(ks[0]), abs(ks[1])
    if abs(r0 - 1) <= 1e-9 and abs(r1 - 1) <= 1e-9:
        return FixedPointData(pts, ks, "elliptic")
    att, rep = (0, 1) if r0 < r1 else (1, 0)
    return FixedPointData(pts, ks, "loxodromic", pts[att], pts[rep])


# ---------------------------------------------------------------------------
# orbit accumulation


@dataclass
class HitReport:
    targets: list
    min_distance: list
    hit: list
    best_words: list
    words_sampled: int
    eps: float

    def to_dict(self) -> dict:
        return {
            "targets": [[p.vector.tolist()] for p in self.targets],
            "min_distance": list(self.min_distance),
            "hit": list(self.hit),
            "best_words": [str(w) for w in self.best_words],
            "words_sampled": self.words_sampled,
            "eps": self.eps,
        }


def orbit_accumulation(gens, x0: SpherePoint, targets=None, eps: float = 1e-3, budget: int = 10_000,
                       seed: int = 0, max_prefix: int = 8) -> HitReport:
    """Seeded random words (prefix, then a loxodromic power) and their closest approach.

    Each sampled word is ``g^(s m) w`` with ``w`` a random reduced prefix and
    ``g`` a loxodromic generator; ``s = +1`` aims at the attracting point of g
    and ``s = -1`` at its repelling point.  Distances are chordal.
    """
    models = []
    for i, g in enumerate(gens):
        try:
            fp = local_model(g)
        except ValidationError:
            continue
        if fp.classification == "loxodromic":
            models.append((i, fp))
    if not models:
        raise ValidationError("no loxodromic generator: there is no attracting fixed point to accumulate at")
    aims = [(i, s, fp.attracting if s > 0 else fp.repelling, fp.rate) for i, fp in models for s in (1, -1)]
    if targets is None:
        targets = [p for _, _, p, _ in aims]
    targets = list(targets)
    tv = np.array([p.vector for p in targets])
    x = x0.vector
    m_max = max(1, math.ceil(math.log(eps) / math.log(max(r for *_, r in aims))) + 2)
    rng = np.random.default_rng(seed)
    best = np.full(len(targets), np.inf)
    words = [Word()] * len(targets)
    n = 0
    while n < budget and not np.all(best < eps):
        i, s, _, _ = aims[int(rng.integers(len(aims)))]
        prefix = Word.random(rng, len(gens), int(rng.integers(0, max_prefix + 1)))
        w = Word.power(i, s * int(rng.integers(1, m_max + 1))) + prefix
        y = word_evaluate(w, gens).apply_vec(x)
        dist = chordal(tv, y)
        better = dist < best
        for t in np.nonzero(better)[0]:
            best[t] = dist[t]
            words[t] = w
        n += 1
    return HitReport(targets, best.tolist(), (best < eps).tolist(), words, n, eps)


# ---------------------------------------------------------------------------
# generator files


def parse_generators(text: str) -> list:
    """``mobius a_re a_im b_re b_im c_re c_im d_re d_im`` or ``rotation ax ay az angle`` per line."""
    gens = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        kind, *vals = line.split()
        try:
            nums = [float(v) for v in vals]
        except ValueError as exc:
            raise ValidationError(f"line {lineno}: non-numeric value") from exc
        if kind == "mobius" and len(nums) == 8:
            a, b, c, d = (complex(nums[k], nums[k + 1]) for k in range(0, 8, 2))
            gens.append(Mobius(a, b, c, d))
        elif kind == "rotation" and len(nums) == 4:
            gens.append(rotation(nums[:3], nums[3]))
        else:
            raise ValidationError(f"line {lineno}: expected 'mobius' with 8 numbers or 'rotation' with 4")
    if not gens:
        raise ValidationError("no generators found")
    return gens


def load_generators(path) -> list:
    return parse_generators(Path(path).read_text())
