"""Quasi-invariant measure diagnostics on the sphere and on boxes in R^n.

Measures are weighted point clouds.  Radon-Nikodym derivatives are cell
ratios over a nearest-vertex partition of an icosphere; every random draw
comes from a fixed-size chunk with its own spawned seed, so results do not
depend on how many threads did the work.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .errors import NonMonotoneError, StarvationError, ValidationError
from .groups import Mobius, SpherePoint, icosphere, to_vectors
from .report import fmt

__all__ = [
    "EmpiricalMeasure",
    "QuasiVolumeReport",
    "Homeomorphism",
    "RectifyingMap",
    "DimensionEstimate",
    "CHUNK",
    "sample_sphere",
    "sample_great_circle",
    "sample_box",
    "random_loxodromics",
    "partition_centers",
    "spherical_jacobian",
    "pushforward",
    "quasi_volume_constant",
    "local_dimension",
    "haar_discrepancy",
    "rn_translation_field",
    "rectifying_map",
    "ks_uniform",
]

CHUNK = 8192


# ---------------------------------------------------------------------------
# measures


@dataclass(frozen=True, eq=False)
class EmpiricalMeasure:
    """Atoms with non-negative weights summing to one.

    ``ambient`` is ``"sphere"`` (points are unit 3-vectors) or a box given as
    one ``(lo, hi)`` pair per axis.
    """

    points: np.ndarray
    weights: np.ndarray
    ambient: object = "sphere"

    def __post_init__(self):
        pts = np.array(self.points, dtype=float, ndmin=2)
        w = np.array(self.weights, dtype=float).reshape(-1)
        if len(pts) != len(w) or len(w) == 0:
            raise ValidationError("need one weight per atom and at least one atom")
        if np.any(w < 0) or not np.all(np.isfinite(w)) or w.sum() <= 0:
            raise ValidationError("weights must be finite, non-negative, not all zero")
        w = w / w.sum()
        if isinstance(self.ambient, str) and self.ambient == "sphere":
            if pts.shape[1] != 3:
                raise ValidationError("sphere atoms must be 3-vectors")
            if np.any(np.abs(np.linalg.norm(pts, axis=1) - 1) > 1e-9):
                raise ValidationError("sphere atoms must be unit vectors")
            amb = "sphere"
        else:
            amb = tuple((float(a), float(b)) for a, b in np.asarray(self.ambient, dtype=float).reshape(-1, 2))
            if len(amb) != pts.shape[1]:
                raise ValidationError("box dimension does not match the atoms")
            lo = np.array([a for a, _ in amb])
            hi = np.array([b for _, b in amb])
            if np.any(pts < lo) or np.any(pts > hi):
                raise ValidationError("atoms outside the ambient box")
        pts.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "ambient", amb)

    @classmethod
    def uniform(cls, points, ambient="sphere") -> "EmpiricalMeasure":
        points = np.asarray(points, dtype=float)
        return cls(points, np.ones(len(points)), ambient)

    @classmethod
    def atom(cls, p) -> "EmpiricalMeasure":
        v = p.vector if isinstance(p, SpherePoint) else np.asarray(p, dtype=float)
        return cls(v[None, :], np.ones(1))

    @property
    def on_sphere(self) -> bool:
        return isinstance(self.ambient, str)

    @property
    def total(self) -> float:
        return float(self.weights.sum())

    def __len__(self):
        return len(self.weights)

    def to_csv(self, path=None) -> str:
        n = self.points.shape[1]
        head = "x,y,z,weight" if self.on_sphere else ",".join([f"x{i + 1}" for i in range(n)] + ["weight"])
        lines = [head] + [",".join(fmt(v) for v in (*p, w)) for p, w in zip(self.points, self.weights)]
        text = "\n".join(lines) + "\n"
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, source, ambient=None) -> "EmpiricalMeasure":
        text = Path(source).read_text() if not str(source).lstrip().startswith(("x", "X")) else str(source)
        rows = [r for r in text.splitlines() if r.strip()]
        head = [h.strip() for h in rows[0].split(",")]
        if head[-1] != "weight":
            raise ValidationError("last CSV column must be 'weight'")
        data = np.array([[float(v) for v in r.split(",")] for r in rows[1:]])
        if data.size == 0:
            raise ValidationError("no atoms in CSV")
        if head[:-1] == ["x", "y", "z"]:
            return cls(data[:, :3], data[:, 3], "sphere")
        if ambient is None:
            ambient = [(lo, hi) for lo, hi in zip(data[:, :-1].min(axis=0), data[:, :-1].max(axis=0))]
        return cls(data[:, :-1], data[:, -1], ambient)


def _chunked(n: int, seed: int, draw, threads: int = 1) -> np.ndarray:
    """Concatenate ``draw(rng, size)`` over fixed chunks with spawned seeds."""
    sizes = [min(CHUNK, n - s) for s in range(0, n, CHUNK)]
    seqs = np.random.SeedSequence(seed).spawn(len(sizes))
    jobs = [(np.random.default_rng(sq), m) for sq, m in zip(seqs, sizes)]
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            parts = list(ex.map(lambda j: draw(*j), jobs))
    else:
        parts = [draw(*j) for j in jobs]
    return np.concatenate(parts)


def sample_sphere(n: int, seed: int, threads: int = 1) -> EmpiricalMeasure:
    """n iid points of the normalized round area measure."""

    def draw(rng, m):
        v = rng.standard_normal((m, 3))
        return v / np.linalg.norm(v, axis=1, keepdims=True)

    return EmpiricalMeasure.uniform(_chunked(n, seed, draw, threads))


def sample_great_circle(n: int, seed: int, normal=(0.0, 0.0, 1.0), threads: int = 1) -> EmpiricalMeasure:
    nrm = np.asarray(normal, dtype=float)
    nrm = nrm / np.linalg.norm(nrm)
    e1 = np.cross(nrm, [1.0, 0.0, 0.0] if abs(nrm[0]) < 0.9 else [0.0, 1.0, 0.0])
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(nrm, e1)

    def draw(rng, m):
        t = rng.uniform(0, 2 * np.pi, m)
        v = np.cos(t)[:, None] * e1 + np.sin(t)[:, None] * e2
        return v / np.linalg.norm(v, axis=1, keepdims=True)

    return EmpiricalMeasure.uniform(_chunked(n, seed, draw, threads))


def sample_box(n: int, seed: int, box, threads: int = 1) -> EmpiricalMeasure:
    box = np.asarray(box, dtype=float).reshape(-1, 2)

    def draw(rng, m):
        return rng.uniform(box[:, 0], box[:, 1], (m, len(box)))

    return EmpiricalMeasure.uniform(_chunked(n, seed, draw, threads), box)


def _haar_su2(rng) -> np.ndarray:
    q = rng.standard_normal(4)
    a, b, c, d = q / np.linalg.norm(q)
    return np.array([[a + 1j * b, c + 1j * d], [-c + 1j * d, a - 1j * b]])


def random_loxodromics(count: int, seed: int, boost=(0.05, 0.3)) -> list:
    """Loxodromic maps U1 diag(e^(t/2), e^(-t/2)) U2 with Haar rotations U1, U2.

    The rapidity t is uniform in ``boost``; the spherical stretch of such a
    map lies in [e^-t, e^t], so ``boost`` controls how far from isometric
    the sample is.  Non-loxodromic draws (trace in [-2, 2]) are redrawn.
    """
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        t = rng.uniform(*boost)
        M = _haar_su2(rng) @ np.diag([np.exp(t / 2), np.exp(-t / 2)]) @ _haar_su2(rng)
        tr = M[0, 0] + M[1, 1]
        if abs(tr.imag) < 1e-9 and abs(tr.real) <= 2:
            continue
        out.append(Mobius.from_matrix(M))
    return out


def partition_centers(subdivisions: int = 0) -> np.ndarray:
    """Icosphere vertices rotated so that two of them sit at the poles."""
    v = icosphere(subdivisions)
    top = v[0]
    # rotate v[0] onto the north pole (its antipode, also a vertex, goes south)
    axis = np.cross(top, [0.0, 0.0, 1.0])
    s, c = np.linalg.norm(axis), top[2]
    axis = axis / s
    K = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]])
    R = np.eye(3) + s * K + (1 - c) * K @ K
    out = v @ R.T
    return out / np.linalg.norm(out, axis=1, keepdims=True)


# ---------------------------------------------------------------------------
# Jacobians and pushforwards


def spherical_jacobian(g: Mobius, p) -> np.ndarray:
    """Conformal stretch |g'(z)| (1 + |z|^2) / (1 + |g(z)|^2) in the round metric.

    ``p`` is a SpherePoint, complex coordinates, or unit vectors (..., 3).
    """
    if isinstance(p, SpherePoint):
        v = p.vector
    else:
        arr = np.asarray(p)
        v = arr if (arr.dtype.kind == "f" and arr.shape[-1:] == (3,)) else to_vectors(arr)
    out = g.stretch(v)
    return float(out) if np.ndim(out) == 0 else out


def pushforward(mu: EmpiricalMeasure, g) -> EmpiricalMeasure:
    """Atoms moved by g, weights unchanged."""
    if isinstance(g, Mobius) and g.is_identity:
        return mu
    if mu.on_sphere:
        pts = g.apply_vec(mu.points)
        pts = pts / np.linalg.norm(pts, axis=1, keepdims=True)
        return EmpiricalMeasure(pts, mu.weights, "sphere")
    return EmpiricalMeasure(g(mu.points), mu.weights, mu.ambient)


# ---------------------------------------------------------------------------
# quasi-volumes


@dataclass
class QuasiVolumeReport:
    d: float
    base: str
    constant: float
    violation: bool
    c_max: float
    ratio_min: list
    ratio_max: list
    cells_total: int
    cells_used: list
    excluded: list
    min_mass: float

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "base": self.base,
            "C": self.constant,
            "violation": self.violation,
            "c_max": self.c_max,
            "ratio_min": self.ratio_min,
            "ratio_max": self.ratio_max,
            "cells_total": self.cells_total,
            "cells_used": self.cells_used,
            "excluded": self.excluded,
            "min_mass": self.min_mass,
        }


def _cell_masses(tree, pts, weights, ncells):
    _, idx = tree.query(pts)
    return np.bincount(idx, weights=weights, minlength=ncells)


def quasi_volume_constant(mu: EmpiricalMeasure, group_sample, d: float, base: str = "conformal",
                          subdivisions: int = 0, min_mass: float = 1e-3, c_max: float = 2.0,
                          threads: int = 1) -> QuasiVolumeReport:
    """Empirical constant C of the d-quasi-volume inequality.

    Per cell and element g: ratio = [mu(cell) / g_*mu(cell)] / J(g, g^-1 x_c)^d
    with x_c the cell center and J the conformal stretch (``conformal``) or
    its square, the area Jacobian (``determinant``).  C is the largest
    max(ratio, 1/ratio).  Cells where both masses fall below ``min_mass`` are
    excluded and reported.
    """
    if not mu.on_sphere:
        raise ValidationError("quasi-volumes are computed on the sphere")
    if base not in ("conformal", "determinant"):
        raise ValidationError("base must be 'conformal' or 'determinant'")
    group_sample = list(group_sample)
    if not group_sample:
        raise ValidationError("empty group sample")
    centers = partition_centers(subdivisions)
    tree = cKDTree(centers)
    ncells = len(centers)
    m0 = _cell_masses(tree, mu.points, mu.weights, ncells)
    power = d if base == "conformal" else 2 * d

    def one(g):
        if isinstance(g, Mobius) and g.is_identity:
            m1 = m0
        else:
            m1 = _cell_masses(tree, g.apply_vec(mu.points), mu.weights, ncells)
        use = (m0 >= min_mass) | (m1 >= min_mass)
        with np.errstate(divide="ignore", invalid="ignore"):
            rn = m0[use] / m1[use]
        jac = g.stretch(g.inverse().apply_vec(centers[use])) ** power
        ratio = rn / jac
        if not len(ratio):
            return math.inf, 0.0, math.inf, 0, ncells
        worst = float(np.max(np.maximum(ratio, 1.0 / ratio)))
        return worst, float(ratio.min()), float(ratio.max()), int(use.sum()), int(ncells - use.sum())

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            rows = list(ex.map(one, group_sample))
    else:
        rows = [one(g) for g in group_sample]
    if all(r[3] == 0 for r in rows):
        raise StarvationError("every cell is below the minimum mass", min_mass=min_mass, cells=ncells)
    C = max(1.0, max(r[0] for r in rows))
    return QuasiVolumeReport(
        float(d), base, C, bool(C > c_max), float(c_max),
        [r[1] for r in rows], [r[2] for r in rows], ncells, [r[3] for r in rows], [r[4] for r in rows],
        float(min_mass),
    )


# ---------------------------------------------------------------------------
# local dimension


@dataclass
class DimensionEstimate:
    slopes: np.ndarray  # nan where skipped
    skipped: np.ndarray
    radii: np.ndarray
    masses: np.ndarray  # (probes, radii)

    def to_dict(self) -> dict:
        return {"slopes": self.slopes.tolist(), "skipped": self.skipped.tolist(), "radii": self.radii.tolist()}


def local_dimension(mu: EmpiricalMeasure, probes, radii, min_count: int = 10) -> DimensionEstimate:
    """Least-squares slope of log mu(B(x, r)) against log r (Euclidean balls)."""
    radii = np.sort(np.asarray(radii, dtype=float))
    if len(radii) < 2 or radii[0] <= 0 or math.log10(radii[-1] / radii[0]) < 1.5 - 1e-12:
        raise ValidationError("radii must be positive and span at least 1.5 decades")
    probes = np.array(probes, dtype=float, ndmin=2)
    tree = cKDTree(mu.points)
    masses = np.zeros((len(probes), len(radii)))
    counts = np.zeros((len(probes), len(radii)), dtype=int)
    for j, r in enumerate(radii):
        for i, hits in enumerate(tree.query_ball_point(probes, r)):
            masses[i, j] = mu.weights[hits].sum()
            counts[i, j] = len(hits)
    skipped = counts[:, 0] < min(min_count, len(mu))
    slopes = np.full(len(probes), np.nan)
    lr = np.log(radii)
    for i in np.nonzero(~skipped)[0]:
        slopes[i] = np.polyfit(lr, np.log(masses[i]), 1)[0]
    return DimensionEstimate(slopes, skipped, radii, masses)


# ---------------------------------------------------------------------------
# translation invariance


def haar_discrepancy(mu: EmpiricalMeasure, shifts, bins: int = 16, core=None) -> float:
    """max over shifts of the total variation between mu and mu + s on a core box.

    Both histograms are normalized to unit mass on the core, so disjoint
    supports give 1.  The default core is the largest box inside the domain
    and every shifted domain.
    """
    if mu.on_sphere:
        raise ValidationError("haar_discrepancy needs a measure on a box")
    box = np.array(mu.ambient)
    shifts = np.array(shifts, dtype=float, ndmin=2)
    if shifts.shape[1] != len(box):
        raise ValidationError("shift dimension mismatch")
    lo = np.maximum(box[:, 0], box[:, 0] + shifts.max(axis=0))
    hi = np.minimum(box[:, 1], box[:, 1] + shifts.min(axis=0))
    if core is not None:
        core = np.asarray(core, dtype=float).reshape(-1, 2)
        if np.any(core[:, 0] < lo - 1e-12) or np.any(core[:, 1] > hi + 1e-12):
            raise ValidationError("shifts push the core outside the domain")
        lo, hi = core[:, 0], core[:, 1]
    if np.any(hi <= lo):
        raise ValidationError("shifts leave no common core")
    edges = [np.linspace(a, b, bins + 1) for a, b in zip(lo, hi)]

    def hist(pts):
        h, _ = np.histogramdd(pts, bins=edges, weights=mu.weights)
        s = h.sum()
        return h / s if s > 0 else h

    base = hist(mu.points)
    return float(max(0.5 * np.abs(base - hist(mu.points + s)).sum() for s in shifts))


# ---------------------------------------------------------------------------
# rectifying map


class Homeomorphism:
    """A map of R^n given by forward and inverse callables on arrays (..., n).

    ``from_samples`` builds a separable monotone map (one increasing table per
    axis) evaluated by linear interpolation, the grid-sampled form.
    """

    def __init__(self, forward, inverse, dim: int = 1):
        self.forward = forward
        self.inverse = inverse
        self.dim = dim

    def __call__(self, x):
        return self.forward(np.asarray(x, dtype=float))

    @classmethod
    def identity(cls, dim: int = 1) -> "Homeomorphism":
        return cls(lambda x: x.copy(), lambda y: np.asarray(y, dtype=float).copy(), dim)

    @classmethod
    def from_samples(cls, grid, values) -> "Homeomorphism":
        grid = np.array(grid, dtype=float, ndmin=2)
        values = np.array(values, dtype=float, ndmin=2)
        if grid.shape != values.shape:
            raise ValidationError("grid and values must match")
        for g, v in zip(grid, values):
            if np.any(np.diff(g) <= 0) or np.any(np.diff(v) <= 0):
                raise ValidationError("sampled homeomorphisms must be strictly increasing per axis")

        def fwd(x):
            x = np.asarray(x, dtype=float)
            return np.stack([np.interp(x[..., i], grid[i], values[i]) for i in range(len(grid))], axis=-1)

        def inv(y):
            y = np.asarray(y, dtype=float)
            return np.stack([np.interp(y[..., i], values[i], grid[i]) for i in range(len(grid))], axis=-1)

        return cls(fwd, inv, len(grid))


def rn_translation_field(H: Homeomorphism, B, z, h: float = 1e-5) -> float:
    """Det D rho(B) at z for rho(B)(x) = H^-1(H(x) + B), by central differences."""
    B = np.atleast_1d(np.asarray(B, dtype=float))
    z = np.atleast_1d(np.asarray(z, dtype=float))
    n = len(z)
    if len(B) != n:
        raise ValidationError("B and z must have the same dimension")
    if not np.any(B):
        return 1.0
    stencil = z[None, :] + h * np.vstack([np.eye(n), -np.eye(n)])
    img = H.inverse(H.forward(stencil) + B)
    if not np.all(np.isfinite(img)):
        raise ValidationError("finite-difference stencil left the domain of H")
    J = (img[:n] - img[n:]).T / (2 * h)
    return float(np.linalg.det(J))


@dataclass
class RectifyingMap:
    center: np.ndarray
    directions: np.ndarray  # (L, n) unit vectors
    s: np.ndarray  # radial grid, s[0] = 0
    c: np.ndarray  # (L, len(s))

    def c_of(self, B) -> float:
        """c(B) for B on one of the sampled radial lines."""
        B = np.atleast_1d(np.asarray(B, dtype=float))
        r = float(np.linalg.norm(B))
        if r == 0:
            return 0.0
        if r > self.s[-1] * (1 + 1e-12):
            raise ValidationError(f"|B| = {r} beyond the sampled range {self.s[-1]}")
        u = B / r
        k = int(np.argmax(self.directions @ u))
        if abs(self.directions[k] @ u - 1) > 1e-9:
            raise ValidationError("B is not on a sampled radial line")
        return float(np.interp(r, self.s, self.c[k]))

    def __call__(self, B):
        """Radial reparametrization B -> c(B) B / |B|."""
        B = np.atleast_1d(np.asarray(B, dtype=float))
        r = np.linalg.norm(B)
        return B * 0.0 if r == 0 else self.c_of(B) * B / r

    def to_rows(self):
        for k, u in enumerate(self.directions):
            for s, c in zip(self.s, self.c[k]):
                yield (*u, s, c)


def rectifying_map(H: Homeomorphism, z, s_max: float = 10.0, points: int = 4001, directions=None,
                   h: float = 1e-5) -> RectifyingMap:
    """c(B) = integral along the radial line of Det D rho(t u)(z) dt (trapezoid rule)."""
    z = np.atleast_1d(np.asarray(z, dtype=float))
    n = len(z)
    if directions is None:
        if n != 1:
            raise ValidationError("directions are required in dimension > 1")
        directions = np.array([[1.0], [-1.0]])
    dirs = np.array(directions, dtype=float, ndmin=2)
    dirs = dirs / np.linalg.norm(dirs, axis=1, keepdims=True)
    if points < 2 or s_max <= 0:
        raise ValidationError("need at least two radial points and s_max > 0")
    s = np.linspace(0.0, s_max, points)
    c = np.zeros((len(dirs), points))
    for k, u in enumerate(dirs):
        det = np.array([rn_translation_field(H, t * u, z, h) for t in s])
        c[k, 1:] = np.cumsum(0.5 * (det[1:] + det[:-1]) * np.diff(s))
        bad = np.nonzero(np.diff(c[k]) < 0)[0]
        if len(bad):
            raise NonMonotoneError(f"c decreases along radial line {k}", line=k, direction=u.tolist(),
                                   first_index=int(bad[0]))
    return RectifyingMap(z, dirs, s, c)


def ks_uniform(samples) -> float:
    """Kolmogorov-Smirnov distance of a sample to U[0, 1]."""
    from scipy.stats import kstest

    return float(kstest(np.asarray(samples, dtype=float), "uniform").statistic)
