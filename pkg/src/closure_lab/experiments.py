"""One runner per experiment kind.

A runner computes everything in memory and returns an :class:`Outcome`; the
driver writes artifacts only afterwards, so a validation error never leaves
partial output behind.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .closure import FlowSpec, RenormSchedule, conjugate, iterate_flow_compare, renormalize
from .config import ExperimentConfig
from .errors import ValidationError
from .grading import components_csv, decompose, grading_check, ladder, ladder_csv, leading_limit
from .groups import Contraction, Mobius, SphereMetric, ghys_tower, load_generators, pseudo_solvable_verdict
from .jets import Jet, NormSpec, VFJet, cnorm, loads
from .measures import EmpiricalMeasure, local_dimension, quasi_volume_constant, random_loxodromics, sample_sphere
from .report import fmt, svg_histogram, svg_polyline
from .rigidity import Conjugacy, conjugacy_residual, recover_mobius, synchronized_pair

__all__ = ["Outcome", "RUNNERS", "run_experiment"]


@dataclass
class Outcome:
    results: dict
    tables: dict = field(default_factory=dict)  # name -> CSV text
    plots: dict = field(default_factory=dict)  # name -> SVG text


def _csv(header, rows) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(fmt(v) if isinstance(v, (float, np.floating)) else str(v) for v in row))
    return "\n".join(lines) + "\n"


def _require(cfg: ExperimentConfig, key: str):
    v = cfg.get(key)
    if v is None:
        raise ValidationError(f"{key} is required")
    return v


def _read(path):
    if not path.is_file():
        raise ValidationError(f"input file {path} not found")
    return path.read_text()


def _norm_spec(cfg, order=0) -> NormSpec:
    dom = cfg.get("norm.domain")
    if dom is not None:
        if len(dom) % 2:
            raise ValidationError("norm.domain needs lo,hi pairs")
        dom = tuple(zip(dom[::2], dom[1::2]))
    return NormSpec(order, dom, cfg.get("norm.grid_per_axis"))


def _sub_seeds(seed: int, count: int) -> list:
    return [int(s.generate_state(1, np.uint64)[0]) for s in np.random.SeedSequence(seed).spawn(count)]


# ---------------------------------------------------------------------------


def run_tower(cfg: ExperimentConfig) -> Outcome:
    path = _require(cfg, "tower.generators")
    _read(path)
    gens = load_generators(path)
    depth = cfg.get("tower.depth")
    if depth < 0 or cfg.get("tower.cap") < 1 or cfg.get("tower.max_level_size") < 0:
        raise ValidationError("tower.depth, tower.cap and tower.max_level_size must be non-negative")
    metric = SphereMetric(cfg.get("tower.mesh_subdivisions"))
    tower = ghys_tower(gens, depth, metric, cfg.get("tower.dedup_tol"), cfg.get("tower.cap"),
                       max_level_size=cfg.get("tower.max_level_size") or None)
    verdict = pseudo_solvable_verdict(tower, cfg.get("tower.tol"))
    summary = tower.summary()
    results = {
        "verdict": str(verdict),
        "level": verdict.level,
        "certified": verdict.certified,
        "sizes": tower.sizes(),
        "levels": summary,
    }
    table = _csv(["level", "size", "raw", "identities", "max_displacement", "min_displacement", "pruned"],
                 [[r["level"], r["size"], r["raw"], r["identities"], r["max_displacement"],
                   r["min_displacement"], int(r["pruned"])] for r in summary])
    js = np.arange(len(summary))
    plot = svg_polyline({"max displacement": (js, [r["max_displacement"] for r in summary])},
                        "Ghys tower", "level", "displacement")
    return Outcome(results, {"levels": table}, {"tower": plot})


def run_renorm(cfg: ExperimentConfig) -> Outcome:
    g = loads(_read(_require(cfg, "renorm.jet")))
    if not isinstance(g, Jet):
        raise ValidationError("renorm.jet must hold a 'jet' (not a vector field)")
    F = Contraction(tuple(_require(cfg, "renorm.eigenvalues")), resonance_degree=max(g.degree, 2))
    sched = RenormSchedule(
        order=cfg.get("renorm.order"),
        delta_seq=tuple(cfg.get("renorm.delta")),
        threshold_factor=cfg.get("renorm.threshold_factor"),
        norm_constant=cfg.get("renorm.norm_constant"),
        k_max=cfg.get("renorm.k_max"),
        threshold=cfg.get("renorm.threshold"),
        synthetic_remainder=cfg.get("renorm.synthetic_remainder"),
        norm_spec=_norm_spec(cfg),
        tail_length=cfg.get("renorm.tail_length"),
    )
    rep = renormalize(g, F, sched, cfg.get("renorm.index"))
    results = rep.to_dict()
    h_rows = [[l + 1, *alpha, v] for (l, alpha), v in rep.h.terms().items()]
    tables = {"h": _csv(["component_l", *[f"alpha{i + 1}" for i in range(g.dim)], "coeff"], h_rows)}
    if rep.case == "Case1":
        spec = sched.norm_spec.with_order(0)
        seq = [cnorm(conjugate(g, F, k), True, spec) for k in range(rep.k + 1)]
    else:
        seq = rep.displacement_tail
        tables["tail"] = _csv(["step", "displacement"], [[rep.k + j, v] for j, v in enumerate(seq)])
    tables["displacements"] = _csv(["k", "displacement"], [[k, v] for k, v in enumerate(seq)])
    plot = svg_polyline({"log10 displacement": (np.arange(len(seq)), np.log10(np.maximum(seq, 1e-300)))},
                        f"renormalization ({rep.case})", "k", "log10 ||P_k - id||")
    return Outcome(results, tables, {"displacement": plot})


def run_grade(cfg: ExperimentConfig) -> Outcome:
    Y = loads(_read(_require(cfg, "grade.field")))
    if not isinstance(Y, VFJet):
        raise ValidationError("grade.field must hold a 'vfjet'")
    lam = Contraction(tuple(_require(cfg, "grade.eigenvalues")), resonance_degree=max(Y.degree, 2))
    comps = decompose(Y, lam)
    if not comps:
        raise ValidationError("grade.field is the zero field")
    cutoff = cfg.get("grade.cutoff") or comps[-1].multiplier
    lad = ladder(lam, cutoff)
    lead = leading_limit(Y, lam, cfg.get("grade.tol"), cfg.get("grade.k"))
    checks = []
    for i, X in enumerate(comps):
        for j, Z in enumerate(comps):
            if i < j:
                v = grading_check(X, Z, lam)
                checks.append([X.index, Z.index, X.multiplier, Z.multiplier, int(v.product_law),
                               int(v.index_bound), int(v.vacuous)])
    results = {
        "components": [{"multiplier": c.multiplier, "index": c.index, "monomials": len(c.field.terms())}
                       for c in comps],
        "leading_multiplier": lead.multiplier,
        "leading_index": lead.index,
        "tail_ratio": lead.tail_ratio,
        "tail_bound": lead.tail_bound,
        "tail_certified": lead.certified,
        "ladder_certified": lad.certified,
        "ladder_degree_cap": lad.degree_cap,
        "ladder_values": lad.values,
        "product_law": all(r[4] for r in checks),
        "index_bound": all(r[5] for r in checks),
        "pairs_checked": len(checks),
    }
    tables = {
        "ladder": ladder_csv(lad),
        "components": components_csv(comps, Y.dim),
        "checks": _csv(["index1", "index2", "multiplier1", "multiplier2", "product_law", "index_bound",
                        "vacuous"], checks),
    }
    plot = svg_polyline({"multiplier": (np.arange(1, len(lad.values) + 1), np.log10(lad.values))},
                        "multiplier ladder", "index", "log10 m")
    return Outcome(results, tables, {"ladder": plot})


def run_flow(cfg: ExperimentConfig) -> Outcome:
    path = cfg.get("flow.field")
    X = loads(_read(path)) if path is not None else VFJet.from_terms(1, 1, {(0, (1,)): 1.0})
    if not isinstance(X, VFJet):
        raise ValidationError("flow.field must hold a 'vfjet'")
    Cs = cfg.get("flow.C")
    if not Cs or any(c <= 0 for c in Cs):
        raise ValidationError("flow.C must list positive step sizes")
    grid = cfg.get("flow.grid")
    dom = cfg.get("flow.domain")
    if len(grid) % 2 or (dom is not None and len(dom) % 2):
        raise ValidationError("flow.grid and flow.domain need lo,hi pairs")
    spec = FlowSpec(cfg.get("flow.t"), cfg.get("flow.steps") or None, tuple(zip(grid[::2], grid[1::2])),
                    cfg.get("flow.grid_points"), tuple(zip(dom[::2], dom[1::2])) if dom else None)
    ident = Jet.identity(X.dim, X.degree).coeffs
    errs = []
    for C in Cs:
        h = Jet(X.dim, X.degree, ident + C * X.coeffs)
        errs.append(iterate_flow_compare(X, h, C, spec.t, spec))
    slope = float(np.polyfit(np.log(Cs), np.log(errs), 1)[0]) if len(Cs) > 1 and min(errs) > 0 else None
    results = {"C": list(Cs), "errors": errs, "slope": slope, "t": spec.t}
    table = _csv(["C", "N", "sup_error"], [[C, math.floor(spec.t / C + 1e-9), e] for C, e in zip(Cs, errs)])
    plot = svg_polyline({"sup error": (np.log10(Cs), np.log10(np.maximum(errs, 1e-300)))},
                        "iterate vs Euler flow", "log10 C", "log10 error")
    return Outcome(results, {"errors": table}, {"errors": plot})


def run_measure(cfg: ExperimentConfig) -> Outcome:
    s_mu, s_g, s_probe = _sub_seeds(cfg.seed, 3)
    if cfg.get("measure.input") is not None:
        mu = EmpiricalMeasure.from_csv(_require(cfg, "measure.input"))
    else:
        mu = sample_sphere(cfg.get("measure.samples"), s_mu, cfg.threads)
    boost = cfg.get("measure.boost")
    if len(boost) != 2 or not 0 < boost[0] <= boost[1]:
        raise ValidationError("measure.boost must be lo,hi with 0 < lo <= hi")
    gens = random_loxodromics(cfg.get("measure.elements"), s_g, tuple(boost))
    qv = quasi_volume_constant(mu, gens, cfg.get("measure.d"), cfg.get("measure.base"),
                               cfg.get("measure.subdivisions"), cfg.get("measure.min_mass"),
                               cfg.get("measure.c_max"), cfg.threads)
    lo, hi = cfg.get("measure.radii")
    radii = np.geomspace(lo, hi, cfg.get("measure.radii_count"))
    probes = sample_sphere(cfg.get("measure.probes"), s_probe).points
    dim = local_dimension(mu, probes, radii)
    ok = dim.slopes[~dim.skipped]
    results = {
        "quasi_volume": qv.to_dict(),
        "C": qv.constant,
        "violation": qv.violation,
        "local_dimension": {
            "slopes": dim.slopes.tolist(),
            "skipped": dim.skipped.tolist(),
            "radii": radii.tolist(),
            "mean": float(ok.mean()) if len(ok) else None,
        },
        "atoms": len(mu),
    }
    tables = {
        "ratios": _csv(["element", "ratio_min", "ratio_max", "cells_used", "cells_excluded"],
                       [[i, a, b, u, e] for i, (a, b, u, e) in
                        enumerate(zip(qv.ratio_min, qv.ratio_max, qv.cells_used, qv.excluded))]),
        "slopes": _csv(["probe", "x", "y", "z", "slope", "skipped"],
                       [[i, *p, s, int(k)] for i, (p, s, k) in enumerate(zip(probes, dim.slopes, dim.skipped))]),
    }
    counts, edges = np.histogram(ok, bins=10) if len(ok) else (np.zeros(1), np.array([0.0, 1.0]))
    return Outcome(results, tables, {"slopes": svg_histogram(counts, edges, "local dimension slopes")})


def run_oe(cfg: ExperimentConfig) -> Outcome:
    s = cfg.get("oe.scale")
    if s <= 0:
        raise ValidationError("oe.scale must be positive")
    count = cfg.get("oe.count")
    if count < 4:
        raise ValidationError("oe.count must be >= 4")
    H = Conjugacy.from_jet(Jet.from_terms(1, 1, {(0, (1,)): s}))
    h2 = [Jet.from_terms(1, 1, {(0, (1,)): 1.0, (0, (0,)): 2.0**-i}) for i in range(1, count + 1)]
    pair = synchronized_pair(h2, H, NormSpec(), cfg.get("oe.tol"))
    ts, xs = cfg.get("oe.t"), np.array(cfg.get("oe.x"))[:, None]
    steps = cfg.get("oe.steps")
    resid = conjugacy_residual(H, pair, ts, xs, steps)
    forced = conjugacy_residual(H, pair, ts, xs, steps, sigma=1.0)
    results = {"sigma": pair.sigma, "residual": resid, "residual_sigma_1": forced, "pair": pair.to_dict()}
    n = cfg.get("oe.recover_samples")
    if n > 0:
        rng = np.random.default_rng(cfg.seed)
        worst, worst_resid = 0.0, 0.0
        for _ in range(n):
            M = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
            m = Mobius.from_matrix(M)
            zs = rng.standard_normal(6) + 1j * rng.standard_normal(6)
            r, res = recover_mobius([(z, m.apply_z(z)) for z in zs])
            A, B = r.matrix, m.matrix
            worst = max(worst, float(min(np.abs(A - B).max(), np.abs(A + B).max())))
            worst_resid = max(worst_resid, res)
        results["recovery_max_error"] = worst
        results["recovery_max_residual"] = worst_resid
    table = _csv(["i", "c1", "c2", "sigma"], [[i + 1, a, b, c] for i, (a, b, c) in
                                                enumerate(zip(pair.c1, pair.c2, pair.sigma_seq))])
    plot = svg_polyline({"sigma_i": (np.arange(1, len(pair.sigma_seq) + 1), pair.sigma_seq)},
                        "norm ratio", "i", "sigma")
    return Outcome(results, {"sigma": table}, {"sigma": plot})


RUNNERS = {
    "tower": run_tower,
    "renorm": run_renorm,
    "grade": run_grade,
    "flow-compare": run_flow,
    "measure": run_measure,
    "oe-check": run_oe,
}


def run_experiment(cfg: ExperimentConfig) -> Outcome:
    return RUNNERS[cfg.kind](cfg)
