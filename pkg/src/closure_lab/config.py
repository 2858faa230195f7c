"""Flat ``section.key = value`` experiment configs.

Each experiment kind declares its keys with types and defaults; anything
else in the file is rejected.  ``experiment.seed`` is required whenever the
run draws random numbers.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

from .errors import ValidationError

__all__ = ["Key", "SCHEMA", "KINDS", "ExperimentConfig", "parse_config", "load_config", "list_experiments"]


@dataclass(frozen=True)
class Key:
    type: str  # int | float | str | bool | floats | path
    default: object
    help: str = ""


COMMON = {
    "experiment.kind": Key("str", None, "one of the experiment kinds"),
    "experiment.seed": Key("int", None, "64-bit seed; required for stochastic kinds"),
    "experiment.output": Key("path", None, "output directory (default: <config stem>_out next to the config)"),
    "experiment.threads": Key("int", 1, "worker threads (CLOSURE_LAB_THREADS overrides)"),
    "experiment.plots": Key("bool", False, "also write plots/*.svg"),
}

NORM = {
    "norm.grid_per_axis": Key("int", 33, "grid nodes per axis (odd)"),
    "norm.domain": Key("floats", None, "box as lo,hi (default [-1,1] on every axis)"),
}

SCHEMA = {
    "tower": {
        "tower.generators": Key("path", None, "generator file: mobius/rotation lines"),
        "tower.depth": Key("int", 3, "number of commutator levels"),
        "tower.tol": Key("float", 1e-9, "identity tolerance for the verdict"),
        "tower.dedup_tol": Key("float", 1e-14, "duplicate tolerance within a level"),
        "tower.cap": Key("int", 250_000, "max raw commutators per level"),
        "tower.max_level_size": Key("int", 0, "keep only this many members per level (0 = all)"),
        "tower.mesh_subdivisions": Key("int", 3, "icosphere subdivisions of the displacement mesh"),
    },
    "renorm": {
        "renorm.jet": Key("path", None, "jet text file for g"),
        "renorm.eigenvalues": Key("floats", None, "contraction spectrum, increasing"),
        "renorm.order": Key("int", 0, "norm order r"),
        "renorm.delta": Key("floats", [1e-12], "delta sequence"),
        "renorm.index": Key("int", 0, "which delta of the sequence applies"),
        "renorm.threshold_factor": Key("float", 10.0, "threshold = factor * max(delta, C delta)"),
        "renorm.threshold": Key("float", None, "explicit threshold (overrides the factor rule)"),
        "renorm.norm_constant": Key("float", None, "norm-equivalence constant (computed if unset)"),
        "renorm.k_max": Key("int", 200, "largest conjugation power tried"),
        "renorm.synthetic_remainder": Key("float", 0.0, "injected remainder bound"),
        "renorm.tail_length": Key("int", 20, "Case 2 displacement tail length"),
        **NORM,
    },
    "grade": {
        "grade.field": Key("path", None, "vfjet text file for Y"),
        "grade.eigenvalues": Key("floats", None, "contraction spectrum, increasing"),
        "grade.cutoff": Key("float", None, "ladder cutoff (default: smallest multiplier of Y)"),
        "grade.k": Key("int", 10, "renormalized pullback power for the tail certificate"),
        "grade.tol": Key("float", 1e-12, "tail certificate slack"),
    },
    "flow-compare": {
        "flow.field": Key("path", None, "vfjet text file for X (default: x d/dx on R)"),
        "flow.C": Key("floats", [1e-2, 1e-3, 1e-4, 1e-5], "step sizes C; h_C = id + C X"),
        "flow.t": Key("float", 1.0, "flow time"),
        "flow.grid": Key("floats", [0.0, 0.5], "comparison box lo,hi"),
        "flow.grid_points": Key("int", 21, "grid points per axis"),
        "flow.steps": Key("int", 0, "Euler steps (0 = automatic, 100 t / C)"),
        "flow.domain": Key("floats", None, "escape box lo,hi (default: none)"),
    },
    "measure": {
        "measure.input": Key("path", None, "measure CSV x,y,z,weight (default: round sample)"),
        "measure.samples": Key("int", 100_000, "round-measure sample size"),
        "measure.elements": Key("int", 50, "random loxodromic elements"),
        "measure.boost": Key("floats", [0.05, 0.3], "rapidity range of the loxodromics"),
        "measure.d": Key("float", 2.0, "quasi-volume exponent"),
        "measure.base": Key("str", "conformal", "conformal or determinant"),
        "measure.subdivisions": Key("int", 0, "icosphere subdivisions of the partition"),
        "measure.min_mass": Key("float", 1e-3, "cells lighter than this on both sides are excluded"),
        "measure.c_max": Key("float", 2.0, "violation threshold for C"),
        "measure.probes": Key("int", 20, "local-dimension probe points"),
        "measure.radii": Key("floats", [0.06, 2.0], "radius range lo,hi"),
        "measure.radii_count": Key("int", 8, "radii in the ladder"),
    },
    "oe-check": {
        "oe.scale": Key("float", 2.0, "H(x) = scale x on R"),
        "oe.count": Key("int", 12, "length of the sequence h2_i = x + 2^-i"),
        "oe.t": Key("floats", [0.0, 0.25, 0.5], "flow times"),
        "oe.x": Key("floats", [-0.5, -0.25, 0.0, 0.25, 0.5], "base points"),
        "oe.steps": Key("int", 10_000, "Euler steps per flow"),
        "oe.tol": Key("float", 1e-8, "Cauchy tolerance"),
        "oe.recover_samples": Key("int", 100, "random Möbius maps for the recovery check (needs a seed)"),
    },
}

KINDS = tuple(SCHEMA)


def _stochastic(kind: str, values: dict) -> bool:
    if kind == "measure":
        return True
    if kind == "oe-check":
        return values.get("oe.recover_samples", SCHEMA[kind]["oe.recover_samples"].default) > 0
    return False


def _convert(key: str, spec: Key, raw: str, base: Path):
    try:
        if spec.type == "int":
            return int(raw, 0)
        if spec.type == "float":
            return float(raw)
        if spec.type == "bool":
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if spec.type == "floats":
            return [float(v) for v in raw.replace(",", " ").split()]
        if spec.type == "path":
            p = Path(raw).expanduser()
            return p if p.is_absolute() else (base / p)
        return raw
    except ValueError as exc:
        raise ValidationError(f"{key}: cannot read {raw!r} as {spec.type}") from exc


@dataclass
class ExperimentConfig:
    kind: str
    values: dict
    seed: int | None
    output: Path
    threads: int
    plots: bool
    source: Path | None = None
    raw: dict | None = None

    def get(self, key: str):
        return self.values[key]

    def echo(self) -> dict:
        """Config values as recorded in the report (thread count excluded)."""
        out = {}
        for k, v in self.values.items():
            if k in ("experiment.threads", "experiment.output"):
                continue
            out[k] = (self.raw or {}).get(k, str(v)) if isinstance(v, Path) else v
        return out


def parse_config(text: str, base: Path = Path("."), name: str = "config") -> ExperimentConfig:
    raw = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"line {lineno}: expected 'section.key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if "." not in key:
            raise ValidationError(f"line {lineno}: key {key!r} must have the form section.key")
        if key in raw:
            raise ValidationError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = value
    kind = raw.get("experiment.kind")
    if kind is None:
        raise ValidationError("experiment.kind is required")
    if kind not in SCHEMA:
        raise ValidationError(f"unknown experiment kind {kind!r}; expected one of {', '.join(KINDS)}")
    schema = {**COMMON, **SCHEMA[kind]}
    unknown = sorted(set(raw) - set(schema))
    if unknown:
        raise ValidationError(f"unknown keys for {kind}: {', '.join(unknown)}")
    values = {}
    for key, spec in schema.items():
        values[key] = _convert(key, spec, raw[key], base) if key in raw else spec.default
    seed = values["experiment.seed"]
    if seed is not None and not 0 <= seed < 2**64:
        raise ValidationError("experiment.seed must be a 64-bit unsigned integer")
    if seed is None and _stochastic(kind, values):
        raise ValidationError(f"experiment.seed is required for {kind}")
    threads = values["experiment.threads"]
    env = os.environ.get("CLOSURE_LAB_THREADS")
    if env:
        try:
            threads = int(env)
        except ValueError as exc:
            raise ValidationError(f"CLOSURE_LAB_THREADS={env!r} is not an integer") from exc
    if threads < 1:
        raise ValidationError("threads must be >= 1")
    output = values["experiment.output"] or (base / f"{name}_out")
    return ExperimentConfig(kind, values, seed, Path(output), threads, values["experiment.plots"], raw=raw)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"config file {path} not found")
    cfg = parse_config(path.read_text(), path.resolve().parent, path.stem)
    cfg.source = path
    return cfg


def _show(v) -> str:
    if v is None:
        return "<unset>"
    if isinstance(v, list):
        return ",".join(repr(x) for x in v)
    return repr(v) if isinstance(v, float) else str(v)


def list_experiments() -> str:
    """One line per kind: the kind, then every key=default it accepts."""
    lines = []
    for kind in KINDS:
        keys = {**COMMON, **SCHEMA[kind]}
        parts = [f"{k}={_show(spec.default)}" for k, spec in keys.items()]
        seed = "seed required" if _stochastic(kind, {}) else "deterministic"
        lines.append(f"{kind} ({seed}): " + " ".join(parts))
    return "\n".join(lines) + "\n"
