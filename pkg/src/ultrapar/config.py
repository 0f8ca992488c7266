"""JSON run configuration: parsing, defaults and validation.

A configuration is one JSON object.  Every key is optional; missing keys take
the defaults below (prototype structure on [-1,1]^2 x [0,1]).

    {
      "structure":   {"preset": "prototype"} | {"blocks": [1, 1], "B_blocks": [[[1]]], "A0": [[1]], "Lambda": 2},
      "domain":      {"lower": [-1, -1, 0], "upper": [1, 1, 1]},
      "grid":        {"shape": [33, 33, 33], "levels": [33, 65]},
      "coefficient": {"name": "vmo_loglog", "params": {}},
      "sources":     {"g": {"center": [...], "sigma": [...], "amplitude": 1}, "f": [{...}]},  (default: bumps near the domain middle)
      "data":        "zero" | "affine",
      "solver":      {"method": "forward" | "frozen", "dt": null, "cfl_safety": 0.9},
      "checks":      ["caccioppoli", "sobolev", ...],
      "harness":     {"members": [...], "gains": [0.1, 0.2], "morrey": [[2.2, 1]], "decay_p": 2.2,
                      "mu": null, "z0": [0, 0, 0.5], "quad_n": 8},
      "kernel":      {"points": [[0, 0, 1]], "zeta": null, "n_paths": 100000, "n_steps": 1000},
      "sweep":       {"levels": [[17, 33], [33, 65]]},
      "seed":        0
    }
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .coefficients import PRESETS
from .errors import ConfigParse, StructureError, UnknownCheck
from .harness import CHECKS, MEMBERS, SuiteConfig
from .solver import SolverConfig
from .structure import KolmogorovStructure, prototype, structure_from_dict, three_block

MIN_NODES = 8
STRUCTURE_PRESETS = {"prototype": prototype, "three_block": three_block}

DEFAULTS = {
    "structure": {"preset": "prototype"},
    "domain": None,
    "grid": {"shape": None, "levels": [33, 65]},
    "coefficient": {"name": "vmo_loglog", "params": {}},
    "sources": None,
    "data": "zero",
    "solver": {"method": "forward", "dt": None, "cfl_safety": 0.9},
    "checks": list(CHECKS),
    "harness": {"members": list(MEMBERS), "gains": [0.1, 0.2], "morrey": [[2.2, 1.0]], "decay_p": 2.2,
                "mu": None, "z0": None, "quad_n": 8},
    "kernel": {"points": [[0.0, 0.0, 1.0], [1.0, 0.0, 1.0]], "zeta": None, "n_paths": 100_000, "n_steps": 1000},
    "sweep": {"levels": [[17, 33], [33, 65]]},
    "seed": 0,
}


# replaced wholesale when given, never merged key by key
ATOMIC = ("structure", "sources")


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k not in ATOMIC:
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


@dataclass
class RunConfig:
    raw: dict
    structure: KolmogorovStructure
    lower: np.ndarray
    upper: np.ndarray
    shape: tuple
    levels: tuple
    checks: tuple
    seed: int
    extra: dict = field(default_factory=dict)

    def resolved(self) -> dict:
        """The full configuration with defaults filled in, as embedded in every report."""
        d = copy.deepcopy(self.raw)
        d["structure"] = self.structure.to_dict()
        d["domain"] = {"lower": self.lower.tolist(), "upper": self.upper.tolist()}
        d["grid"] = {"shape": list(self.shape), "levels": list(self.levels)}
        return d

    def solver_config(self) -> SolverConfig:
        sv = self.raw["solver"]
        return SolverConfig(dt=sv.get("dt"), cfl_safety=float(sv.get("cfl_safety", 0.9)))

    def suite_config(self, levels=None, threads: int = 1) -> SuiteConfig:
        h = self.raw["harness"]
        z0 = h.get("z0")
        if z0 is None:
            z0 = 0.5 * (self.lower + self.upper)
        src = self.raw["sources"]
        return SuiteConfig(
            structure=self.structure, lower=tuple(self.lower), upper=tuple(self.upper),
            levels=tuple(levels or self.levels), z0=tuple(float(c) for c in z0),
            members=tuple(h["members"]), checks=self.checks, gains=tuple(h["gains"]),
            morrey=tuple(tuple(float(v) for v in pl) for pl in h["morrey"]), decay_p=float(h["decay_p"]),
            mu=h.get("mu"), g=src.get("g"), f=src.get("f"),
            coefficients={self.raw["coefficient"]["name"]: self.raw["coefficient"].get("params", {})},
            quad_n=int(h["quad_n"]), solver=self.solver_config(), threads=threads, seed=self.seed)


def default_sources(s: KolmogorovStructure, lower, upper) -> dict:
    """Gaussian bumps for g and each f_i, placed near the middle of the domain."""
    if s.dim == 3 and np.allclose(lower, [-1, -1, 0]) and np.allclose(upper, [1, 1, 1]):
        return {"g": {"center": [0.1, -0.1, 0.45], "sigma": [0.25, 0.25, 0.08], "amplitude": 1.0},
                "f": [{"center": [-0.15, 0.1, 0.5], "sigma": [0.25, 0.25, 0.08], "amplitude": 0.5}]}
    mid, span = 0.5 * (lower + upper), upper - lower
    sigma = np.concatenate([0.125 * span[:-1], [0.08 * span[-1]]]).tolist()
    shift = np.zeros(s.dim)
    shift[:-1] = 0.05 * span[:-1]
    return {"g": {"center": (mid - shift).tolist(), "sigma": sigma, "amplitude": 1.0},
            "f": [{"center": (mid + (i + 1) * shift).tolist(), "sigma": sigma, "amplitude": 0.5}
                  for i in range(s.m0)]}


def _structure(d: dict) -> KolmogorovStructure:
    if "preset" in d:
        if d["preset"] not in STRUCTURE_PRESETS:
            raise ConfigParse(f"unknown structure preset {d['preset']!r}; known: {sorted(STRUCTURE_PRESETS)}")
        return STRUCTURE_PRESETS[d["preset"]](float(d.get("Lambda", 2.0)))
    try:
        return structure_from_dict(d)
    except KeyError as e:
        raise ConfigParse(f"structure is missing key {e}") from e
    except StructureError as e:
        raise ConfigParse(f"invalid structure: {e}") from e


def parse_config(obj: dict) -> RunConfig:
    """Validate a configuration dict and fill in defaults; raises ConfigParse or UnknownCheck."""
    if not isinstance(obj, dict):
        raise ConfigParse("configuration must be a JSON object")
    unknown = set(obj) - set(DEFAULTS)
    if unknown:
        raise ConfigParse(f"unknown configuration keys {sorted(unknown)}")
    raw = _merge(DEFAULTS, obj)
    s = _structure(raw["structure"])

    dom = raw["domain"]
    if dom is None:
        lower = np.array([-1.0] * s.N + [0.0])
        upper = np.array([1.0] * s.N + [1.0])
    else:
        try:
            lower = np.asarray(dom["lower"], float)
            upper = np.asarray(dom["upper"], float)
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigParse(f"bad domain: {e}") from e
    if lower.shape != (s.dim,) or upper.shape != (s.dim,) or np.any(upper <= lower):
        raise ConfigParse(f"domain needs {s.dim} increasing bounds")

    grid = raw["grid"]
    shape = grid.get("shape") or [33] * s.dim
    levels = grid.get("levels") or [33, 65]
    try:
        shape = tuple(int(n) for n in shape)
        levels = tuple(int(n) for n in levels)
    except (TypeError, ValueError) as e:
        raise ConfigParse(f"bad grid sizes: {e}") from e
    if len(shape) != s.dim:
        raise ConfigParse(f"grid shape needs {s.dim} entries")
    if min(shape + levels) < MIN_NODES:
        raise ConfigParse(f"grid sizes must be >= {MIN_NODES} per axis")

    if raw["coefficient"].get("name") not in PRESETS:
        raise ConfigParse(f"unknown coefficient preset {raw['coefficient'].get('name')!r}; known: {sorted(PRESETS)}")
    if raw["data"] not in ("zero", "affine"):
        raise ConfigParse(f"data must be 'zero' or 'affine', got {raw['data']!r}")
    if raw["solver"].get("method", "forward") not in ("forward", "frozen"):
        raise ConfigParse("solver.method must be 'forward' or 'frozen'")
    if raw["sources"] is None:
        raw["sources"] = default_sources(s, lower, upper)
    if not isinstance(raw["sources"], dict):
        raise ConfigParse("sources must be an object with keys g and f")
    g = raw["sources"].get("g")
    f = raw["sources"].get("f")
    if f is not None and (not isinstance(f, list) or len(f) != s.m0):
        raise ConfigParse(f"source f needs a list of m0 = {s.m0} components")
    for src in ([g] if g else []) + (f or []):
        if not isinstance(src, dict) or not {"center", "sigma"} <= set(src):
            raise ConfigParse("every source needs center and sigma")
        if len(src["center"]) != s.dim or len(src["sigma"]) != s.dim:
            raise ConfigParse(f"source center and sigma need {s.dim} coordinates")

    checks = raw["checks"]
    if not isinstance(checks, list):
        raise ConfigParse("checks must be a list of names")
    for c in checks:
        if c not in CHECKS:
            raise UnknownCheck(f"unknown check {c!r}; known: {list(CHECKS)}")
    for m in raw["harness"]["members"]:
        if m not in MEMBERS:
            raise ConfigParse(f"unknown suite member {m!r}; known: {list(MEMBERS)}")
    seed = raw["seed"]
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ConfigParse("seed must be an integer")
    return RunConfig(raw, s, lower, upper, shape, levels, tuple(checks), seed)


def load_config(path) -> RunConfig:
    if path is None:
        return parse_config({})
    try:
        obj = json.loads(Path(path).read_text())
    except OSError as e:
        raise ConfigParse(f"cannot read {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigParse(f"{path} is not valid JSON: {e}") from e
    return parse_config(obj)
