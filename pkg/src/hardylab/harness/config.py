"""Experiment configuration: suite defaults, JSON schema and semantic checks."""

import copy
import json
import math
from importlib import resources

import jsonschema

SUITES = ("hardy", "multiplier", "extension", "remez", "riesz", "sequences", "geometry-checks")
ALIASES = {"geometry": "geometry-checks"}
N_DIM = 2


class ConfigError(ValueError):
    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n" + "\n".join(f"  - {p}" for p in self.problems))


def _bump(inner=1.2, outer=1.8):
    return {"kind": "bump", "center": [0.0, 0.0], "inner": inner, "outer": outer}


def _dist(offset):
    return {"kind": "distance_power", "alpha_offset": offset}


ZERO_TRACE_FAMILY = [
    {"name": "dist_a+0.1_bump", "field": {"kind": "product", "factors": [_dist(0.1), _bump()]}},
    {"name": "dist_a+0.5_bump", "field": {"kind": "product", "factors": [_dist(0.5), _bump()]}},
    {"name": "dist_a1_bump", "field": {"kind": "product", "factors": [{"kind": "distance_power", "alpha": 1.0},
                                                                      _bump()]}},
    {"name": "dist_a+0.3_sin_bump", "field": {"kind": "product", "factors": [
        _dist(0.3), {"kind": "sinusoid", "freq": [0.7, 0.4], "phase": 0.3}, _bump()]}},
    {"name": "dist_a+0.3_poly_bump", "field": {"kind": "product", "factors": [
        _dist(0.3), {"kind": "polynomial", "terms": [[0, 0, 1.0], [1, 0, 0.5], [0, 2, -0.8]]}, _bump()]}},
]

SMOOTH_FAMILY = [
    {"name": "sin_bump", "field": {"kind": "product", "factors": [
        {"kind": "sinusoid", "freq": [1.0, 0.5], "phase": 0.2}, _bump()]}},
    {"name": "poly_bump", "field": {"kind": "product", "factors": [
        {"kind": "polynomial", "terms": [[2, 0, 1.0], [0, 1, 1.0], [0, 0, 0.3]]}, _bump()]}},
]

# small scales keep Q(x, t) well inside the set's extent; four octaves
RIESZ_T = [2.0**-i for i in range(3, 8)]

BASE = {
    "seed": 0,
    "out": "results",
    "workers": 1,
    "fractal": {"family": "snowflake", "bend_angle": math.pi / 3, "depth": 9},
    "whitney": {"max_level": None, "level_offset": 0, "box": [-2.0, 2.0, -2.0, 2.0]},
    "quadrature": {"grid_cells": 32, "grid_order": 2, "j_max": 6, "local_order": 8, "hardy_order": 3,
                   "gagliardo_cells": 16, "gagliardo_theta": 32, "gagliardo_shells": 16},
    "tolerances": {},
    "samples": {},
    "delta": 16000.0,
}

SUITE_DEFAULTS = {
    "hardy": {
        "depths": [7, 9],
        "params": [[0.6, 2, 2], [0.8, 2, 2], [0.6, 3, 2]],
        "family": ZERO_TRACE_FAMILY[:3],
        "tolerances": {"stability": 0.25, "growth_slope": 0.15},
        "samples": {"growth_first_level": 3},
    },
    "multiplier": {
        "depths": [8, 9],
        "params": [[0.6, 2, 2]],
        "family": ZERO_TRACE_FAMILY[:3],
        "tolerances": {"stability": 0.25, "interior": 1e-6},
        "quadrature": {"j_max": 5},
    },
    "extension": {
        "depths": [8, 9, 10],
        "params": [[0.6, 2, 2]],
        "family": SMOOTH_FAMILY,
        "whitney": {"box": [-4.0, 4.0, -4.0, 4.0], "level_offset": 0},
        "tolerances": {"stability": 0.25, "zero_trace": 1e-6, "polynomial": 1e-7},
        "samples": {"points": 10000, "refeed": 1},
        "quadrature": {"j_max": 5},
    },
    "remez": {
        "fractal": {"family": "koch", "depth": 9},
        "depths": [9, 10],
        "tolerances": {"stability": 0.2},
        "samples": {"triples": 1000, "R": 4.0, "u": 2.0, "r": 2.0, "adversarial_fraction": 0.1},
    },
    "riesz": {
        "riesz": [
            {"family": "segment", "depth": 16, "omega": 0.8, "r": 2.0, "t": RIESZ_T},
            {"family": "koch", "depth": 10, "omega": 0.9, "r": 2.0, "t": RIESZ_T},
        ],
        "tolerances": {"slope": 0.1},
        "samples": {"rel_depth": 7},
    },
    "sequences": {
        "fractal": {"family": "koch", "depth": 9},
        "depths": [9, 10],
        "tolerances": {"geometric": 0.01, "cross_seed": 3.0, "stability": 0.2},
        "samples": {"sequences": 10000, "length": 30, "supports": 1000, "gamma": 5.0, "rh_max_level": 7},
    },
    "geometry-checks": {
        "fractal": {"family": "koch", "depth": 9},
        "depths": [9, 10],
        "whitney": {"max_level": 10},
        "tolerances": {"dimension": 1e-10, "regularity": 0.2, "porosity_steps": 1.0},
        "samples": {"centers": 400, "cubes": 200, "porous_pairs": 200, "porosity_grid": 33},
    },
}


def _merge(base, extra):
    out = copy.deepcopy(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def schema():
    return json.loads(resources.files("hardylab.harness").joinpath("schema.json").read_text())


def resolve(user, overrides=None):
    """Suite defaults, then the user config, then CLI overrides; validated."""
    user = dict(user or {})
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    suite = overrides.get("suite", user.get("suite"))
    suite = ALIASES.get(suite, suite)
    if suite is not None:
        user["suite"] = suite
        overrides.pop("suite", None)
    problems = [f"{'/'.join(map(str, e.absolute_path)) or '<root>'}: {e.message}"
                for e in jsonschema.Draft202012Validator(schema()).iter_errors(user)]
    if problems:
        raise ConfigError(problems)
    cfg = _merge(_merge(BASE, SUITE_DEFAULTS[suite]), user)
    depth = overrides.pop("depth", None)
    if depth is not None:
        cfg["fractal"]["depth"] = depth
        cfg["depths"] = [depth]
    cfg = _merge(cfg, overrides)
    check(cfg)
    return cfg


def check(cfg):
    """Module preconditions for every parameter combination; raises with all problems."""
    problems = [f"{'/'.join(map(str, e.absolute_path)) or '<root>'}: {e.message}"
                for e in jsonschema.Draft202012Validator(schema()).iter_errors(cfg)]
    suite = cfg.get("suite")
    fr = cfg.get("fractal", {})
    d = _dimension(fr) if "bend_angle" in fr else None
    for i, triple in enumerate(cfg.get("params", [])):
        s, p, q = triple
        if s <= 0:
            problems.append(f"params/{i}: s must be positive")
        if not 1 < p < math.inf:
            problems.append(f"params/{i}: p must lie in (1, inf)")
        if q < 1:
            problems.append(f"params/{i}: q must be >= 1")
        if suite in ("hardy", "multiplier") and d is not None and s * p <= N_DIM - d:
            problems.append(f"params/{i}: s = {s} does not exceed (n - d)/p = {(N_DIM - d) / p:.4f}")
    for i, rz in enumerate(cfg.get("riesz", []) if suite == "riesz" else []):
        dd = 1.0 if rz["family"] == "segment" else _dimension({"bend_angle": rz.get("bend_angle", math.pi / 3)})
        if rz["omega"] * rz["r"] <= N_DIM - dd:
            problems.append(f"riesz/{i}: omega * r must exceed n - d = {N_DIM - dd:.4f}")
    box = cfg.get("whitney", {}).get("box", [])
    if len(box) == 4 and not (box[0] < box[1] and box[2] < box[3]):
        problems.append("whitney/box: degenerate box")
    if suite in ("hardy", "multiplier", "extension") and fr.get("family") != "snowflake":
        problems.append(f"fractal/family: suite {suite} needs the snowflake domain")
    if problems:
        raise ConfigError(problems)


def _dimension(fr):
    theta = fr.get("bend_angle", math.pi / 3)
    r = 1.0 / (2.0 * (1.0 + math.cos(theta)))
    return math.log(4) / math.log(1 / r)


def load(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as err:
        raise ConfigError([f"{path}: {err}"]) from err


def config_hash(cfg):
    from hardylab.harness.cache import content_hash

    return content_hash({k: v for k, v in cfg.items() if k not in ("out", "workers")})
