"""Experiment suites: task planning, task execution and verdicts.

``plan(cfg)`` expands a resolved configuration into independent tasks (plain
JSON objects), ``execute(task)`` turns one task into a record, and
``judge(suite, records, tolerances)`` derives verdicts from records alone.
"""

import math
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq
from scipy.spatial import cKDTree

from hardylab import geometry, norms, operators
from hardylab.approx import basis_matrix, remez_ratio
from hardylab.dyadic import DyadicCube, PartitionOfUnity, PorousSearchError, near_boundary_family, porous_subcube, whitney
from hardylab.fields import Constant, field_from_spec
from hardylab.harness.report import number

_CTX = {"root": None}


def set_cache_root(root):
    _CTX["root"] = None if root is None else str(root)
    _fractal.cache_clear()
    _whitney.cache_clear()
    _partition.cache_clear()


# -- shared, memoized inputs ---------------------------------------------------------


@lru_cache(maxsize=4)
def _fractal(family, depth, bend=math.pi / 3):
    cfg = geometry.FractalConfig(family, bend, depth)
    root = _CTX["root"]
    out = geometry.build_from_config(cfg, root)
    return out, ((f"clouds/{cfg.content_hash()}.bin",) if root else ())


def _boundary(obj):
    return obj.boundary if isinstance(obj, geometry.DomainSpec) else obj


@lru_cache(maxsize=4)
def _whitney(family, depth, bend, box, level):
    obj, entries = _fractal(family, depth, bend)
    key = geometry.FractalConfig(family, bend, depth).content_hash()
    W = whitney(_boundary(obj), box, level, cache_dir=_CTX["root"], cache_key=key)
    if W.cache_file:
        entries = entries + (f"whitney/{W.cache_file}",)
    return W, entries


@lru_cache(maxsize=2)
def _partition(family, depth, bend, box, level):
    W, entries = _whitney(family, depth, bend, box, level)
    return PartitionOfUnity(W), entries


def _params(t):
    s, p, q = t["params"]
    return norms.SmoothnessParams(float(s), float(p), float(q))


def _grid(q, box):
    return norms.XGrid(tuple(box), q["grid_cells"], q["grid_order"])


def _level(cfg, depth):
    w = cfg["whitney"]
    return int(w["max_level"]) if w.get("max_level") is not None else depth + int(w.get("level_offset", 0))


# -- planning --------------------------------------------------------------------


def plan(cfg):
    tasks = _PLANNERS[cfg["suite"]](cfg)
    for t in tasks:
        t["suite"] = cfg["suite"]
    ids = [t["id"] for t in tasks]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate task ids")
    return sorted(tasks, key=lambda t: t["id"])


def _plan_hardy(cfg):
    fr, q, box = cfg["fractal"], cfg["quadrature"], cfg["whitney"]["box"]
    out = []
    for depth in cfg["depths"]:
        for prm in cfg["params"]:
            tag = "s{}_p{}_q{}".format(*prm)
            for m in cfg["family"]:
                out.append({"id": f"ratio/d{depth:02d}/{tag}/{m['name']}", "kind": "hardy_ratio", "depth": depth,
                            "bend": fr["bend_angle"], "level": _level(cfg, depth), "box": box, "params": prm,
                            "name": m["name"], "field": m["field"], "quadrature": q, "delta": cfg["delta"]})
    depth = max(cfg["depths"])
    for prm in cfg["params"]:
        tag = "s{}_p{}_q{}".format(*prm)
        out.append({"id": f"growth/d{depth:02d}/{tag}", "kind": "hardy_growth", "depth": depth,
                    "bend": fr["bend_angle"], "level": _level(cfg, depth), "box": box, "params": prm,
                    "first_level": cfg["samples"].get("growth_first_level", 3), "order": q["hardy_order"]})
    return out


def _plan_multiplier(cfg):
    fr, q, box = cfg["fractal"], cfg["quadrature"], cfg["whitney"]["box"]
    interior = {"kind": "bump", "center": [0.0, 0.0], "inner": 0.1, "outer": 0.2}
    out = []
    for depth in cfg["depths"]:
        for prm in cfg["params"]:
            tag = "s{}_p{}_q{}".format(*prm)
            members = [(m["name"], m["field"], False) for m in cfg["family"]] + [("interior_bump", interior, True)]
            for name, spec, inner in members:
                out.append({"id": f"mult/d{depth:02d}/{tag}/{name}", "kind": "multiplier", "depth": depth,
                            "bend": fr["bend_angle"], "level": _level(cfg, depth), "box": box, "params": prm,
                            "name": name, "field": spec, "interior": inner, "quadrature": q})
    return out


def _plan_extension(cfg):
    fr, q, box = cfg["fractal"], cfg["quadrature"], cfg["whitney"]["box"]
    smp = cfg["samples"]
    zero = cfg.get("zero_family") or _default_zero_family()
    out = []
    for depth in cfg["depths"]:
        common = {"depth": depth, "bend": fr["bend_angle"], "box": box, "level": cfg["whitney"]["max_level"],
                  "delta": cfg["delta"], "seed": cfg["seed"], "points": smp.get("points", 10000)}
        for prm in cfg["params"]:
            tag = "s{}_p{}_q{}".format(*prm)
            for m in zero:
                out.append({"id": f"zero/d{depth:02d}/{tag}/{m['name']}", "kind": "ext_zero", "params": prm,
                            "name": m["name"], "field": m["field"], **common})
            for m in cfg["family"]:
                for refeed in range(int(smp.get("refeed", 1)) + 1):
                    out.append({"id": f"proxy/d{depth:02d}/{tag}/{m['name']}/r{refeed}", "kind": "ext_proxy",
                                "params": prm, "name": m["name"], "field": m["field"], "refeed": refeed,
                                "quadrature": q, **common})
        poly = [("k1_constant", [0.6, 2, 2], {"kind": "constant", "value": 0.7}),
                ("k2_linear", [1.2, 2, 2], {"kind": "polynomial", "terms": [[0, 0, 0.3], [1, 0, 1.0], [0, 1, -2.0]]})]
        for name, prm, spec in poly:
            out.append({"id": f"poly/d{depth:02d}/{name}", "kind": "ext_poly", "params": prm, "name": name,
                        "field": spec, **common})
    return out


def _default_zero_family():
    from hardylab.harness.config import ZERO_TRACE_FAMILY

    return ZERO_TRACE_FAMILY


def _plan_remez(cfg):
    smp = cfg["samples"]
    fr = cfg["fractal"]
    return [{"id": f"remez/d{depth:02d}", "kind": "remez", "family": fr["family"], "bend": fr["bend_angle"],
             "depth": depth, "seed": cfg["seed"], "triples": smp["triples"], "R": smp["R"], "u": smp["u"],
             "r": smp["r"], "adversarial_fraction": smp["adversarial_fraction"]} for depth in cfg["depths"]]


def _plan_riesz(cfg):
    out = []
    for i, rz in enumerate(cfg["riesz"]):
        t = rz.get("t", [2.0**-i for i in range(3, 8)])
        out.append({"id": f"riesz/{i:02d}_{rz['family']}_d{rz['depth']:02d}", "kind": "riesz",
                    "family": rz["family"], "depth": rz["depth"], "omega": rz["omega"], "r": rz["r"], "t": t,
                    "x_offset": rz.get("x_offset", 12345 if rz["family"] == "koch" else 0),
                    "rel_depth": cfg["samples"].get("rel_depth", 7)})
    return out


def _plan_sequences(cfg):
    smp, fr = cfg["samples"], cfg["fractal"]
    out = [{"id": "hardy_sum/geometric", "kind": "seq_geometric", "length": 40, "sigma": 1.0, "p": 2.0}]
    for k in range(2):
        out.append({"id": f"hardy_sum/random_seed{k}", "kind": "seq_random", "seed": cfg["seed"] + 1000 * k,
                    "count": smp["sequences"], "length": smp["length"],
                    "sigmas": smp.get("sigmas", [0.5, 1.0, 2.0]), "ps": smp.get("ps", [1.5, 2.0, 3.0])})
    for depth in cfg["depths"]:
        out.append({"id": f"reverse_holder/d{depth:02d}", "kind": "reverse_holder", "family": fr["family"],
                    "bend": fr["bend_angle"], "depth": depth, "seed": cfg["seed"], "count": smp["supports"],
                    "gamma": smp["gamma"], "max_level": smp["rh_max_level"], "p": smp.get("rh_p", 2.0),
                    "q": smp.get("rh_q", 2.0)})
    return out


def _plan_geometry(cfg):
    smp, fr = cfg["samples"], cfg["fractal"]
    bend = fr["bend_angle"]
    box = cfg["whitney"]["box"]
    radii = [2.0**-i for i in range(1, 7)]
    out = [{"id": "dimension", "kind": "dimension", "bend": bend}]
    for depth in cfg["depths"]:
        out.append({"id": f"whitney/d{depth:02d}", "kind": "whitney_check", "family": fr["family"], "bend": bend,
                    "depth": depth, "box": box, "level": cfg["whitney"]["max_level"]})
        out.append({"id": f"regularity/{fr['family']}_d{depth:02d}", "kind": "regularity", "family": fr["family"],
                    "bend": bend, "depth": depth, "centers": smp["centers"], "radii": radii, "seed": cfg["seed"]})
        out.append({"id": f"subcube/d{depth:02d}", "kind": "subcube", "family": fr["family"], "bend": bend,
                    "depth": depth, "box": box, "level": cfg["whitney"]["max_level"], "pairs": smp["porous_pairs"],
                    "cubes": smp["cubes"], "grid": smp["porosity_grid"], "seed": cfg["seed"]})
    seg = max(cfg["depths"]) + 2
    out.append({"id": f"regularity/segment_d{seg:02d}", "kind": "regularity", "family": "segment", "bend": bend,
                "depth": seg, "centers": smp["centers"], "radii": radii, "seed": cfg["seed"], "endpoint": True})
    for depth in smp.get("porosity_depths", [8, 10]):
        out.append({"id": f"porosity/d{depth:02d}", "kind": "porosity", "family": fr["family"], "bend": bend,
                    "depth": depth, "cubes": smp["cubes"], "grid": smp["porosity_grid"], "seed": cfg["seed"]})
    return out


_PLANNERS = {
    "hardy": _plan_hardy,
    "multiplier": _plan_multiplier,
    "extension": _plan_extension,
    "remez": _plan_remez,
    "riesz": _plan_riesz,
    "sequences": _plan_sequences,
    "geometry-checks": _plan_geometry,
}


# -- execution -------------------------------------------------------------------


def execute(task):
    """Run one task; returns (record, cache entries used)."""
    rec, entries = _EXECUTORS[task["kind"]](task)
    rec = {"task": task["id"], "kind": task["kind"], **rec}
    return rec, sorted(set(entries))


def _series(per_level, fringe_level=None, fringe_value=None):
    lv = sorted(per_level)
    out = {"level": lv, "contribution": [per_level[j] for j in lv], "fringe_flag": [False] * len(lv)}
    if fringe_level is not None:
        out["level"].append(fringe_level)
        out["contribution"].append(fringe_value)
        out["fringe_flag"].append(True)
    return out


def _run_hardy_ratio(t):
    D, e = _fractal("snowflake", t["depth"], t["bend"])
    S = D.boundary
    P = _params(t)
    q = t["quadrature"]
    f = field_from_spec(t["field"], S, P.s)
    try:
        operators.check_zero_trace(f, S)
    except operators.TraceError as err:
        return {"excluded": str(err)}, e
    W, e2 = _whitney("snowflake", t["depth"], t["bend"], tuple(t["box"]), t["level"])
    h = norms.hardy_lhs(f, S, P.s, P.p, W, order=q["hardy_order"])
    nb = norms.tl_norm(f, P, _grid(q, t["box"]), q["j_max"], q["local_order"])
    rec = {"hardy": h.value, "fringe_bound": h.fringe_bound, "fringe_volume": h.fringe_volume, "tl": nb.total,
           "tl_lp": nb.lp_part, "tl_seminorm": nb.seminorm_part, "ratio": h.value / nb.total,
           "series": _series(h.per_level, W.max_level + 1, h.fringe_bound)}
    if P.q == P.p and P.s < 1:
        g = norms.gagliardo_seminorm(f, P.s, P.p, tuple(t["box"]), cells=q["gagliardo_cells"],
                                     n_theta=q["gagliardo_theta"], shells=q["gagliardo_shells"])
        lp = norms.lp_norm(f, P.p, _grid(q, t["box"]))
        rec.update({"gagliardo": g.value, "shell_bound": g.shell_bound, "lp": lp,
                    "sobolev_ratio": h.value / (lp + g.value)})
    return rec, e + e2


def _run_hardy_growth(t):
    D, e = _fractal("snowflake", t["depth"], t["bend"])
    S = D.boundary
    P = _params(t)
    W, e2 = _whitney("snowflake", t["depth"], t["bend"], tuple(t["box"]), t["level"])
    h = norms.hardy_lhs(Constant(1.0), S, P.s, P.p, W, order=t["order"])
    lv = [j for j in sorted(h.per_level) if j >= t["first_level"]]
    x = [2.0**j for j in lv]
    y = [h.per_level[j] for j in lv]
    slope, icpt, res = norms.fit_power_law(x, y)
    expected = P.s * P.p - (norms.N_DIM - S.dimension_d)
    return {"slope": slope, "intercept": icpt, "residual": res, "expected": expected, "levels": lv,
            "fringe_bound": h.fringe_bound, "series": _series(h.per_level, W.max_level + 1, h.fringe_bound),
            "loglog": {"x": x, "y": y, "fit": [slope, icpt, res], "title": t["id"],
                       "xlabel": "1/side", "ylabel": "level contribution"}}, e + e2


def _run_multiplier(t):
    D, e = _fractal("snowflake", t["depth"], t["bend"])
    S = D.boundary
    P = _params(t)
    q = t["quadrature"]
    f = field_from_spec(t["field"], S, P.s)
    try:
        operators.check_zero_trace(f, S)
    except operators.TraceError as err:
        return {"excluded": str(err)}, e
    W, e2 = _whitney("snowflake", t["depth"], t["bend"], tuple(t["box"]), t["level"])
    grid = _grid(q, t["box"])
    a = norms.tl_norm(operators.zero_extend(f, D), P, grid, q["j_max"], q["local_order"]).total
    b = norms.tl_norm(f, P, grid, q["j_max"], q["local_order"]).total
    h = norms.hardy_lhs(f, S, P.s, P.p, W, order=q["hardy_order"], cell_mask=D.inside)
    return {"tl_cut": a, "tl": b, "hardy_inside": h.value, "fringe_bound": h.fringe_bound,
            "ratio": a / b, "prop_ratio": a / (b + h.value), "interior": t["interior"]}, e + e2


def _ext_setup(t):
    D, e = _fractal("snowflake", t["depth"], t["bend"])
    level = t["level"] if t["level"] is not None else operators._default_level(D.boundary)
    Pu, e2 = _partition("snowflake", t["depth"], t["bend"], tuple(t["box"]), level)
    return D, Pu, level, e + e2


def _samples(t):
    rng = np.random.default_rng(t["seed"])
    return rng.uniform(-2.0, 2.0, size=(t["points"], 2))


def _run_ext_zero(t):
    D, Pu, level, e = _ext_setup(t)
    P = _params(t)
    f = field_from_spec(t["field"], D.boundary, P.s)
    E = operators.ext_domain(f, D, P, W=Pu.W, partition=Pu, delta=t["delta"], box=tuple(t["box"]))
    x = _samples(t)
    z = operators.zero_extend(f, D)(x)
    scale = float(np.max(np.abs(z))) or 1.0
    err = float(np.max(np.abs(E(x) - z)))
    return {"sup_error": err, "scale": scale, "rel_error": err / scale, "level": level,
            "cells": E.boundary.provenance["cells"]}, e


def _run_ext_poly(t):
    D, Pu, level, e = _ext_setup(t)
    P = _params(t)
    f = field_from_spec(t["field"], D.boundary, P.s)
    E = operators.ext_domain(f, D, P, W=Pu.W, partition=Pu, delta=t["delta"], box=tuple(t["box"]))
    x = _samples(t)
    fx = f(x)
    scale = float(np.max(np.abs(fx))) or 1.0
    err = float(np.max(np.abs(E(x) - fx)))
    return {"sup_error": err, "rel_error": err / scale, "k": P.k, "level": level,
            "reduced": E.boundary.provenance["reduced"]}, e


def _run_ext_proxy(t):
    D, Pu, level, e = _ext_setup(t)
    P = _params(t)
    q = t["quadrature"]
    f = field_from_spec(t["field"], D.boundary, P.s)
    kw = {"W": Pu.W, "partition": Pu, "delta": t["delta"], "box": tuple(t["box"])}
    for _ in range(t["refeed"]):
        f = operators.ext_domain(f, D, P, **kw)
    E = operators.ext_domain(f, D, P, **kw)
    grid = norms.XGrid((-2.0, 2.0, -2.0, 2.0), q["grid_cells"], q["grid_order"])
    a = norms.tl_norm(E, P, grid, q["j_max"], q["local_order"]).total
    b = norms.tl_norm(f, P, grid, q["j_max"], q["local_order"]).total
    return {"tl_ext": a, "tl": b, "ratio": a / b, "level": level}, e


def _local_normal(S, c, h):
    _, idx = S.tree.box_query(c[None, :], h)
    pts = S.points[idx] - c
    if len(pts) < 2:
        return np.array([0.0, 1.0])
    _, vec = np.linalg.eigh(pts.T @ pts)
    return vec[:, 0]


def _run_remez(t):
    S, e = _fractal(t["family"], t["depth"], t["bend"])
    rng = np.random.default_rng(t["seed"])
    base = min(6, t["depth"])
    stride = 4 ** (t["depth"] - base)
    nbase = len(S.points) // stride
    R = t["R"]
    ratios, adv, degenerate = [], [], 0
    worst = None
    for n in range(t["triples"]):
        c = S.points[int(rng.integers(nbase)) * stride]
        hs = 2.0 ** -float(rng.integers(2, 7))
        hq = hs * 2.0 ** rng.uniform(0.0, math.log2(R))
        cq = c + (hq - hs) * rng.uniform(-1.0, 1.0, 2)
        coef = rng.normal(size=6)
        kind = "random"
        if rng.uniform() < t["adversarial_fraction"]:
            # vanishing at the inner centre: across the local chord, or radially
            if n % 2 == 0:
                nrm = _local_normal(S, c, hs)
                kind = "normal"

                def poly(x, c=c, nrm=nrm, hs=hs):
                    return (x - c) @ nrm / hs
            else:
                kind = "radial"

                def poly(x, c=c, hs=hs):
                    return np.sum(((x - c) / hs) ** 2, axis=1)
        else:

            def poly(x, cq=cq, hq=hq, coef=coef):
                return basis_matrix((x - cq) / hq, 2) @ coef

        try:
            v = remez_ratio(poly, (cq, hq), (c, hs), S, u=t["u"], r=t["r"], R=R)
        except ZeroDivisionError:
            degenerate += 1
            continue
        ratios.append(v)
        if kind != "random":
            adv.append(v)
        if worst is None or v > worst["ratio"]:
            worst = {"ratio": v, "kind": kind, "inner_center": c.tolist(), "inner_half": hs, "outer_half": hq}
    ratios = np.array(ratios)
    return {"max_ratio": float(ratios.max()), "median_ratio": float(np.median(ratios)),
            "max_adversarial": float(max(adv)) if adv else math.nan, "adversarial": len(adv),
            "evaluated": len(ratios), "degenerate": degenerate, "worst": worst}, e


def _run_riesz(t):
    S, e = _fractal(t["family"], t["depth"])
    i = (len(S.points) // 2 + t["x_offset"]) % len(S.points)
    res = norms.riesz_energy(S.points[i], t["t"], t["omega"], t["r"], S, rel_depth=t["rel_depth"])
    x = [1.0 / v for v in res.t]
    return {"slope": res.slope, "residual": res.residual, "expected": res.expected, "x": S.points[i].tolist(),
            "values": res.values, "fringe_volume": res.fringe_volume, "dimension": S.dimension_d,
            "loglog": {"x": list(res.t), "y": list(res.values), "title": t["id"], "xlabel": "t",
                       "ylabel": "energy", "fit": [res.slope, _icpt(res), res.residual]},
            "inverse_t": x}, e


def _icpt(res):
    return norms.fit_power_law(res.t, res.values)[1]


def _run_seq_geometric(t):
    a = 2.0 ** -np.arange(t["length"])
    v = norms.discrete_hardy_check(a, t["sigma"], t["p"])
    return {"ratio": v, "limit": 4.0, "bound": norms.hardy_sum_bound(t["sigma"], t["p"])}, ()


def _random_sequences(rng, count, length):
    j = np.arange(length)
    kind = rng.integers(0, 4, size=count)
    A = np.exp(rng.uniform(-10, 0, size=(count, length)))
    rho = rng.uniform(0.0, 1.0, size=(count, 1))
    geo = rho**j * np.exp(rng.normal(0.0, 0.05, size=(count, length)))
    A = np.where(kind[:, None] == 1, geo, A)
    sparse = A * (rng.uniform(size=(count, length)) < 0.2)
    sparse[:, 0] += 1e-3
    A = np.where(kind[:, None] == 2, sparse, A)
    # a block followed by zeros
    cut = rng.integers(1, length + 1, size=(count, 1))
    block = np.where(j[None, :] < cut, rho ** j[None, :], 0.0)
    A = np.where(kind[:, None] == 3, block, A)
    A[:, 0] = np.maximum(A[:, 0], 1e-300)
    return A


def _run_seq_random(t):
    rng = np.random.default_rng(t["seed"])
    A = _random_sequences(rng, t["count"], t["length"])
    table = []
    for sigma in t["sigmas"]:
        for p in t["ps"]:
            r = norms.discrete_hardy_ratios(A, sigma, p)
            k = int(np.argmax(r))
            table.append({"sigma": sigma, "p": p, "max_ratio": float(r[k]), "argmax": k,
                          "finite": bool(np.all(np.isfinite(r))), "bound": norms.hardy_sum_bound(sigma, p)})
    return {"table": table}, ()


def _tower(S, fam_index, rng, max_level):
    x = S.points[int(rng.integers(len(S.points)))]
    out = []
    for j in range(max_level + 1):
        key = (j, int(math.floor(x[0] * 2**j)), int(math.floor(x[1] * 2**j)))
        if key in fam_index:
            out.append(fam_index[key])
    return out


def _run_reverse_holder(t):
    S, e = _fractal(t["family"], t["depth"], t["bend"])
    S = _boundary(S)
    fam = near_boundary_family(S, t["gamma"], t["max_level"])
    lv, ix, iy = fam
    index = {(int(a), int(b), int(c)): n for n, (a, b, c) in enumerate(zip(lv, ix, iy))}
    rng = np.random.default_rng(t["seed"])
    ratios = []
    for n in range(t["count"]):
        if n % 2 == 0:
            size = int(rng.integers(1, 65))
            L, I, K, a = norms.random_near_boundary_support(fam, rng, size)
        else:
            pick = np.array(_tower(S, index, rng, t["max_level"]), dtype=np.int64)
            L, I, K = lv[pick], ix[pick], iy[pick]
            a = np.exp(rng.uniform(np.log(0.1), np.log(10.0), len(pick)))
        ratios.append(norms.reverse_holder_check(L, I, K, a, t["p"], t["q"], family=fam))
    ratios = np.array(ratios)
    return {"max_ratio": float(ratios.max()), "median_ratio": float(np.median(ratios)),
            "finite": bool(np.all(np.isfinite(ratios))), "family_size": len(lv), "count": len(ratios)}, e


def _run_dimension(t):
    r = geometry.koch_ratio(t["bend"])
    d = geometry.moran_dimension([r] * 4)
    oracle = brentq(lambda x: 4 * r**x - 1.0, 0.5, 2.0, xtol=1e-15)
    return {"dimension": d, "bisection": oracle, "closed_form": math.log(4) / math.log(3) if
            abs(t["bend"] - math.pi / 3) < 1e-15 else oracle, "ratio": r}, ()


def _run_whitney_check(t):
    S, e = _fractal(t["family"], t["depth"], t["bend"])
    S = _boundary(S)
    W, e2 = _whitney(t["family"], t["depth"], t["bend"], tuple(t["box"]), t["level"])
    # independent distances: scipy's k-d tree in the sup metric
    dc, _ = cKDTree(S.points).query(W.centers, p=np.inf)
    dq = np.maximum(dc - W.half_side, 0.0)
    ok = W.whitney_ok(dq)
    return {"cells": len(W), "fringe": len(W.fringe_ix), "ok_fraction": float(ok.mean()),
            "bad": int((~ok).sum()), "distance_mismatch": float(np.max(np.abs(dc - W.dist_center))),
            "level_counts": {str(k): v for k, v in W.level_counts().items()}}, e + e2


def _run_regularity(t):
    S, e = _fractal(t["family"], t["depth"], t["bend"])
    S = _boundary(S)
    extra = [0] if t.get("endpoint") else []
    res = geometry.check_regularity(S, t["centers"], t["radii"], seed=t["seed"], extra=extra)
    return {"c_low": res.c_low, "c_high": res.c_high, "spread": res.spread,
            "unreliable": int(res.unreliable.sum()), "dimension": S.dimension_d,
            "point_mass": float(S.weights.max()), "r_min": float(min(t["radii"]))}, e


@lru_cache(maxsize=4)
def _kappa(family, depth, bend, cubes, grid, seed):
    S, _ = _fractal(family, depth, bend)
    return geometry.check_porosity(_boundary(S), cubes, seed=seed, grid=grid)


def _run_porosity(t):
    res = _kappa(t["family"], t["depth"], t["bend"], t["cubes"], t["grid"], t["seed"])
    _, e = _fractal(t["family"], t["depth"], t["bend"])
    return {"kappa": res.kappa, "porous": res.porous, "resolution_limited": int(res.resolution_limited.sum()),
            "grid": t["grid"]}, e


def _run_subcube(t):
    S, e = _fractal(t["family"], t["depth"], t["bend"])
    S = _boundary(S)
    W, e2 = _whitney(t["family"], t["depth"], t["bend"], tuple(t["box"]), t["level"])
    kappa = _kappa(t["family"], t["depth"], t["bend"], t["cubes"], t["grid"], t["seed"]).kappa
    rng = np.random.default_rng(t["seed"] + 1)
    ok, failures = 0, []
    for _ in range(t["pairs"]):
        x = S.points[int(rng.integers(len(S.points)))]
        i = int(rng.integers(1, 7))
        try:
            Q = porous_subcube(x, i, kappa, S, W)
        except PorousSearchError as err:
            failures.append({"x": x.tolist(), "i": i, "reason": str(err)})
            continue
        assert isinstance(Q, DyadicCube)
        ok += 1
    return {"kappa": kappa, "success": ok, "pairs": t["pairs"], "rate": ok / t["pairs"],
            "failures": failures[:10]}, e + e2


_EXECUTORS = {
    "hardy_ratio": _run_hardy_ratio,
    "hardy_growth": _run_hardy_growth,
    "multiplier": _run_multiplier,
    "ext_zero": _run_ext_zero,
    "ext_poly": _run_ext_poly,
    "ext_proxy": _run_ext_proxy,
    "remez": _run_remez,
    "riesz": _run_riesz,
    "seq_geometric": _run_seq_geometric,
    "seq_random": _run_seq_random,
    "reverse_holder": _run_reverse_holder,
    "dimension": _run_dimension,
    "whitney_check": _run_whitney_check,
    "regularity": _run_regularity,
    "porosity": _run_porosity,
    "subcube": _run_subcube,
}


# -- verdicts ----------------------------------------------------------------------


def _v(name, passed, detail):
    return {"name": name, "passed": bool(passed), "detail": detail}


def _finite_pos(v):
    v = number(v)
    return isinstance(v, (int, float)) and math.isfinite(v) and v > 0


def _drift(by_depth):
    """Relative change of an estimate across depths, measured against the coarsest."""
    ks = sorted(by_depth)
    vals = [number(by_depth[k]) for k in ks]
    if not all(_finite_pos(v) for v in vals):
        return math.inf
    return (max(vals) - min(vals)) / vals[0]


def _by(records, kind):
    return [r for r in records if r["kind"] == kind]


def _depth(rec):
    return int(rec["task"].split("/d")[1][:2])


def _tag(rec):
    return rec["task"].split("/")[2]


def _stability(name, recs, key, tol, group=_tag):
    out = []
    groups = {}
    for r in recs:
        if "excluded" in r or key not in r:
            continue
        g = groups.setdefault(group(r), {})
        d = _depth(r)
        g[d] = max(g.get(d, -math.inf), number(r[key]))
    for g, by_depth in sorted(groups.items()):
        drift = _drift(by_depth)
        vals = ", ".join(f"depth {d}: {number(v):.4g}" for d, v in sorted(by_depth.items()))
        if len(by_depth) < 2:
            out.append(_v(f"{name}[{g}]", all(_finite_pos(v) for v in by_depth.values()),
                          f"max {key} {vals}; single depth, stability not assessed"))
            continue
        out.append(_v(f"{name}[{g}]", drift < tol, f"max {key} {vals}; drift {drift:.3f} < {tol}"))
    return out


def _judge_hardy(records, tol):
    out = []
    ratios = _by(records, "hardy_ratio")
    excluded = [r["task"] for r in ratios if "excluded" in r]
    out.append(_v("hardy.zero_trace_family", not excluded, f"{len(excluded)} member(s) excluded"))
    out += _stability("hardy.ratio_stable", ratios, "ratio", tol["stability"])
    if any("sobolev_ratio" in r for r in ratios):
        out += _stability("hardy.sobolev_ratio_stable", ratios, "sobolev_ratio", tol["stability"])
    for r in _by(records, "hardy_growth"):
        err = abs(number(r["slope"]) - number(r["expected"]))
        out.append(_v(f"hardy.growth[{_tag(r)}]", err <= tol["growth_slope"],
                      f"slope {number(r['slope']):.4f} vs {number(r['expected']):.4f}, "
                      f"|diff| {err:.4f} <= {tol['growth_slope']}"))
    return out


def _judge_multiplier(records, tol):
    out = []
    recs = _by(records, "multiplier")
    members = [r for r in recs if not r["interior"]]
    excluded = [r["task"] for r in members if "excluded" in r]
    out.append(_v("multiplier.zero_trace_family", not excluded, f"{len(excluded)} member(s) excluded"))
    for r in recs:
        if r["interior"]:
            err = abs(number(r["ratio"]) - 1.0)
            out.append(_v(f"multiplier.interior[d{_depth(r)}]", err <= tol["interior"],
                          f"|ratio - 1| = {err:.2e} <= {tol['interior']}"))
    out += _stability("multiplier.ratio_stable", members, "ratio", tol["stability"])
    out += _stability("multiplier.prop41_constant_stable", members, "prop_ratio", tol["stability"])
    return out


def _judge_extension(records, tol):
    out = []
    zero = _by(records, "ext_zero")
    worst = max((number(r["rel_error"]) for r in zero), default=math.inf)
    out.append(_v("extension.zero_trace", worst <= tol["zero_trace"],
                  f"max relative sup error {worst:.2e} <= {tol['zero_trace']} over {len(zero)} runs"))
    poly = _by(records, "ext_poly")
    worst = max((number(r["rel_error"]) for r in poly), default=math.inf)
    out.append(_v("extension.polynomials", worst <= tol["polynomial"],
                  f"max relative sup error {worst:.2e} <= {tol['polynomial']} over {len(poly)} runs"))

    def member(r):
        parts = r["task"].split("/")
        return f"{parts[2]}/{parts[3]}/{parts[4]}"

    out += _stability("extension.proxy_stable", _by(records, "ext_proxy"), "ratio", tol["stability"], group=member)
    return out


def _judge_remez(records, tol):
    recs = _by(records, "remez")
    out = []
    for r in recs:
        out.append(_v(f"remez.finite[d{_depth(r)}]", _finite_pos(r["max_ratio"]) and r["degenerate"] == 0,
                      f"max ratio {number(r['max_ratio']):.4g} over {r['evaluated']} triples, "
                      f"{r['degenerate']} degenerate"))
    out += _stability("remez.stable", recs, "max_ratio", tol["stability"], group=lambda r: "all")
    return out


def _judge_riesz(records, tol):
    out = []
    for r in _by(records, "riesz"):
        err = abs(number(r["slope"]) - number(r["expected"]))
        out.append(_v(f"riesz.slope[{r['task'].split('/')[1]}]", err <= tol["slope"],
                      f"slope {number(r['slope']):.4f} vs {number(r['expected']):.4f}, |diff| {err:.4f} <= {tol['slope']}"))
    return out


def _judge_sequences(records, tol):
    out = []
    for r in _by(records, "seq_geometric"):
        err = abs(number(r["ratio"]) - r["limit"]) / r["limit"]
        out.append(_v("sequences.geometric", err < tol["geometric"],
                      f"ratio {number(r['ratio']):.8f} vs 4, relative error {err:.2e} < {tol['geometric']}"))
    rand = _by(records, "seq_random")
    tables = [{(row["sigma"], row["p"]): row for row in r["table"]} for r in rand]
    if len(tables) >= 2:
        keys = sorted(tables[0])
        bad = []
        for k in keys:
            vals = [number(t[k]["max_ratio"]) for t in tables]
            if not all(_finite_pos(v) for v in vals) or max(vals) > tol["cross_seed"] * min(vals):
                bad.append(k)
            if any(not t[k]["finite"] or number(t[k]["max_ratio"]) > t[k]["bound"] * (1 + 1e-9) for t in tables):
                bad.append(k)
        out.append(_v("sequences.random_cross_seed", not bad,
                      f"{len(keys)} (sigma, p) points; max ratios within {tol['cross_seed']}x across seeds "
                      f"and below the analytic bound; offending {sorted(set(bad))}"))
        mono = []
        for t in tables:
            for p in sorted({k[1] for k in t}):
                col = [number(t[k]["max_ratio"]) for k in sorted(k for k in t if k[1] == p)]
                if any(b > a * (1 + 1e-9) for a, b in zip(col, col[1:])):
                    mono.append(p)
        out.append(_v("sequences.monotone_in_sigma", not mono, f"max ratio nonincreasing in sigma; offending p {mono}"))
    else:
        out.append(_v("sequences.random_cross_seed", False, "need two seeds"))
    rh = _by(records, "reverse_holder")
    for r in rh:
        out.append(_v(f"sequences.reverse_holder_finite[d{_depth(r)}]", r["finite"] and _finite_pos(r["max_ratio"]),
                      f"max ratio {number(r['max_ratio']):.4f} over {r['count']} supports"))
    out += _stability("sequences.reverse_holder_stable", rh, "max_ratio", tol["stability"], group=lambda r: "all")
    return out


def _judge_geometry(records, tol):
    out = []
    for r in _by(records, "dimension"):
        err = max(abs(r["dimension"] - r["bisection"]), abs(r["dimension"] - r["closed_form"]))
        out.append(_v("geometry.dimension", err <= tol["dimension"], f"d = {r['dimension']:.15f}, error {err:.1e}"))
    for r in _by(records, "whitney_check"):
        out.append(_v(f"geometry.whitney[d{_depth(r)}]", r["bad"] == 0 and r["distance_mismatch"] <= 1e-12,
                      f"{r['cells']} cells, {r['bad']} violating, distance mismatch {r['distance_mismatch']:.1e}"))
    reg = _by(records, "regularity")
    koch = [r for r in reg if "segment" not in r["task"]]
    for r in reg:
        ok = _finite_pos(r["c_low"]) and _finite_pos(r["c_high"])
        if "segment" in r["task"]:
            # a closed box picks up at most one extra cloud point at each end
            slack = 2 * r["point_mass"] / r["r_min"] ** r["dimension"]
            ok = ok and r["c_low"] - slack <= 1.0 <= r["c_high"] + slack
        out.append(_v(f"geometry.regularity[{r['task'].split('/')[1]}]", ok,
                      f"bracket [{r['c_low']:.4f}, {r['c_high']:.4f}]"
                      + (f" (one-point slack {2 * r['point_mass'] / r['r_min'] ** r['dimension']:.1e})"
                         if "segment" in r["task"] else "")))
    out += _stability("geometry.regularity_stable", [dict(r, task=r["task"].replace("regularity/koch_", "reg/"))
                                                     for r in koch], "spread", tol["regularity"], group=lambda r: "koch")
    por = _by(records, "porosity")
    for r in por:
        out.append(_v(f"geometry.porosity[d{_depth(r)}]", r["porous"], f"kappa {number(r['kappa']):.4f}"))
    if len(por) >= 2:
        holes = [1.0 / number(r["kappa"]) for r in por]
        step = 2.0 / (por[0]["grid"] - 1)
        diff = max(holes) - min(holes)
        out.append(_v("geometry.porosity_stable", diff <= tol["porosity_steps"] * step + 1e-12,
                      f"hole fractions {', '.join(f'{h:.4f}' for h in holes)}; spread {diff:.4f} <= "
                      f"{tol['porosity_steps']} grid step(s) of {step:.4f}"))
    for r in _by(records, "subcube"):
        out.append(_v(f"geometry.porous_subcube[d{_depth(r)}]", r["success"] == r["pairs"],
                      f"{r['success']}/{r['pairs']} found at kappa {number(r['kappa']):.4f}"))
    return out


_JUDGES = {
    "hardy": _judge_hardy,
    "multiplier": _judge_multiplier,
    "extension": _judge_extension,
    "remez": _judge_remez,
    "riesz": _judge_riesz,
    "sequences": _judge_sequences,
    "geometry-checks": _judge_geometry,
}


def judge(suite, records, tolerances):
    return _JUDGES[suite](records, tolerances)
