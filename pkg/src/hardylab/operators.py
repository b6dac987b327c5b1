"""Zero extension, trace-based Whitney extension and the derived experiments."""

import math
from dataclasses import dataclass, field

import numpy as np

from hardylab import norms
from hardylab.approx import DELTA, basis_matrix, measure_projectors
from hardylab.dyadic import FRINGE, PartitionOfUnity, associated_cubes, whitney
from hardylab.fields import ScalarField

__all__ = [
    "TraceError",
    "ZeroExtension",
    "BoundaryExtension",
    "ExtensionField",
    "zero_extend",
    "ext_boundary",
    "ext_domain",
    "check_zero_trace",
    "multiplier_ratio",
    "prop41_sides",
    "hardy_constant",
    "HardyConstant",
    "EXT_BOX",
]

EXT_BOX = (-4.0, 4.0, -4.0, 4.0)


class TraceError(ValueError):
    """Boundary data unavailable or nonzero where zero was required."""

    def __init__(self, message, points=None):
        super().__init__(message)
        self.points = points


class ZeroExtension(ScalarField):
    def __init__(self, source, domain):
        self.source = source
        self.domain = domain

    def __call__(self, points):
        p = np.asarray(points, dtype=float).reshape(-1, 2)
        out = np.zeros(len(p))
        inside = self.domain.inside(p)
        if inside.any():
            out[inside] = self.source(p[inside])
        return out

    def sup_bound(self):
        return self.source.sup_bound()

    def describe(self):
        return {"kind": "zero_extend", "source": self.source.describe()}


def zero_extend(f, domain):
    """x -> f(x) [x in Omega]."""
    return ZeroExtension(f, domain)


def _boundary_data(f, S):
    if not getattr(f, "has_trace", False):
        raise TraceError(f"{type(f).__name__} has no closed-form boundary restriction; supply trace values")
    return f.trace(S.points)


class BoundaryExtension(ScalarField):
    """sum_Q phi_Q * Pr_{k-1, a(Q)} g over the Whitney cells of the boundary.

    ``g`` is the boundary data on the cloud. Points in the unresolved fringe
    take the projector of their own fringe cube; points outside the
    decomposition box evaluate to 0.
    """

    def __init__(self, S, g, degree, W=None, partition=None, delta=DELTA, max_level=None, box=EXT_BOX):
        if W is None:
            if max_level is None:
                max_level = _default_level(S)
            W = whitney(S, box, max_level)
        self.S = S
        self.W = W
        self.P = partition if partition is not None else PartitionOfUnity(W)
        self.degree = degree
        self.delta = delta
        g = np.asarray(g, dtype=float)
        if g.shape != (len(S.points),):
            raise ValueError("boundary data must have one value per cloud point")
        A = associated_cubes(W, S)
        self.anchor, self.ahalf = A.anchors, A.half_side
        self.coeffs, self.used_degree, _ = measure_projectors(S, g, A.anchors, A.half_side, degree,
                                                              parent_diam=W.side, delta=delta)
        F = associated_cubes(W, S, fringe=True)
        self.f_anchor, self.f_half = F.anchors, F.half_side
        fdiam = np.full(len(F), 2 * W.fringe_half_side)
        self.f_coeffs, _, _ = measure_projectors(S, g, F.anchors, F.half_side, degree,
                                                 parent_diam=fdiam, delta=delta)
        self.provenance = {"cells": len(W), "fringe": len(F), "degree": degree, "delta": delta,
                           "reduced": int(np.sum((self.used_degree >= 0) & (self.used_degree < degree))),
                           "cutoff": int(np.sum(self.used_degree < 0))}

    def __call__(self, points):
        x = np.asarray(points, dtype=float).reshape(-1, 2)
        rows, cells, phi, home = self.P.weights(x, on_fringe="skip")
        out = np.zeros(len(x))
        if len(rows):
            V = basis_matrix((x[rows] - self.anchor[cells]) / self.ahalf[cells, None], self.degree)
            np.add.at(out, rows, phi * np.einsum("ij,ij->i", V, self.coeffs[cells]))
        fr = np.nonzero(home == FRINGE)[0]
        if fr.size:
            fi = self.W.locate_fringe(x[fr])
            V = basis_matrix((x[fr] - self.f_anchor[fi]) / self.f_half[fi, None], self.degree)
            out[fr] = np.einsum("ij,ij->i", V, self.f_coeffs[fi])
        return out

    def describe(self):
        return {"kind": "ext_boundary", **self.provenance}


class ExtensionField(ScalarField):
    """f on Omega, the boundary extension of its trace outside."""

    def __init__(self, source, domain, params, boundary_ext):
        self.source = source
        self.domain = domain
        self.params = params
        self.boundary = boundary_ext
        self.has_trace = getattr(source, "has_trace", False)

    def __call__(self, points):
        p = np.asarray(points, dtype=float).reshape(-1, 2)
        inside = self.domain.inside(p)
        out = np.empty(len(p))
        if inside.any():
            out[inside] = self.source(p[inside])
        if (~inside).any():
            out[~inside] = self.boundary(p[~inside])
        return out

    def trace(self, points):
        return self.source.trace(points)

    def describe(self):
        return {"kind": "ext_domain", "source": self.source.describe(), "k": self.params.k,
                **self.boundary.provenance}


def _default_level(S):
    # finest dyadic level still well above the cloud resolution
    if S.resolution <= 0:
        return 10
    return int(min(12, math.floor(-math.log2(4 * S.resolution))))


def ext_boundary(f, params, S, W=None, partition=None, delta=DELTA, max_level=None, trace_values=None,
                 box=EXT_BOX):
    """Ext_{k, boundary} f: depends on f only through its trace on the cloud."""
    g = _boundary_data(f, S) if trace_values is None else np.asarray(trace_values, dtype=float)
    return BoundaryExtension(S, g, params.k - 1, W, partition, delta, max_level, box)


def ext_domain(f, domain, params, W=None, partition=None, delta=DELTA, max_level=None, trace_values=None,
               box=EXT_BOX):
    """Ext_{k, Omega} f = f on Omega, the boundary extension of Tr f off the closure."""
    B = ext_boundary(f, params, domain.boundary, W, partition, delta, max_level, trace_values, box)
    return ExtensionField(f, domain, params, B)


def check_zero_trace(f, S, samples=64, tol=1e-3, seed=0, averages=False):
    """Closed-form trace of f on ``samples`` cloud points must vanish within tol * scale.

    With ``averages`` the shrinking-cube averages are also computed at a few
    points; they must extrapolate to zero or decay like a power of the radius. Returns the sampled indices.
    """
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(len(S.points), size=min(samples, len(S.points)), replace=False))
    scale = f.sup_bound()
    if not math.isfinite(scale) or scale == 0:
        scale = float(np.max(np.abs(f(S.points[idx] + 0.1)))) or 1.0
    tr = _boundary_data(f, S)[idx]
    bad = np.abs(tr) > tol * scale
    if bad.any():
        raise TraceError("nonzero trace at sampled boundary points", S.points[idx[bad]])
    if averages:
        radii = 2.0 ** -np.arange(1, 7)
        radii = radii[radii > 4 * S.resolution]
        for i in idx[:4]:
            res = norms.trace(f, S.points[i], radii, resolution=S.resolution)
            if abs(res.value) <= tol * scale * 10:
                continue
            # extrapolation is unreliable on rough sets; a clean power-law decay also counts
            A = np.abs(res.averages)
            if np.all(A > 0):
                rate, _, rms = norms.fit_power_law(radii, A)
                if rate >= 0.1 and rms <= 0.1:
                    continue
            raise TraceError("averages do not vanish", S.points[i : i + 1])
    return idx


def multiplier_ratio(f, domain, params, x_grid=None, j_max=6, check=True):
    """tl_norm(f chi_Omega) / tl_norm(f) for f with zero trace on the boundary."""
    if check:
        check_zero_trace(f, domain.boundary)
    a = norms.tl_norm(zero_extend(f, domain), params, x_grid, j_max)
    b = norms.tl_norm(f, params, x_grid, j_max)
    return a.total / b.total


def _inside_cells(domain):
    def mask(centers):
        return domain.inside(centers)

    return mask


def prop41_sides(f, domain, params, W, x_grid=None, j_max=6):
    """(||f chi_Omega||, ||f|| + Hardy functional of f over Omega) for the multiplier estimate."""
    lhs = norms.tl_norm(zero_extend(f, domain), params, x_grid, j_max).total
    tl = norms.tl_norm(f, params, x_grid, j_max).total
    h = norms.hardy_lhs(f, domain.boundary, params.s, params.p, W, cell_mask=_inside_cells(domain))
    return lhs, tl + h.value


@dataclass
class HardyConstant:
    c_estimate: float
    table: list
    excluded: list = field(default_factory=list)
    c_sobolev: float = math.nan


def hardy_constant(family, S, params, W, x_grid=None, j_max=6, gagliardo=None, require_zero_trace=True):
    """max over ``family`` of hardy_lhs(f) / tl_norm(f).

    ``family`` maps names to fields. Members failing the zero-trace check
    are excluded and reported. For q = p and s < 1 the Sobolev ratio
    hardy_lhs / (||f||_p + |f|_{W^{s,p}}) is computed too when
    ``gagliardo`` (keyword arguments for the seminorm, including ``box``)
    is given.
    """
    if not family:
        raise ValueError("empty test family")
    table, excluded = [], []
    for name, f in family.items():
        if require_zero_trace:
            try:
                check_zero_trace(f, S)
            except TraceError as err:
                excluded.append({"name": name, "reason": str(err)})
                continue
        h = norms.hardy_lhs(f, S, params.s, params.p, W)
        nb = norms.tl_norm(f, params, x_grid, j_max)
        row = {"name": name, "hardy": h.value, "fringe_bound": h.fringe_bound, "tl": nb.total,
               "ratio": h.value / nb.total}
        if gagliardo is not None and params.q == params.p and params.s < 1:
            box = gagliardo["box"]
            g = norms.gagliardo_seminorm(f, params.s, params.p, **gagliardo)
            lp = norms.lp_norm(f, params.p, norms.XGrid(tuple(box)))
            row.update({"gagliardo": g.value, "shell_bound": g.shell_bound, "sobolev": lp + g.value,
                        "sobolev_ratio": h.value / (lp + g.value)})
        table.append(row)
    if not table:
        raise ValueError("every family member was excluded")
    c = max(r["ratio"] for r in table)
    cs = max((r["sobolev_ratio"] for r in table if "sobolev_ratio" in r), default=math.nan)
    return HardyConstant(c, table, excluded, cs)

