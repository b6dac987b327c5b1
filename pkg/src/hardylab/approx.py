"""Local polynomial approximation on cubes.

Polynomials live in a basis adapted to a reference cube Q(c, h): products of
Legendre polynomials in the scaled coordinates (x - c) / h, of total degree at
most ``degree``. Local errors are normalized averages,
E_k(f, Q)_{L^u} = min over P of degree < k of (avg_Q |f - P|^u)^(1/u),
computed on tensor Gauss-Legendre grids.
"""

import json
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre as L
from scipy import linalg
from scipy.optimize import linprog

__all__ = [
    "PolyCoeffs",
    "QuadSpec",
    "ApproxConvergenceError",
    "RankDeficientError",
    "EmptySupportError",
    "multi_indices",
    "basis_matrix",
    "gauss_grid",
    "local_errors",
    "best_approx",
    "near_best_projector",
    "near_best_constant",
    "projector_consistency",
    "measure_projector",
    "measure_projectors",
    "remez_ratio",
    "DELTA",
]

DELTA = 16000.0
GRAM_COND_MAX = 1e12


class ApproxConvergenceError(RuntimeError):
    def __init__(self, message, value, converged):
        super().__init__(message)
        self.value = value
        self.converged = converged


class RankDeficientError(ValueError):
    """Discrete Gram matrix on the quadrature grid is singular; refine the grid."""


class EmptySupportError(ValueError):
    """No cloud points inside the cube a(Q)."""


@lru_cache(maxsize=None)
def multi_indices(degree):
    """(a, b) with a + b <= degree, ordered by total degree, then a descending."""
    if degree < 0:
        return ()
    return tuple((a, t - a) for t in range(degree + 1) for a in range(t, -1, -1))


def basis_matrix(xi, degree):
    """Legendre product basis at reference coordinates ``xi`` (N, 2) -> (N, m)."""
    xi = np.asarray(xi, dtype=float).reshape(-1, 2)
    idx = multi_indices(degree)
    if not idx:
        return np.zeros((len(xi), 0))
    px = L.legvander(xi[:, 0], degree)
    py = L.legvander(xi[:, 1], degree)
    return np.stack([px[:, a] * py[:, b] for a, b in idx], axis=1)


@dataclass
class PolyCoeffs:
    """Polynomial of total degree <= ``degree`` in the frame of Q(center, half)."""

    degree: int
    center: np.ndarray
    half: float
    coeffs: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float).reshape(2)
        self.coeffs = np.asarray(self.coeffs, dtype=float).reshape(-1)
        if len(self.coeffs) != len(multi_indices(self.degree)):
            raise ValueError("coefficient count does not match degree")

    def __call__(self, points):
        p = np.asarray(points, dtype=float).reshape(-1, 2)
        if self.degree < 0:
            return np.zeros(len(p))
        return basis_matrix((p - self.center) / self.half, self.degree) @ self.coeffs

    @classmethod
    def zero(cls, center, half, degree=-1, **prov):
        return cls(degree, center, half, np.zeros(len(multi_indices(degree))), dict(prov))

    def rebase(self, center, half, degree=None):
        """Same polynomial expressed in another cube frame (exact up to rounding)."""
        deg = self.degree if degree is None else degree
        if deg < self.degree:
            raise ValueError("cannot rebase to a lower degree")
        nodes, _ = gauss_grid(deg + 1)
        V = basis_matrix(nodes, deg)
        vals = self(np.asarray(center) + half * nodes)
        c = np.linalg.solve(V.T @ V, V.T @ vals)
        return PolyCoeffs(deg, center, half, c, dict(self.provenance))

    def to_json(self):
        return json.dumps({
            "degree": self.degree,
            "frame": {"center": self.center.tolist(), "half": self.half},
            "terms": [[a, b, c] for (a, b), c in zip(multi_indices(self.degree), self.coeffs.tolist())],
            "basis": "legendre",
        })

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        lookup = {(a, b): c for a, b, c in d["terms"]}
        coeffs = [lookup[ab] for ab in multi_indices(d["degree"])]
        return cls(d["degree"], d["frame"]["center"], d["frame"]["half"], coeffs)


@lru_cache(maxsize=None)
def _gauss_grid(order, refine):
    x, w = L.leggauss(order)
    parts = 2**refine
    edges = np.linspace(-1, 1, parts + 1)
    xs = np.concatenate([0.5 * (edges[i] + edges[i + 1]) + x / parts for i in range(parts)])
    ws = np.tile(w, parts) / parts
    gx, gy = np.meshgrid(xs, xs, indexing="ij")
    wx, wy = np.meshgrid(ws, ws, indexing="ij")
    nodes = np.stack([gx.ravel(), gy.ravel()], axis=1)
    weights = (wx * wy).ravel() / 4.0
    nodes.flags.writeable = False
    weights.flags.writeable = False
    return nodes, weights


def gauss_grid(order, refine=0):
    """Tensor Gauss-Legendre grid on [-1, 1]^2; weights average (sum to 1)."""
    return _gauss_grid(int(order), int(refine))


@dataclass(frozen=True)
class QuadSpec:
    """Tensor Gauss grid: ``order`` nodes per axis on each of 2^refine x 2^refine subcubes."""

    order: int = 8
    refine: int = 0
    adaptive: bool = False
    max_refine: int = 3

    @classmethod
    def default(cls, k):
        return cls(order=max(2 * k, 8))


@lru_cache(maxsize=None)
def _projector(order, refine, deg):
    nodes, w = gauss_grid(order, refine)
    V = basis_matrix(nodes, deg)
    G = V.T @ (w[:, None] * V)
    if V.shape[1] and np.linalg.cond(G) > GRAM_COND_MAX:
        raise RankDeficientError(f"grid of order {order} cannot resolve degree {deg}")
    M = np.linalg.solve(G, (V * w[:, None]).T) if V.shape[1] else np.zeros((0, len(w)))
    return V, M


def _weighted_median(values, w):
    order = np.argsort(values, axis=1)
    v = np.take_along_axis(values, order, axis=1)
    ww = w[order]
    cw = np.cumsum(ww, axis=1)
    pos = np.argmax(cw >= 0.5 * cw[:, -1:], axis=1)
    return v[np.arange(len(v)), pos]


def _l1_fit(f, V, w):
    """Exact weighted L1 fit: minimise sum w |f - V c| with slack variables."""
    n, m = V.shape
    I = np.eye(n)
    A = np.block([[V, -I], [-V, -I]])
    b = np.concatenate([f, -f])
    cost = np.concatenate([np.zeros(m), w])
    bounds = [(None, None)] * m + [(0, None)] * n
    res = linprog(cost, A_ub=A, b_ub=b, bounds=bounds, method="highs")
    if not res.success:
        raise ApproxConvergenceError("L1 fit failed: " + res.message, None, None)
    coef = res.x[:m]
    return coef, float(np.sum(w * np.abs(f - V @ coef)))


def local_errors(values, k, u, order, refine=0, strict=True, tol=1e-9, max_iter=200):
    """Best L^u approximation by degree < k polynomials, batched over rows.

    ``values`` holds f at ``gauss_grid(order, refine)`` nodes of each cube
    (one row per cube). Returns (errors, coeffs, converged).
    """
    f = np.atleast_2d(np.asarray(values, dtype=float))
    nodes, w = gauss_grid(order, refine)
    deg = k - 1
    if deg < 0:
        err = np.sum(w * np.abs(f) ** u, axis=1) ** (1 / u)
        return err, np.zeros((len(f), 0)), np.ones(len(f), bool)
    V, M = _projector(order, refine, deg)
    c = f @ M.T
    r = f - c @ V.T
    converged = np.ones(len(f), dtype=bool)
    if u == 2:
        return np.sqrt(np.sum(w * r * r, axis=1)), c, converged
    if deg == 0 and u == 1:
        med = _weighted_median(f, w)
        c = (med / V[0, 0])[:, None]
        return np.sum(w * np.abs(f - med[:, None]), axis=1), c, converged
    # iteratively reweighted least squares from the L2 solution
    scale = np.max(np.abs(f), axis=1, keepdims=True) + 1e-300
    val = np.sum(w * np.abs(r) ** u, axis=1) ** (1 / u)
    converged[:] = False
    active = np.arange(len(f))
    for _ in range(max_iter):
        ra = r[active]
        eps = 1e-10 * scale[active]
        om = w * np.maximum(np.abs(ra), eps) ** (u - 2)
        G = np.einsum("bn,ni,nj->bij", om, V, V)
        rhs = np.einsum("bn,ni,bn->bi", om, V, f[active])
        c_new = np.linalg.solve(G, rhs[..., None])[..., 0]
        if u > 2:
            # the undamped step overshoots for u > 2
            c_new = c[active] + (c_new - c[active]) / (u - 1)
        r_new = f[active] - c_new @ V.T
        v_new = np.sum(w * np.abs(r_new) ** u, axis=1) ** (1 / u)
        better = v_new <= val[active]
        upd = active[better]
        c[upd] = c_new[better]
        r[upd] = r_new[better]
        # a residual at roundoff level is as good as it gets
        done = np.abs(v_new - val[active]) <= tol * np.maximum(v_new, 1e-12 * scale[active, 0])
        done |= np.minimum(v_new, val[active]) <= 1e-13 * scale[active, 0]
        val[upd] = v_new[better]
        converged[active[done]] = True
        active = active[~done]
        if active.size == 0:
            break
    if u == 1 and not converged.all():
        # L1 fits stall under reweighting; finish them as linear programs
        for b in np.flatnonzero(~converged):
            c[b], val[b] = _l1_fit(f[b], V, w)
            converged[b] = True
    if strict and not converged.all():
        raise ApproxConvergenceError("reweighting did not converge in %d iterations" % max_iter, val, converged)
    return val, c, converged


def _cube(Q):
    if hasattr(Q, "center") and hasattr(Q, "half_side"):
        return np.asarray(Q.center, dtype=float), float(Q.half_side)
    c, h = Q
    return np.asarray(c, dtype=float), float(h)


def best_approx(f, Q, k, u=2, grid=None):
    """E_k(f, Q)_{L^u} and its minimizing polynomial.

    ``Q`` is a DyadicCube or (center, half_side). With ``grid=None`` the
    default grid is doubled until the value moves less than 1e-6 relative
    (at most three doublings).
    """
    if u < 1 or not np.isfinite(u):
        raise ValueError("only finite u >= 1 is supported")
    center, half = _cube(Q)
    spec = QuadSpec.default(k) if grid is None else grid
    adaptive = grid is None or spec.adaptive
    prev = None
    refine = spec.refine
    while True:
        nodes, _ = gauss_grid(spec.order, refine)
        vals = f(center + half * nodes)[None, :]
        err, c, _ = local_errors(vals, k, u, spec.order, refine)
        value = float(err[0])
        if not adaptive or (prev is not None and abs(value - prev) <= 1e-6 * max(abs(value), 1e-300)):
            break
        if refine - spec.refine >= spec.max_refine:
            break
        prev = value
        refine += 1
    poly = PolyCoeffs(k - 1, center, half, c[0] if k > 0 else np.zeros(0),
                      {"order": spec.order, "refine": refine, "u": u})
    return value, poly


def near_best_projector(f, Q, k, p=2, grid=None):
    """Discrete L2 projection of f onto degree < k polynomials on Q (a linear map)."""
    center, half = _cube(Q)
    spec = QuadSpec.default(k) if grid is None else grid
    nodes, _ = gauss_grid(spec.order, spec.refine)
    _, M = _projector(spec.order, spec.refine, k - 1)
    c = M @ f(center + half * nodes)
    return PolyCoeffs(k - 1, center, half, c, {"order": spec.order, "refine": spec.refine, "p": p})


def near_best_constant(f, Q, k, p, grid=None):
    """(avg_Q |f - P_Q f|^p)^(1/p) / E_k(f, Q)_{L^p}; at least 1, measured rather than assumed."""
    center, half = _cube(Q)
    spec = QuadSpec.default(k) if grid is None else grid
    P = near_best_projector(f, Q, k, p, spec)
    nodes, w = gauss_grid(spec.order, spec.refine)
    x = center + half * nodes
    num = np.sum(w * np.abs(f(x) - P(x)) ** p) ** (1 / p)
    den, _ = best_approx(f, Q, k, p, QuadSpec(spec.order, spec.refine))
    if den == 0:
        return 1.0 if num == 0 else np.inf
    return num / den


def projector_consistency(f, Q, Qsub, k, grid=None, probe=8):
    """sup over Q' of |P_Q f - P_Q' f| divided by avg_Q |f - P_Q f| (property i)."""
    center, half = _cube(Q)
    spec = QuadSpec.default(k) if grid is None else grid
    PQ = near_best_projector(f, Q, k, 2, spec)
    PS = near_best_projector(f, Qsub, k, 2, spec)
    sc, sh = _cube(Qsub)
    t = np.linspace(-1, 1, probe)
    gx, gy = np.meshgrid(t, t, indexing="ij")
    z = sc + sh * np.stack([gx.ravel(), gy.ravel()], 1)
    num = np.max(np.abs(PQ(z) - PS(z)))
    nodes, w = gauss_grid(spec.order, spec.refine)
    x = center + half * nodes
    den = np.sum(w * np.abs(f(x) - PQ(x)))
    return num, den


def measure_projector(g, points, weights, center, half, degree, parent_diam=0.0, delta=DELTA):
    """Pr_{degree, a(Q)} g: projection onto P_degree orthonormal in L2(weights on a(Q) cloud).

    ``g``, ``points``, ``weights`` are the boundary data restricted to a(Q).
    The basis is orthonormalized by a column-pivoted QR of the weighted
    design matrix; if its condition exceeds 1e12 the top total degree is
    dropped and the factorization retried.
    """
    center = np.asarray(center, dtype=float)
    if parent_diam > delta:
        return PolyCoeffs.zero(center, half, degree, cutoff=True)
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(pts) == 0:
        raise EmptySupportError(f"a(Q) around {center.tolist()} holds no cloud points")
    sw = np.sqrt(np.asarray(weights, dtype=float))
    g = np.asarray(g, dtype=float)
    deg = degree
    while deg >= 0:
        V = basis_matrix((pts - center) / half, deg)
        A = sw[:, None] * V
        Qm, R, piv = linalg.qr(A, mode="economic", pivoting=True)
        diag = np.abs(np.diag(R))
        ok = len(pts) >= A.shape[1] and diag.min() > 0 and diag.max() / diag.min() <= np.sqrt(GRAM_COND_MAX)
        if ok:
            # coefficients <g, P_beta> in the orthonormal basis A R^-1, mapped back
            inner = Qm.T @ (sw * g)
            c = np.zeros(A.shape[1])
            c[piv] = linalg.solve_triangular(R, inner)
            out = PolyCoeffs(deg, center, half, c, {"requested_degree": degree, "degree": deg})
            return out.rebase(center, half, degree) if deg < degree else out
        deg -= 1
    raise EmptySupportError("no polynomial degree admits a nondegenerate Gram matrix")


def measure_projectors(S, g, centers, half, degree, parent_diam=None, delta=DELTA):
    """Batched Pr_{degree, a(Q)} g for many cubes Q(center, half) against the cloud of ``S``.

    ``g`` holds the boundary data at every cloud point. Returns
    (coeffs (B, m), used_degree (B,), counts (B,)); cubes beyond the cutoff
    get zero coefficients and used_degree -1. For degree <= 1 the weighted
    moments come from one multi-column box sum; higher degrees gather the
    points of each cube. Degree reduction follows the same condition
    threshold as ``measure_projector``.
    """
    centers = np.asarray(centers, dtype=float).reshape(-1, 2)
    half = np.ascontiguousarray(np.broadcast_to(np.asarray(half, dtype=float), (len(centers),)))
    g = np.asarray(g, dtype=float)
    B = len(centers)
    live = np.ones(B, bool) if parent_diam is None else np.asarray(parent_diam) <= delta
    if degree <= 1:
        G, b, counts = _box_moments(S, g, centers, half, degree)
    else:
        G, b, counts = _gathered_moments(S, g, centers, half, degree)
    if np.any(live & (counts == 0)):
        bad = centers[live & (counts == 0)][:3]
        raise EmptySupportError(f"a(Q) holds no cloud points near {bad.tolist()}")
    m = len(multi_indices(degree))
    coeffs = np.zeros((B, m))
    used = np.full(B, -1, dtype=np.int64)
    pending = live.copy()
    for deg in range(degree, -1, -1):
        if not pending.any():
            break
        mm = len(multi_indices(deg))
        rows = np.nonzero(pending)[0]
        Gs = G[rows][:, :mm, :mm]
        ev = np.linalg.eigvalsh(Gs)
        good = (ev[:, 0] > 0) & (ev[:, -1] <= GRAM_COND_MAX * np.maximum(ev[:, 0], 1e-300))
        good &= counts[rows] >= mm
        r = rows[good]
        if r.size:
            sol = np.linalg.solve(Gs[good], b[r][:, :mm, None])[..., 0]
            coeffs[r] = sol if deg == degree else _lift(sol, deg, degree)
            used[r] = deg
            pending[r] = False
    return coeffs, used, counts


def _box_moments(S, g, centers, half, degree):
    # weighted moments up to order 2 in global coordinates, shifted to each frame
    w, (x, y) = S.weights, S.points.T
    B = len(centers)
    if degree == 0:
        cols = [np.ones(len(w)), w, w * g]
    else:
        cols = [np.ones(len(w)), w, w * g, w * x, w * y, w * x * x, w * x * y, w * y * y, w * g * x, w * g * y]
    M = S.tree.box_sum(centers, half, np.stack(cols, 1))
    counts = M[:, 0].round().astype(np.int64)
    m0, g0 = M[:, 1], M[:, 2]
    if degree == 0:
        return m0.reshape(B, 1, 1), g0.reshape(B, 1), counts
    mx, my, mxx, mxy, myy, gx, gy = M[:, 3:].T
    cx, cy = centers[:, 0], centers[:, 1]
    sx = (mx - cx * m0) / half
    sy = (my - cy * m0) / half
    sxx = (mxx - 2 * cx * mx + cx * cx * m0) / half**2
    syy = (myy - 2 * cy * my + cy * cy * m0) / half**2
    sxy = (mxy - cx * my - cy * mx + cx * cy * m0) / half**2
    G = np.stack([np.stack([m0, sx, sy], -1), np.stack([sx, sxx, sxy], -1), np.stack([sy, sxy, syy], -1)], 1)
    b = np.stack([g0, (gx - cx * g0) / half, (gy - cy * g0) / half], -1)
    return G, b, counts


def _gathered_moments(S, g, centers, half, degree):
    offsets, idx = S.tree.box_query(centers, half)
    counts = np.diff(offsets)
    owner = np.repeat(np.arange(len(centers)), counts)
    xi = (S.points[idx] - centers[owner]) / half[owner, None]
    V = basis_matrix(xi, degree)
    w = S.weights[idx]
    m = V.shape[1]
    G = np.zeros((len(centers), m, m))
    b = np.zeros((len(centers), m))
    np.add.at(G, owner, w[:, None, None] * V[:, :, None] * V[:, None, :])
    np.add.at(b, owner, (w * g[idx])[:, None] * V)
    return G, b, counts


@lru_cache(maxsize=None)
def _lift_matrix(deg, degree):
    nodes, _ = gauss_grid(degree + 1)
    Vlo = basis_matrix(nodes, deg)
    Vhi = basis_matrix(nodes, degree)
    return np.linalg.solve(Vhi.T @ Vhi, Vhi.T @ Vlo)


def _lift(c, deg, degree):
    return c @ _lift_matrix(deg, degree).T


def remez_ratio(p, Q, Qsub, S, u=2, r=2, R=4.0, order=8):
    """avg_Q |p|^r ^(1/r) over (measure-average over Q' cap S of |p|^u)^(1/u)."""
    cQ, hQ = _cube(Q)
    cS, hS = _cube(Qsub)
    if S.distance(cS[None, :])[0] > 1e-12:
        raise ValueError("centre of the inner cube must lie on the set")
    if np.max(np.abs(cS - cQ)) + hS > hQ * (1 + 1e-12):
        raise ValueError("inner cube is not contained in the outer cube")
    if not (0 < hQ <= R * hS * (1 + 1e-12) and R * hS <= R * R * (1 + 1e-12)):
        raise ValueError("cube sizes violate r_Q <= R r_Q' <= R^2")
    nodes, wq = gauss_grid(order)
    num = np.sum(wq * np.abs(p(cQ + hQ * nodes)) ** r) ** (1 / r)
    offsets, idx = S.tree.box_query(cS[None, :], hS)
    w = S.weights[idx]
    den = (np.sum(w * np.abs(p(S.points[idx])) ** u) / np.sum(w)) ** (1 / u)
    if not den > 1e-14 * max(num, 1e-300):
        raise ZeroDivisionError("polynomial vanishes on the cloud inside the inner cube")
    return float(num / den)
