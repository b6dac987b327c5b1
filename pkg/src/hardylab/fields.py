"""Evaluatable test functions on the plane.

Every field maps an (N, 2) array of points to N values. Fields may expose a
Hoelder bound ``holder = (exponent, constant)`` valid for |x - y| <= 8 (used to
bound the near-diagonal shell of the Gagliardo integral) and a closed-form
boundary restriction ``trace(points)`` for points on a set where the field is
continuous.
"""

import math

import numpy as np

from hardylab.dyadic import smooth_step

__all__ = [
    "ScalarField",
    "Constant",
    "Monomials",
    "Sinusoid",
    "Abs",
    "HalfPlane",
    "Bump",
    "DistancePower",
    "Product",
    "LinearCombination",
    "field_from_spec",
]


def _step_slope():
    u = np.linspace(1e-6, 1 - 1e-6, 200001)
    v = smooth_step(u)
    return float(np.max(np.abs(np.diff(v)) / np.diff(u)))


STEP_SLOPE = _step_slope()


class ScalarField:
    holder = None
    has_trace = False

    def __call__(self, points):
        raise NotImplementedError

    def trace(self, points):
        if not self.has_trace:
            raise NotImplementedError(f"{type(self).__name__} has no closed-form boundary restriction")
        return self(points)

    def sup_bound(self):
        return math.inf

    def describe(self):
        return {"kind": type(self).__name__}

    def __mul__(self, other):
        return Product(self, other)

    def __add__(self, other):
        return LinearCombination([(1.0, self), (1.0, other)])

    def __rmul__(self, a):
        return LinearCombination([(float(a), self)])


class Constant(ScalarField):
    has_trace = True

    def __init__(self, value):
        self.value = float(value)
        self.holder = (1.0, 0.0)

    def __call__(self, points):
        p = np.asarray(points, dtype=float).reshape(-1, 2)
        return np.full(len(p), self.value)

    def sup_bound(self):
        return abs(self.value)

    def describe(self):
        return {"kind": "constant", "value": self.value}


class Monomials(ScalarField):
    """sum c * (x - x0)^a (y - y0)^b over ``terms = {(a, b): c}``."""

    has_trace = True

    def __init__(self, terms, origin=(0.0, 0.0), radius=2.0):
        self.terms = {tuple(map(int, k)): float(v) for k, v in dict(terms).items()}
        self.origin = np.asarray(origin, dtype=float)
        self.radius = float(radius)
        # gradient bound on the sup-ball of ``radius`` around the origin
        lip = 0.0
        for (a, b), c in self.terms.items():
            if a + b:
                lip += abs(c) * (a + b) * self.radius ** (a + b - 1)
        self.holder = (1.0, math.sqrt(2) * lip)

    @property
    def degree(self):
        return max((a + b for a, b in self.terms), default=0)

    def __call__(self, points):
        p = np.asarray(points, dtype=float).reshape(-1, 2) - self.origin
        out = np.zeros(len(p))
        for (a, b), c in self.terms.items():
            out += c * p[:, 0] ** a * p[:, 1] ** b
        return out

    def sup_bound(self):
        return sum(abs(c) * self.radius ** (a + b) for (a, b), c in self.terms.items())

    def describe(self):
        return {"kind": "polynomial", "terms": [[a, b, c] for (a, b), c in sorted(self.terms.items())],
                "origin": self.origin.tolist()}


class Sinusoid(ScalarField):
    """amp * sin(2 pi (freq . x) + phase)."""

    has_trace = True

    def __init__(self, freq=(1.0, 0.0), phase=0.0, amp=1.0):
        self.freq = np.asarray(freq, dtype=float)
        self.phase = float(phase)
        self.amp = float(amp)
        self.holder = (1.0, abs(self.amp) * 2 * math.pi * float(np.hypot(*self.freq)))

    def __call__(self, points):
        p = np.asarray(points, dtype=float).reshape(-1, 2)
        return self.amp * np.sin(2 * math.pi * (p @ self.freq) + self.phase)

    def sup_bound(self):
        return abs(self.amp)

    def describe(self):
        return {"kind": "sinusoid", "freq": self.freq.tolist(), "phase": self.phase, "amp": self.amp}


class Abs(ScalarField):
    """Crease |n . (x - x0)| along a line."""

    has_trace = True

    def __init__(self, normal=(1.0, 0.0), origin=(0.0, 0.0)):
        self.normal = np.asarray(normal, dtype=float)
        self.origin = np.asarray(origin, dtype=float)
        self.holder = (1.0, float(np.hypot(*self.normal)))

    def __call__(self, points):
        p = np.asarray(points, dtype=float).reshape(-1, 2)
        return np.abs((p - self.origin) @ self.normal)

    def describe(self):
        return {"kind": "abs", "normal": self.normal.tolist(), "origin": self.origin.tolist()}


class HalfPlane(ScalarField):
    """Indicator of {y > level}; no trace on the line, no Hoelder bound."""

    def __init__(self, level=0.0):
        self.level = float(level)

    def __call__(self, points):
        p = np.asarray(points, dtype=float).reshape(-1, 2)
        return (p[:, 1] > self.level).astype(float)

    def sup_bound(self):
        return 1.0

    def describe(self):
        return {"kind": "halfplane", "level": self.level}


class Bump(ScalarField):
    """1 on the sup-ball of radius ``inner`` around ``center``, 0 beyond ``outer``."""

    has_trace = True

    def __init__(self, center=(0.0, 0.0), inner=0.8, outer=1.0):
        if not 0 < inner < outer:
            raise ValueError("need 0 < inner < outer")
        self.center = np.asarray(center, dtype=float)
        self.inner = float(inner)
        self.outer = float(outer)
        self.holder = (1.0, math.sqrt(2) * STEP_SLOPE / (self.outer - self.inner))

    def __call__(self, points):
        p = np.asarray(points, dtype=float).reshape(-1, 2)
        r = np.max(np.abs(p - self.center), axis=1)
        return smooth_step((r - self.inner) / (self.outer - self.inner))

    def sup_bound(self):
        return 1.0

    def describe(self):
        return {"kind": "bump", "center": self.center.tolist(), "inner": self.inner, "outer": self.outer}


class DistancePower(ScalarField):
    """dist(x, S)^alpha in the sup norm; zero trace on S for alpha > 0."""

    has_trace = True

    def __init__(self, S, alpha, reach=4.0):
        if alpha <= 0:
            raise ValueError("alpha must be positive")
        self.S = S
        self.alpha = float(alpha)
        self.reach = float(reach)
        # dist is 1-Lipschitz (sup <= euclid); t -> t^alpha is alpha-Hoelder
        if self.alpha <= 1:
            self.holder = (self.alpha, 1.0)
        else:
            self.holder = (1.0, self.alpha * self.reach ** (self.alpha - 1))

    def __call__(self, points):
        return self.S.distance(np.asarray(points, dtype=float).reshape(-1, 2)) ** self.alpha

    def trace(self, points):
        return np.zeros(len(np.asarray(points).reshape(-1, 2)))

    def sup_bound(self):
        return self.reach**self.alpha

    def describe(self):
        return {"kind": "distance_power", "alpha": self.alpha, "set": self.S.family,
                "depth": self.S.depth_m}


def _combine_holder(parts):
    """Hoelder bound of a product of bounded Hoelder fields on |h| <= 8."""
    expo, const = 1.0, 0.0
    for i, f in enumerate(parts):
        if f.holder is None:
            return None
        b, h = f.holder
        others = 1.0
        for j, g in enumerate(parts):
            if j != i:
                others *= g.sup_bound()
        if not math.isfinite(others):
            return None
        expo = min(expo, b)
        const += h * others
    # the smallest exponent dominates for |h| <= 8: |h|^b <= 8^(b - b_min) |h|^b_min
    bmax = max(f.holder[0] for f in parts)
    return expo, const * 8 ** (bmax - expo)


class Product(ScalarField):
    def __init__(self, *factors):
        flat = []
        for f in factors:
            flat.extend(f.factors if isinstance(f, Product) else [f])
        self.factors = flat
        self.holder = _combine_holder(flat)
        self.has_trace = all(f.has_trace for f in flat)

    def __call__(self, points):
        out = self.factors[0](points)
        for f in self.factors[1:]:
            out = out * f(points)
        return out

    def trace(self, points):
        out = self.factors[0].trace(points)
        for f in self.factors[1:]:
            out = out * f.trace(points)
        return out

    def sup_bound(self):
        return float(np.prod([f.sup_bound() for f in self.factors]))

    def describe(self):
        return {"kind": "product", "factors": [f.describe() for f in self.factors]}


class LinearCombination(ScalarField):
    def __init__(self, terms):
        self.terms = [(float(a), f) for a, f in terms]
        hs = [f.holder for _, f in self.terms]
        if any(h is None for h in hs):
            self.holder = None
        else:
            b = min(h[0] for h in hs)
            bmax = max(h[0] for h in hs)
            self.holder = (b, sum(abs(a) * h[1] for (a, _), h in zip(self.terms, hs)) * 8 ** (bmax - b))
        self.has_trace = all(f.has_trace for _, f in self.terms)

    def __call__(self, points):
        out = 0.0
        for a, f in self.terms:
            out = out + a * f(points)
        return out

    def trace(self, points):
        out = 0.0
        for a, f in self.terms:
            out = out + a * f.trace(points)
        return out

    def sup_bound(self):
        return sum(abs(a) * f.sup_bound() for a, f in self.terms)

    def describe(self):
        return {"kind": "linear", "terms": [[a, f.describe()] for a, f in self.terms]}


def field_from_spec(spec, S=None, s=None):
    """Build a field from a JSON-style dict (the test-family configuration format).

    A distance power may give ``alpha_offset`` instead of ``alpha``; the
    exponent is then s + alpha_offset for the smoothness ``s`` in force.
    """
    kind = spec["kind"]
    if kind == "constant":
        return Constant(spec["value"])
    if kind == "polynomial":
        return Monomials({(a, b): c for a, b, c in spec["terms"]}, spec.get("origin", (0.0, 0.0)))
    if kind == "sinusoid":
        return Sinusoid(spec.get("freq", (1.0, 0.0)), spec.get("phase", 0.0), spec.get("amp", 1.0))
    if kind == "bump":
        return Bump(spec.get("center", (0.0, 0.0)), spec.get("inner", 0.8), spec.get("outer", 1.0))
    if kind == "distance_power":
        if S is None:
            raise ValueError("distance_power needs a set")
        if "alpha" in spec:
            return DistancePower(S, spec["alpha"])
        if s is None:
            raise ValueError("alpha_offset needs the smoothness s")
        return DistancePower(S, s + spec["alpha_offset"])
    if kind == "abs":
        return Abs(spec.get("normal", (1.0, 0.0)), spec.get("origin", (0.0, 0.0)))
    if kind == "halfplane":
        return HalfPlane(spec.get("level", 0.0))
    if kind == "product":
        return Product(*[field_from_spec(f, S, s) for f in spec["factors"]])
    if kind == "linear":
        return LinearCombination([(a, field_from_spec(f, S, s)) for a, f in spec["terms"]])
    raise ValueError(f"unknown field kind {kind!r}")
