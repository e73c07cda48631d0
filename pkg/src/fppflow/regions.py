"""Point-set regions that can decide whether an edge lies inside them.

An edge <x, y> belongs to a region when the interior of the segment [x, y]
is contained in it.  Every region implements ``segment_inside(P0, P1)``,
vectorised over arrays of segment endpoints.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .polytope import ConvexPolytope

TOL = 1e-9
_GOLD = (np.sqrt(5.0) - 1.0) / 2.0


class Region:
    def segment_inside(self, P0: np.ndarray, P1: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def contains(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __and__(self, other: "Region") -> "Region":
        return Intersection([self, other])


class Everywhere(Region):
    def segment_inside(self, P0, P1):
        return np.ones(len(P0), dtype=bool)

    def contains(self, X):
        return np.ones(len(X), dtype=bool)


@dataclass
class Convex(Region):
    """{x : a_i . x < b_i (strict) or <= b_i} for each row i."""

    A: np.ndarray
    b: np.ndarray
    strict: np.ndarray

    @classmethod
    def open_polytope(cls, P: ConvexPolytope) -> "Convex":
        return cls(P.A, P.b, np.ones(len(P.b), dtype=bool))

    @classmethod
    def closed_polytope(cls, P: ConvexPolytope) -> "Convex":
        return cls(P.A, P.b, np.zeros(len(P.b), dtype=bool))

    @classmethod
    def halfspace(cls, a, c, strict: bool = True) -> "Convex":
        return cls(np.atleast_2d(np.asarray(a, float)), np.atleast_1d(float(c)), np.array([strict]))

    def contains(self, X):
        s = np.atleast_2d(X) @ self.A.T - self.b
        ok = np.where(self.strict, s < -TOL, s <= TOL)
        return np.all(ok, axis=1)

    def interval(self, P0: np.ndarray, P1: np.ndarray):
        """Parameter interval (lo, hi) of the segment inside the set, clipped to [0, 1]."""
        alpha = P0 @ self.A.T - self.b
        beta = (P1 - P0) @ self.A.T
        flat = np.abs(beta) < 1e-14
        with np.errstate(divide="ignore", invalid="ignore"):
            root = -alpha / np.where(flat, 1.0, beta)
        up = np.where(~flat & (beta > 0), root, np.inf)
        down = np.where(~flat & (beta < 0), root, -np.inf)
        lo = np.maximum(down.max(axis=1), 0.0)
        hi = np.minimum(up.min(axis=1), 1.0)
        flat_ok = np.where(self.strict, alpha < -TOL, alpha <= TOL)
        dead = np.any(flat & ~flat_ok, axis=1)
        lo = np.where(dead, 1.0, lo)
        hi = np.where(dead, 0.0, hi)
        return lo, hi

    def segment_inside(self, P0, P1):
        lo, hi = self.interval(P0, P1)
        return (lo <= TOL) & (hi >= 1.0 - TOL)

    def segment_disjoint(self, P0, P1):
        lo, hi = self.interval(P0, P1)
        return hi - lo <= TOL


@dataclass
class OpenUnion(Region):
    """Union of open convex polytopes."""

    parts: list

    @classmethod
    def of(cls, polytopes: Sequence[ConvexPolytope]) -> "OpenUnion":
        return cls([Convex.open_polytope(P) for P in polytopes])

    def contains(self, X):
        out = np.zeros(len(X), dtype=bool)
        for c in self.parts:
            out |= c.contains(X)
        return out

    def segment_inside(self, P0, P1):
        if len(self.parts) == 1:
            return self.parts[0].segment_inside(P0, P1)
        ivs = [c.interval(P0, P1) for c in self.parts]
        return cover_unit_interval(np.stack([i[0] for i in ivs], 1), np.stack([i[1] for i in ivs], 1))

    def segment_disjoint(self, P0, P1):
        out = np.ones(len(P0), dtype=bool)
        for c in self.parts:
            out &= c.segment_disjoint(P0, P1)
        return out


def cover_unit_interval(lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Whether open intervals (lo_j, hi_j) cover the open interval (0, 1), row-wise."""
    empty = hi - lo <= TOL
    lo = np.where(empty, np.inf, lo)
    order = np.argsort(lo, axis=1, kind="stable")
    lo = np.take_along_axis(lo, order, 1)
    hi = np.take_along_axis(hi, order, 1)
    reach = np.zeros(lo.shape[0])
    for j in range(lo.shape[1]):
        ok = np.isfinite(lo[:, j]) & ((lo[:, j] <= TOL) | (lo[:, j] < reach - TOL))
        reach = np.where(ok, np.maximum(reach, hi[:, j]), reach)
    return reach >= 1.0 - TOL


@dataclass
class Intersection(Region):
    parts: list

    def contains(self, X):
        out = np.ones(len(X), dtype=bool)
        for r in self.parts:
            out &= r.contains(X)
        return out

    def segment_inside(self, P0, P1):
        out = np.ones(len(P0), dtype=bool)
        for r in self.parts:
            idx = np.flatnonzero(out)
            if idx.size == 0:
                break
            out[idx] = r.segment_inside(P0[idx], P1[idx])
        return out


@dataclass
class Difference(Region):
    """``base`` minus a union of convex sets."""

    base: Region
    holes: list

    def contains(self, X):
        out = self.base.contains(X)
        for h in self.holes:
            out &= ~h.contains(X)
        return out

    def segment_inside(self, P0, P1):
        out = self.base.segment_inside(P0, P1)
        for h in self.holes:
            idx = np.flatnonzero(out)
            if idx.size == 0:
                break
            out[idx] = h.segment_disjoint(P0[idx], P1[idx])
        return out


# --------------------------------------------------------------------------
# distance bands around a union of convex polytopes
# --------------------------------------------------------------------------

def _along(P0, P1, t):
    return P0 + t[:, None] * (P1 - P0)


def segment_min_distance(P: ConvexPolytope, P0: np.ndarray, P1: np.ndarray, iters: int = 64):
    """(min over t of d(x(t), P), argmin) by golden-section search; d is convex in t."""
    a = np.zeros(len(P0))
    b = np.ones(len(P0))
    c = b - _GOLD * (b - a)
    e = a + _GOLD * (b - a)
    fc = P.distance(_along(P0, P1, c))
    fe = P.distance(_along(P0, P1, e))
    for _ in range(iters):
        left = fc <= fe
        b = np.where(left, e, b)
        a = np.where(left, a, c)
        new = np.where(left, b - _GOLD * (b - a), a + _GOLD * (b - a))
        fnew = P.distance(_along(P0, P1, new))
        c, e, fc, fe = (np.where(left, new, e), np.where(left, c, new),
                        np.where(left, fnew, fe), np.where(left, fc, fnew))
    t = 0.5 * (a + b)
    ft = P.distance(_along(P0, P1, t))
    f0 = P.distance(P0)
    f1 = P.distance(P1)
    stack = np.stack([ft, f0, f1], 1)
    k = np.argmin(stack, axis=1)
    tbest = np.choose(k, [t, np.zeros_like(t), np.ones_like(t)])
    return stack.min(axis=1), tbest


def _bisect(P, P0, P1, lo, hi, level, increasing: bool, iters: int = 60):
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        f = P.distance(_along(P0, P1, mid))
        below = f < level
        if increasing:
            lo, hi = np.where(below, mid, lo), np.where(below, hi, mid)
        else:
            lo, hi = np.where(below, lo, mid), np.where(below, mid, hi)
    return 0.5 * (lo + hi)


def sublevel_interval(P: ConvexPolytope, P0, P1, level: float, fmin=None, tmin=None):
    """Parameter interval where d(x(t), P) < level (a single interval by convexity)."""
    if fmin is None:
        fmin, tmin = segment_min_distance(P, P0, P1)
    f0 = P.distance(P0)
    f1 = P.distance(P1)
    empty = fmin >= level - TOL
    lo = np.where(f0 < level, 0.0, _bisect(P, P0, P1, np.zeros_like(tmin), tmin, level, increasing=False))
    hi = np.where(f1 < level, 1.0, _bisect(P, P0, P1, tmin, np.ones_like(tmin), level, increasing=True))
    return np.where(empty, 1.0, lo), np.where(empty, 0.0, hi)


@dataclass
class DistanceBand(Region):
    """{x : lo <= d(x, P) < hi}, P a union of convex polytopes.

    With ``exclude_interior`` the interior of P is removed as well (used for
    the innermost band, which must not swallow P itself).
    """

    parts: Sequence[ConvexPolytope]
    lo: float
    hi: float
    exclude_interior: bool = False
    _interiors: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        self._interiors = [Convex.open_polytope(P) for P in self.parts]

    def distance(self, X):
        return np.min([P.distance(X) for P in self.parts], axis=0)

    def contains(self, X):
        dd = self.distance(X)
        ok = (dd >= self.lo - TOL) & (dd < self.hi - TOL)
        if self.exclude_interior:
            for c in self._interiors:
                ok &= ~c.contains(X)
        return ok

    def segment_inside(self, P0, P1):
        n = len(P0)
        out = np.zeros(n, dtype=bool)
        if n == 0:
            return out
        L = np.linalg.norm(P1 - P0, axis=1)
        d0 = self.distance(P0)
        d1 = self.distance(P1)
        # 1-Lipschitz prefilter
        cand = (np.minimum(d0, d1) >= self.lo - L - TOL) & (np.maximum(d0, d1) <= self.hi + L + TOL)
        idx = np.flatnonzero(cand)
        if idx.size == 0:
            return out
        Q0, Q1 = P0[idx], P1[idx]
        mins, los, his = [], [], []
        for P in self.parts:
            fmin, tmin = segment_min_distance(P, Q0, Q1)
            lo, hi = sublevel_interval(P, Q0, Q1, self.hi, fmin, tmin)
            mins.append(fmin)
            los.append(lo)
            his.append(hi)
        ok = np.min(mins, axis=0) >= self.lo - TOL
        ok &= cover_unit_interval(np.stack(los, 1), np.stack(his, 1))
        if self.exclude_interior:
            for c in self._interiors:
                ok &= c.segment_disjoint(Q0, Q1)
        out[idx] = ok
        return out
