"""Convex polytopes in R^d (d = 2, 3 fully supported).

A :class:`ConvexPolytope` keeps both representations: unit-normal
half-spaces ``A x <= b`` and its vertex list.  Lower-dimensional convex
pieces (boundary patches) are represented by :class:`ConvexPatch`, a vertex
list spanning a hyperplane.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog, minimize
from scipy.spatial import ConvexHull, HalfspaceIntersection

TOL = 1e-9


def _unique_rows(X: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    keep: list[np.ndarray] = []
    for x in X:
        if not any(np.max(np.abs(x - y)) < tol for y in keep):
            keep.append(x)
    return np.array(keep)


def _merge_planes(eqs: np.ndarray, tol: float = 1e-9) -> tuple[np.ndarray, np.ndarray]:
    """Deduplicate hull facet equations (qhull splits facets into simplices)."""
    A, b = [], []
    for row in eqs:
        a, c = row[:-1], -row[-1]
        norm = np.linalg.norm(a)
        a, c = a / norm, c / norm
        if not any(np.allclose(a, a2, atol=tol) and abs(c - c2) < tol for a2, c2 in zip(A, b)):
            A.append(a)
            b.append(c)
    return np.array(A), np.array(b)


def hyperplane_basis(normal: np.ndarray) -> np.ndarray:
    """Orthonormal (d-1, d) basis of the hyperplane orthogonal to ``normal``.

    Deterministic: Gram-Schmidt on the standard basis, skipping the axis most
    aligned with the normal.
    """
    normal = np.asarray(normal, dtype=float)
    normal = normal / np.linalg.norm(normal)
    d = normal.size
    skip = int(np.argmax(np.abs(normal)))
    vecs = [normal]
    for i in range(d):
        if i == skip:
            continue
        e = np.zeros(d)
        e[i] = 1.0
        for v in vecs:
            e = e - np.dot(e, v) * v
        vecs.append(e / np.linalg.norm(e))
    return np.array(vecs[1:])


@dataclass(frozen=True, eq=False)
class ConvexPolytope:
    """Full-dimensional bounded convex polytope."""

    A: np.ndarray   # (m, d) unit outward normals
    b: np.ndarray   # (m,)
    vertices: np.ndarray  # (k, d)

    @property
    def dim(self) -> int:
        return self.A.shape[1]

    @classmethod
    def from_vertices(cls, vertices) -> "ConvexPolytope":
        V = np.asarray(vertices, dtype=float)
        d = V.shape[1]
        if V.shape[0] < d + 1 or np.linalg.matrix_rank(V[1:] - V[0], tol=1e-12) < d:
            raise ValueError("degenerate polytope: vertices do not span R^d")
        hull = ConvexHull(V)
        A, b = _merge_planes(hull.equations)
        return cls(A, b, _unique_rows(V[hull.vertices]))

    @classmethod
    def from_halfspaces(cls, A, b) -> "ConvexPolytope":
        A = np.asarray(A, dtype=float)
        b = np.asarray(b, dtype=float)
        norms = np.linalg.norm(A, axis=1)
        A, b = A / norms[:, None], b / norms
        d = A.shape[1]
        # Chebyshev centre gives a strictly interior point
        res = linprog(np.r_[np.zeros(d), -1.0], A_ub=np.c_[A, np.ones(len(A))], b_ub=b,
                      bounds=[(None, None)] * d + [(0, None)], method="highs")
        if res.status != 0 or res.x[-1] <= 1e-12:
            raise ValueError("degenerate or unbounded polytope")
        hs = HalfspaceIntersection(np.c_[A, -b], res.x[:d])
        return cls.from_vertices(hs.intersections)

    @classmethod
    def box(cls, lo, hi) -> "ConvexPolytope":
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        corners = np.array(list(itertools.product(*zip(lo, hi))))
        return cls.from_vertices(corners)

    # --- predicates -----------------------------------------------------
    def contains(self, X: np.ndarray, strict: bool = False, tol: float = TOL) -> np.ndarray:
        X = np.atleast_2d(X)
        s = X @ self.A.T - self.b
        if strict:
            return np.all(s < -tol, axis=1)
        return np.all(s <= tol, axis=1)

    def volume(self) -> float:
        return float(ConvexHull(self.vertices).volume)

    def centroid(self) -> np.ndarray:
        return self.vertices.mean(axis=0)

    def facet_vertices(self, i: int, tol: float = 1e-8) -> np.ndarray:
        on = np.abs(self.vertices @ self.A[i] - self.b[i]) < tol
        V = self.vertices[on]
        if self.dim == 3 and len(V) > 2:
            basis = hyperplane_basis(self.A[i])
            uv = (V - V.mean(axis=0)) @ basis.T
            V = V[np.argsort(np.arctan2(uv[:, 1], uv[:, 0]))]
        return V

    def facet_area(self, i: int) -> float:
        V = self.facet_vertices(i)
        if self.dim == 2:
            return float(np.linalg.norm(V[1] - V[0])) if len(V) >= 2 else 0.0
        if self.dim == 3:
            basis = hyperplane_basis(self.A[i])
            uv = V @ basis.T
            x, y = uv[:, 0], uv[:, 1]
            return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))
        basis = hyperplane_basis(self.A[i])
        return float(ConvexHull(V @ basis.T).volume)

    def segments(self) -> tuple[np.ndarray, np.ndarray]:
        """Edges (1-faces) as two endpoint arrays."""
        d = self.dim
        P0, P1 = [], []
        V = self.vertices
        act = np.abs(V @ self.A.T - self.b) < 1e-8   # (k, m) incidence
        for i, j in itertools.combinations(range(len(V)), 2):
            common = act[i] & act[j]
            if common.sum() >= d - 1 and np.linalg.matrix_rank(self.A[common], tol=1e-9) >= d - 1:
                P0.append(V[i])
                P1.append(V[j])
        return np.array(P0), np.array(P1)

    # --- distances ------------------------------------------------------
    def distance(self, X: np.ndarray) -> np.ndarray:
        """Euclidean distance from points to the polytope (0 inside)."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        d = self.dim
        inside = self.contains(X, tol=0.0)
        S0, S1 = self._segs()
        D = _point_segment_dist(X, S0, S1).min(axis=1)
        if d == 3:
            for i in range(len(self.A)):
                s = X @ self.A[i] - self.b[i]
                proj = X - s[:, None] * self.A[i]
                ok = s > 0
                if not ok.any():
                    continue
                # projection inside the facet: check the other constraints
                inner = np.all(proj @ np.delete(self.A, i, 0).T - np.delete(self.b, i) <= 1e-12, axis=1)
                hit = ok & inner
                D = np.where(hit, np.minimum(D, s), D)
        elif d > 3:
            D = np.array([_qp_distance(x, self.vertices) for x in X])
        return np.where(inside, 0.0, D)

    def _segs(self):
        cache = self.__dict__.get("_seg_cache")
        if cache is None:
            cache = self.segments()
            object.__setattr__(self, "_seg_cache", cache)
        return cache

    def to_dict(self) -> dict:
        return {"halfspaces": {"A": self.A.tolist(), "b": self.b.tolist()},
                "vertices": self.vertices.tolist()}

    @classmethod
    def from_dict(cls, spec: dict) -> "ConvexPolytope":
        if "vertices" in spec:
            return cls.from_vertices(spec["vertices"])
        hs = spec["halfspaces"]
        return cls.from_halfspaces(hs["A"], hs["b"])


@dataclass(frozen=True, eq=False)
class ConvexPatch:
    """Closed convex piece of a hyperplane, given by its vertices."""

    vertices: np.ndarray

    @classmethod
    def of(cls, vertices) -> "ConvexPatch":
        return cls(np.asarray(vertices, dtype=float))

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    def normal(self) -> np.ndarray:
        V = self.vertices
        d = V.shape[1]
        _, _, vt = np.linalg.svd(V[1:] - V[0])
        return vt[d - 1] if vt.shape[0] >= d else vt[-1]

    def measure(self) -> float:
        V = self.vertices
        d = V.shape[1]
        if d == 2:
            return float(np.max(np.linalg.norm(V[:, None] - V[None], axis=2)))
        basis = hyperplane_basis(self.normal())
        uv = V @ basis.T
        return float(ConvexHull(uv).volume)

    def linf_thickened(self, r: float) -> ConvexPolytope:
        """Minkowski sum with the closed cube [-r, r]^d."""
        return minkowski_cube(self.vertices, r)

    def sample(self, m: int, seed: int = 0) -> np.ndarray:
        """Deterministic points spread over the patch (vertices included)."""
        rng = np.random.default_rng(seed)
        V = self.vertices
        w = rng.dirichlet(np.ones(len(V)), size=m)
        return np.vstack([V, w @ V])

    def to_dict(self) -> dict:
        return {"vertices": self.vertices.tolist()}


def minkowski_cube(vertices: np.ndarray, r: float) -> ConvexPolytope:
    V = np.asarray(vertices, dtype=float)
    d = V.shape[1]
    corners = np.array(list(itertools.product((-r, r), repeat=d)))
    return ConvexPolytope.from_vertices((V[:, None, :] + corners[None]).reshape(-1, d))


def _point_segment_dist(X: np.ndarray, S0: np.ndarray, S1: np.ndarray) -> np.ndarray:
    """(N, m) distances from points to segments."""
    D = S1 - S0
    L2 = np.einsum("ij,ij->i", D, D)
    L2 = np.where(L2 > 0, L2, 1.0)
    t = np.einsum("nmk,mk->nm", X[:, None, :] - S0[None], D) / L2
    t = np.clip(t, 0.0, 1.0)
    P = S0[None] + t[..., None] * D[None]
    return np.linalg.norm(X[:, None, :] - P, axis=2)


def _qp_distance(x: np.ndarray, V: np.ndarray) -> float:
    k = len(V)
    res = minimize(lambda w: np.sum((w @ V - x) ** 2), np.full(k, 1.0 / k), method="SLSQP",
                   bounds=[(0, 1)] * k, constraints=[{"type": "eq", "fun": lambda w: w.sum() - 1}],
                   options={"ftol": 1e-14, "maxiter": 500})
    return float(np.sqrt(max(res.fun, 0.0)))


def convex_hull_distance(V1, V2) -> float:
    """Euclidean distance between conv(V1) and conv(V2)."""
    V1 = np.atleast_2d(np.asarray(V1, dtype=float))
    V2 = np.atleast_2d(np.asarray(V2, dtype=float))
    k1, k2 = len(V1), len(V2)
    # vertex-to-segment candidates are exact for d <= 2 and a good start otherwise
    if V1.shape[1] == 2:
        best = np.inf
        for A, B in ((V1, V2), (V2, V1)):
            segs = _hull_segments(B)
            if segs is None:
                dd = np.linalg.norm(A[:, None] - B[None], axis=2).min()
            else:
                dd = _point_segment_dist(A, *segs).min()
            best = min(best, float(dd))
        if _hulls_intersect(V1, V2):
            return 0.0
        return best
    w0 = np.r_[np.full(k1, 1.0 / k1), np.full(k2, 1.0 / k2)]

    def f(w):
        diff = w[:k1] @ V1 - w[k1:] @ V2
        return diff @ diff

    res = minimize(f, w0, method="SLSQP", bounds=[(0, 1)] * (k1 + k2),
                   constraints=[{"type": "eq", "fun": lambda w: w[:k1].sum() - 1},
                                {"type": "eq", "fun": lambda w: w[k1:].sum() - 1}],
                   options={"ftol": 1e-16, "maxiter": 1000})
    return float(np.sqrt(max(res.fun, 0.0)))


def _hull_segments(V: np.ndarray):
    """Boundary segments of a 2-D point set's hull (or the segment itself)."""
    if len(V) == 1:
        return None
    if len(V) == 2 or np.linalg.matrix_rank(V[1:] - V[0], tol=1e-12) < 2:
        order = np.argsort(V @ (V[-1] - V[0]))
        return V[order[:1]], V[order[-1:]]
    hull = ConvexHull(V)
    return V[hull.simplices[:, 0]], V[hull.simplices[:, 1]]


def _hulls_intersect(V1: np.ndarray, V2: np.ndarray) -> bool:
    k1, k2 = len(V1), len(V2)
    d = V1.shape[1]
    A_eq = np.zeros((d + 2, k1 + k2))
    A_eq[:d, :k1] = V1.T
    A_eq[:d, k1:] = -V2.T
    A_eq[d, :k1] = 1
    A_eq[d + 1, k1:] = 1
    b_eq = np.r_[np.zeros(d), 1, 1]
    res = linprog(np.zeros(k1 + k2), A_eq=A_eq, b_eq=b_eq, bounds=[(0, None)] * (k1 + k2), method="highs")
    return res.status == 0
