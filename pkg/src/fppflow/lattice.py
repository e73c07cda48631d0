"""Rescaled lattice graphs and the discrete versions of a polytopal domain."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .polytope import ConvexPatch, ConvexPolytope, convex_hull_distance, minkowski_cube
from .regions import OpenUnion, Region

TOL = 1e-9


# --------------------------------------------------------------------------
# continuous domain
# --------------------------------------------------------------------------

@dataclass(eq=False)
class ContinuousDomain:
    """Open polytopal domain with source and sink patches on its boundary.

    ``pieces`` are convex polytopes whose union (interior of the closure)
    is Omega; ``source`` and ``sink`` are closed convex facet patches whose
    relative interiors form Gamma^1 and Gamma^2.
    """

    pieces: list
    source: list
    sink: list
    name: str = ""

    @property
    def dim(self) -> int:
        return self.pieces[0].dim

    @cached_property
    def separation(self) -> float:
        """Euclidean distance between the source and sink patches."""
        return min(convex_hull_distance(a.vertices, b.vertices) for a in self.source for b in self.sink)

    @cached_property
    def region(self) -> OpenUnion:
        return OpenUnion.of(self.pieces)

    def bbox(self) -> tuple[np.ndarray, np.ndarray]:
        V = np.vstack([P.vertices for P in self.pieces])
        return V.min(axis=0), V.max(axis=0)

    def contains(self, X: np.ndarray, closed: bool = False) -> np.ndarray:
        X = np.atleast_2d(X)
        out = np.zeros(len(X), dtype=bool)
        for P in self.pieces:
            out |= P.contains(X, strict=not closed)
        return out

    def distance(self, X: np.ndarray) -> np.ndarray:
        return np.min([P.distance(X) for P in self.pieces], axis=0)

    def validate(self) -> "ContinuousDomain":
        d = self.dim
        if d < 2:
            raise ValueError("dimension must be at least 2")
        if any(P.dim != d for P in self.pieces) or any(g.dim != d for g in self.source + self.sink):
            raise ValueError("mixed dimensions in domain description")
        if not self.source or not self.sink:
            raise ValueError("source and sink patches must be nonempty")
        for patch in self.source + self.sink:
            if not self._on_boundary(patch):
                raise ValueError("patch does not lie on the boundary of the domain")
        if self._patches_overlap():
            raise ValueError("source and sink patches intersect")
        if not self._connected():
            raise ValueError("domain is not connected")
        return self

    def _on_boundary(self, patch: ConvexPatch) -> bool:
        pts = patch.sample(16, seed=1)
        c = patch.vertices.mean(axis=0)
        pts = c + (1 - 1e-6) * (pts - c)  # relative interior
        nrm = patch.normal()
        lo, hi = self.bbox()
        eps = 1e-6 * float(np.max(hi - lo))
        a = self.contains(pts + eps * nrm)
        b = self.contains(pts - eps * nrm)
        return bool(np.all(a ^ b))

    def _patches_overlap(self) -> bool:
        for a in self.source:
            for b in self.sink:
                if convex_hull_distance(a.vertices, b.vertices) > TOL:
                    continue
                if abs(abs(float(a.normal() @ b.normal())) - 1.0) > 1e-9:
                    continue  # meet along a lower-dimensional set only
                # coplanar patches: overlap iff relative interiors meet
                c = a.vertices.mean(axis=0)
                pts = c + (1 - 1e-6) * (a.sample(64, seed=2) - c)
                if np.any(b.linf_thickened(1e-12).contains(pts, strict=True)):
                    return True
        return False

    def _connected(self, m: int | None = None) -> bool:
        d = self.dim
        m = m or (96 if d == 2 else 24 if d == 3 else 8)
        lo, hi = self.bbox()
        step = float(np.max(hi - lo)) / m
        axes = [np.arange(l + step / 2, h, step) for l, h in zip(lo, hi)]
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), -1)
        inside = self.contains(grid.reshape(-1, d)).reshape(grid.shape[:-1])
        if not inside.any():
            return False
        from scipy.ndimage import label
        _, k = label(inside)
        return k == 1

    # --- serialisation -------------------------------------------------
    def to_dict(self) -> dict:
        return {"dimension": self.dim, "name": self.name,
                "polytopes": [{"vertices": P.vertices.tolist()} for P in self.pieces],
                "source": [g.to_dict() for g in self.source],
                "sink": [g.to_dict() for g in self.sink]}

    @classmethod
    def from_dict(cls, spec: dict) -> "ContinuousDomain":
        pieces = [ConvexPolytope.from_dict(p) for p in spec["polytopes"]]

        def patches(items):
            out = []
            for it in items:
                if "vertices" in it:
                    out.append(ConvexPatch.of(it["vertices"]))
                else:
                    P = pieces[int(it.get("polytope", 0))]
                    nrm = np.asarray(it["normal"], dtype=float)
                    nrm = nrm / np.linalg.norm(nrm)
                    i = int(np.argmax(P.A @ nrm))
                    if P.A[i] @ nrm < 1 - 1e-9:
                        raise ValueError(f"no facet with outward normal {it['normal']}")
                    out.append(ConvexPatch.of(P.facet_vertices(i)))
            return out

        dom = cls(pieces, patches(spec["source"]), patches(spec["sink"]), spec.get("name", ""))
        if "dimension" in spec and int(spec["dimension"]) != dom.dim:
            raise ValueError("declared dimension does not match polytopes")
        return dom.validate()

    @classmethod
    def load(cls, path) -> "ContinuousDomain":
        return cls.from_dict(json.loads(Path(path).read_text()))

    @classmethod
    def box(cls, lo, hi, axis: int = 0, name: str = "box") -> "ContinuousDomain":
        """Box with source on the face {x_axis = lo} and sink on {x_axis = hi}."""
        P = ConvexPolytope.box(lo, hi)
        d = P.dim
        e = np.zeros(d)
        e[axis] = 1.0
        src = ConvexPatch.of(P.facet_vertices(int(np.argmax(P.A @ -e))))
        snk = ConvexPatch.of(P.facet_vertices(int(np.argmax(P.A @ e))))
        return cls([P], [src], [snk], name)

    @classmethod
    def unit_square(cls) -> "ContinuousDomain":
        return cls.box([0, 0], [1, 1], name="unit-square")


# --------------------------------------------------------------------------
# lattice graphs
# --------------------------------------------------------------------------

def _encode(coords: np.ndarray) -> np.ndarray:
    """Order-preserving int64 key of integer coordinates (lexicographic)."""
    coords = np.asarray(coords, dtype=np.int64)
    d = coords.shape[1]
    bits = 62 // d
    off = np.int64(1) << (bits - 1)
    key = np.zeros(len(coords), dtype=np.int64)
    for j in range(d):
        key = (key << bits) | (coords[:, j] + off)
    return key


@dataclass(eq=False)
class LatticeGraph:
    """Finite subgraph of Z^d/n: vertices by integer coordinates, point i/n.

    Vertices are sorted lexicographically; edges join vertices at L1
    distance 1/n, stored with the smaller endpoint first and ordered by
    (lower endpoint, axis).
    """

    n: int
    coords: np.ndarray   # (V, d) int64
    edges: np.ndarray = field(init=False)   # (E, 2) vertex indices
    edge_axis: np.ndarray = field(init=False)

    def __post_init__(self):
        c = np.asarray(self.coords, dtype=np.int64)
        if c.ndim != 2:
            c = c.reshape(len(c), -1)
        keys = _encode(c)
        order = np.argsort(keys, kind="stable")
        keys = keys[order]
        if len(keys) > 1 and np.any(keys[1:] == keys[:-1]):
            keep = np.r_[True, keys[1:] != keys[:-1]]
            order, keys = order[keep], keys[keep]
        self.coords = c[order]
        self._keys = keys
        lows, axes = [], []
        for ax in range(self.dim):
            nb = self.coords.copy()
            nb[:, ax] += 1
            j = self.index_of(nb)
            ok = j >= 0
            lows.append(np.stack([np.flatnonzero(ok), j[ok]], 1))
            axes.append(np.full(int(ok.sum()), ax, dtype=np.int64))
        E = np.concatenate(lows) if lows else np.zeros((0, 2), np.int64)
        A = np.concatenate(axes) if axes else np.zeros(0, np.int64)
        o = np.lexsort((A, E[:, 0]))
        self.edges = E[o].astype(np.int64)
        self.edge_axis = A[o]

    @property
    def dim(self) -> int:
        return self.coords.shape[1]

    @property
    def num_vertices(self) -> int:
        return len(self.coords)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def points(self) -> np.ndarray:
        return self.coords / self.n

    @property
    def edge_lower(self) -> np.ndarray:
        return self.coords[self.edges[:, 0]]

    def edge_endpoints(self) -> tuple[np.ndarray, np.ndarray]:
        return self.points[self.edges[:, 0]], self.points[self.edges[:, 1]]

    def edge_midpoints(self) -> np.ndarray:
        P0, P1 = self.edge_endpoints()
        return 0.5 * (P0 + P1)

    def index_of(self, coords: np.ndarray) -> np.ndarray:
        """Vertex indices of integer coordinates, -1 where absent."""
        k = _encode(np.atleast_2d(coords))
        pos = np.searchsorted(self._keys, k)
        pos = np.minimum(pos, len(self._keys) - 1)
        if len(self._keys) == 0:
            return np.full(len(k), -1)
        return np.where(self._keys[pos] == k, pos, -1)

    def edge_keys(self) -> np.ndarray:
        """Int64 key per edge (lower endpoint, axis), globally consistent."""
        return _encode(np.c_[self.edge_lower, self.edge_axis])

    def edge_index(self, lower: np.ndarray, axis: np.ndarray) -> np.ndarray:
        """Edge indices for geometric edges given as (lower endpoint, axis); -1 if absent."""
        ek = self.edge_keys()
        k = _encode(np.c_[np.atleast_2d(lower), np.asarray(axis)])
        pos = np.minimum(np.searchsorted(ek, k), max(len(ek) - 1, 0))
        if len(ek) == 0:
            return np.full(len(k), -1)
        return np.where(ek[pos] == k, pos, -1)

    def boundary_vertices(self) -> np.ndarray:
        """Mask of vertices with fewer than 2d neighbours in the graph."""
        deg = np.bincount(self.edges.ravel(), minlength=self.num_vertices)
        return deg < 2 * self.dim

    def components(self, drop_edges: np.ndarray | None = None) -> np.ndarray:
        keep = np.ones(self.num_edges, dtype=bool)
        if drop_edges is not None and len(drop_edges):
            keep[np.asarray(drop_edges)] = False
        E = self.edges[keep]
        V = self.num_vertices
        adj = coo_matrix((np.ones(len(E)), (E[:, 0], E[:, 1])), shape=(V, V))
        return connected_components(adj, directed=False)[1]


def box_graph(lo, hi, n: int) -> LatticeGraph:
    """All lattice points i/n with integer lo <= i <= hi (componentwise)."""
    axes = [np.arange(int(a), int(b) + 1) for a, b in zip(lo, hi)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, len(axes))
    return LatticeGraph(n, grid)


def points_box(lo: np.ndarray, hi: np.ndarray, n: int, pad: int = 1) -> np.ndarray:
    """Integer coordinates of every lattice point in the box [lo, hi] padded by ``pad`` cells."""
    a = np.floor(np.asarray(lo) * n).astype(np.int64) - pad
    b = np.ceil(np.asarray(hi) * n).astype(np.int64) + pad
    axes = [np.arange(x, y + 1) for x, y in zip(a, b)]
    return np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, len(axes))


# --------------------------------------------------------------------------
# discretisation
# --------------------------------------------------------------------------

@dataclass(eq=False)
class LatticeDomain(LatticeGraph):
    """The graph induced on Omega_n with the boundary sets marked."""

    domain: ContinuousDomain | None = None
    gamma: np.ndarray | None = None
    gamma1: np.ndarray | None = None
    gamma2: np.ndarray | None = None
    ambiguous: np.ndarray | None = None

    def vertex_set(self, mask: np.ndarray) -> set:
        return {tuple(int(v) for v in c) for c in self.coords[mask]}


def _near(patches: Sequence[ConvexPatch], X: np.ndarray, r: float) -> np.ndarray:
    """d_inf(x, union of patches) < r."""
    out = np.zeros(len(X), dtype=bool)
    for g in patches:
        out |= g.linf_thickened(r).contains(X, strict=True)
    return out


def omega_mask(domain: ContinuousDomain, X: np.ndarray, n: int) -> np.ndarray:
    """d_inf(x, Omega) < 1/n for points X."""
    out = np.zeros(len(X), dtype=bool)
    for P in domain.pieces:
        out |= minkowski_cube(P.vertices, 1.0 / n).contains(X, strict=True)
    return out


def discretize(domain: ContinuousDomain, n: int) -> LatticeDomain:
    if int(n) < 1:
        raise ValueError("mesh n must be at least 1")
    n = int(n)
    lo, hi = domain.bbox()
    cand = points_box(lo, hi, n, pad=1)
    X = cand / n
    keep = omega_mask(domain, X, n)
    if not keep.any():
        raise ValueError("empty discretization: mesh too coarse for the domain")
    lat = LatticeDomain(n, cand[keep], domain=domain)
    d = lat.dim
    deg = np.bincount(lat.edges.ravel(), minlength=lat.num_vertices)
    gamma = deg < 2 * d
    X = lat.points
    r = 1.0 / n
    near1 = _near(domain.source, X, r)
    near2 = _near(domain.sink, X, r)
    lat.gamma = gamma
    lat.gamma1 = gamma & near1 & ~near2
    lat.gamma2 = gamma & near2 & ~near1
    lat.ambiguous = gamma & near1 & near2
    return lat


def edges_in(region, lat: LatticeGraph, samples: int = 63) -> np.ndarray:
    """Indices of edges whose open segment lies in ``region``.

    ``region`` is a :class:`Region` (decided exactly) or a plain callable
    on points, which is tested on ``samples`` interior points per edge.
    """
    P0, P1 = lat.edge_endpoints()
    if isinstance(region, Region):
        return np.flatnonzero(region.segment_inside(P0, P1))
    if not callable(region):
        raise TypeError("region must be a Region or a callable on points")
    ok = np.ones(lat.num_edges, dtype=bool)
    for t in np.arange(1, samples + 1) / (samples + 1):
        ok &= np.asarray(region(P0 + t * (P1 - P0)), dtype=bool)
    return np.flatnonzero(ok)
