"""Polyhedral sets, their faces, surface measures, coverings and cylinders.

Faces are handled in plane coordinates: a face lying in the hyperplane
{v . x = c} is described by a shapely geometry in the coordinates of
``hyperplane_basis(v)`` around the origin ``c v``.  In dimension 2 the
plane is a line and geometries are collinear LineStrings on the u-axis; in
dimension 3 they are polygons.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import shapely
from scipy.optimize import linprog, minimize, minimize_scalar
from scipy.spatial.transform import Rotation
from shapely.geometry import GeometryCollection, LineString, Polygon

from .polytope import ConvexPatch, ConvexPolytope, convex_hull_distance, hyperplane_basis

TOL = 1e-9
EMPTY = GeometryCollection()
_RAYS = 256


# --------------------------------------------------------------------------
# plane coordinates
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Plane:
    normal: np.ndarray
    offset: float

    @cached_property
    def basis(self) -> np.ndarray:
        return hyperplane_basis(self.normal)

    @property
    def origin(self) -> np.ndarray:
        return self.offset * self.normal

    @property
    def dim(self) -> int:
        return len(self.normal)

    def lift(self, U: np.ndarray) -> np.ndarray:
        U = np.asarray(U, dtype=float).reshape(-1, self.dim - 1)
        return self.origin + U @ self.basis

    def project(self, X: np.ndarray) -> np.ndarray:
        return (np.atleast_2d(X) - self.origin) @ self.basis.T

    def shifted(self, t: float) -> "Plane":
        p = Plane(self.normal, self.offset + t)
        p.__dict__["basis"] = self.basis
        return p


def _interval(a: float, b: float):
    if b - a <= 1e-13:
        return EMPTY
    return LineString([(a, 0.0), (b, 0.0)])


def intervals(g) -> list:
    """Merged (a, b) intervals of a 1-D plane geometry."""
    if g is None or g.is_empty:
        return []
    spans = []
    for part in getattr(g, "geoms", [g]):
        if part.is_empty or part.geom_type not in ("LineString", "LinearRing"):
            continue
        xs = np.asarray(part.coords)[:, 0]
        spans.append((float(xs.min()), float(xs.max())))
    spans.sort()
    out = []
    for a, b in spans:
        if out and a <= out[-1][1] + 1e-12:
            out[-1] = (out[-1][0], max(out[-1][1], b))
        else:
            out.append((a, b))
    return [(a, b) for a, b in out if b - a > 1e-13]


def measure(g, k: int) -> float:
    """(k)-dimensional measure of a plane geometry (k = d - 1)."""
    if g is None or g.is_empty:
        return 0.0
    return float(g.length if k == 1 else g.area)


def _clip_polygon(poly: list, a: np.ndarray, c: float) -> list:
    """Sutherland-Hodgman: keep a . u <= c."""
    out = []
    m = len(poly)
    for i in range(m):
        p, q = poly[i], poly[(i + 1) % m]
        sp, sq = a @ p - c, a @ q - c
        if sp <= 0:
            out.append(p)
        if (sp < 0 < sq) or (sq < 0 < sp):
            t = sp / (sp - sq)
            out.append(p + t * (q - p))
    return out


def section(P: ConvexPolytope, plane: Plane):
    """Closed section P ∩ plane in plane coordinates."""
    s = P.vertices @ plane.normal - plane.offset
    if s.min() > TOL or s.max() < -TOL:
        return EMPTY
    M = P.A @ plane.basis.T
    r = P.b - P.A @ plane.origin
    proj = plane.project(P.vertices)
    flat = np.linalg.norm(M, axis=1) < 1e-12
    if np.any(flat & (r < -TOL)):
        return EMPTY
    M, r = M[~flat], r[~flat]
    k = plane.dim - 1
    if k == 1:
        lo, hi = proj.min() - 1.0, proj.max() + 1.0
        for m, rr in zip(M[:, 0], r):
            if m > 0:
                hi = min(hi, rr / m)
            else:
                lo = max(lo, rr / m)
        return _interval(lo, hi)
    lo, hi = proj.min(axis=0) - 1.0, proj.max(axis=0) + 1.0
    poly = [np.array([lo[0], lo[1]]), np.array([hi[0], lo[1]]),
            np.array([hi[0], hi[1]]), np.array([lo[0], hi[1]])]
    for m, rr in zip(M, r):
        poly = _clip_polygon(poly, m, rr)
        if len(poly) < 3:
            return EMPTY
    g = Polygon(poly)
    return g if g.area > 1e-14 else EMPTY


def _union(gs):
    gs = [g for g in gs if g is not None and not g.is_empty]
    if not gs:
        return EMPTY
    return shapely.union_all(gs)


# --------------------------------------------------------------------------
# polyhedral sets and faces
# --------------------------------------------------------------------------

@dataclass(eq=False)
class Face:
    """Maximal flat piece of a boundary with exterior unit normal."""

    plane: Plane
    geom: object
    area: float
    facets: list   # (polytope index, facet index) contributing

    @property
    def normal(self) -> np.ndarray:
        return self.plane.normal

    def convex_pieces(self) -> list:
        """Vertex arrays (in R^d) of convex pieces whose union contains the face."""
        if self.plane.dim == 2:
            return [self.plane.lift(np.array([[a], [b]])) for a, b in intervals(self.geom)]
        out = []
        for g in getattr(self.geom, "geoms", [self.geom]):
            if g.is_empty:
                continue
            if self.plane.dim == 2:
                continue
            else:
                hull = np.asarray(g.convex_hull.exterior.coords)[:-1]
                out.append(self.plane.lift(hull))
        return out


@dataclass(eq=False)
class PolyhedralSet:
    """Finite union of convex polytopes."""

    polytopes: list
    info: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.polytopes[0].dim

    @property
    def empty(self) -> bool:
        return len(self.polytopes) == 0

    @classmethod
    def halfspace(cls, normal, c: float, within: tuple) -> "PolyhedralSet":
        """{x : normal . x < c} clipped to a box far around ``within`` = (lo, hi)."""
        lo, hi = np.asarray(within[0], float), np.asarray(within[1], float)
        diam = float(np.linalg.norm(hi - lo))
        lo, hi = lo - 2 * diam, hi + 2 * diam
        d = len(lo)
        A = np.vstack([np.eye(d), -np.eye(d), np.asarray(normal, float)[None]])
        b = np.r_[hi, -lo, c / np.linalg.norm(normal)]
        A[-1] /= np.linalg.norm(normal)
        return cls([ConvexPolytope.from_halfspaces(A, b)])

    def contains(self, X, strict: bool = True) -> np.ndarray:
        X = np.atleast_2d(X)
        out = np.zeros(len(X), dtype=bool)
        for P in self.polytopes:
            out |= P.contains(X, strict=strict)
        return out

    def distance(self, X) -> np.ndarray:
        return np.min([P.distance(X) for P in self.polytopes], axis=0)

    def bbox(self):
        V = np.vstack([P.vertices for P in self.polytopes])
        return V.min(axis=0), V.max(axis=0)

    @cached_property
    def _tau(self) -> float:
        lo, hi = self.bbox()
        return 1e-7 * max(1.0, float(np.max(hi - lo)))

    @cached_property
    def facet_pieces(self) -> list:
        """Per convex facet: the part of it lying on the boundary of the union."""
        tau = self._tau
        out = []
        lo = np.array([P.vertices.min(axis=0) for P in self.polytopes]) - 2 * tau
        hi = np.array([P.vertices.max(axis=0) for P in self.polytopes]) + 2 * tau

        def boxes_meet(a, b):
            return bool(np.all(lo[a] <= hi[b]) and np.all(lo[b] <= hi[a]))

        for k, P in enumerate(self.polytopes):
            if P.dim != self.dim:
                raise ValueError("mixed dimensions")
            for i in range(len(P.A)):
                plane = Plane(P.A[i], float(P.b[i]))
                g = section(P, plane)
                if len(self.polytopes) > 1:
                    up, down = plane.shifted(tau), plane.shifted(-tau)
                    near = [j for j in range(len(self.polytopes)) if j != k and boxes_meet(k, j)]
                    cover = [section(self.polytopes[j], up) for j in near]
                    cover += [section(self.polytopes[j], down) for j in near if j < k]
                    cov = _union(cover)
                    if not cov.is_empty:
                        g = g.difference(cov)
                a = measure(g, self.dim - 1)
                out.append((k, i, plane, g, a))
        return out

    def faces(self) -> list:
        """Maximal flat boundary pieces, in a deterministic order."""
        if self.empty:
            return []
        groups: dict = {}
        order = []
        for k, i, plane, g, a in self.facet_pieces:
            if a <= 1e-12:
                continue
            key = tuple(np.round(plane.normal, 9)) + (round(plane.offset, 9),)
            if key not in groups:
                groups[key] = [plane, [], []]
                order.append(key)
            ref = groups[key][0]
            if ref is not plane:
                g = _reproject(g, plane, ref)
            groups[key][1].append(g)
            groups[key][2].append((k, i))
        faces = []
        for key in sorted(order):
            plane, gs, src = groups[key]
            g = _union(gs)
            faces.append(Face(plane, g, measure(g, self.dim - 1), src))
        return faces

    def boundary_area(self) -> float:
        return sum(f.area for f in self.faces())

    def normals(self) -> np.ndarray:
        return np.array([f.normal for f in self.faces()])

    def to_dict(self) -> dict:
        return {"polytopes": [{"halfspaces": {"A": P.A.tolist(), "b": P.b.tolist()}}
                              for P in self.polytopes], "info": _jsonable(self.info)}

    @classmethod
    def from_dict(cls, spec: dict) -> "PolyhedralSet":
        return cls([ConvexPolytope.from_dict(p) for p in spec["polytopes"]], dict(spec.get("info", {})))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _reproject(g, src: Plane, dst: Plane):
    """Move a plane geometry between two numerically-equal plane frames."""
    if g.is_empty:
        return g
    R = src.basis @ dst.basis.T
    shift = (src.origin - dst.origin) @ dst.basis.T
    if src.dim == 2:
        return shapely.transform(g, lambda c: np.c_[c[:, 0] * R[0, 0] + shift[0], c[:, 1]])
    return shapely.transform(g, lambda c: c @ R + shift)


def faces(P: PolyhedralSet) -> list:
    for Q in P.polytopes:
        if Q.vertices.shape[0] < Q.dim + 1:
            raise ValueError("degenerate polytope")
    return P.faces()


def domain_set(domain) -> PolyhedralSet:
    return PolyhedralSet(list(domain.pieces))


# --------------------------------------------------------------------------
# regions evaluated on planes (for clipping surface measures)
# --------------------------------------------------------------------------

class PlaneRegion:
    def section(self, plane: Plane):
        raise NotImplementedError

    def __sub__(self, other):
        return Minus(self, other)

    def __and__(self, other):
        return Both(self, other)


class Everything(PlaneRegion):
    def section(self, plane):
        return None


@dataclass(eq=False)
class OpenPolytopes(PlaneRegion):
    """Interior of a union of convex polytopes."""

    polytopes: list
    tau: float = 1e-7

    def section(self, plane):
        up = _union([section(P, plane.shifted(self.tau)) for P in self.polytopes])
        down = _union([section(P, plane.shifted(-self.tau)) for P in self.polytopes])
        return up.intersection(down)


@dataclass(eq=False)
class Neighborhood(PlaneRegion):
    """Open Euclidean r-neighbourhood V_2(X, r) of a union of convex polytopes."""

    polytopes: list
    r: float

    def section(self, plane):
        return _union([_nbhd_section(P, self.r, plane) for P in self.polytopes])


@dataclass(eq=False)
class Minus(PlaneRegion):
    a: PlaneRegion
    b: PlaneRegion

    def section(self, plane):
        ga, gb = self.a.section(plane), self.b.section(plane)
        if ga is None:
            raise ValueError("cannot subtract from the whole space")
        if gb is None:
            return EMPTY
        return ga.difference(gb)


@dataclass(eq=False)
class Both(PlaneRegion):
    a: PlaneRegion
    b: PlaneRegion

    def section(self, plane):
        ga, gb = self.a.section(plane), self.b.section(plane)
        if ga is None:
            return gb
        if gb is None:
            return ga
        return ga.intersection(gb)


def _nbhd_section(P: ConvexPolytope, r: float, plane: Plane):
    s = P.vertices @ plane.normal - plane.offset
    proj = plane.project(P.vertices)
    sec = section(P, plane)
    if not sec.is_empty:
        c0 = np.asarray(sec.centroid.coords)[0][: plane.dim - 1]
        f0 = 0.0
    else:
        j = int(np.argmin(np.abs(s)))
        c0 = proj[j]
        f0 = float(P.distance(plane.lift(c0))[0])
    if f0 >= r - TOL:
        return EMPTY
    R = float(np.max(np.linalg.norm(proj - c0, axis=1))) + r + 1.0
    if plane.dim == 2:
        dirs = np.array([[-1.0], [1.0]])
    else:
        ang = np.arange(_RAYS) * (2 * np.pi / _RAYS)
        dirs = np.c_[np.cos(ang), np.sin(ang)]
    lo = np.zeros(len(dirs))
    hi = np.full(len(dirs), R)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        f = P.distance(plane.lift(c0 + mid[:, None] * dirs))
        inside = f < r
        lo = np.where(inside, mid, lo)
        hi = np.where(inside, hi, mid)
    ends = c0 + lo[:, None] * dirs
    if plane.dim == 2:
        return _interval(float(ends[0, 0]), float(ends[1, 0]))
    g = Polygon(ends)
    return g if g.is_valid else g.buffer(0)


def clip_surface_measure(P: PolyhedralSet, region: PlaneRegion) -> float:
    """H^{d-1}(boundary of P ∩ region)."""
    total = 0.0
    k = P.dim - 1 if not P.empty else 1
    for f in P.faces():
        sec = region.section(f.plane)
        g = f.geom if sec is None else f.geom.intersection(sec)
        total += measure(g, k)
    return total


def face_measures(P: PolyhedralSet, region: PlaneRegion) -> list:
    """[(unit normal, clipped measure)] per face."""
    out = []
    for f in P.faces():
        sec = region.section(f.plane)
        g = f.geom if sec is None else f.geom.intersection(sec)
        out.append((f.normal.copy(), measure(g, P.dim - 1)))
    return out


# --------------------------------------------------------------------------
# transversality
# --------------------------------------------------------------------------

@dataclass
class TransverseResult:
    ok: bool
    min_angle: float          # smallest angle between normals over meeting pairs
    pairs: int                # number of meeting face pairs
    witness: np.ndarray | None = None
    normals: tuple | None = None

    def __bool__(self) -> bool:
        return self.ok


def hull_witness(V1: np.ndarray, V2: np.ndarray, tol: float = 1e-10):
    """A common point of conv(V1) and conv(V2), or None."""
    lo = np.maximum(V1.min(axis=0), V2.min(axis=0))
    hi = np.minimum(V1.max(axis=0), V2.max(axis=0))
    if np.any(lo > hi + tol):
        return None
    m1, m2, d = len(V1), len(V2), V1.shape[1]
    A_eq = np.zeros((d + 2, m1 + m2))
    A_eq[:d, :m1] = V1.T
    A_eq[:d, m1:] = -V2.T
    A_eq[d, :m1] = 1.0
    A_eq[d + 1, m1:] = 1.0
    b_eq = np.r_[np.zeros(d), 1.0, 1.0]
    res = linprog(np.zeros(m1 + m2), A_eq=A_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if res.status != 0:
        return None
    return res.x[:m1] @ V1


def _surface_pieces(S) -> list:
    """[(normal, vertex array)] convex pieces covering a polyhedral surface."""
    if isinstance(S, PolyhedralSet):
        out = []
        for f in S.faces():
            out.extend((f.normal, V) for V in f.convex_pieces())
        return out
    if hasattr(S, "pieces"):   # a ContinuousDomain
        return _surface_pieces(PolyhedralSet(list(S.pieces)))
    return [(g.normal(), g.vertices) for g in S]


def transverse(S, G, tol: float = 1e-9) -> TransverseResult:
    """Whether two polyhedral surfaces meet only with non-collinear normals.

    ``S`` and ``G`` are polyhedral sets (their boundaries are used), domains,
    or lists of convex patches.  Every meeting pair of flat pieces, edges and
    corners included, must have normals with |n . n'| < 1.
    """
    A = _surface_pieces(S)
    B = _surface_pieces(G)
    best = math.pi / 2
    count = 0
    for na, Va in A:
        for nb, Vb in B:
            w = hull_witness(Va, Vb)
            if w is None:
                continue
            count += 1
            c = min(1.0, abs(float(na @ nb)))
            if c >= 1.0 - tol:
                return TransverseResult(False, 0.0, count, w, (na, nb))
            best = min(best, math.acos(c))
    return TransverseResult(True, best, count)


# --------------------------------------------------------------------------
# cube coverings
# --------------------------------------------------------------------------

def frame_score(R: np.ndarray, normals: np.ndarray) -> float:
    """max over basis vectors e and normals v of |e . v| (smaller is better)."""
    if len(normals) == 0:
        return 0.0
    return float(np.max(np.abs(R @ np.asarray(normals).T)))


def best_frame(normals, d: int, seed: int = 0) -> tuple[np.ndarray, float]:
    """Orthonormal basis whose vectors stay as far as possible from +-normals.

    Returns (R, gap) with rows of R the basis and
    gap = min over e, v of min(|e - v|, |e + v|).
    """
    N = np.asarray(normals, dtype=float).reshape(-1, d)
    if d == 2:
        def rot(t):
            c, s = math.cos(t), math.sin(t)
            return np.array([[c, s], [-s, c]])
        grid = np.linspace(0.0, math.pi / 2, 1801)[:-1]
        scores = [frame_score(rot(t), N) for t in grid]
        i = int(np.argmin(scores))
        t0 = grid[i]
        res = minimize_scalar(lambda t: frame_score(rot(t), N), bounds=(t0 - 1e-3, t0 + 1e-3),
                              method="bounded", options={"xatol": 1e-12})
        t = res.x if res.fun < scores[i] - 1e-12 else t0
        R = rot(t)
    elif d == 3:
        rots = Rotation.random(4096, random_state=seed)
        mats = np.concatenate([np.eye(3)[None], rots.as_matrix()])
        scores = np.max(np.abs(np.einsum("kij,mj->kim", mats, N)).reshape(len(mats), -1), axis=1)
        i = int(np.argmin(scores))
        rv0 = Rotation.from_matrix(mats[i]).as_rotvec()
        res = minimize(lambda rv: frame_score(Rotation.from_rotvec(rv).as_matrix(), N), rv0,
                       method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 4000})
        R = Rotation.from_rotvec(res.x).as_matrix() if res.fun < scores[i] else mats[i]
    else:
        rng = np.random.default_rng(seed)
        best, R = np.inf, np.eye(d)
        for _ in range(2048):
            Q, _ = np.linalg.qr(rng.standard_normal((d, d)))
            sc = frame_score(Q, N)
            if sc < best:
                best, R = sc, Q
    score = frame_score(R, N)
    return R, math.sqrt(max(0.0, 2.0 - 2.0 * score))


def cube(center, R: np.ndarray, side: float) -> ConvexPolytope:
    """Closed cube of side ``side`` centred at ``center`` with edges along rows of R."""
    d = R.shape[0]
    signs = np.array(list(itertools.product((-0.5, 0.5), repeat=d)))
    return ConvexPolytope.from_vertices(np.asarray(center, float) + side * signs @ R)


def _segment_centers(a: np.ndarray, b: np.ndarray, step: float) -> np.ndarray:
    L = float(np.linalg.norm(b - a))
    m = max(1, math.ceil(L / step - 1e-12))
    t = np.arange(m + 1) / m
    return a + t[:, None] * (b - a)


def _patch_centers(V: np.ndarray, step: float) -> tuple[np.ndarray, float]:
    """Centres on a convex patch; returns (centres, covering radius bound)."""
    d = V.shape[1]
    if d == 2:
        i, j = np.unravel_index(np.argmax(np.linalg.norm(V[:, None] - V[None], axis=2)), (len(V), len(V)))
        C = _segment_centers(V[i], V[j], step)
        gap = float(np.linalg.norm(C[1] - C[0])) / 2 if len(C) > 1 else 0.0
        return C, gap
    plane = Plane(ConvexPatch.of(V).normal(), float(V[0] @ ConvexPatch.of(V).normal()))
    uv = plane.project(V)
    poly = Polygon(uv).convex_hull
    lo, hi = uv.min(axis=0), uv.max(axis=0)
    gx = np.arange(lo[0], hi[0] + step, step)
    gy = np.arange(lo[1], hi[1] + step, step)
    G = np.stack(np.meshgrid(gx, gy, indexing="ij"), -1).reshape(-1, 2)
    half = step / 2
    keep = [poly.intersects(shapely.box(x - half, y - half, x + half, y + half)) for x, y in G]
    C = np.vstack([G[np.asarray(keep)], uv])
    return plane.lift(C), step * math.sqrt(2) / 2


def _covered_open(cubes: list, V: np.ndarray, samples: int = 1000) -> bool:
    """Is the closed convex patch with vertices V inside the union of open cubes?"""
    from .regions import Convex, cover_unit_interval
    if V.shape[1] == 2:
        i, j = np.unravel_index(np.argmax(np.linalg.norm(V[:, None] - V[None], axis=2)), (len(V), len(V)))
        P0, P1 = V[i][None], V[j][None]
        ivs = [Convex.open_polytope(Q).interval(P0, P1) for Q in cubes]
        inner = bool(cover_unit_interval(np.stack([v[0] for v in ivs], 1), np.stack([v[1] for v in ivs], 1))[0])
        ends = np.vstack([P0, P1])
        return inner and bool(np.all(PolyhedralSet(cubes).contains(ends, strict=True)))
    pts = np.vstack([ConvexPatch.of(V).sample(samples, seed=7),
                     *[V[k] + np.linspace(0, 1, 33)[:, None] * (V[(k + 1) % len(V)] - V[k]) for k in range(len(V))]])
    return bool(np.all(PolyhedralSet(cubes).contains(pts, strict=True)))


def _boundary_normals(domain) -> np.ndarray:
    return PolyhedralSet(list(domain.pieces)).normals()


def cube_cover(domain, r: float, patches=None, sink=None) -> PolyhedralSet:
    """Finite union of transverse cubes of side r whose interior contains the source patch.

    The cubes share one orthonormal frame chosen to maximise the angular gap
    to the boundary normals of the domain.
    """
    if r <= 0:
        raise ValueError("side r must be positive")
    patches = list(domain.source if patches is None else patches)
    sink = list(domain.sink if sink is None else sink)
    if not patches:
        return PolyhedralSet([], {"side": r})
    sep = min(convex_hull_distance(a.vertices, b.vertices) for a in patches for b in sink) if sink else math.inf
    if sep <= TOL:
        raise ValueError("finiteness witness unavailable: source and sink patches are at distance 0")
    d = domain.dim
    normals = _boundary_normals(domain)
    R, gap = best_frame(normals, d)
    if gap <= 1e-9:
        raise ValueError("no cube frame is transverse to the boundary")
    # chord of an open cube along a direction t through its centre: r / max_k |R_k . t|
    cubes, centers = [], []
    for g in patches:
        V = g.vertices
        if d == 2:
            t = V[1] - V[0]
            t = t / np.linalg.norm(t)
            chord = r / float(np.max(np.abs(R @ t)))
        else:
            chord = r   # inscribed ball diameter: safe in every direction
        step = 0.9 * chord
        for _ in range(40):
            C, _ = _patch_centers(V, step)
            Q = [cube(c, R, r) for c in C]
            if _covered_open(Q, V):
                break
            step *= 0.8
        else:
            raise RuntimeError("could not cover the source patch")
        cubes.extend(Q)
        centers.extend(C)
    P = PolyhedralSet(cubes)
    tr = transverse(P, domain)
    if not tr.ok:
        raise ValueError(f"cube cover is not transverse to the boundary near {tr.witness}")
    dsink = min((convex_hull_distance(Q.vertices, s.vertices) for Q in cubes for s in sink), default=math.inf)
    if dsink <= TOL:
        raise ValueError("side r too large: the cube cover reaches the sink patch")
    P.info = {"side": r, "frame": R, "frame_gap": gap, "centers": np.array(centers),
              "min_angle": tr.min_angle, "sink_distance": dsink, "separation": sep}
    return P


# --------------------------------------------------------------------------
# the enlarged domain
# --------------------------------------------------------------------------

@dataclass(eq=False)
class EnlargedDomain:
    base: object              # the ContinuousDomain
    cubes: list
    side: float
    delta0: float
    delta1: float
    frame: np.ndarray
    transverse: TransverseResult

    @property
    def pieces(self) -> list:
        return list(self.base.pieces) + list(self.cubes)

    @property
    def dim(self) -> int:
        return self.base.dim

    def as_set(self) -> PolyhedralSet:
        return PolyhedralSet(self.pieces)

    def open_region(self) -> OpenPolytopes:
        return OpenPolytopes(self.pieces)

    def contains(self, X) -> np.ndarray:
        return self.as_set().contains(X, strict=True)

    def bbox(self):
        return self.as_set().bbox()

    def min_mesh(self) -> int:
        """Smallest n with n >= 2d / delta1 (then Omega_n lies inside)."""
        return math.ceil(2 * self.dim / self.delta1 - 1e-12)


def enlarge_domain(domain, P: PolyhedralSet, delta0: float, side: float | None = None) -> EnlargedDomain:
    """Omega' = Omega ∪ open cubes centred on the boundary, transverse to it and to ∂P.

    Cubes have side r = min(side, delta0 / (2d)) and centres spread along
    every boundary face with covering radius at most r/4, so that
    V_2(Omega, delta1) ⊂ Omega' with delta1 = r/2 - (covering radius).
    """
    if delta0 <= 0:
        raise ValueError("delta0 must be positive")
    d = domain.dim
    r = delta0 / (2 * d) if side is None else min(side, delta0 / (2 * d))
    tr0 = transverse(P, domain)
    if not tr0.ok:
        raise ValueError("∂P is not transverse to the boundary of the domain")
    normals = np.vstack([_boundary_normals(domain), P.normals()])
    R, gap = best_frame(normals, d)
    step = r / (2 * math.sqrt(d - 1))
    cubes, rho = [], 0.0
    for f in PolyhedralSet(list(domain.pieces)).faces():
        for V in f.convex_pieces():
            C, gap_c = _patch_centers(V, step)
            rho = max(rho, gap_c)
            cubes.extend(cube(c, R, r) for c in C)
    delta1 = r / 2 - rho
    Ep = PolyhedralSet(list(domain.pieces) + cubes)
    tr = transverse(P, Ep)
    if not tr.ok:
        raise ValueError(f"∂P is not transverse to the enlarged boundary near {tr.witness}")
    return EnlargedDomain(domain, cubes, r, delta0, delta1, R, tr)


# --------------------------------------------------------------------------
# hypersquare coverings of faces
# --------------------------------------------------------------------------

@dataclass(eq=False)
class SquareTile:
    """Closed hypersquare R of side l inside a face, as centre + in-plane frame."""

    center: np.ndarray
    frame: np.ndarray      # (d-1, d) orthonormal rows spanning the face plane
    side: float
    normal: np.ndarray     # exterior normal of the face
    face: int

    def vertices(self) -> np.ndarray:
        k = self.frame.shape[0]
        signs = np.array(list(itertools.product((-0.5, 0.5), repeat=k)))
        return self.center + self.side * signs @ self.frame

    @property
    def area(self) -> float:
        return self.side ** self.frame.shape[0]


@dataclass(eq=False)
class SquareCover:
    tiles: list
    side: float
    margins: list          # per face: eps H^{d-2}(∂H)^{-1} N^{-1}
    face_areas: list
    uncovered: float

    def __len__(self) -> int:
        return len(self.tiles)


def _boundary_size(g, k: int) -> float:
    """H^{d-2} of the relative boundary of a face geometry."""
    if k == 1:
        return 2.0 * len(intervals(g))
    return float(g.length)


def _inner(g, m: float, k: int):
    """{x in g : d(x, ∂g) >= m} (relative boundary)."""
    if k == 1:
        return _union([_interval(a + m, b - m) for a, b in intervals(g) if b - a > 2 * m])
    return g.buffer(-m, join_style="mitre") if m > 0 else g


def square_cover(P: PolyhedralSet, region: PlaneRegion, l: float, eps: float,
                 max_halvings: int = 30) -> SquareCover:
    """Hypersquares of side <= l with disjoint interiors inside the faces H_i = face ∩ region.

    For each face, the tiles cover {d(x, ∂H_i) >= m_i} and stay inside
    {d(x, ∂H_i) >= m_i / 2}, m_i = eps / (H^{d-2}(∂H_i) N); the side is the
    largest l/m (then l/64 halved) for which that sandwich holds.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if l <= 0:
        raise ValueError("side l must be positive")
    k = P.dim - 1
    H = []
    for idx, f in enumerate(P.faces()):
        sec = region.section(f.plane)
        g = f.geom if sec is None else f.geom.intersection(sec)
        if k == 2:
            g = g.buffer(0)
        if measure(g, k) > 1e-12:
            H.append((idx, f, g))
    N = max(1, len(H))
    total = sum(measure(g, k) for _, _, g in H)
    prepared = []
    margins, areas = [], []
    for idx, f, g in H:
        m = eps / (_boundary_size(g, k) * N)
        margins.append(m)
        areas.append(measure(g, k))
        inner = _inner(g, m, k)
        if inner.is_empty or measure(inner, k) <= 1e-14:
            continue
        prepared.append((idx, f, inner, _inner(g, m / 2, k)))
    for side in _side_ladder(l, max_halvings):
        layout = [(idx, f, _grid_cells(inner, side, k)) for idx, f, inner, _ in prepared]
        if all(_within(c, outer, k) for (_, _, cells), (_, _, _, outer) in zip(layout, prepared) for c in cells):
            break
    else:
        raise RuntimeError("could not fit hypersquares inside the faces")
    tiles = []
    for idx, f, cells in layout:
        for c in cells:
            ctr = np.asarray(c.centroid.coords)[0][:k]
            tiles.append(SquareTile(f.plane.lift(ctr)[0], f.plane.basis.copy(), side, f.normal.copy(), idx))
    covered = len(tiles) * side ** k
    return SquareCover(tiles, side, margins, areas, max(0.0, total - covered))


def _side_ladder(l: float, max_halvings: int):
    """Candidate tile sides l/m, m = 1..64, then further halvings."""
    for m in range(1, 65):
        yield l / m
    for j in range(1, max_halvings + 1):
        yield l / 64 / 2 ** j


def _grid_cells(inner, side: float, k: int) -> list:
    """Grid of side ``side`` centred on the bounding box of ``inner``, cells meeting it."""
    minx, miny, maxx, maxy = inner.bounds
    nx = max(1, math.ceil((maxx - minx) / side - 1e-9))
    minx -= 0.5 * (nx * side - (maxx - minx))
    if k == 1:
        m = nx
        xs = minx + side * np.arange(max(m, 1))
        cells = [_interval(x, x + side) for x in xs]
        return [c for c in cells if measure(c.intersection(inner), 1) > 1e-12 * side]
    ny = max(1, math.ceil((maxy - miny) / side - 1e-9))
    miny -= 0.5 * (ny * side - (maxy - miny))
    out = []
    for i in range(nx):
        for j in range(ny):
            c = shapely.box(minx + i * side, miny + j * side, minx + (i + 1) * side, miny + (j + 1) * side)
            if c.intersection(inner).area > 1e-12 * side * side:
                out.append(c)
    return out


def _within(c, outer, k: int) -> bool:
    if outer.is_empty:
        return False
    if k == 1:
        return measure(c.difference(outer), 1) <= 1e-12
    return c.difference(outer).area <= 1e-12


def tiles_disjoint(tiles: list) -> bool:
    """Pairwise disjoint interiors (exact test on the tile polytopes in their faces)."""
    for a, b in itertools.combinations(tiles, 2):
        if a.face != b.face:
            continue
        d = np.abs((a.center - b.center) @ a.frame.T)
        if np.all(d < 0.5 * (a.side + b.side) - 1e-12):
            return False
    return True


# --------------------------------------------------------------------------
# cylinders
# --------------------------------------------------------------------------

@dataclass(eq=False)
class CylinderSpec:
    """cyl(A, h) = {x + t v : x in A, t in [-h, h]} (or t in [0, h] when one-sided).

    A is the closed hyperrectangle centred at ``center`` with half-extents
    ``sides / 2`` along the rows of ``frame``.
    """

    center: np.ndarray
    frame: np.ndarray
    sides: np.ndarray
    normal: np.ndarray
    h: float
    one_sided: bool = False

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float)
        self.frame = np.atleast_2d(np.asarray(self.frame, dtype=float))
        self.sides = np.atleast_1d(np.asarray(self.sides, dtype=float))
        self.normal = np.asarray(self.normal, dtype=float)
        self.normal = self.normal / np.linalg.norm(self.normal)
        if self.h <= 0:
            raise ValueError("height must be positive")
        if np.any(np.abs(self.frame @ self.normal) > 1e-9):
            raise ValueError("normal must be orthogonal to the base")

    @classmethod
    def square(cls, center, normal, side: float, h: float, one_sided: bool = False) -> "CylinderSpec":
        normal = np.asarray(normal, dtype=float)
        normal = normal / np.linalg.norm(normal)
        F = hyperplane_basis(normal)
        return cls(center, F, np.full(len(normal) - 1, float(side)), normal, h, one_sided)

    @classmethod
    def from_tile(cls, tile: SquareTile, h: float) -> "CylinderSpec":
        return cls(tile.center, tile.frame, np.full(tile.frame.shape[0], tile.side), tile.normal, h, True)

    @property
    def dim(self) -> int:
        return len(self.center)

    @property
    def base_area(self) -> float:
        return float(np.prod(self.sides))

    @property
    def t_range(self) -> tuple[float, float]:
        return (0.0, self.h) if self.one_sided else (-self.h, self.h)

    def constraints(self) -> tuple[np.ndarray, np.ndarray]:
        """(A, b) with cyl = {x : A x <= b}."""
        lo, hi = self.t_range
        v, c = self.normal, self.center
        A = np.vstack([v, -v, self.frame, -self.frame])
        b = np.r_[v @ c + hi, -(v @ c + lo), self.frame @ c + self.sides / 2, -(self.frame @ c) + self.sides / 2]
        return A, b

    def contains(self, X: np.ndarray, tol: float = TOL) -> np.ndarray:
        A, b = self.constraints()
        return np.all(np.atleast_2d(X) @ A.T <= b + tol, axis=1)

    def vertices(self) -> np.ndarray:
        lo, hi = self.t_range
        k = self.frame.shape[0]
        signs = np.array(list(itertools.product((-0.5, 0.5), repeat=k)))
        base = self.center + (signs * self.sides) @ self.frame
        return np.vstack([base + lo * self.normal, base + hi * self.normal])

    def polytope(self) -> ConvexPolytope:
        return ConvexPolytope.from_vertices(self.vertices())

    def face_constraints(self, top: bool) -> tuple[np.ndarray, np.ndarray]:
        """Closed top face A + t_hi v (or bottom A + t_lo v) as inequalities."""
        lo, hi = self.t_range
        t = hi if top else lo
        v, c = self.normal, self.center
        A = np.vstack([v, -v, self.frame, -self.frame])
        b = np.r_[v @ c + t, -(v @ c + t), self.frame @ c + self.sides / 2, -(self.frame @ c) + self.sides / 2]
        return A, b

    def lattice_box(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        V = self.vertices()
        return np.floor(V.min(axis=0) * n - 1e-9).astype(np.int64), np.ceil(V.max(axis=0) * n + 1e-9).astype(np.int64)

    def to_dict(self) -> dict:
        return {"center": self.center.tolist(), "frame": self.frame.tolist(), "sides": self.sides.tolist(),
                "normal": self.normal.tolist(), "h": self.h, "one_sided": self.one_sided}


@dataclass(eq=False)
class CylinderSets:
    graph: object          # LatticeGraph of cyl ∩ Z^d_n
    top: np.ndarray        # vertex masks
    bottom: np.ndarray
    side1: np.ndarray      # A_1^h: lower half (t < 0 side)
    side2: np.ndarray      # A_2^h: upper half


def cylinder_graph(c: CylinderSpec, n: int, tol: float = TOL):
    """Lattice graph induced on cyl ∩ Z^d/n (the cylinder is convex, so induced edges lie inside)."""
    from .lattice import LatticeGraph, points_box
    lo, hi = c.lattice_box(n)
    axes = [np.arange(a, b + 1) for a, b in zip(lo, hi)]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, c.dim)
    keep = c.contains(pts / n, tol)
    return LatticeGraph(n, pts[keep])


def _segment_meets(A: np.ndarray, b: np.ndarray, P0: np.ndarray, P1: np.ndarray, tol: float) -> np.ndarray:
    """Closed segments [P0, P1] meeting the closed polytope {A x <= b + tol}."""
    from .regions import Convex
    reg = Convex(A, b + tol, np.zeros(len(b), dtype=bool))
    lo, hi = reg.interval(P0, P1)
    return hi >= lo - 1e-12


def cylinder_lattice_sets(c: CylinderSpec, n: int, tol: float = TOL) -> CylinderSets:
    """Top, bottom and the two side sets A_1^h, A_2^h of a cylinder at mesh 1/n."""
    g = cylinder_graph(c, n, tol)
    d = c.dim
    V = g.num_vertices
    top = np.zeros(V, dtype=bool)
    bot = np.zeros(V, dtype=bool)
    out_nb = np.zeros(V, dtype=bool)
    if V == 0:
        return CylinderSets(g, top, bot, out_nb.copy(), out_nb.copy())
    At, bt = c.face_constraints(True)
    Ab, bb = c.face_constraints(False)
    X = g.points
    for ax in range(d):
        for sgn in (1, -1):
            Y = g.coords.copy()
            Y[:, ax] += sgn
            outside = g.index_of(Y) < 0
            if not outside.any():
                continue
            out_nb |= outside
            idx = np.flatnonzero(outside)
            P0, P1 = X[idx], Y[idx] / n
            top[idx[_segment_meets(At, bt, P0, P1, tol)]] = True
            bot[idx[_segment_meets(Ab, bb, P0, P1, tol)]] = True
    t = (X - c.center) @ c.normal
    side1 = out_nb & (t < -tol)
    side2 = out_nb & (t > tol)
    return CylinderSets(g, top, bot, side1, side2)
