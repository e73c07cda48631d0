"""Explicit cutsets: distance shells around P, cylinder coverings, walls and glue sets."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import breadth_first_order

from .capacity import CapacityField, CapacityLaw
from .cylflow import CylinderFlow
from .errors import InfeasibleError, PreconditionError
from .flow import FlowProblem, is_cutset, max_flow, min_cut
from .geometry import (CylinderSpec, EnlargedDomain, PolyhedralSet, SquareCover, hull_witness, square_cover,
                       tiles_disjoint)
from .lattice import LatticeDomain, edges_in
from .polytope import convex_hull_distance
from .regions import Convex, Difference, DistanceBand, Everywhere, Intersection, OpenUnion, Region

KAPPA = 1   # thickness multiplier in the glue-set index range


def _pieces(P: PolyhedralSet) -> list:
    return [V for f in P.faces() for V in f.convex_pieces()]


def boundary_gap(P: PolyhedralSet, domain) -> float:
    """h_0 = d(∂P, Γ^1 ∪ Γ^2)."""
    patches = list(domain.source) + list(domain.sink)
    return min(convex_hull_distance(V, g.vertices) for V in _pieces(P) for g in patches)


# --------------------------------------------------------------------------
# shells around P
# --------------------------------------------------------------------------

@dataclass(eq=False)
class ShellFamily:
    P: PolyhedralSet
    zeta: float
    n: int
    h: float
    h0: float
    bands: list          # U(k) as DistanceBand regions
    edges: list          # M'(k) edge indices in the lattice domain
    omega_prime: object = None

    def __len__(self) -> int:
        return len(self.bands)

    def radius(self, k: int) -> float:
        return k * self.zeta / self.n

    def inside(self, X, k: int) -> np.ndarray:
        """X in the interior of P(k)."""
        if k == 0:
            return self.P.contains(X, strict=True)
        return self.P.distance(X) < self.radius(k)

    def outside(self, X, k: int) -> np.ndarray:
        """X in the interior of the complement of P(k)."""
        return self.P.distance(X) > self.radius(k)


def _omega_region(omega_prime) -> Region:
    if omega_prime is None:
        return Everywhere()
    if isinstance(omega_prime, Region):
        return omega_prime
    return OpenUnion.of(list(omega_prime.pieces))


def shell_count(h: float, n: int, zeta: float) -> int:
    return int(math.floor(h * n / zeta + 1e-12))


def shells(P: PolyhedralSet, zeta: float, lat: LatticeDomain, h: float, omega_prime=None) -> ShellFamily:
    """U(k) = {kζ/n <= d(x, P) < (k+1)ζ/n} for k < ⌊hn/ζ⌋ and M'(k) = edges in U(k) ∩ Ω'."""
    d = lat.dim
    if zeta < 2 * d:
        raise PreconditionError(f"zeta={zeta} must be at least 2d={2 * d}")
    h0 = boundary_gap(P, lat.domain)
    if not h < h0:
        raise PreconditionError(f"h={h} must be below h0=d(∂P, Γ1 ∪ Γ2)={h0:.6g}")
    K = shell_count(h, lat.n, zeta)
    if K == 0:
        raise PreconditionError(f"mesh too coarse: floor(h n / zeta) = floor({h}*{lat.n}/{zeta}) = 0, no shell fits")
    om = _omega_region(omega_prime)
    bands, edges = [], []
    for k in range(K):
        band = DistanceBand(list(P.polytopes), k * zeta / lat.n, (k + 1) * zeta / lat.n, exclude_interior=(k == 0))
        bands.append(band)
        edges.append(edges_in(Intersection([band, om]), lat))
    return ShellFamily(P, float(zeta), lat.n, float(h), h0, bands, edges, omega_prime)


@dataclass
class FamilyCheck:
    n: int
    passes: list             # per k
    terminals_ok: list       # per k: Γ1_n inside int P(k) and Γ2_n outside P(k+1)

    @property
    def ok(self) -> bool:
        return all(self.passes)


def family_cut_check(sf: ShellFamily, lat: LatticeDomain) -> FamilyCheck:
    p = FlowProblem.on_domain(lat, np.ones(lat.num_edges))
    X = lat.points
    g1, g2 = X[lat.gamma1], X[lat.gamma2]
    passes, term = [], []
    for k, E in enumerate(sf.edges):
        passes.append(bool(is_cutset(E, p)))
        term.append(bool(np.all(sf.inside(g1, k)) and np.all(sf.outside(g2, k + 1))))
    return FamilyCheck(lat.n, passes, term)


def cut_threshold(P: PolyhedralSet, domain, zeta: float, h: float, meshes: Sequence[int],
                    omega_prime=None) -> tuple[int | None, list]:
    """Smallest tested n from which every M'(k) is a cut at all larger tested meshes."""
    from .lattice import discretize
    checks = []
    for n in sorted(meshes):
        lat = discretize(domain, n)
        try:
            sf = shells(P, zeta, lat, h, omega_prime)
        except PreconditionError:
            checks.append(FamilyCheck(n, [], []))
            continue
        checks.append(family_cut_check(sf, lat))
    N = None
    for c in reversed(checks):
        if c.passes and c.ok:
            N = c.n
        else:
            break
    return N, checks


def uncut_path(p: FlowProblem, removed) -> list | None:
    """A vertex path from the sources to the sinks avoiding ``removed`` edges, or None."""
    g = p.graph
    keep = p.active_mask
    removed = np.asarray(removed, dtype=np.int64)
    if removed.size:
        keep[removed] = False
    uv = g.edges[keep]
    V = g.num_vertices
    s = V
    rows = np.r_[uv[:, 0], uv[:, 1], np.full(len(p.sources), s)]
    cols = np.r_[uv[:, 1], uv[:, 0], p.sources]
    A = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(V + 1, V + 1)).tocsr()
    order, pred = breadth_first_order(A, s, directed=True, return_predecessors=True)
    reached = [t for t in p.sinks if pred[t] >= 0]
    if not reached:
        return None
    t = int(min(reached))
    path = [t]
    while pred[path[-1]] != s:
        path.append(int(pred[path[-1]]))
    return path[::-1]


# --------------------------------------------------------------------------
# cylinder coverings of ∂P ∩ Ω'
# --------------------------------------------------------------------------

def _lateral_box(c: CylinderSpec, inset: float, strict_lateral: bool) -> Convex:
    """{x + t v : t in [0, h], x in R, d(x, ∂R) >= inset} (or > inset when strict)."""
    v, ctr, F = c.normal, c.center, c.frame
    A = np.vstack([v, -v, F, -F])
    half = c.sides / 2 - inset
    b = np.r_[v @ ctr + c.h, -(v @ ctr), F @ ctr + half, -(F @ ctr) + half]
    strict = np.r_[False, False, np.full(2 * len(half), strict_lateral)]
    return Convex(A, b, strict)


def wall_region(c: CylinderSpec, k: int, zeta: float, n: int) -> Region:
    """{x in B : kζ/n <= d_2(x, ∂R + R v) < (k+1)ζ/n}."""
    return Difference(_lateral_box(c, k * zeta / n, False), [_lateral_box(c, (k + 1) * zeta / n, False)])


def inner_cylinder(c: CylinderSpec, eta: float) -> Convex:
    """B' = {x + t v : x in R, d(x, ∂R) > η, t in [0, h]}."""
    return _lateral_box(c, eta, True)


def _interiors_meet(c1: CylinderSpec, c2: CylinderSpec) -> bool:
    A1, b1 = c1.constraints()
    A2, b2 = c2.constraints()
    A = np.vstack([A1, A2])
    b = np.r_[b1, b2]
    d = c1.dim
    # maximise s subject to A x + s <= b
    res = linprog(np.r_[np.zeros(d), -1.0], A_ub=np.c_[A, np.ones(len(b))], b_ub=b,
                  bounds=[(None, None)] * d + [(None, 1.0)], method="highs")
    return res.status == 0 and -res.fun > 1e-10


def interiors_disjoint(cyls: Sequence[CylinderSpec]) -> tuple[bool, tuple | None]:
    lo = np.array([c.vertices().min(axis=0) for c in cyls])
    hi = np.array([c.vertices().max(axis=0) for c in cyls])
    for i in range(len(cyls)):
        for j in range(i + 1, len(cyls)):
            if np.any(lo[i] >= hi[j]) or np.any(lo[j] >= hi[i]):
                continue
            if _interiors_meet(cyls[i], cyls[j]):
                return False, (i, j)
    return True, None


def disjointness_height(tiles, hmax: float, iters: int = 30) -> float:
    """h_1: sup of h for which the cylinders over the tiles have disjoint interiors (capped at hmax)."""
    def ok(h):
        return interiors_disjoint([CylinderSpec.from_tile(t, h) for t in tiles])[0]
    if ok(hmax):
        return hmax
    lo, hi = 0.0, hmax
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if ok(mid) else (lo, mid)
    return lo


def _crossing(V1: np.ndarray, V2: np.ndarray, n1: np.ndarray, n2: np.ndarray) -> np.ndarray | None:
    """conv(V1) ∩ conv(V2) for flat pieces in transverse hyperplanes: a point (d=2) or a segment (d=3)."""
    w = hull_witness(V1, V2)
    if w is None:
        return None
    d = V1.shape[1]
    if d == 2:
        return w[None]
    if d != 3:
        raise NotImplementedError("crossings are computed for d <= 3")
    u = np.cross(n1, n2)
    m1, m2 = len(V1), len(V2)
    A_eq = np.zeros((d + 2, m1 + m2))
    A_eq[:d, :m1] = V1.T
    A_eq[:d, m1:] = -V2.T
    A_eq[d, :m1] = 1.0
    A_eq[d + 1, m1:] = 1.0
    b_eq = np.r_[np.zeros(d), 1.0, 1.0]
    ends = []
    for sgn in (1.0, -1.0):
        c = np.r_[sgn * (V1 @ u), np.zeros(m2)]
        res = linprog(c, A_eq=A_eq, b_eq=b_eq, bounds=(0, None), method="highs")
        ends.append(res.x[:m1] @ V1 if res.status == 0 else w)
    return np.array(ends)


def _ridges(V: np.ndarray) -> list:
    """Relative-boundary ridges of a flat convex piece: endpoints (d=2) or boundary edges (d=3)."""
    if V.shape[1] == 2:
        return [V[i:i + 1] for i in range(len(V))]
    return [np.vstack([V[i], V[(i + 1) % len(V)]]) for i in range(len(V))]


def bend_height(P: PolyhedralSet, omega_prime) -> float:
    """h_2: distance from the crossing set ∂P ∩ Γ' to the nearest ridge of Γ' off ∂P.

    Below it, the shells meet Γ' only along flat pieces crossing ∂P
    transversally, which is the situation where the glue sets near Γ'
    grow linearly in h.
    """
    Sp = [(f.normal, V) for f in P.faces() for V in f.convex_pieces()]
    G = [(f.normal, V) for f in PolyhedralSet(list(omega_prime.pieces)).faces() for V in f.convex_pieces()]
    cross = []
    for ng, Vg in G:
        for ns, Vs in Sp:
            c = _crossing(Vg, Vs, ng, ns)
            if c is not None:
                cross.append(c)
    if not cross:
        return math.inf
    best = math.inf
    for _, Vg in G:
        for R in _ridges(Vg):
            if min(convex_hull_distance(R, Vs) for _, Vs in Sp) <= 1e-9:
                continue
            best = min(best, min(convex_hull_distance(R, C) for C in cross))
    return best


@dataclass(eq=False)
class CoveringScaffold:
    P: PolyhedralSet
    omega_prime: EnlargedDomain
    lat: LatticeDomain
    l: float
    eps: float
    h: float
    eta: float
    zeta: float
    cover: SquareCover
    cylinders: list
    shells: ShellFamily
    walls: list            # W(k) edge indices
    walls_ij: list         # per cylinder: list over k of edge indices
    glue: list             # M(k) edge indices
    bounds: dict           # h0, h1, h2

    @property
    def n(self) -> int:
        return self.lat.n

    @cached_property
    def flows(self) -> list:
        return [CylinderFlow(c, self.n, "phi") for c in self.cylinders]

    @cached_property
    def edge_maps(self) -> list:
        """Per cylinder: lattice-domain index of each cylinder-graph edge (-1 if absent)."""
        out = []
        for cf in self.flows:
            g = cf.graph
            out.append(self.lat.edge_index(g.edge_lower, g.edge_axis) if g.num_edges else np.zeros(0, np.int64))
        return out

    @property
    def glue_terms(self) -> int:
        return len(self.glue)

    def to_dict(self) -> dict:
        return {"P": self.P.to_dict(), "n": self.n, "l": self.l, "eps": self.eps, "h": self.h,
                "eta": self.eta, "zeta": self.zeta, "tile_side": self.cover.side,
                "cylinders": [c.to_dict() for c in self.cylinders], "bounds": dict(self.bounds),
                "walls": [len(w) for w in self.walls], "glue": [len(m) for m in self.glue]}


def build_covering(P: PolyhedralSet, omega_prime: EnlargedDomain, lat: LatticeDomain, l: float, eps: float,
                   h: float, eta: float, zeta: float, check_bends: bool = True) -> CoveringScaffold:
    """Cylinders over a hypersquare cover of ∂P ∩ Ω', wall sets W(k) and glue sets M(k).

    ``check_bends=False`` skips the h < h_2 requirement (h_2 only governs the
    cardinality estimate near Γ', not the cut property).
    """
    if eta <= 0:
        raise PreconditionError("eta must be positive")
    if h <= 0:
        raise PreconditionError("h must be positive")
    sf = shells(P, zeta, lat, h, omega_prime)
    cover = square_cover(P, omega_prime.open_region(), l, eps)
    if not cover.tiles:
        raise PreconditionError("no hypersquare fits inside ∂P ∩ Ω' (decrease l or eps)")
    if not tiles_disjoint(cover.tiles):
        raise PreconditionError("hypersquares overlap")
    kw = shell_count(eta, lat.n, zeta)
    if kw == 0:
        raise PreconditionError(f"mesh too coarse: floor(eta n / zeta) = floor({eta}*{lat.n}/{zeta}) = 0")
    cyls = [CylinderSpec.from_tile(t, h) for t in cover.tiles]
    ok, pair = interiors_disjoint(cyls)
    h1 = math.inf if ok else disjointness_height(cover.tiles, h)
    if not ok:
        raise PreconditionError(f"h={h} must be below h1={h1:.6g} (cylinders {pair} overlap)")
    h2 = bend_height(P, omega_prime)
    if check_bends and not h < h2:
        raise PreconditionError(f"h={h} must be below h2={h2:.6g} (bend region of Γ')")
    bounds = {"h0": sf.h0, "h1": h1, "h2": h2}
    walls_ij = [[edges_in(wall_region(c, k, zeta, lat.n), lat) for k in range(kw)] for c in cyls]
    walls = [np.unique(np.concatenate([w[k] for w in walls_ij])).astype(np.int64) for k in range(kw)]
    holes = [inner_cylinder(c, eta) for c in cyls]
    om = _omega_region(omega_prime)
    glue = [edges_in(Difference(Intersection([band, om]), holes), lat) for band in sf.bands]
    return CoveringScaffold(P, omega_prime, lat, float(l), float(eps), float(h), float(eta), float(zeta),
                            cover, cyls, sf, walls, walls_ij, glue, bounds)


# --------------------------------------------------------------------------
# the upper bound φ_n <= Σ φ_B + min V(W) + min V(M)
# --------------------------------------------------------------------------

@dataclass
class UpperBound:
    phi_n: float
    cylinder_sum: float
    wall_min: float
    glue_min: float
    k1: int
    k2: int
    bound: float
    holds: bool
    combined_is_cut: bool
    combined_capacity: float
    min_cut_capacity: float
    all_pairs_cut: bool | None = None

    def row(self) -> dict:
        return {k: getattr(self, k) for k in ("phi_n", "cylinder_sum", "wall_min", "glue_min", "k1", "k2",
                                              "bound", "holds", "combined_is_cut", "combined_capacity")}


def _leq(a: float, b: float, rtol: float = 1e-9) -> bool:
    return a <= b + rtol * max(1.0, abs(a), abs(b))


def combined_cutset(sc: CoveringScaffold, cyl_cuts: list, k1: int, k2: int) -> np.ndarray:
    parts = [m[c] for m, c in zip(sc.edge_maps, cyl_cuts)]
    parts += [sc.walls[k1], sc.glue[k2]]
    E = np.unique(np.concatenate([np.asarray(p, dtype=np.int64) for p in parts]))
    return E[E >= 0]


def upper_bound(sc: CoveringScaffold, field: CapacityField, all_pairs: bool = False) -> UpperBound:
    lat = sc.lat
    caps = field.on(lat)
    p = FlowProblem.on_domain(lat, caps)
    res = max_flow(p)
    mc = min_cut(p, res)
    cyl_sum, cyl_cuts = 0.0, []
    for cf in sc.flows:
        if cf.graph.num_edges == 0:
            cyl_cuts.append(np.zeros(0, np.int64))
            continue
        cp = cf.problem(cf.capacities(field))
        r = max_flow(cp)
        cyl_sum += r.value
        cyl_cuts.append(min_cut(cp, r).edges)
    vw = [float(caps[w].sum()) for w in sc.walls]
    vm = [float(caps[m].sum()) for m in sc.glue]
    k1, k2 = int(np.argmin(vw)), int(np.argmin(vm))
    bound = cyl_sum + vw[k1] + vm[k2]
    E = combined_cutset(sc, cyl_cuts, k1, k2)
    is_cut = bool(is_cutset(E, p))
    pairs = None
    if all_pairs:
        pairs = all(is_cutset(combined_cutset(sc, cyl_cuts, a, b), p)
                    for a in range(len(vw)) for b in range(len(vm)))
    return UpperBound(res.value, cyl_sum, vw[k1], vm[k2], k1, k2, bound, _leq(res.value, bound), is_cut,
                      float(caps[E].sum()), mc.capacity, pairs)


def upper_bound_many(sc: CoveringScaffold, law: CapacityLaw, seeds: Sequence[int], workers: int = 1,
                     all_pairs: bool = False) -> list:
    _ = sc.edge_maps
    for cf in sc.flows:
        _ = cf.sets

    def one(s):
        return upper_bound(sc, CapacityField(law, s), all_pairs)

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            return list(ex.map(one, seeds))
    return [one(s) for s in seeds]


# --------------------------------------------------------------------------
# cardinality audit
# --------------------------------------------------------------------------

def bends(P: PolyhedralSet, omega_prime) -> tuple[np.ndarray, np.ndarray]:
    """Ridges of ∂P meeting the closure of Ω', as segments (degenerate segments in d = 2)."""
    d = P.dim
    pieces = list(omega_prime.pieces)
    S0, S1 = [], []
    for Q in P.polytopes:
        A, B = (Q.vertices, Q.vertices) if d == 2 else Q.segments()
        for a, b in zip(A, B):
            if P.contains((0.5 * (a + b))[None], strict=True)[0]:
                continue
            seg = np.vstack([a, b])
            if min(convex_hull_distance(seg, W.vertices) for W in pieces) <= 1e-9:
                S0.append(a)
                S1.append(b)
    if not S0:
        return np.zeros((0, d)), np.zeros((0, d))
    return np.array(S0), np.array(S1)


def _in_face(f, U: np.ndarray, k: int) -> np.ndarray:
    import shapely
    from .geometry import intervals
    if k == 1:
        out = np.zeros(len(U), dtype=bool)
        for a, b in intervals(f.geom):
            out |= (U[:, 0] >= a - 1e-12) & (U[:, 0] <= b + 1e-12)
        return out
    return shapely.contains_xy(f.geom.buffer(1e-12), U[:, 0], U[:, 1])


def split_glue(sc: CoveringScaffold, k: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """M(k) = M_1 ∪ M_2 ∪ M_3 by edge midpoint: face translates, bends, and the rest (near Γ')."""
    lat, n, zeta = sc.lat, sc.n, sc.zeta
    E = sc.glue[k]
    X = lat.edge_midpoints()[E]
    slack = 0.5 / n
    lo, hi = k * zeta / n - slack, (k + 1) * zeta / n + slack
    om = sc.omega_prime
    holes = [inner_cylinder(c, sc.eta) for c in sc.cylinders]
    m1 = np.zeros(len(E), dtype=bool)
    kdim = sc.P.dim - 1
    for f in sc.P.faces():
        t = (X - f.plane.origin) @ f.normal
        sel = (t >= lo) & (t < hi)
        if not sel.any():
            continue
        Y = X[sel] - t[sel, None] * f.normal
        ok = _in_face(f, f.plane.project(Y), kdim)
        ok &= PolyhedralSet(list(om.pieces)).contains(Y, strict=False)
        for hcv in holes:
            base = Y + 1e-9 * f.normal
            ok &= ~hcv.contains(base)
        m1[np.flatnonzero(sel)[ok]] = True
    S0, S1 = bends(sc.P, om)
    from .polytope import _point_segment_dist
    if len(S0):
        near = _point_segment_dist(X, S0, S1).min(axis=1) < hi
    else:
        near = np.zeros(len(E), dtype=bool)
    m2 = ~m1 & near
    m3 = ~m1 & ~m2
    return E[m1], E[m2], E[m3]


@dataclass
class Audit:
    n: int
    dim: int
    l: float
    h: float
    eta: float
    eps: float
    wall_counts: list
    glue_counts: list
    glue_split: list          # per k: (M1, M2, M3)
    has_bends: bool
    theta0: float

    @property
    def wall_max(self) -> int:
        return max(self.wall_counts)

    @property
    def glue_max(self) -> int:
        return max(self.glue_counts)

    @property
    def wall_scale(self) -> float:
        return self.h / self.l * self.n ** (self.dim - 1)

    @property
    def glue_scale(self) -> float:
        bend = self.h ** (self.dim - 2) if self.has_bends else 0.0
        return (self.eps + self.eta / self.l + bend + self.h) * self.n ** (self.dim - 1)

    @property
    def c2_hat(self) -> float:
        return self.wall_max / self.wall_scale

    @property
    def c6_hat(self) -> float:
        return self.glue_max / self.glue_scale

    def rows(self) -> list:
        out = [{"k": k, "family": "W", "count": c, "bound": self.c2_hat * self.wall_scale}
               for k, c in enumerate(self.wall_counts)]
        out += [{"k": k, "family": "M", "count": c, "bound": self.c6_hat * self.glue_scale}
                for k, c in enumerate(self.glue_counts)]
        for k, (a, b, c) in enumerate(self.glue_split):
            out += [{"k": k, "family": f"M{i + 1}", "count": x, "bound": float("nan")} for i, x in enumerate((a, b, c))]
        return out


def cardinality_audit(sc: CoveringScaffold, split: bool = True) -> Audit:
    S0, _ = bends(sc.P, sc.omega_prime)
    parts = []
    if split:
        for k in range(len(sc.glue)):
            a, b, c = split_glue(sc, k)
            parts.append((len(a), len(b), len(c)))
    return Audit(sc.n, sc.lat.dim, sc.cover.side, sc.h, sc.eta, sc.eps, [len(w) for w in sc.walls],
                 [len(m) for m in sc.glue], parts, len(S0) > 0, float(sc.omega_prime.transverse.min_angle))


def audit_sweep(P, omega_prime, domain, meshes, l, eps, h, eta, zeta, split: bool = False) -> list:
    from .lattice import discretize
    return [cardinality_audit(build_covering(P, omega_prime, discretize(domain, n), l, eps, h, eta, zeta), split)
            for n in meshes]


def fitted_constants(audits: Sequence[Audit]) -> tuple[float, float]:
    return max(a.c2_hat for a in audits), max(a.c6_hat for a in audits)


# --------------------------------------------------------------------------
# calibration of (ε, l, h, η)
# --------------------------------------------------------------------------

@dataclass
class Calibration:
    feasible: bool
    eps: float = float("nan")
    l: float = float("nan")
    h: float = float("nan")
    eta: float = float("nan")
    zeta: float = float("nan")
    rhs: float = float("nan")
    wall_lhs: float = float("nan")
    glue_lhs: float = float("nan")
    min_mesh: int | None = None
    message: str = ""

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def calibration_rhs(area: float, nu_min: float, mean: float, s: float) -> float:
    """H^{d-1}(∂P ∩ Ω') ν_min E[t] s / 16."""
    return area * nu_min * mean * s / 16.0


def check_calibration(c2: float, c6: float, eps: float, l: float, h: float, eta: float, d: int,
                      has_bends: bool, rhs: float) -> tuple[bool, float, float]:
    wall = c2 * h / l
    glue = c6 * (eps + eta / l + (h ** (d - 2) if has_bends else 0.0) + h)
    return (wall < rhs and glue < rhs), wall, glue


def calibrate_constants(s: float, P: PolyhedralSet, omega_prime: EnlargedDomain, law: CapacityLaw, table,
                        c2: float, c6: float, zeta: float | None = None, n: int | None = None,
                        h_bounds: dict | None = None, l_max: float | None = None) -> Calibration:
    """Pick ε, then l, then h and η so that both calibration inequalities hold.

    Raises InfeasibleError when ν_min vanishes (the right-hand side is zero).
    """
    from .geometry import OpenPolytopes, face_measures
    d = P.dim
    zeta = 2 * d if zeta is None else zeta
    if s <= 0:
        raise PreconditionError("s must be positive")
    mean = law.mean()
    if not math.isfinite(mean):
        raise PreconditionError("capacity law must have a finite mean")
    region = OpenPolytopes(list(omega_prime.pieces))
    fm = [(v, m) for v, m in face_measures(P, region) if m > 1e-12]
    area = sum(m for _, m in fm)
    nu_min = table.nu_min
    rhs = calibration_rhs(area, nu_min, mean, s)
    if rhs <= 0:
        raise InfeasibleError(f"right-hand side vanishes: nu_min={nu_min:g} (flow constant vanishes), E[t]={mean:g}, "
                              f"H(∂P ∩ Ω')={area:g}")
    integral = sum(m * table.get(v) for v, m in fm)
    eps0 = integral / (2 * table.nu_max)
    eps = 0.5 * min(eps0, rhs / (4 * c6))
    l0 = max(m for _, m in fm) ** (1.0 / (d - 1))
    if l_max is not None:
        l0 = min(l0, l_max)
    cover = square_cover(P, region, l0, eps)
    l = cover.side
    S0, _ = bends(P, omega_prime)
    has_bends = len(S0) > 0
    T = rhs / (4 * max(c2, c6))
    caps = [T, T * l]
    if has_bends and d > 2:
        caps.append(T ** (1.0 / (d - 2)))
    if has_bends and d == 2 and not 1.0 < T:
        return Calibration(False, eps, l, zeta=zeta, rhs=rhs,
                           message="bend term h^(d-2) = 1 in d = 2 cannot be made small: infeasible with bends")
    hb = h_bounds or {}
    for key in ("h0", "h1", "h2"):
        if key in hb and math.isfinite(hb[key]):
            caps.append(hb[key])
    h = 0.5 * min(caps)
    eta = 0.5 * min(T * l, l)
    ok, wall, glue = check_calibration(c2, c6, eps, l, h, eta, d, has_bends, rhs)
    need = math.ceil(zeta / min(h, eta) - 1e-12)
    msg = "feasible" if ok else "inequalities not met"
    if n is not None and n < need:
        msg = f"needs larger n: floor(eta n / zeta) >= 1 requires n >= {need}"
    return Calibration(ok and (n is None or n >= need), eps, l, h, eta, zeta, rhs, wall, glue, need, msg)
