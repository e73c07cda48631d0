"""Monte Carlo estimation of the flow constant nu(v) and the continuous min-cut functional."""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.optimize import linprog

from .capacity import CapacityField, CapacityLaw, derive_seed
from .cylflow import CylinderFlow
from .geometry import (OpenPolytopes, PlaneRegion, PolyhedralSet, CylinderSpec, _covered_open,
                       cube_cover, face_measures, transverse)
from .polytope import convex_hull_distance, hyperplane_basis

# critical bond percolation parameters
P_C = {2: 0.5, 3: 0.2488126}

# generic offset so that no lattice point lies on the faces of the default cylinder
_GENERIC = np.array([math.sqrt(2) % 1, math.sqrt(3) % 1, math.sqrt(5) % 1, math.sqrt(7) % 1,
                     math.sqrt(11) % 1, math.sqrt(13) % 1])


def unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    nrm = np.linalg.norm(v)
    if nrm == 0:
        raise ValueError("zero direction")
    return v / nrm


def direction_key(v) -> tuple:
    return tuple(float(x) for x in np.round(unit(v), 9) + 0.0)


def default_cylinder(v, h: float = 1.0, area: float = 1.0) -> CylinderSpec:
    """Symmetric cylinder with a unit hypersquare base orthogonal to v, centred off-lattice."""
    v = unit(v)
    d = len(v)
    side = area ** (1.0 / (d - 1))
    return CylinderSpec(_GENERIC[:d] * 0.5, hyperplane_basis(v), np.full(d - 1, side), v, h, False)


# --------------------------------------------------------------------------
# estimation
# --------------------------------------------------------------------------

@dataclass
class NuEstimate:
    direction: np.ndarray
    meshes: list
    means: list
    ses: list
    counts: list
    nu_hat: float
    se: float
    cylinder: dict
    law: dict
    seed: int
    samples: dict = field(default_factory=dict)   # mesh -> list of normalised values

    def to_dict(self, with_samples: bool = False) -> dict:
        out = {"direction": [float(x) for x in self.direction], "meshes": list(self.meshes),
               "means": list(self.means), "ses": list(self.ses), "counts": list(self.counts),
               "nu_hat": self.nu_hat, "se": self.se, "cylinder": self.cylinder, "law": self.law,
               "seed": self.seed}
        if with_samples:
            out["samples"] = {str(k): list(v) for k, v in self.samples.items()}
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "NuEstimate":
        samples = {int(k): list(v) for k, v in d.get("samples", {}).items()}
        return cls(np.asarray(d["direction"], float), list(d["meshes"]), list(d["means"]), list(d["ses"]),
                   list(d["counts"]), float(d["nu_hat"]), float(d["se"]), d.get("cylinder", {}),
                   d.get("law", {}), int(d.get("seed", 0)), samples)


def _direction_tag(v: np.ndarray) -> list:
    return [int(round(x * 1e6)) for x in v]


def estimate_nu(v, law: CapacityLaw, meshes: Sequence[int], samples_per_mesh: int, seed: int,
                cylinder: CylinderSpec | None = None, h: float = 1.0, workers: int = 1) -> NuEstimate:
    """Sample tau_n(A, h) / (n^{d-1} H^{d-1}(A)) at each mesh; nu_hat is the largest-mesh mean."""
    if samples_per_mesh < 1 or not meshes:
        raise ValueError("need at least one sample and one mesh")
    if not math.isfinite(law.mean()):
        raise ValueError("capacity law must have a finite mean")
    v = unit(v)
    d = len(v)
    c = cylinder or default_cylinder(v, h)
    tag = _direction_tag(v)
    means, ses, counts, samples = [], [], [], {}
    for n in sorted(int(m) for m in meshes):
        cf = CylinderFlow(c, n, "tau")
        _ = cf.sets   # build once before threads share it
        norm = n ** (d - 1) * c.base_area
        seeds = [derive_seed(seed, *tag, n, j) for j in range(samples_per_mesh)]

        def one(s):
            return cf.value(CapacityField(law, s)) / norm

        if workers > 1:
            with ThreadPoolExecutor(workers) as ex:
                vals = list(ex.map(one, seeds))
        else:
            vals = [one(s) for s in seeds]
        arr = np.asarray(vals)
        means.append(float(np.mean(arr)))
        ses.append(float(np.std(arr, ddof=1) / math.sqrt(len(arr))) if len(arr) > 1 else float("nan"))
        counts.append(len(arr))
        samples[n] = vals
    return NuEstimate(v, sorted(int(m) for m in meshes), means, ses, counts, means[-1], ses[-1],
                      c.to_dict(), law.to_dict(), int(seed), samples)


# --------------------------------------------------------------------------
# tables of nu over directions
# --------------------------------------------------------------------------

@dataclass
class NuTable:
    """nu-hat (with standard error) keyed by exact unit directions."""

    dim: int
    entries: dict = field(default_factory=dict)    # key -> (nu, se)
    estimates: dict = field(default_factory=dict)  # key -> NuEstimate (optional)
    meta: dict = field(default_factory=dict)

    def add(self, v, nu: float, se: float = 0.0, estimate: NuEstimate | None = None) -> None:
        k = direction_key(v)
        self.entries[k] = (float(nu), float(se))
        if estimate is not None:
            self.estimates[k] = estimate

    def add_estimate(self, est: NuEstimate) -> None:
        self.add(est.direction, est.nu_hat, est.se if math.isfinite(est.se) else 0.0, est)

    def __contains__(self, v) -> bool:
        return direction_key(v) in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def get(self, v) -> float:
        return self.entries[direction_key(v)][0]

    def se(self, v) -> float:
        return self.entries[direction_key(v)][1]

    def missing(self, directions: Iterable) -> list:
        return [direction_key(v) for v in directions if direction_key(v) not in self.entries]

    def directions(self) -> np.ndarray:
        return np.array(sorted(self.entries), dtype=float).reshape(-1, self.dim)

    @property
    def nu_min(self) -> float:
        return min(v[0] for v in self.entries.values())

    @property
    def nu_max(self) -> float:
        return max(v[0] for v in self.entries.values())

    def scaled(self, c: float) -> "NuTable":
        return NuTable(self.dim, {k: (c * a, abs(c) * s) for k, (a, s) in self.entries.items()},
                       dict(self.estimates), dict(self.meta))

    @classmethod
    def analytic(cls, fn: Callable[[np.ndarray], float], directions: Iterable, dim: int) -> "NuTable":
        t = cls(dim, meta={"source": "analytic"})
        for v in directions:
            t.add(v, fn(unit(v)), 0.0)
        return t

    @classmethod
    def estimate(cls, directions: Iterable, law: CapacityLaw, meshes, samples_per_mesh: int, seed: int,
                 h: float = 1.0, workers: int = 1) -> "NuTable":
        dirs = [unit(v) for v in directions]
        t = cls(len(dirs[0]), meta={"law": law.to_dict(), "meshes": list(meshes),
                                    "samples_per_mesh": samples_per_mesh, "seed": seed, "h": h})
        for v in dirs:
            t.add_estimate(estimate_nu(v, law, meshes, samples_per_mesh, seed, h=h, workers=workers))
        return t

    # --- persistence ---------------------------------------------------
    def to_dict(self) -> dict:
        rows = []
        for k in sorted(self.entries):
            nu, se = self.entries[k]
            row = {"direction": list(k), "nu": nu, "se": se}
            if k in self.estimates:
                row["estimate"] = self.estimates[k].to_dict()
            rows.append(row)
        return {"dimension": self.dim, "meta": self.meta, "directions": rows}

    @classmethod
    def from_dict(cls, d: dict) -> "NuTable":
        t = cls(int(d["dimension"]), meta=dict(d.get("meta", {})))
        for row in d["directions"]:
            est = NuEstimate.from_dict(row["estimate"]) if "estimate" in row else None
            t.add(row["direction"], row["nu"], row.get("se", 0.0), est)
        return t

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> "NuTable":
        return cls.from_dict(json.loads(Path(path).read_text()))


def constant_law_nu(v: np.ndarray, c: float = 1.0) -> float:
    """nu for constant capacities c: the number of lattice edges crossing a unit hypersurface, |v|_1 c."""
    return float(c * np.sum(np.abs(unit(v))))


def compass_directions(k: int = 8) -> np.ndarray:
    """k equally spaced unit directions in the plane starting at e1."""
    a = 2 * np.pi * np.arange(k) / k
    D = np.c_[np.cos(a), np.sin(a)]
    D[np.abs(D) < 1e-15] = 0.0
    return D


# --------------------------------------------------------------------------
# properties of nu
# --------------------------------------------------------------------------

def nu_zero_check(law: CapacityLaw, d: int, pc: float | None = None) -> bool:
    """nu vanishes iff the atom at zero is at least 1 - p_c(d)."""
    if pc is None:
        if d not in P_C:
            raise ValueError(f"p_c unknown for d={d}; pass pc explicitly")
        pc = P_C[d]
    return law.atom_at_zero() >= 1.0 - pc


def nu_homogeneous(table: NuTable, w) -> float:
    """nu_0(w) = |w|_2 nu(w / |w|_2), nu_0(0) = 0; w/|w| must be a table direction."""
    if len(table) == 0:
        raise ValueError("empty nu table")
    w = np.asarray(w, dtype=float)
    r = float(np.linalg.norm(w))
    if r == 0.0:
        return 0.0
    u = w / r
    if u not in table:
        raise KeyError(f"direction {direction_key(u)} not in table (use nu_upper_bound)")
    return r * table.get(u)


def nu_upper_bound(table: NuTable, w) -> float:
    """Convexity bound: min sum lambda_i nu(u_i) over lambda >= 0 with sum lambda_i u_i = w."""
    w = np.asarray(w, dtype=float)
    if np.linalg.norm(w) == 0:
        return 0.0
    U = table.directions()
    c = np.array([table.get(u) for u in U])
    res = linprog(c, A_eq=U.T, b_eq=w, bounds=(0, None), method="highs")
    if res.status != 0:
        raise ValueError("table directions do not positively span w")
    return float(res.fun)


@dataclass
class TriangleCheck:
    ok: bool
    lhs: float
    rhs: float
    se: float
    margin: float
    normals: tuple


def triangle_normals(A, B, C) -> tuple:
    """Exterior unit normals (v_A, v_B, v_C) to the sides [BC], [AC], [AB] in the triangle's plane."""
    A, B, C = (np.asarray(x, dtype=float) for x in (A, B, C))
    e1, e2 = B - A, C - A
    if np.linalg.matrix_rank(np.vstack([e1, e2]), tol=1e-12) < 2:
        raise ValueError("degenerate triangle")
    G = np.vstack([e1, e2])
    Q, _ = np.linalg.qr(G.T)   # orthonormal basis of the plane (columns)

    def ext(P, R, opposite):
        t = R - P
        t = t - (t @ Q) @ Q.T * 0.0
        t2 = Q.T @ t
        n2 = np.array([t2[1], -t2[0]])
        n = Q @ n2
        n /= np.linalg.norm(n)
        if n @ (opposite - P) > 0:
            n = -n
        return n

    return ext(B, C, A), ext(A, C, B), ext(A, B, C)


def weak_triangle_check(A, B, C, table: NuTable, k_se: float = 3.0) -> TriangleCheck:
    """|AB| nu(v_C) <= |AC| nu(v_B) + |BC| nu(v_A), up to k_se combined standard errors."""
    A, B, C = (np.asarray(x, dtype=float) for x in (A, B, C))
    vA, vB, vC = triangle_normals(A, B, C)
    miss = table.missing([vA, vB, vC])
    if miss:
        raise KeyError(f"directions missing from nu table: {miss}")
    lAB, lAC, lBC = np.linalg.norm(B - A), np.linalg.norm(C - A), np.linalg.norm(C - B)
    lhs = lAB * table.get(vC)
    rhs = lAC * table.get(vB) + lBC * table.get(vA)
    se = math.sqrt((lAB * table.se(vC)) ** 2 + (lAC * table.se(vB)) ** 2 + (lBC * table.se(vA)) ** 2)
    margin = rhs - lhs + k_se * se
    return TriangleCheck(margin >= -1e-12 * max(1.0, abs(lhs)), lhs, rhs, se, margin, (vA, vB, vC))


def triangle_from_normals(nA, nB, nC, scale: float = 1.0, origin=None) -> tuple:
    """Planar triangle (A, B, C) whose sides [BC], [AC], [AB] have exterior normals nA, nB, nC."""
    N = np.array([nA, nB, nC], dtype=float)
    d = N.shape[1]
    # side lengths solve L_A nA + L_B nB + L_C nC = 0 with L > 0
    _, _, vt = np.linalg.svd(N.T)
    L = vt[-1]
    if np.all(L < 0):
        L = -L
    if not np.all(L > 1e-12) or np.linalg.norm(N.T @ L) > 1e-9:
        raise ValueError("normals do not close a triangle")
    L = scale * L / L.max()
    # walk the boundary counterclockwise: side direction = normal rotated by +90 degrees in-plane
    Q, _ = np.linalg.qr(N[:2].T)
    rot = lambda n: Q @ np.array([-(Q.T @ n)[1], (Q.T @ n)[0]])
    start = np.zeros(d) if origin is None else np.asarray(origin, dtype=float)
    # order: side AB (normal nC) from A to B, then BC (nA), then CA (nB)
    A = start
    B = A + L[2] * rot(N[2])
    C = B + L[0] * rot(N[0])
    vA, vB, vC = triangle_normals(A, B, C)
    if not (np.allclose(vA, N[0]) and np.allclose(vB, N[1]) and np.allclose(vC, N[2])):
        B = A - L[2] * rot(N[2])
        C = B - L[0] * rot(N[0])
    return A, B, C


# --------------------------------------------------------------------------
# the continuous min-cut functional
# --------------------------------------------------------------------------

def _as_region(region) -> PlaneRegion:
    if isinstance(region, PlaneRegion):
        return region
    if hasattr(region, "pieces"):
        return OpenPolytopes(list(region.pieces))
    raise TypeError("region must be a PlaneRegion or a domain")


def capacity_integral(P: PolyhedralSet, region, table: NuTable) -> float:
    """I(P) = sum over faces of nu(v_i) H^{d-1}(H_i ∩ region)."""
    return capacity_terms(P, region, table)[0]


def capacity_terms(P: PolyhedralSet, region, table: NuTable) -> tuple[float, list]:
    fm = [(v, m) for v, m in face_measures(P, _as_region(region)) if m > 1e-12]
    miss = sorted(set(table.missing([v for v, _ in fm])))
    if miss:
        raise KeyError(f"nu table lacks face directions: {miss}")
    terms = [(v, m, table.get(v)) for v, m in fm]
    return float(sum(m * nu for _, m, nu in terms)), terms


@dataclass
class CutCandidate:
    P: PolyhedralSet
    capacity: float
    polyhedral: bool = True
    transverse: bool = False
    source_inside: bool = False
    sink_outside: bool = False
    witness: object = None
    reason: str = ""

    @property
    def admissible(self) -> bool:
        return self.polyhedral and self.transverse and self.source_inside and self.sink_outside


def admissibility(domain, P: PolyhedralSet) -> CutCandidate:
    cand = CutCandidate(P, float("nan"))
    if P.empty:
        cand.reason = "empty set"
        return cand
    tr = transverse(P, domain)
    cand.transverse = tr.ok
    if not tr.ok:
        cand.witness = tr.witness
        cand.reason = "not transverse to the boundary"
    cand.source_inside = all(_covered_open(P.polytopes, g.vertices) for g in domain.source)
    if not cand.source_inside and not cand.reason:
        cand.reason = "source patch not inside the interior of P"
    dist = min(convex_hull_distance(Q.vertices, g.vertices) for Q in P.polytopes for g in domain.sink)
    cand.sink_outside = dist > 1e-9
    if not cand.sink_outside and not cand.reason:
        cand.reason = "sink patch touches P"
    return cand


@dataclass
class PhiTilde:
    value: float
    best: int
    candidates: list


def phi_tilde(domain, candidates: Sequence[PolyhedralSet], table: NuTable) -> PhiTilde:
    """Minimum of I over the admissible members of a finite family (an upper bound on the infimum)."""
    out = []
    for P in candidates:
        c = admissibility(domain, P)
        if c.admissible:
            c.capacity = capacity_integral(P, domain, table)
        out.append(c)
    ok = [i for i, c in enumerate(out) if c.admissible]
    if not ok:
        raise ValueError("no admissible candidate in the family")
    best = min(ok, key=lambda i: (out[i].capacity, i))
    return PhiTilde(out[best].capacity, best, out)


def default_witness(domain, r: float | None = None) -> PolyhedralSet:
    """A cube cover of the source patch: always admissible, so phi-tilde is finite."""
    if r is None:
        r = min(0.1, domain.separation / (4 * domain.dim))
    return cube_cover(domain, r)
