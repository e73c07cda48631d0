"""Maximal flows, minimal cuts and stream checks on lattice graphs."""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import TextIO

import numpy as np
from numba import njit
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .lattice import LatticeGraph

RESIDUAL_EPS = 1e-12


@dataclass(eq=False)
class FlowProblem:
    """phi(F1 -> F2 in C) on a lattice graph.

    ``active`` lists the edge indices making up C (all edges by default);
    ``sources``/``sinks`` are vertex index arrays.
    """

    graph: LatticeGraph
    capacities: np.ndarray
    sources: np.ndarray
    sinks: np.ndarray
    active: np.ndarray | None = None

    def __post_init__(self):
        self.capacities = np.asarray(self.capacities, dtype=float)
        self.sources = _as_index(self.sources, self.graph.num_vertices)
        self.sinks = _as_index(self.sinks, self.graph.num_vertices)
        if self.active is None:
            self.active = np.arange(self.graph.num_edges)
        else:
            self.active = _as_index(self.active, self.graph.num_edges)
        if len(self.capacities) != self.graph.num_edges:
            raise ValueError("one capacity per graph edge is required")
        if np.any(self.capacities[self.active] < 0):
            raise ValueError("capacities must be nonnegative")
        if np.intersect1d(self.sources, self.sinks).size:
            raise ValueError("source and sink sets intersect")

    @property
    def active_mask(self) -> np.ndarray:
        m = np.zeros(self.graph.num_edges, dtype=bool)
        m[self.active] = True
        return m

    @classmethod
    def on_domain(cls, lat, capacities) -> "FlowProblem":
        """phi_n: from Gamma^1_n to Gamma^2_n in Omega_n."""
        return cls(lat, capacities, np.flatnonzero(lat.gamma1), np.flatnonzero(lat.gamma2))


def _as_index(x, size: int) -> np.ndarray:
    x = np.asarray(x)
    if x.dtype == bool:
        if len(x) != size:
            raise ValueError("mask has wrong length")
        return np.flatnonzero(x)
    return np.unique(x.astype(np.int64))


@dataclass
class Stream:
    """g(e) >= 0 and an orientation; ``forward[e]`` means edges[e,0] -> edges[e,1]."""

    g: np.ndarray
    forward: np.ndarray

    @classmethod
    def zero(cls, num_edges: int) -> "Stream":
        return cls(np.zeros(num_edges), np.ones(num_edges, dtype=bool))


@dataclass
class FlowResult:
    value: float
    stream: Stream
    source_side: np.ndarray   # residual-reachable vertices


@dataclass
class CutResult:
    edges: np.ndarray
    capacity: float


@dataclass
class StreamCheck:
    ok: bool
    flow: float
    message: str = ""
    edge: int = -1
    vertex: int = -1


# --------------------------------------------------------------------------
# Dinic's blocking-flow algorithm
# --------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def _dinic(nv, ptr, order, tail, head, cap, rev, s, t, eps):
    level = np.empty(nv, np.int64)
    it = np.empty(nv, np.int64)
    queue = np.empty(nv, np.int64)
    path = np.empty(nv, np.int64)
    total = 0.0
    while True:
        level[:] = -1
        level[s] = 0
        qh, qt = 0, 1
        queue[0] = s
        while qh < qt:
            u = queue[qh]
            qh += 1
            for k in range(ptr[u], ptr[u + 1]):
                a = order[k]
                v = head[a]
                if level[v] < 0 and cap[a] > eps:
                    level[v] = level[u] + 1
                    queue[qt] = v
                    qt += 1
        if level[t] < 0:
            break
        for u in range(nv):
            it[u] = ptr[u]
        depth = 0
        u = s
        while True:
            if u == t:
                f = np.inf
                for i in range(depth):
                    if cap[path[i]] < f:
                        f = cap[path[i]]
                back = depth
                for i in range(depth):
                    a = path[i]
                    cap[a] -= f
                    cap[rev[a]] += f
                    if cap[a] <= eps and i < back:
                        back = i
                total += f
                depth = back
                u = s if depth == 0 else head[path[depth - 1]]
                continue
            moved = False
            while it[u] < ptr[u + 1]:
                a = order[it[u]]
                v = head[a]
                if cap[a] > eps and level[v] == level[u] + 1:
                    path[depth] = a
                    depth += 1
                    u = v
                    moved = True
                    break
                it[u] += 1
            if not moved:
                if u == s:
                    break
                level[u] = -1
                depth -= 1
                u = tail[path[depth]]
                it[u] += 1
    # residual reachability from s
    seen = np.zeros(nv, np.bool_)
    seen[s] = True
    qh, qt = 0, 1
    queue[0] = s
    while qh < qt:
        u = queue[qh]
        qh += 1
        for k in range(ptr[u], ptr[u + 1]):
            a = order[k]
            v = head[a]
            if not seen[v] and cap[a] > eps:
                seen[v] = True
                queue[qt] = v
                qt += 1
    return total, seen


def max_flow(p: FlowProblem) -> FlowResult:
    g = p.graph
    V, E = g.num_vertices, g.num_edges
    if len(p.sources) == 0 or len(p.sinks) == 0:
        return FlowResult(0.0, Stream.zero(E), np.zeros(V, dtype=bool))
    act = p.active
    uv = g.edges[act]
    c = p.capacities[act]
    inf = float(c.sum()) + 1.0
    s, t = V, V + 1
    ns, nk = len(p.sources), len(p.sinks)
    tail = np.concatenate([uv[:, 0], uv[:, 1], np.full(ns, s), p.sources, p.sinks, np.full(nk, t)])
    head = np.concatenate([uv[:, 1], uv[:, 0], p.sources, np.full(ns, s), np.full(nk, t), p.sinks])
    cap = np.concatenate([c, c, np.full(ns, inf), np.zeros(ns), np.full(nk, inf), np.zeros(nk)])
    m = len(act)
    idx = np.arange(2 * m + 2 * ns + 2 * nk)
    rev = np.empty_like(idx)
    rev[:m], rev[m:2 * m] = idx[m:2 * m], idx[:m]
    o = 2 * m
    rev[o:o + ns], rev[o + ns:o + 2 * ns] = idx[o + ns:o + 2 * ns], idx[o:o + ns]
    o += 2 * ns
    rev[o:o + nk], rev[o + nk:o + 2 * nk] = idx[o + nk:o + 2 * nk], idx[o:o + nk]
    order = np.argsort(tail, kind="stable")
    ptr = np.zeros(V + 3, dtype=np.int64)
    np.cumsum(np.bincount(tail, minlength=V + 2), out=ptr[1:])
    total, seen = _dinic(V + 2, ptr, order, tail.astype(np.int64), head.astype(np.int64),
                         cap, rev, s, t, RESIDUAL_EPS)
    net = np.zeros(E)
    net[act] = 0.5 * (cap[m:2 * m] - cap[:m])
    net[act] = np.clip(net[act], -c, c)
    stream = Stream(np.abs(net), net >= 0)
    return FlowResult(float(total), stream, seen[:V])


def min_cut(p: FlowProblem, result: FlowResult | None = None) -> CutResult:
    """Cut given by the source-side residual-reachable set."""
    res = result or max_flow(p)
    side = res.source_side
    uv = p.graph.edges[p.active]
    cross = side[uv[:, 0]] != side[uv[:, 1]]
    edges = p.active[cross]
    return CutResult(edges, float(p.capacities[edges].sum()))


def is_cutset(E, p: FlowProblem) -> bool:
    """True iff no path from F1 to F2 in C uses only edges outside E."""
    if len(p.sources) == 0 or len(p.sinks) == 0:
        return True
    keep = p.active_mask
    E = np.asarray(E, dtype=np.int64)
    if E.size:
        keep[E] = False
    uv = p.graph.edges[keep]
    V = p.graph.num_vertices
    adj = coo_matrix((np.ones(len(uv)), (uv[:, 0], uv[:, 1])), shape=(V, V))
    lab = connected_components(adj, directed=False)[1]
    return np.intersect1d(lab[p.sources], lab[p.sinks]).size == 0


def validate_stream(s: Stream, p: FlowProblem, tol: float = 1e-9) -> StreamCheck:
    """Check 0 <= g <= t and conservation off F1 u F2; recompute the flow.

    The flow is the net amount entering F2 through edges of C from
    vertices outside F2.
    """
    g = p.graph
    act = p.active
    gv = np.asarray(s.g, dtype=float)
    scale = max(1.0, float(np.max(p.capacities[act], initial=0.0)))
    bad = np.flatnonzero(gv[act] < -tol * scale)
    if bad.size:
        e = int(act[bad[0]])
        return StreamCheck(False, float("nan"), f"negative amount on edge {e}", edge=e)
    bad = np.flatnonzero(gv[act] > p.capacities[act] + tol * scale)
    if bad.size:
        e = int(act[bad[0]])
        return StreamCheck(False, float("nan"),
                           f"capacity exceeded on edge {e}: g={gv[e]:g} > t={p.capacities[e]:g}", edge=e)
    uv = g.edges[act]
    fwd = np.asarray(s.forward, dtype=bool)[act]
    frm = np.where(fwd, uv[:, 0], uv[:, 1])
    to = np.where(fwd, uv[:, 1], uv[:, 0])
    amt = gv[act]
    V = g.num_vertices
    balance = np.bincount(to, amt, V) - np.bincount(frm, amt, V)
    interior = np.ones(V, dtype=bool)
    interior[p.sources] = False
    interior[p.sinks] = False
    touched = np.zeros(V, dtype=bool)
    touched[uv.ravel()] = True
    viol = np.flatnonzero(interior & touched & (np.abs(balance) > tol * scale * max(1, len(act)) ** 0.5))
    if viol.size:
        v = int(viol[0])
        return StreamCheck(False, float("nan"), f"conservation fails at vertex {v} (imbalance {balance[v]:g})",
                           vertex=v)
    sink = np.zeros(V, dtype=bool)
    sink[p.sinks] = True
    into = sink[to] & ~sink[frm]
    out = sink[frm] & ~sink[to]
    value = float(amt[into].sum() - amt[out].sum())
    return StreamCheck(True, value)


# --------------------------------------------------------------------------
# oracles and debugging helpers
# --------------------------------------------------------------------------

def brute_force_min_cut(p: FlowProblem, max_edges: int = 14) -> CutResult:
    """Minimum-capacity cut by enumerating every subset of C's edges."""
    act = p.active
    if len(act) > max_edges:
        raise ValueError(f"brute force limited to {max_edges} edges")
    best = None
    for r in range(len(act) + 1):
        for sub in itertools.combinations(act, r):
            cap = float(p.capacities[list(sub)].sum()) if sub else 0.0
            if best is not None and cap >= best.capacity:
                continue
            if is_cutset(np.array(sub, dtype=np.int64), p):
                best = CutResult(np.array(sub, dtype=np.int64), cap)
    return best


def dump_edge_list(p: FlowProblem, fh: TextIO) -> None:
    """Plain-text dump: one edge per line as 'x0,x1,... y0,y1,... capacity'."""
    g = p.graph
    fh.write(f"# n={g.n} d={g.dim} edges={len(p.active)}\n")
    fh.write("# sources " + " ".join(",".join(map(str, g.coords[v])) for v in p.sources) + "\n")
    fh.write("# sinks " + " ".join(",".join(map(str, g.coords[v])) for v in p.sinks) + "\n")
    for e in p.active:
        a, b = g.edges[e]
        fh.write(f"{','.join(map(str, g.coords[a]))} {','.join(map(str, g.coords[b]))} "
                 f"{p.capacities[e]!r}\n")
