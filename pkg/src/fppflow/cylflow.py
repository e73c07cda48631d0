"""Flows through cylinders: tau_n(A, h) between the sides and phi_n(A, h) bottom to top."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .capacity import CapacityField, CapacityLaw
from .flow import FlowProblem, max_flow, min_cut
from .geometry import CylinderSets, CylinderSpec, cylinder_lattice_sets

KINDS = ("tau", "phi")


@dataclass
class CylinderFlowSample:
    spec: CylinderSpec
    n: int
    kind: str
    value: float
    seed: int


class CylinderFlow:
    """Lattice data of one cylinder at one mesh, reusable across capacity fields."""

    def __init__(self, spec: CylinderSpec, n: int, kind: str = "tau"):
        if kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        self.spec = spec
        self.n = int(n)
        self.kind = kind

    @cached_property
    def sets(self) -> CylinderSets:
        return cylinder_lattice_sets(self.spec, self.n)

    @property
    def graph(self):
        return self.sets.graph

    def terminals(self) -> tuple[np.ndarray, np.ndarray]:
        s = self.sets
        if self.kind == "tau":
            return np.flatnonzero(s.side1), np.flatnonzero(s.side2)
        return np.flatnonzero(s.bottom), np.flatnonzero(s.top)

    def problem(self, capacities: np.ndarray) -> FlowProblem:
        src, snk = self.terminals()
        return FlowProblem(self.graph, capacities, src, snk)

    def capacities(self, field: CapacityField) -> np.ndarray:
        return field.on(self.graph)

    def value(self, field: CapacityField) -> float:
        g = self.graph
        if g.num_edges == 0:
            return 0.0
        return max_flow(self.problem(self.capacities(field))).value

    def cut(self, field: CapacityField):
        return min_cut(self.problem(self.capacities(field)))

    def crossing_edges(self) -> np.ndarray:
        """Edges of the cylinder graph crossing the plane separating the two terminal sets.

        For tau this is hyp(A); for phi it is the mid-height plane.  Either
        set is a cut, so its capacity bounds the flow.
        """
        g = self.graph
        P0, P1 = g.edge_endpoints()
        c = self.spec
        lo, hi = c.t_range
        level = 0.0 if self.kind == "tau" else 0.5 * (lo + hi)
        t0 = (P0 - c.center) @ c.normal - level
        t1 = (P1 - c.center) @ c.normal - level
        tol = 1e-12
        return np.flatnonzero(((t0 <= tol) & (t1 > tol)) | ((t1 <= tol) & (t0 > tol)))


def tau(c: CylinderSpec, n: int, field: CapacityField) -> float:
    """phi(A_1^h -> A_2^h in cyl(A, h))."""
    return CylinderFlow(c, n, "tau").value(field)


def phi_cyl(c: CylinderSpec, n: int, field: CapacityField) -> float:
    """phi(B(A, h) -> T(A, h) in cyl(A, h))."""
    return CylinderFlow(c, n, "phi").value(field)


def sample(c: CylinderSpec, n: int, law: CapacityLaw, seed: int, kind: str = "tau") -> CylinderFlowSample:
    v = CylinderFlow(c, n, kind).value(CapacityField(law, seed))
    return CylinderFlowSample(c, n, kind, v, seed)
