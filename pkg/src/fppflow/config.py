"""Run configuration: parsing, validation, canonical hashing."""
from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .capacity import CapacityLaw
from .errors import PreconditionError
from .geometry import PolyhedralSet
from .lattice import ContinuousDomain
from .nu import compass_directions, unit

KINDS = ("flow-sample", "estimate-nu", "phi-tilde", "cutset-verify", "ldp-rate", "sum-tail")

# defaults per experiment, all on the unit-square benchmark
DEFAULTS = {
    "flow-sample": {"meshes": [16], "trials": 1},
    "estimate-nu": {"meshes": [4, 8], "trials": 20, "directions": [[1, 0], [0, 1], [1, 1], [1, -1]]},
    "phi-tilde": {"meshes": [], "trials": 0,
                  "candidates": [{"halfspace": {"normal": [1, 0], "offset": c}} for c in (0.25, 0.5, 0.75)]},
    "cutset-verify": {"meshes": [64], "trials": 100, "P": {"halfspace": {"normal": [1, 0], "offset": 0.5}},
                      "constants": {"zeta": 4, "h": 0.1, "eta": 0.1, "l": 0.2, "eps": 0.1, "delta0": 2.0}},
    "ldp-rate": {"meshes": [4, 6, 8], "trials": 2000, "constants": {"lam": 0.9, "theta": "auto"}},
    "sum-tail": {"meshes": [], "trials": 100000, "constants": {"alpha": 1.0, "beta": 2.0, "m": 100}},
}


@dataclass
class RunConfig:
    kind: str
    domain: object = "square"
    law: dict = field(default_factory=lambda: {"kind": "exponential", "rate": 1.0})
    meshes: list = field(default_factory=list)
    trials: int = 1
    constants: dict = field(default_factory=dict)
    seed: int = 0
    directions: list | None = None
    candidates: list | None = None
    P: dict | None = None
    nu_table: object = None      # path, inline table dict, or {"analytic": "constant", "scale": c}
    workers: int = 1
    out: str = "runs"

    # --- construction ----------------------------------------------------
    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = copy.deepcopy(d)
        kind = d.get("kind")
        if kind not in KINDS:
            raise PreconditionError(f"experiment kind must be one of {KINDS}, got {kind!r}")
        base = copy.deepcopy(DEFAULTS[kind])
        consts = dict(base.pop("constants", {}))
        user = d.pop("constants", {}) or {}
        if "lam_factor" in user and "lam" not in user:
            consts.pop("lam", None)
        consts.update(user)
        base.update(d)
        base["constants"] = consts
        known = set(cls.__dataclass_fields__)
        extra = set(base) - known
        if extra:
            raise PreconditionError(f"unknown configuration keys: {sorted(extra)}")
        return cls(**base)

    @classmethod
    def load(cls, path) -> "RunConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return {k: copy.deepcopy(getattr(self, k)) for k in self.__dataclass_fields__}

    def canonical(self) -> dict:
        """The part of the configuration that determines the outputs."""
        d = self.to_dict()
        d.pop("workers")
        d.pop("out")
        return d

    def digest(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    # --- resolved objects -----------------------------------------------
    def domain_obj(self) -> ContinuousDomain:
        return parse_domain(self.domain)

    def law_obj(self) -> CapacityLaw:
        try:
            return CapacityLaw.from_dict(self.law)
        except (KeyError, TypeError, ValueError) as e:
            raise PreconditionError(f"invalid capacity law {self.law}: {e}") from e

    def direction_list(self, dim: int) -> list:
        if self.directions is None:
            return [np.eye(dim)[0]]
        if isinstance(self.directions, str) and self.directions.startswith("compass:"):
            return list(compass_directions(int(self.directions.split(":")[1])))
        return [unit(v) for v in self.directions]

    # --- validation -------------------------------------------------------
    def validate(self) -> "RunConfig":
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2 ** 64:
            raise PreconditionError("seed must be an unsigned 64-bit integer")
        if not isinstance(self.workers, int) or self.workers < 1:
            raise PreconditionError("workers must be a positive integer")
        dom = self.domain_obj()
        law = self.law_obj()
        if any(int(n) < 1 for n in self.meshes):
            raise PreconditionError("meshes must be positive integers")
        c = self.constants
        k = self.kind
        if k in ("flow-sample", "estimate-nu", "cutset-verify", "ldp-rate"):
            if not self.meshes:
                raise PreconditionError(f"{k} needs at least one mesh")
            if self.trials < 1:
                raise PreconditionError("trials must be at least 1")
        if k == "estimate-nu":
            if self.trials < 2:
                raise PreconditionError("estimate-nu needs at least 2 samples per mesh for a standard error")
            for v in self.direction_list(dom.dim):
                if len(v) != dom.dim:
                    raise PreconditionError(f"direction {list(v)} does not match dimension {dom.dim}")
        if k == "phi-tilde":
            if not self.candidates:
                raise PreconditionError("phi-tilde needs a nonempty candidate family")
            for cand in self.candidates:
                parse_polyhedral(cand, dom)
            if self.nu_table is None:
                raise PreconditionError("phi-tilde needs a nu table (path, inline, or analytic)")
        if k == "cutset-verify":
            if self.P is None:
                raise PreconditionError("cutset-verify needs the set P")
            parse_polyhedral(self.P, dom)
            d = dom.dim
            if c.get("zeta", 0) < 2 * d:
                raise PreconditionError(f"zeta must be at least 2d={2 * d}")
            for key in ("h", "eta", "l", "eps", "delta0"):
                if not c.get(key, 0) > 0:
                    raise PreconditionError(f"constant {key} must be positive")
            if "s" in c and not c["s"] > 0:
                raise PreconditionError("constant s must be positive")
            if "s" in c and self.nu_table is None:
                raise PreconditionError("calibration (constant s) needs a nu table")
        if k == "ldp-rate":
            lam = c.get("lam")
            fac = c.get("lam_factor")
            if lam is None and fac is None:
                raise PreconditionError("ldp-rate needs lam or lam_factor")
            if lam is not None and not lam > 0:
                raise PreconditionError("lambda must be positive")
            th = c.get("theta", "auto")
            if th != "auto":
                if not th >= 0:
                    raise PreconditionError("theta must be nonnegative or 'auto'")
                if th > 0 and not th < law.divergence_boundary():
                    raise PreconditionError(f"divergent tilt: theta={th} beyond {law.divergence_boundary()}")
        if k == "sum-tail":
            a, b, m = c.get("alpha", 0), c.get("beta", 0), c.get("m", 0)
            if not (a > 0 and m > 0):
                raise PreconditionError("alpha and m must be positive")
            if not b > a * law.mean():
                raise PreconditionError(f"not a rare event: beta={b} <= alpha E[t]={a * law.mean():g}")
        return self


def parse_domain(spec) -> ContinuousDomain:
    if spec == "square" or spec is None:
        return ContinuousDomain.unit_square()
    if isinstance(spec, str):
        return ContinuousDomain.load(spec).validate()
    if isinstance(spec, dict) and "box" in spec:
        b = spec["box"]
        return ContinuousDomain.box(b["lo"], b["hi"], b.get("axis", 0))
    if isinstance(spec, dict):
        return ContinuousDomain.from_dict(spec).validate()
    raise PreconditionError(f"cannot parse domain {spec!r}")


def parse_polyhedral(spec: dict, domain: ContinuousDomain) -> PolyhedralSet:
    if "halfspace" in spec:
        hs = spec["halfspace"]
        normal = np.asarray(hs["normal"], dtype=float)
        if len(normal) != domain.dim:
            raise PreconditionError("halfspace normal does not match the domain dimension")
        return PolyhedralSet.halfspace(normal, float(hs["offset"]) * np.linalg.norm(normal), domain.bbox())
    if "polytopes" in spec:
        return PolyhedralSet.from_dict(spec)
    raise PreconditionError(f"cannot parse polyhedral set {spec!r}")
