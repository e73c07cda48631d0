"""Capacity laws, reproducible i.i.d. capacity fields and Cramér rates.

Randomness is counter based: the uniform variate attached to an edge is a
hash of ``(seed, lower endpoint, axis)``.  The value of ``t(e)`` therefore
depends only on the seed and on the geometric edge, never on enumeration
order, so a domain, a cylinder and an enlarged domain built from the same
field see identical capacities on shared edges.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize
from scipy.special import logsumexp

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_COORD_OFFSET = 1 << 31


def splitmix64(x: np.ndarray) -> np.ndarray:
    """SplitMix64 finalizer on uint64 arrays (wrapping arithmetic)."""
    x = np.asarray(x, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = x + _GOLDEN
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
        return z ^ (z >> np.uint64(31))


def derive_seed(seed: int, *tags: int) -> int:
    """Child seed for a (seed, tag, ...) stream; used for trials and meshes."""
    h = splitmix64(np.array([seed & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64))
    for t in tags:
        h = splitmix64(h ^ np.uint64(t & 0xFFFFFFFFFFFFFFFF))
    return int(h[0])


def keyed_uniforms(seed: int, keys: np.ndarray) -> np.ndarray:
    """Uniforms in (0, 1) from integer key rows; one variate per row.

    ``keys`` is an (m,) or (m, k) integer array.  Rows hash independently.
    """
    keys = np.asarray(keys, dtype=np.int64)
    if keys.ndim == 1:
        keys = keys[:, None]
    h = np.full(keys.shape[0], seed & 0xFFFFFFFFFFFFFFFF, dtype=np.uint64)
    h = splitmix64(h)
    for j in range(keys.shape[1]):
        col = (keys[:, j] + _COORD_OFFSET).astype(np.uint64)
        h = splitmix64(h ^ col)
    # 53 random bits, shifted off zero so that log(u) stays finite
    return ((h >> np.uint64(11)).astype(np.float64) + 0.5) * (1.0 / (1 << 53))


# --------------------------------------------------------------------------
# laws
# --------------------------------------------------------------------------

KINDS = ("constant", "bernoulli", "exponential", "uniform", "discrete")


@dataclass(frozen=True)
class CapacityLaw:
    """Law of a single edge capacity.

    kinds and parameters:
      constant(c); bernoulli(p, lo, hi) with P[t = hi] = p;
      exponential(rate); uniform(a, b, theta=0) where a nonzero ``theta``
      is the exponentially tilted uniform (density proportional to
      exp(theta x) on [a, b]); discrete(atoms, weights).
    """

    kind: str
    params: tuple = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown capacity law kind {self.kind!r}")
        p = self.params
        if self.kind == "constant":
            if len(p) != 1 or p[0] < 0:
                raise ValueError("constant law needs one value c >= 0")
        elif self.kind == "bernoulli":
            if len(p) != 3:
                raise ValueError("bernoulli law needs (p, lo, hi)")
            prob, lo, hi = p
            if not 0.0 <= prob <= 1.0 or lo < 0 or hi < 0:
                raise ValueError("bernoulli law needs 0 <= p <= 1 and lo, hi >= 0")
        elif self.kind == "exponential":
            if len(p) != 1 or p[0] <= 0:
                raise ValueError("exponential law needs rate > 0")
        elif self.kind == "uniform":
            if len(p) not in (2, 3) or p[0] < 0 or p[1] < p[0]:
                raise ValueError("uniform law needs 0 <= a <= b")
        elif self.kind == "discrete":
            atoms, weights = p
            if len(atoms) != len(weights) or len(atoms) == 0:
                raise ValueError("discrete law needs matching atoms and weights")
            if min(atoms) < 0 or min(weights) < 0:
                raise ValueError("discrete law needs nonnegative atoms and weights")
            if abs(sum(weights) - 1.0) > 1e-12:
                raise ValueError("discrete weights must sum to 1 within 1e-12")

    # constructors --------------------------------------------------------
    @classmethod
    def constant(cls, c: float) -> "CapacityLaw":
        return cls("constant", (float(c),))

    @classmethod
    def bernoulli(cls, p: float, lo: float = 0.0, hi: float = 1.0) -> "CapacityLaw":
        return cls("bernoulli", (float(p), float(lo), float(hi)))

    @classmethod
    def exponential(cls, rate: float = 1.0) -> "CapacityLaw":
        return cls("exponential", (float(rate),))

    @classmethod
    def uniform(cls, a: float, b: float, theta: float = 0.0) -> "CapacityLaw":
        if theta == 0.0:
            return cls("uniform", (float(a), float(b)))
        return cls("uniform", (float(a), float(b), float(theta)))

    @classmethod
    def discrete(cls, atoms, weights) -> "CapacityLaw":
        return cls("discrete", (tuple(float(a) for a in atoms), tuple(float(w) for w in weights)))

    @classmethod
    def from_dict(cls, spec: dict) -> "CapacityLaw":
        kind = spec["kind"]
        if kind == "constant":
            return cls.constant(spec["c"])
        if kind == "bernoulli":
            return cls.bernoulli(spec["p"], spec.get("lo", 0.0), spec.get("hi", 1.0))
        if kind == "exponential":
            return cls.exponential(spec.get("rate", 1.0))
        if kind == "uniform":
            return cls.uniform(spec["a"], spec["b"], spec.get("theta", 0.0))
        if kind == "discrete":
            return cls.discrete(spec["atoms"], spec["weights"])
        raise ValueError(f"unknown capacity law kind {kind!r}")

    def to_dict(self) -> dict:
        p = self.params
        if self.kind == "constant":
            return {"kind": "constant", "c": p[0]}
        if self.kind == "bernoulli":
            return {"kind": "bernoulli", "p": p[0], "lo": p[1], "hi": p[2]}
        if self.kind == "exponential":
            return {"kind": "exponential", "rate": p[0]}
        if self.kind == "uniform":
            out = {"kind": "uniform", "a": p[0], "b": p[1]}
            if len(p) == 3:
                out["theta"] = p[2]
            return out
        return {"kind": "discrete", "atoms": list(p[0]), "weights": list(p[1])}

    # moments -------------------------------------------------------------
    @property
    def support(self) -> tuple[float, float]:
        p = self.params
        if self.kind == "constant":
            return p[0], p[0]
        if self.kind == "bernoulli":
            prob, lo, hi = p
            if prob == 0.0:
                return lo, lo
            if prob == 1.0:
                return hi, hi
            return min(lo, hi), max(lo, hi)
        if self.kind == "exponential":
            return 0.0, math.inf
        if self.kind == "uniform":
            return p[0], p[1]
        atoms = [a for a, w in zip(*p) if w > 0]
        return min(atoms), max(atoms)

    def mean(self) -> float:
        p = self.params
        if self.kind == "constant":
            return p[0]
        if self.kind == "bernoulli":
            return (1 - p[0]) * p[1] + p[0] * p[2]
        if self.kind == "exponential":
            return 1.0 / p[0]
        if self.kind == "uniform":
            a, b = p[0], p[1]
            th = p[2] if len(p) == 3 else 0.0
            if th == 0.0 or a == b:
                return 0.5 * (a + b)
            # derivative of the log-MGF of the plain uniform at theta
            return _uniform_dlogmgf(a, b, th)
        return float(np.dot(p[0], p[1]))

    def atom_at_zero(self) -> float:
        """Lambda({0})."""
        p = self.params
        if self.kind == "constant":
            return 1.0 if p[0] == 0.0 else 0.0
        if self.kind == "bernoulli":
            prob, lo, hi = p
            return (1 - prob) * (lo == 0.0) + prob * (hi == 0.0)
        if self.kind == "exponential":
            return 0.0
        if self.kind == "uniform":
            return 1.0 if p[1] == 0.0 else 0.0
        return float(sum(w for a, w in zip(*p) if a == 0.0))

    def log_mgf(self, theta: float) -> float:
        """log E[exp(theta t)]; +inf where the moment diverges."""
        p = self.params
        if self.kind == "constant":
            return theta * p[0]
        if self.kind == "bernoulli":
            prob, lo, hi = p
            if prob == 0.0:
                return theta * lo
            if prob == 1.0:
                return theta * hi
            return float(logsumexp([math.log1p(-prob) + theta * lo, math.log(prob) + theta * hi]))
        if self.kind == "exponential":
            rate = p[0]
            if theta >= rate:
                return math.inf
            return math.log(rate / (rate - theta))
        if self.kind == "uniform":
            a, b = p[0], p[1]
            th0 = p[2] if len(p) == 3 else 0.0
            return _uniform_logmgf(a, b, th0 + theta) - _uniform_logmgf(a, b, th0)
        atoms, weights = np.array(p[0]), np.array(p[1])
        keep = weights > 0
        return float(logsumexp(np.log(weights[keep]) + theta * atoms[keep]))

    def divergence_boundary(self) -> float:
        """Supremum of theta with a finite exponential moment."""
        if self.kind == "exponential":
            return self.params[0]
        return math.inf

    # sampling ------------------------------------------------------------
    def quantile(self, u: np.ndarray) -> np.ndarray:
        """Inverse CDF applied to uniforms in (0, 1)."""
        u = np.asarray(u, dtype=np.float64)
        p = self.params
        if self.kind == "constant":
            return np.full_like(u, p[0])
        if self.kind == "bernoulli":
            prob, lo, hi = p
            return np.where(u < 1.0 - prob, lo, hi)
        if self.kind == "exponential":
            return -np.log1p(-u) / p[0]
        if self.kind == "uniform":
            a, b = p[0], p[1]
            th = p[2] if len(p) == 3 else 0.0
            if th == 0.0 or a == b:
                return a + (b - a) * u
            L = b - a
            # inverse CDF of density proportional to exp(th x) on [a, b]
            return a + np.log1p(u * np.expm1(th * L)) / th
        atoms, weights = np.array(p[0]), np.array(p[1])
        cdf = np.cumsum(weights)
        idx = np.searchsorted(cdf, u, side="right")
        return atoms[np.minimum(idx, len(atoms) - 1)]


def _uniform_logmgf(a: float, b: float, theta: float) -> float:
    L = b - a
    if L == 0.0 or theta == 0.0:
        return theta * a if L == 0.0 else 0.0
    x = theta * L
    if x > 0:
        return theta * b + math.log(-math.expm1(-x) / x)
    return theta * a + math.log(math.expm1(x) / x)


def _uniform_dlogmgf(a: float, b: float, theta: float) -> float:
    L = b - a
    x = theta * L
    if abs(x) < 1e-8:
        return 0.5 * (a + b) + theta * L * L / 12.0
    # mean of density ∝ exp(theta y) on [a, b]
    tail = L / math.expm1(abs(x)) if abs(x) < 700 else 0.0
    return b - 1.0 / theta + tail if x > 0 else a - 1.0 / theta - tail


# --------------------------------------------------------------------------
# fields
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class CapacityField:
    """An i.i.d. capacity field t(e) keyed by geometric edges.

    Edges are identified by the integer coordinates of their lower endpoint
    and their axis; ``values`` evaluates the field on any such batch.
    """

    law: CapacityLaw
    seed: int
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    def values(self, lower: np.ndarray, axis: np.ndarray) -> np.ndarray:
        lower = np.asarray(lower, dtype=np.int64)
        axis = np.asarray(axis, dtype=np.int64)
        keys = np.concatenate([lower, axis[:, None]], axis=1)
        return self.law.quantile(keyed_uniforms(self.seed, keys))

    def on(self, graph) -> np.ndarray:
        """Capacities for every edge of a lattice graph, in its edge order."""
        key = id(graph)
        hit = self._cache.get(key)
        if hit is not None and hit[0] is graph:
            return hit[1]
        vals = self.values(graph.edge_lower, graph.edge_axis)
        if len(self._cache) > 16:
            self._cache.clear()
        self._cache[key] = (graph, vals)
        return vals


def sample(law: CapacityLaw, lat, seed: int) -> np.ndarray:
    """i.i.d. capacities for the edges of ``lat`` in canonical edge order."""
    return CapacityField(law, seed).on(lat)


# --------------------------------------------------------------------------
# exponential moments, tilting, Cramér
# --------------------------------------------------------------------------

def exp_moment_check(law: CapacityLaw, theta: float) -> float:
    """E[exp(theta t)], or ``math.inf`` when the moment diverges."""
    if theta <= 0:
        raise ValueError("theta must be positive")
    lm = law.log_mgf(theta)
    return math.inf if not math.isfinite(lm) else math.exp(lm)


def tilt(law: CapacityLaw, theta: float) -> tuple[CapacityLaw, float]:
    """Exponentially tilted law d(Lambda_theta) ∝ exp(theta x) dLambda, and log MGF(theta)."""
    lm = law.log_mgf(theta)
    if not math.isfinite(lm):
        raise ValueError(f"moment generating function diverges at theta={theta}")
    if theta == 0.0:
        return law, 0.0
    p = law.params
    if law.kind == "constant":
        return law, lm
    if law.kind == "bernoulli":
        prob, lo, hi = p
        if prob in (0.0, 1.0):
            return law, lm
        w_hi = prob * math.exp(theta * (hi - lo))
        return CapacityLaw.bernoulli(w_hi / ((1 - prob) + w_hi), lo, hi), lm
    if law.kind == "exponential":
        return CapacityLaw.exponential(p[0] - theta), lm
    if law.kind == "uniform":
        th0 = p[2] if len(p) == 3 else 0.0
        return CapacityLaw.uniform(p[0], p[1], th0 + theta), lm
    atoms, weights = np.array(p[0]), np.array(p[1])
    logw = np.where(weights > 0, np.log(np.where(weights > 0, weights, 1.0)) + theta * atoms, -np.inf)
    w = np.exp(logw - logsumexp(logw))
    w = w / w.sum()
    return CapacityLaw.discrete(atoms, w), lm


def tilt_for_mean(law: CapacityLaw, target: float) -> float:
    """theta such that the tilted law has mean ``target`` (root of (log M)'(theta) = target)."""
    lo_s, hi_s = law.support
    if not lo_s < target < hi_s:
        raise ValueError("target mean must lie strictly inside the support")
    if law.kind == "exponential":
        return law.params[0] - 1.0 / target

    def g(th):
        return tilt(law, th)[0].mean() - target

    a, b = -1.0, 1.0
    while g(a) > 0:
        a *= 2
    while g(b) < 0:
        b *= 2
        if b > 1e6:
            raise ValueError("could not bracket the tilt parameter")
    return optimize.brentq(g, a, b, xtol=1e-14)


def cramer_rate(law: CapacityLaw, x: float) -> float:
    """Legendre transform sup_theta (theta x - log MGF(theta)); +inf off the support hull."""
    lo_s, hi_s = law.support
    if x < lo_s or x > hi_s:
        return math.inf
    p = law.params
    if law.kind == "constant":
        return 0.0
    if law.kind == "exponential":
        rate = p[0]
        if x <= 0:
            return math.inf
        y = rate * x
        return y - 1.0 - math.log(y)
    if law.kind == "bernoulli" and lo_s < hi_s:
        prob, lo, hi = p
        y = (x - lo) / (hi - lo)
        q = prob
        out = 0.0
        if y > 0:
            out += y * math.log(y / q)
        if y < 1:
            out += (1 - y) * math.log((1 - y) / (1 - q))
        return out
    if x == lo_s or x == hi_s:
        mass = _mass_at(law, x)
        return math.inf if mass == 0.0 else -math.log(mass)
    if lo_s == hi_s:
        return 0.0
    th = tilt_for_mean(law, x)
    return th * x - law.log_mgf(th)


def _mass_at(law: CapacityLaw, x: float) -> float:
    p = law.params
    if law.kind == "bernoulli":
        prob, lo, hi = p
        return (1 - prob) * (lo == x) + prob * (hi == x)
    if law.kind == "discrete":
        return float(sum(w for a, w in zip(*p) if a == x))
    if law.kind == "constant":
        return 1.0 if p[0] == x else 0.0
    return 0.0
