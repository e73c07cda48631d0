"""Upper-tail probabilities of the domain flow and of i.i.d. capacity sums, by tilted Monte Carlo."""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import logsumexp
from scipy.stats import norm

from .capacity import CapacityField, CapacityLaw, cramer_rate, derive_seed, exp_moment_check, tilt, tilt_for_mean
from .errors import PreconditionError
from .flow import FlowProblem, max_flow
from .lattice import LatticeDomain, discretize

Z95 = float(norm.ppf(0.975))
_TAIL_TAG = 0x7A11
_SUM_TAG = 0x5E11


@dataclass
class TailEstimate:
    lam: float
    n: int
    dim: int
    trials: int
    hits: int
    theta: float
    p_hat: float
    se: float
    ci_lo: float
    ci_hi: float
    log_p: float
    flagged: bool = False
    note: str = ""

    @property
    def volume(self) -> float:
        return float(self.n) ** self.dim

    @property
    def rate(self) -> float:
        """n^{-d} log p-hat (-inf when p-hat = 0)."""
        return self.log_p / self.volume

    @property
    def rate_ci(self) -> tuple[float, float]:
        lo = math.log(self.ci_lo) / self.volume if self.ci_lo > 0 else -math.inf
        hi = math.log(self.ci_hi) / self.volume if self.ci_hi > 0 else -math.inf
        return lo, hi

    def to_dict(self) -> dict:
        out = asdict(self)
        out["rate"] = self.rate
        out["rate_ci"] = list(self.rate_ci)
        return out


def wilson(hits: int, trials: int, z: float = Z95) -> tuple[float, float]:
    p = hits / trials
    den = 1 + z * z / trials
    c = (p + z * z / (2 * trials)) / den
    w = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / den
    return max(0.0, c - w), min(1.0, c + w)


def _weighted(hits: np.ndarray, logw: np.ndarray, trials: int) -> tuple[float, float, float, float, float]:
    """(p, se, ci_lo, ci_hi, log p) for the likelihood-ratio estimator mean(1{hit} w)."""
    if not hits.any():
        return 0.0, 0.0, 0.0, 0.0, -math.inf
    lw = logw[hits]
    log_p = float(logsumexp(lw) - math.log(trials))
    # second moment, relative to p^2, in log space to survive tiny probabilities
    log_m2 = float(logsumexp(2 * lw) - math.log(trials))
    rel_var = max(math.exp(log_m2 - 2 * log_p) - 1.0, 0.0) / max(trials - 1, 1)
    rel_se = math.sqrt(rel_var)
    p = math.exp(log_p)
    lo, hi = p * math.exp(-Z95 * rel_se), p * math.exp(Z95 * rel_se)
    return p, p * rel_se, lo, hi, log_p


def _flows(lat: LatticeDomain, law: CapacityLaw, seeds: Sequence[int], workers: int) -> tuple[np.ndarray, np.ndarray]:
    """Domain flow and total capacity for each seed."""
    src, snk = np.flatnonzero(lat.gamma1), np.flatnonzero(lat.gamma2)

    def one(s):
        caps = CapacityField(law, s).on(lat)
        return max_flow(FlowProblem(lat, caps, src, snk)).value, float(caps.sum())

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            out = list(ex.map(one, seeds))
    else:
        out = [one(s) for s in seeds]
    a = np.array(out, dtype=float).reshape(-1, 2)
    return a[:, 0], a[:, 1]


def _lattice(domain, n: int) -> LatticeDomain:
    if isinstance(domain, LatticeDomain):
        if domain.n != n:
            raise PreconditionError("lattice mesh does not match n")
        return domain
    return discretize(domain, n)


def tail_prob(domain, law: CapacityLaw, lam: float, n: int, trials: int, theta: float = 0.0, seed: int = 0,
              workers: int = 1) -> TailEstimate:
    """Estimate P[φ_n >= λ n^{d-1}], sampling capacities from the θ-tilted law when θ > 0."""
    if lam <= 0:
        raise PreconditionError("lambda must be positive")
    if trials < 1:
        raise PreconditionError("need at least one trial")
    if theta < 0:
        raise PreconditionError("theta must be nonnegative")
    if theta > 0 and not math.isfinite(exp_moment_check(law, theta)):
        raise PreconditionError(f"divergent tilt: E[exp({theta} t)] is infinite")
    lat = _lattice(domain, n)
    d = lat.dim
    tlaw, lm = tilt(law, theta) if theta > 0 else (law, 0.0)
    seeds = [derive_seed(seed, _TAIL_TAG, n, j) for j in range(trials)]
    phi, total = _flows(lat, tlaw, seeds, workers)
    thresh = lam * n ** (d - 1)
    hits = phi >= thresh * (1 - 1e-12)
    k = int(hits.sum())
    if theta == 0.0:
        p = k / trials
        lo, hi = wilson(k, trials)
        se = math.sqrt(p * (1 - p) / trials)
        log_p = math.log(p) if p > 0 else -math.inf
        if k == 0:
            return TailEstimate(lam, n, d, trials, 0, 0.0, 0.0, 0.0, 0.0, 3.0 / trials, -math.inf, True,
                                f"no hits; rule-of-three upper bound {3.0 / trials:.3g}")
        return TailEstimate(lam, n, d, trials, k, 0.0, p, se, lo, hi, log_p)
    logw = -theta * total + lat.num_edges * lm
    p, se, lo, hi, log_p = _weighted(hits, logw, trials)
    note = "" if k else "no hits under the tilted law"
    return TailEstimate(lam, n, d, trials, k, float(theta), p, se, lo, hi, log_p, k == 0, note)


def choose_tilt(domain, law: CapacityLaw, lam: float, n: int, pilot: int = 64, seed: int = 0,
                iters: int = 24) -> float:
    """Global tilt θ for which the tilted median of φ_n / n^{d-1} is about λ (0 if already typical)."""
    lat = _lattice(domain, n)
    d = lat.dim
    seeds = [derive_seed(seed, _TAIL_TAG + 1, n, j) for j in range(pilot)]

    def med(th):
        tl = tilt(law, th)[0] if th > 0 else law
        return float(np.median(_flows(lat, tl, seeds, 1)[0])) / n ** (d - 1)

    if med(0.0) >= lam:
        return 0.0
    top = law.divergence_boundary()
    lo_s, hi_s = law.support
    if math.isfinite(top):
        hi = top * (1 - 1e-3)
    else:
        hi = 1.0
        span = max(hi_s - lo_s, 1e-12) if math.isfinite(hi_s) else 1.0
        while med(hi) < lam and hi < 200.0 / span:
            hi *= 2
    if med(hi) < lam:
        return hi
    lo = 0.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if med(mid) < lam else (lo, mid)
    return hi


@dataclass
class RateSeries:
    lam: float
    estimates: list
    verdict: str
    phi_tilde: float | None = None
    warnings: list = field(default_factory=list)

    def rows(self) -> list:
        out = []
        for e in self.estimates:
            lo, hi = e.rate_ci
            out.append({"n": e.n, "lambda": e.lam, "theta": e.theta, "trials": e.trials, "hits": e.hits,
                        "p_hat": e.p_hat, "ci_lo": e.ci_lo, "ci_hi": e.ci_hi, "rate": e.rate,
                        "rate_lo": lo, "rate_hi": hi})
        return out


def decay_verdict(estimates: Sequence[TailEstimate]) -> str:
    if any(e.p_hat >= 0.5 for e in estimates):
        return "hypothesis not met"
    rates = [e.rate for e in estimates]
    if not all(r < 0 for r in rates):
        return "inconclusive"
    for a, b in zip(estimates, estimates[1:]):
        if b.rate_ci[0] > a.rate_ci[1]:
            return "inconclusive"
    return "consistent with volume-order decay"


def rate_series(domain, law: CapacityLaw, lam: float, meshes: Sequence[int], trials: int, seed: int = 0,
                theta: float | str | None = "auto", phi_tilde: float | None = None, pilot: int = 64,
                workers: int = 1) -> RateSeries:
    """Tail estimates and n^{-d} log p-hat over a mesh sweep.

    ``theta='auto'`` runs a pilot search per mesh; a number fixes one tilt.
    """
    notes = []
    if phi_tilde is not None and not lam > phi_tilde:
        msg = f"lambda={lam:g} does not exceed the phi-tilde estimate {phi_tilde:g}"
        warnings.warn(msg)
        notes.append(msg)
    out = []
    for n in meshes:
        lat = _lattice(domain, n)
        th = choose_tilt(lat, law, lam, n, pilot, seed) if theta == "auto" else float(theta or 0.0)
        out.append(tail_prob(lat, law, lam, n, trials, th, seed, workers))
    verdict = decay_verdict(out)
    if notes and verdict != "hypothesis not met":
        verdict = "hypothesis not met"
    return RateSeries(lam, out, verdict, phi_tilde, notes)


# --------------------------------------------------------------------------
# sums of i.i.d. capacities
# --------------------------------------------------------------------------

@dataclass
class SumTail:
    alpha: float
    beta: float
    m: float           # n^{d-1}
    count: int         # floor(alpha m)
    trials: int
    theta: float
    p_hat: float
    se: float
    ci_lo: float
    ci_hi: float
    log_p: float
    cramer: float      # -alpha m I(beta / alpha)

    def to_dict(self) -> dict:
        return asdict(self)


def sum_tail(alpha: float, beta: float, law: CapacityLaw, m: float, trials: int, seed: int = 0,
             theta: float | None = None, chunk: int = 4096) -> SumTail:
    """P[sum of floor(α m) capacities >= β m], with m standing for n^{d-1}."""
    if alpha <= 0 or m <= 0:
        raise PreconditionError("alpha and m must be positive")
    mean = law.mean()
    if not beta > alpha * mean:
        raise PreconditionError(f"not a rare event: beta={beta:g} <= alpha E[t]={alpha * mean:g}")
    N = int(math.floor(alpha * m + 1e-9))
    x = beta / alpha
    cram = -alpha * m * cramer_rate(law, x)
    lo_s, hi_s = law.support
    thresh = beta * m
    if N * hi_s < thresh * (1 - 1e-12):
        return SumTail(alpha, beta, m, N, trials, 0.0, 0.0, 0.0, 0.0, 0.0, -math.inf, cram)
    if theta is None:
        theta = tilt_for_mean(law, x) if lo_s < x < hi_s else 0.0
    tlaw, lm = tilt(law, theta) if theta > 0 else (law, 0.0)
    hits, logw = [], []
    done = 0
    c = 0
    while done < trials:
        k = min(chunk, trials - done)
        rng = np.random.default_rng(derive_seed(seed, _SUM_TAG, N, c))
        S = tlaw.quantile(rng.random((k, N))).sum(axis=1)
        hits.append(S >= thresh * (1 - 1e-12))
        logw.append(-theta * S + N * lm)
        done += k
        c += 1
    hits = np.concatenate(hits)
    logw = np.concatenate(logw)
    p, se, lo, hi, log_p = _weighted(hits, logw, trials)
    return SumTail(alpha, beta, m, N, trials, float(theta), p, se, lo, hi, log_p, cram)
