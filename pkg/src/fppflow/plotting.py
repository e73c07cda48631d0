"""PNG figures for run artifacts, rendered with fixed metadata so reruns are byte-identical."""
from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

PNG_METADATA = {"Software": None}
DPI = 100


def _num(x) -> float:
    # non-finite values arrive as the strings "inf", "-inf", "nan"
    return float(x)


def _columns(table: dict) -> dict:
    cols = table["columns"]
    return {c: [row[i] for row in table["rows"]] for i, c in enumerate(cols)}


def _save(fig, path: Path) -> Path:
    fig.savefig(path, dpi=DPI, metadata=PNG_METADATA)
    plt.close(fig)
    return path


def _flows(art: dict, out: Path) -> list:
    t = _columns(art["tables"]["flows"])
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for n in sorted(set(t["n"])):
        vals = [v for m, v in zip(t["n"], t["phi_normalized"]) if m == n]
        ax.hist(vals, bins=max(5, min(40, len(vals) // 3 or 1)), alpha=0.6, label=f"n={n}")
    ax.set_xlabel("phi_n / n^(d-1)")
    ax.set_ylabel("count")
    ax.legend()
    fig.tight_layout()
    return [_save(fig, out / "flows.png")]


def _nu(art: dict, out: Path) -> list:
    t = _columns(art["tables"]["nu"])
    axes = [c for c in ("vx", "vy", "vz", "vw") if c in t]
    keys = sorted(set(zip(*[t[a] for a in axes])))
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for k in keys:
        sel = [i for i in range(len(t["n"])) if tuple(t[a][i] for a in axes) == k]
        ax.errorbar([t["n"][i] for i in sel], [_num(t["mean"][i]) for i in sel],
                    yerr=[_num(t["se"][i]) for i in sel], marker="o", capsize=3,
                    label="(" + ", ".join(f"{x:.2f}" for x in k) + ")")
    ax.set_xlabel("n")
    ax.set_ylabel("normalised cylinder flow")
    ax.legend(fontsize=7)
    fig.tight_layout()
    return [_save(fig, out / "nu.png")]


def _phi_tilde(art: dict, out: Path) -> list:
    t = _columns(art["tables"]["candidates"])
    fig, ax = plt.subplots(figsize=(5, 3.5))
    caps = [_num(c) if a else 0.0 for c, a in zip(t["capacity"], t["admissible"])]
    colors = ["tab:blue" if a else "tab:gray" for a in t["admissible"]]
    ax.bar(t["index"], caps, color=colors)
    ax.set_xlabel("candidate")
    ax.set_ylabel("capacity integral")
    fig.tight_layout()
    return [_save(fig, out / "phi_tilde.png")]


def _cutset(art: dict, out: Path) -> list:
    t = _columns(art["tables"]["upper_bound"])
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.scatter([_num(x) for x in t["phi_n"]], [_num(x) for x in t["bound"]], s=8)
    lo = min(_num(x) for x in t["phi_n"])
    hi = max(_num(x) for x in t["bound"])
    ax.plot([lo, hi], [lo, hi], "k--", lw=0.8)
    ax.set_xlabel("phi_n")
    ax.set_ylabel("cylinder sum + min V(W) + min V(M)")
    fig.tight_layout()
    files = [_save(fig, out / "upper_bound.png")]
    a = _columns(art["tables"]["audit"])
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for fam in ("W", "M"):
        for n in sorted(set(a["n"])):
            sel = [i for i in range(len(a["k"])) if a["family"][i] == fam and a["n"][i] == n]
            if sel:
                ax.plot([a["k"][i] for i in sel], [a["count"][i] for i in sel], marker="o", label=f"{fam}, n={n}")
    ax.set_xlabel("k")
    ax.set_ylabel("edges")
    ax.legend(fontsize=7)
    fig.tight_layout()
    files.append(_save(fig, out / "audit.png"))
    return files


def _rate(art: dict, out: Path) -> list:
    t = _columns(art["tables"]["rate"])
    fig, ax = plt.subplots(figsize=(5, 3.5))
    r = [_num(x) for x in t["rate"]]
    lo = [_num(x) for x in t["rate_lo"]]
    hi = [_num(x) for x in t["rate_hi"]]
    finite = [i for i in range(len(r)) if all(math.isfinite(v) for v in (r[i], lo[i], hi[i]))]
    ax.errorbar([t["n"][i] for i in finite], [r[i] for i in finite],
                yerr=[[r[i] - lo[i] for i in finite], [hi[i] - r[i] for i in finite]], marker="o", capsize=3)
    ax.axhline(0.0, color="k", lw=0.8)
    ax.set_xlabel("n")
    ax.set_ylabel("n^-d log p")
    fig.tight_layout()
    return [_save(fig, out / "rate.png")]


def _sum_tail(art: dict, out: Path) -> list:
    t = _columns(art["tables"]["sum_tail"])
    fig, ax = plt.subplots(figsize=(4, 3.5))
    ax.bar(["Monte Carlo", "Cramer"], [_num(t["log_p"][0]), _num(t["cramer"][0])], color=["tab:blue", "tab:orange"])
    ax.set_ylabel("log probability")
    fig.tight_layout()
    return [_save(fig, out / "sum_tail.png")]


RENDERERS = {"flow-sample": _flows, "estimate-nu": _nu, "phi-tilde": _phi_tilde, "cutset-verify": _cutset,
             "ldp-rate": _rate, "sum-tail": _sum_tail}


def render(art: dict, out: Path) -> list:
    return RENDERERS[art["kind"]](art, Path(out))
