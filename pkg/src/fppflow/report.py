"""Writing run artifacts to disk: JSON, one CSV per table, a text summary and PNG figures."""
from __future__ import annotations

import csv
import json
from datetime import datetime, timezone
from pathlib import Path


def run_dir(out, art: dict) -> Path:
    return Path(out) / f"{art['kind']}-{art['config_hash'][:12]}"


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n")


def write_csv(path: Path, table: dict) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(table["columns"])
        for row in table["rows"]:
            w.writerow([_fmt(v) for v in row])


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def summary(art: dict) -> str:
    lines = [f"kind: {art['kind']}", f"config: {art['config_hash']}"]
    for k in sorted(art.get("outputs", {})):
        v = art["outputs"][k]
        if isinstance(v, (int, float, str)):
            lines.append(f"{k}: {v}")
    for k in sorted(art.get("verdicts", {})):
        lines.append(f"{k}: {art['verdicts'][k]}")
    for name in sorted(art.get("tables", {})):
        lines.append(f"table {name}: {len(art['tables'][name]['rows'])} rows")
    return "\n".join(lines) + "\n"


def write_artifact(art: dict, out, figures: bool = True) -> Path:
    """Write everything under ``<out>/<kind>-<hash>``.

    Only timestamps.json changes between identical reruns.
    """
    d = run_dir(out, art)
    d.mkdir(parents=True, exist_ok=True)
    write_json(d / "artifact.json", art)
    for name, table in art.get("tables", {}).items():
        write_csv(d / f"{name}.csv", table)
    (d / "summary.txt").write_text(summary(art))
    if figures:
        render_figures(art, d)
    write_json(d / "timestamps.json", {"written": datetime.now(timezone.utc).isoformat()})
    return d


def render_figures(art: dict, d: Path) -> list:
    from .plotting import render
    return render(art, d)


def load_artifact(d) -> dict:
    return json.loads((Path(d) / "artifact.json").read_text())
