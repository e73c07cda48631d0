"""Command line entry point: ``fppflow <kind> [--config FILE] ...`` and ``fppflow report DIR``."""
from __future__ import annotations

import argparse
import json
import sys
import traceback
from pathlib import Path

from .config import KINDS, RunConfig
from .errors import InfeasibleError, PreconditionError

EXIT_OK, EXIT_PRECONDITION, EXIT_INFEASIBLE = 0, 2, 3


def _origin(exc: BaseException) -> str:
    """Dotted name of the innermost package module the exception passed through."""
    name = "fppflow"
    for frame, _ in traceback.walk_tb(exc.__traceback__):
        mod = frame.f_globals.get("__name__", "")
        if mod.startswith("fppflow."):
            name = mod
    return name


def build_config(args) -> RunConfig:
    d = json.loads(Path(args.config).read_text()) if args.config else {}
    d["kind"] = args.kind
    for key in ("seed", "workers", "out"):
        v = getattr(args, key)
        if v is not None:
            d[key] = v
    if args.meshes:
        d["meshes"] = args.meshes
    if args.trials is not None:
        d["trials"] = args.trials
    return RunConfig.from_dict(d)


def parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fppflow", description="First-passage flow experiments on lattice domains.")
    sub = p.add_subparsers(dest="kind", required=True)
    for kind in KINDS:
        s = sub.add_parser(kind, help=f"run the {kind} experiment")
        s.add_argument("--config", help="JSON configuration file")
        s.add_argument("--seed", type=int)
        s.add_argument("--meshes", type=int, nargs="+")
        s.add_argument("--trials", type=int)
        s.add_argument("--workers", type=int)
        s.add_argument("--out", help="directory for run artifacts (default: runs)")
        s.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    r = sub.add_parser("report", help="re-render CSV, summary and figures from an artifact directory")
    r.add_argument("path")
    r.add_argument("--no-figures", action="store_true")
    return p


def main(argv=None) -> int:
    args = parser().parse_args(argv)
    from .experiments import run
    from .report import load_artifact, write_artifact
    try:
        if args.kind == "report":
            art = load_artifact(args.path)
            d = write_artifact(art, Path(args.path).parent, figures=not args.no_figures)
        else:
            cfg = build_config(args)
            art = run(cfg)
            d = write_artifact(art, cfg.out, figures=not args.no_figures)
    except InfeasibleError as e:
        print(f"{_origin(e)}: infeasible: {e}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (PreconditionError, ValueError, KeyError, FileNotFoundError) as e:
        print(f"{_origin(e)}: {e}", file=sys.stderr)
        return EXIT_PRECONDITION
    print(d)
    sys.stdout.write((d / "summary.txt").read_text())
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
