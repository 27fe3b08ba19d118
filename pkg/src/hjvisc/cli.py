"""Command line: ``hjvisc <experiment> --config run.toml --out dir``.

Exit status is 0 when every acceptance-tagged check passed, 1 when one
failed and 2 when the configuration was rejected or a stage errored.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import platform
import sys
import time
import traceback
from pathlib import Path

from .config import EXPERIMENTS, ConfigError, load_config
from .experiments import run_experiment

__all__ = ["main", "build_parser", "write_manifest"]

logger = logging.getLogger("hjvisc")

MANIFEST = "manifest.json"


def _versions():
    import matplotlib
    import numpy
    import scipy

    from . import __version__

    return {
        "hjvisc": __version__,
        "python": platform.python_version(),
        "numpy": numpy.__version__,
        "scipy": scipy.__version__,
        "matplotlib": matplotlib.__version__,
    }


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_manifest(out: Path, config_echo, stages, files, error=None) -> Path:
    """Write the run manifest atomically and return its path."""
    out = Path(out)
    inventory = [
        {"path": p.relative_to(out).as_posix(), "bytes": p.stat().st_size, "sha256": _sha256(p)}
        for p in sorted(set(files))
    ]
    inventory.append({"path": MANIFEST, "bytes": None, "sha256": None})
    checks = [
        {"stage": st.name, "name": c.name, "passed": c.passed, "acceptance": c.acceptance, "detail": c.detail}
        for st in stages
        for c in st.checks
    ]
    body = {
        "config": config_echo,
        "versions": _versions(),
        "stages": [{"name": st.name, "seconds": round(st.seconds, 6), "passed": st.passed} for st in stages],
        "checks": checks,
        "passed": error is None and all(st.passed for st in stages),
        "error": error,
        "files": inventory,
    }
    path = out / MANIFEST
    tmp = out / (MANIFEST + ".tmp")
    tmp.write_text(json.dumps(body, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    os.replace(tmp, path)
    return path


def _list_checks():
    from .acceptance import CRITERIA

    for c in CRITERIA:
        print(f"{c.number:2d}. {c.title}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hjvisc",
        description="Vanishing-viscosity experiments for state-constraint Hamilton-Jacobi equations.",
    )
    parser.add_argument("--list-checks", action="store_true", help="print the acceptance suite and exit")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="experiment")
    for name in EXPERIMENTS:
        sp = sub.add_parser(name, help=f"run the {name} experiment")
        sp.add_argument("--config", required=True, type=Path, help="TOML run configuration")
        sp.add_argument("--out", type=Path, default=None, help="output directory (overrides [output].dir)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.list_checks:
        _list_checks()
        return 0
    if args.experiment is None:
        parser.print_help()
        return 2
    try:
        cfg = load_config(args.config, args.experiment)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    out = args.out if args.out is not None else Path(cfg.output["dir"])
    out.mkdir(parents=True, exist_ok=True)
    stages = []
    error = None
    t0 = time.perf_counter()
    try:
        st = run_experiment(cfg, out)
        stages.append(st)
    except Exception as exc:  # surfaced as a failed stage
        error = f"{type(exc).__name__}: {exc}"
        logger.debug("%s", traceback.format_exc())
        print(f"stage {cfg.experiment} failed: {error}", file=sys.stderr)
    files = [f for st in stages for f in st.files]
    write_manifest(out, cfg.echo(), stages, files, error)
    for st in stages:
        for c in st.checks:
            tag = "PASS" if c.passed else "FAIL"
            extra = "" if c.acceptance else " (info)"
            print(f"{tag} {st.name}.{c.name}{extra}: {c.detail}")
    logger.info("finished in %.2fs", time.perf_counter() - t0)
    if error is not None:
        return 2
    return 0 if all(st.passed for st in stages) else 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
