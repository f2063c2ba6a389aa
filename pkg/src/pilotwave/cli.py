"""Command-line scenario runner.

    pwl --list [--json]
    pwl [run] --scenario NAME [--config FILE] [--out DIR] [--seed N]
        [--format csv|json|snapshot] [--threads N] [--gnuplot-script]

Exit codes: 0 on a completed run (the report's ``pass`` field carries the
verdict), 1 on configuration errors, 2 on numerical failures.
"""

import argparse
import json
import os
import platform
import subprocess
import sys
import tempfile
import time
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .config import FORMATS, load, resolve
from .errors import ConfigError, PilotWaveError
from .scenarios import REGISTRY, RunContext, dumps, get, listing


def build_id():
    """git-describe style identifier of the source tree, or the package version."""
    here = Path(__file__).resolve().parent
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"], cwd=here,
                             capture_output=True, text=True, timeout=10)
        if out.returncode == 0 and out.stdout.strip():
            return out.stdout.strip()
    except (OSError, subprocess.SubprocessError):
        pass
    return f"v{__version__}"


def _parser():
    p = argparse.ArgumentParser(prog="pwl", description="pilot-wave scenario runner")
    p.add_argument("command", nargs="?", choices=["run", "list"], help="optional verb")
    p.add_argument("--scenario", help="registered scenario name")
    p.add_argument("--config", help="TOML configuration file")
    p.add_argument("--out", help="output directory (default $PWL_OUT_DIR/<scenario>)")
    p.add_argument("--seed", type=int, help="unsigned 64-bit seed")
    p.add_argument("--format", choices=FORMATS, help="wave-function artifact format")
    p.add_argument("--threads", type=int, help="worker threads for trajectory ensembles")
    p.add_argument("--list", action="store_true", help="list registered scenarios")
    p.add_argument("--json", action="store_true", help="machine-readable listing")
    p.add_argument("--gnuplot-script", action="store_true", help="also write plot.gp")
    return p


def _out_dir(cfg, args):
    if args.out:
        return Path(args.out)
    if cfg.get("output"):
        return Path(cfg["output"])
    root = os.environ.get("PWL_OUT_DIR", "pwl-out")
    return Path(root) / cfg["scenario"]


def _gnuplot(plot):
    name, xcol, ycol = plot
    return (f"set datafile separator ','\nset key autotitle columnhead\n"
            f"plot '{name}' using {xcol}:{ycol} with lines\n")


def run(cfg, out_dir, gnuplot=False):
    """Run a resolved config and write all artifacts into ``out_dir``."""
    entry = get(cfg["scenario"])
    ctx = RunContext(seed=cfg["seed"], threads=cfg["threads"], format=cfg["format"])
    t0 = time.perf_counter()
    result = entry.runner(cfg["params"], ctx)
    wall = time.perf_counter() - t0
    out_dir.mkdir(parents=True, exist_ok=True)
    files = [("report.json", lambda p: p.write_text(dumps(result.report)))]
    files += result.files
    echo = {k: v for k, v in cfg.items() if k != "output"}
    files.append(("config.json", lambda p: p.write_text(dumps(echo))))
    if gnuplot and result.plot:
        files.append(("plot.gp", lambda p: p.write_text(_gnuplot(result.plot))))
    names = []
    for name, writer in files:
        writer(out_dir / name)
        names.append(name)
    manifest = {
        "build": build_id(),
        "scenario": cfg["scenario"],
        "config": echo,
        "tolerances": entry.tolerances,
        "wall_clock_seconds": wall,
        "started": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(time.time() - wall)),
        "artifacts": sorted(names),
        "pass": result.report.get("pass"),
        "versions": {"python": platform.python_version(), "numpy": np.__version__,
                     "scipy": scipy.__version__},
    }
    (out_dir / "manifest.json").write_text(dumps(manifest))
    return result


def main(argv=None):
    args = _parser().parse_args(argv)
    if args.list or args.command == "list":
        if args.json:
            print(json.dumps(listing(), indent=2))
        else:
            width = max(len(n) for n in REGISTRY)
            for item in listing():
                print(f"{item['name']:<{width}}  {item['description']}")
        return 0
    overrides = {"scenario": args.scenario, "seed": args.seed, "format": args.format,
                 "threads": args.threads}
    try:
        if args.config:
            cfg = load(args.config, overrides)
        else:
            if not args.scenario:
                raise ConfigError("<command line>:1:1: --scenario or --config is required")
            cfg = resolve({}, None, "<command line>", overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    out = _out_dir(cfg, args)
    try:
        # stage into a temporary directory so failures leave no artifacts behind
        out.parent.mkdir(parents=True, exist_ok=True)
        with tempfile.TemporaryDirectory(dir=out.parent, prefix=".pwl-") as tmp:
            result = run(cfg, Path(tmp), args.gnuplot_script)
            out.mkdir(parents=True, exist_ok=True)
            for f in Path(tmp).iterdir():
                os.replace(f, out / f.name)
    except PilotWaveError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    print(f"{cfg['scenario']}: pass={result.report.get('pass')} -> {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
