"""Command line entry point: ``arru {simulate,montecarlo,table,diagnose}``.

Exit status: 0 success, 1 failed check, 2 usage or configuration error.
Output files are written under temporary names and renamed into place.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import tempfile
import time
from dataclasses import replace

from . import checks, montecarlo as mc
from .config import ConfigError, load_config
from .kernel import simulate_fast
from .urn import SimConfig, fmt, trajectory_csv

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def write_atomic(path: str, text: str) -> str:
    """Write ``text`` (UTF-8, LF) via a temp file and rename; returns its sha256."""
    data = text.encode("utf-8")
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return hashlib.sha256(data).hexdigest()


class Outputs:
    def __init__(self, out_dir: str, subcommand: str, config_path: str | None,
                 config: SimConfig | None):
        os.makedirs(out_dir, exist_ok=True)
        self.out_dir = out_dir
        self.subcommand = subcommand
        self.config_path = config_path
        self.config = config
        self.files: list[dict] = []

    def write(self, name: str, text: str) -> None:
        digest = write_atomic(os.path.join(self.out_dir, name), text)
        self.files.append({"name": name, "sha256": digest})

    def finish(self) -> None:
        manifest = {
            "subcommand": self.subcommand,
            "config_path": self.config_path,
            "resolved_config": None if self.config is None else mc.config_echo(self.config),
            "output_dir": self.out_dir,
            "files": self.files,
        }
        write_atomic(os.path.join(self.out_dir, "manifest.json"),
                     json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _load(args) -> SimConfig:
    if not args.config:
        raise UsageError("--config is required")
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    return cfg


def cmd_simulate(args) -> int:
    cfg = _load(args)
    out = Outputs(args.out, "simulate", args.config, cfg)
    out.write("trajectory.csv", trajectory_csv(simulate_fast(cfg)))
    out.finish()
    return EXIT_OK


def cmd_montecarlo(args) -> int:
    cfg = _load(args)
    if args.reps < 1:
        raise UsageError("--reps must be >= 1")
    t0 = time.perf_counter()
    reps = mc.run_replications(cfg, args.reps, args.parallelism)
    wall = time.perf_counter() - t0
    targets = {"allocation_fraction": checks.limit_proportion(cfg)}
    agg = mc.summarize(reps, targets, mc.fingerprint(cfg))
    out = Outputs(args.out, "montecarlo", args.config, cfg)
    out.write("summary.json", mc.summary_json(cfg, agg, wall if args.timing else None))
    out.write("replications.csv", mc.replications_csv(reps))
    out.finish()
    return EXIT_OK


def cmd_table(args) -> int:
    if args.design is None:
        raise UsageError("--design is required")
    spec = mc.TableSpec(args.design, reps=args.reps, seed=args.seed or 0,
                        parallelism=args.parallelism)
    cfg = None
    if args.config:
        cfg = load_config(args.config)
        spec = replace(spec, n=cfg.horizon, q=cfg.q, y0=(cfg.y1_0, cfg.y2_0),
                       bias_p=cfg.policy.bias_p,
                       seed=cfg.seed if args.seed is None else args.seed)
    rows = mc.reproduce_table(spec)
    out = Outputs(args.out, "table", args.config, cfg)
    out.write(f"table_{args.design}.txt", mc.format_table(args.design, rows))
    out.write(f"table_{args.design}.csv", mc.table_csv(args.design, rows))
    out.finish()
    sys.stdout.write(mc.format_table(args.design, rows))
    return EXIT_OK


def diagnostic_csv(verdict) -> str | None:
    """Plot-ready CSV for checks that produce a series; None otherwise."""
    obs = verdict.observed
    if "checkpoints" in obs:
        lines = ["n,estimate"] + [f"{n},{fmt(v)}" for n, v in zip(obs["checkpoints"], obs["estimates"])]
    elif "frequencies" in obs:
        lines = ["j,frequency"] + [f"{j},{fmt(v)}" for j, v in obs["frequencies"].items()]
    else:
        return None
    return "\n".join(lines) + "\n"


def cmd_diagnose(args) -> int:
    if args.check not in checks.CHECKS:
        raise UsageError(f"unknown check {args.check!r}; expected one of {', '.join(checks.CHECKS)}")
    cfg = _load(args)
    verdict = checks.run_check(args.check, cfg, args.reps_opt, args.parallelism)
    out = Outputs(args.out, "diagnose", args.config, cfg)
    out.write("verdict.json", json.dumps(verdict.to_dict(), indent=2, sort_keys=True) + "\n")
    series = diagnostic_csv(verdict)
    if series is not None:
        out.write(f"{args.check}.csv", series)
    out.finish()
    status = "PASS" if verdict.passed else "FAIL"
    print(f"{verdict.check_name}: {status} {json.dumps(verdict.observed, sort_keys=True)}")
    return EXIT_OK if verdict.passed else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="arru", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, reps_default=None):
        sp.add_argument("--config", metavar="PATH")
        sp.add_argument("--seed", type=int, metavar="U64")
        sp.add_argument("--out", default=os.environ.get("OUT_DIR", "out"), metavar="DIR")
        sp.add_argument("--parallelism", type=int, default=1, metavar="N")

    sp = sub.add_parser("simulate", help="run one trajectory and write its CSV")
    common(sp)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("montecarlo", help="run replications and summarize them")
    common(sp)
    sp.add_argument("--reps", type=int, default=1000, metavar="N")
    sp.add_argument("--timing", action="store_true", help="record wall time in summary.json")
    sp.set_defaults(func=cmd_montecarlo)

    sp = sub.add_parser("table", help="reproduce a simulation table for one design")
    common(sp)
    sp.add_argument("--design", choices=sorted(mc.DESIGNS))
    sp.add_argument("--reps", type=int, default=10_000, metavar="N")
    sp.set_defaults(func=cmd_table)

    sp = sub.add_parser("diagnose", help="run one limit-theorem check")
    common(sp)
    sp.add_argument("--check", required=True, metavar="NAME")
    sp.add_argument("--reps", dest="reps_opt", type=int, metavar="N")
    sp.set_defaults(func=cmd_diagnose)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.parallelism < 1:
        parser.error("--parallelism must be >= 1")
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
