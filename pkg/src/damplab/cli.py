"""Command-line entry point: ``damplab {resolvent,decay,lemmas,esmall} --config FILE``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import ConfigError, ExperimentConfig, parse_config
from .runner import run

SUBCOMMANDS = {
    "resolvent": "resolvent-sweep",
    "decay": "decay-run",
    "lemmas": "lemma-certify",
    "esmall": "esmall-probe",
}


def doubling(q_min: float, q_max: float) -> list[float]:
    """q_min, 2 q_min, 4 q_min, ... up to q_max."""
    if not 0 < q_min <= q_max:
        raise ConfigError("need 0 < --q-min <= --q-max")
    out, q = [], float(q_min)
    while q <= q_max * (1 + 1e-12):
        out.append(q)
        q *= 2
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="damplab", description="Damped-wave resolvent and decay experiments.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)
    for name, kind in SUBCOMMANDS.items():
        s = sub.add_parser(name, help=f"run a {kind} experiment")
        s.add_argument("--config", type=Path, help="JSON experiment config (kind may be omitted)")
        s.add_argument("--beta", type=float)
        s.add_argument("--sigma", type=float)
        s.add_argument("--q-min", type=float)
        s.add_argument("--q-max", type=float)
        s.add_argument("--out", type=str)
        s.add_argument("--jobs", type=int, help="worker processes (default: DAMPLAB_JOBS or cpu count)")
        s.set_defaults(kind=kind)
    return p


def load(args) -> ExperimentConfig:
    text = args.config.read_text() if args.config else "{}"
    raw = json.loads(text) if text.strip() else {}
    if isinstance(raw, dict) and raw.get("kind", args.kind) != args.kind:
        raise ConfigError(f"config kind {raw['kind']!r} does not match subcommand {args.command!r}")
    overrides = {"kind": args.kind, "beta": args.beta, "sigma": args.sigma, "out": args.out}
    if args.q_min is not None or args.q_max is not None:
        qs = raw.get("q", [16.0, 1024.0]) if isinstance(raw, dict) else [16.0, 1024.0]
        lo = args.q_min if args.q_min is not None else min(qs)
        hi = args.q_max if args.q_max is not None else max(qs)
        overrides["q"] = doubling(lo, hi)
    return parse_config(text, **overrides)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load(args)
    except (ConfigError, OSError, json.JSONDecodeError) as exc:
        print(f"damplab: config error: {exc}", file=sys.stderr)
        return 2
    manifest = run(cfg, jobs=args.jobs)
    for name, ok in sorted(manifest.checks.items()):
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
    for err in manifest.errors:
        print(f"ERROR {err}", file=sys.stderr)
    print(f"wrote {len(manifest.files)} files to {cfg.out}")
    return 0 if manifest.passed else 1
