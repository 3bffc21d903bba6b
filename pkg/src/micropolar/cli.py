"""Command-line entry point: ``micropolar {simulate,bench,norms,oracle-check}``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _cmd_simulate(args) -> int:
    from .harness import load_config, run

    if args.threads:
        os.environ["MICROPOLAR_THREADS"] = str(args.threads)
    config = load_config(args.config)
    status = run(config, output_dir=args.output)
    out = args.output or os.environ.get("MICROPOLAR_OUTPUT_DIR") or config.output_dir
    manifest = json.loads((Path(out) / "manifest.json").read_text())
    print(json.dumps({"status": manifest["status"], "output": str(out),
                      "content_hash": manifest["content_hash"]}, sort_keys=True))
    return status


def _cmd_bench(args) -> int:
    from .harness import bench_inequalities

    report = bench_inequalities(args.ensemble, args.r, args.seed, n=args.n, slope=args.slope,
                                workers=args.workers)
    out = Path(args.output or os.environ.get("MICROPOLAR_OUTPUT_DIR") or ".")
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"bench_seed{args.seed}.jsonl"
    report.write_jsonl(path)
    print(json.dumps({"records": str(path), **report.summary}, indent=2, sort_keys=True))
    return 0


def _cmd_norms(args) -> int:
    from . import norms
    from .snapshot import load_field

    field = load_field(args.input)
    kind = {"morrey": "MorreyM", "lp": "Lp", "weaklp": "WeakLp", "sobolev": "SobolevHdot",
            "besov": "BesovB21r", "xr": "XrLowerBound"}.get(args.kind.lower(), args.kind)
    params = {}
    if kind in ("Lp", "WeakLp", "MorreyM"):
        params["p"] = args.p
    if kind == "MorreyM":
        params["q"] = args.q
        params["center_stride"] = args.stride
    if kind in ("SobolevHdot", "BesovB21r", "XrLowerBound"):
        params["r"] = args.r
    print(norms.norm_report(field, kind, **params).to_json())
    return 0


def _cmd_oracle_check(args) -> int:
    from .harness import oracle_check

    results = oracle_check(args.seed)
    for res in results:
        print(f"{'PASS' if res.passed else 'FAIL'}  {res.name:36s} error={res.error:.3e} tol={res.tolerance:.0e}")
    return 0 if all(r.passed for r in results) else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="micropolar", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a monitored simulation from a TOML/JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--output", help="output directory (overrides config and MICROPOLAR_OUTPUT_DIR)")
    p.add_argument("--threads", type=int, help="FFT threads (sets MICROPOLAR_THREADS)")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("bench", help="inequality checks over a random field ensemble")
    p.add_argument("--ensemble", type=int, default=100)
    p.add_argument("--r", type=_floats, default=[0.25, 0.5, 0.75])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=int, default=16, help="grid points per axis")
    p.add_argument("--slope", type=float, default=0.5, help="spectral envelope exponent")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--output")
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("norms", help="evaluate a norm of a snapshot field")
    p.add_argument("--input", required=True)
    p.add_argument("--kind", default="morrey", help="morrey, lp, weaklp, sobolev, besov or xr")
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--q", type=float, default=6.0)
    p.add_argument("--r", type=float, default=0.5)
    p.add_argument("--stride", type=int, default=4, help="Morrey centre stride in grid points")
    p.set_defaults(func=_cmd_norms)

    p = sub.add_parser("oracle-check", help="cross-validate fast paths against brute-force oracles")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_oracle_check)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (OSError, ValueError) as exc:
        print(f"micropolar: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
