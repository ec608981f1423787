"""Run every shipped config through the CLI and print one status line each.

Usage: python3 scripts/run_configs.py [--out out] [--only NAME ...]
"""
import argparse
import json
import sys
import time
from pathlib import Path

from lightcone import cli

HERE = Path(__file__).resolve().parent


def subcommand(doc):
    kinds = {e.get("kind") for e in doc.get("experiments", [])} | {doc.get("kind")}
    kinds.discard(None)
    if len(kinds) != 1:
        raise SystemExit(f"config mixes kinds {sorted(kinds)}")
    return kinds.pop()


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="out")
    ap.add_argument("--only", nargs="*")
    args = ap.parse_args(argv)
    worst = 0
    for path in sorted((HERE / "configs").glob("*.json")):
        if args.only and path.stem not in args.only:
            continue
        kind = subcommand(json.loads(path.read_text()))
        t0 = time.perf_counter()
        code = cli.main([kind, "--config", str(path), "--out", str(Path(args.out) / path.stem)])
        print(f"{path.stem:16s} {kind:16s} exit {code}  {time.perf_counter() - t0:6.1f}s")
        worst = max(worst, code)
    return worst


if __name__ == "__main__":
    sys.exit(main())
