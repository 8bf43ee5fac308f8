#!/usr/bin/env python3
"""Colorize one image pair through the library API and print the report.

Equivalent to `chromatch colorize` but keeps the intermediate objects
around, which makes it a convenient starting point for poking at the
pipeline in a REPL or under a profiler.
"""

import argparse
import time

import numpy as np

from chromatch.pipeline import PipelineConfig, finish, prepare
from chromatch.tensor_io import load_png, save_png


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("target")
    ap.add_argument("reference")
    ap.add_argument("--out", default="colorized.png")
    ap.add_argument("--classes-n", type=int, default=27)
    ap.add_argument("--k", type=int, default=22)
    ap.add_argument("--tau", type=float, default=0.01)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    cfg = PipelineConfig(
        initial_classes=args.classes_n,
        reduced_k=args.k,
        tau=args.tau,
        seed=args.seed,
    )
    t0 = time.perf_counter()
    prepared = prepare(load_png(args.target), load_png(args.reference), cfg)
    t1 = time.perf_counter()
    result = finish(prepared)
    t2 = time.perf_counter()

    save_png(result.rgb, args.out)
    losses = result.losses.to_dict()
    print(f"wrote {args.out}")
    print(f"prepare: {t1 - t0:.3f}s  finish: {t2 - t1:.3f}s")
    print(f"related cells: {result.meta['related_fraction']:.3f}")
    print(f"mean similarity: {float(np.mean(result.sim)):.4f}")
    for key in ("perc", "smp", "l1", "total"):
        print(f"{key:>6}: {losses[key]:.6f}")
    for note in result.meta["warnings"]:
        print(f"warning: {note}")


if __name__ == "__main__":
    main()
