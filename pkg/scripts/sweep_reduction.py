#!/usr/bin/env python3
"""Sweep the reduced class count and tabulate matching cost vs. coverage.

For each k, classes are reduced from the same initial fit, so rows differ
only in how aggressively categories are merged. Columns report the
pairwise-op budget of partitioned matching against dense matching and the
fraction of target cells that keep a usable counterpart.
"""

import argparse

import numpy as np

from chromatch.correspondence import classwise_correspondence, count_pairwise_ops
from chromatch.features import extract_builtin_features
from chromatch.segmentation import (
    apply_reduction,
    assign_classes,
    fit_centers,
    reduce_categories,
)
from chromatch.tensor_io import load_png, rgb_to_lab


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("target")
    ap.add_argument("reference")
    ap.add_argument("--classes-n", type=int, default=27)
    ap.add_argument("--k-list", default="1,4,7,10,15,20,22,27")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    f_t = extract_builtin_features(rgb_to_lab(load_png(args.target)).L)
    f_r = extract_builtin_features(rgb_to_lab(load_png(args.reference)).L)
    centers = fit_centers([f_t, f_r], args.classes_n, args.seed)
    raw_t, _ = assign_classes(f_t, centers)
    raw_r, _ = assign_classes(f_r, centers)

    print(f"{'k':>4} {'partitioned':>12} {'dense':>12} {'ratio':>7} {'related':>8}")
    for k in (int(v) for v in args.k_list.split(",")):
        table = reduce_categories(centers, k, args.seed)
        c_t = apply_reduction(raw_t, table)
        c_r = apply_reduction(raw_r, table)
        dense, part = count_pairwise_ops(c_t, c_r)
        corr = classwise_correspondence(f_t, f_r, c_t, c_r)
        related = float(np.mean(corr.related))
        print(f"{k:>4} {part:>12} {dense:>12} {part / dense:>7.3f} {related:>8.3f}")


if __name__ == "__main__":
    main()
