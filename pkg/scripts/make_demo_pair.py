#!/usr/bin/env python3
"""Synthesize a demo image pair for the colorization pipeline.

The two images share layout statistics (smooth luminance blobs over a
gradient) but differ in palette and arrangement, so class-restricted
matching has real work to do. The target is written desaturated.
"""

import argparse
from pathlib import Path

import numpy as np

from chromatch.tensor_io import save_png


def blobs(rng: np.random.Generator, h: int, w: int, n: int) -> np.ndarray:
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    field = np.zeros((h, w))
    for _ in range(n):
        cy, cx = rng.uniform(0, h), rng.uniform(0, w)
        s = rng.uniform(min(h, w) / 10, min(h, w) / 4)
        field += rng.uniform(0.4, 1.0) * np.exp(
            -((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * s * s)
        )
    return field / field.max()


def render(seed: int, h: int, w: int, saturation: float) -> np.ndarray:
    rng = np.random.default_rng(seed)
    base = blobs(rng, h, w, 6)
    ramp = np.linspace(0.15, 0.85, w)[None, :]
    lum = np.clip(0.65 * base + 0.35 * ramp, 0.0, 1.0)
    hue = blobs(rng, h, w, 4)
    r = lum + saturation * (hue - 0.5)
    g = lum + saturation * (0.5 - np.abs(hue - 0.5))
    b = lum - saturation * (hue - 0.5)
    rgb = np.stack([r, g, b], axis=-1)
    return np.clip(np.rint(rgb * 255), 0, 255).astype(np.uint8)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out-dir", default="demo", help="output directory")
    ap.add_argument("--size", type=int, default=192)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    target = render(args.seed, args.size, args.size, saturation=0.0)
    reference = render(args.seed + 1, args.size, args.size, saturation=0.6)
    save_png(target, out / "target.png")
    save_png(reference, out / "reference.png")
    print(f"wrote {out / 'target.png'} and {out / 'reference.png'}")


if __name__ == "__main__":
    main()
