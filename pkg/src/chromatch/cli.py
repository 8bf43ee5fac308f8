"""Command-line entry points.

    chromatch colorize --target gray.png --ref color.png --out result.png
    chromatch bench    --target a.png --ref b.png --k-list 1,4,7 --out bench.json
    chromatch segment  --in image.png --out-labels labels.sptn
    chromatch serve    [--host 127.0.0.1] [--port 8077]

Exit codes: 0 success, 2 unreadable input, 3 invalid configuration,
4 pipeline failure.
"""

from __future__ import annotations

import argparse
import json
import statistics
import sys
import time
from pathlib import Path

import numpy as np

from chromatch.correspondence import classwise_correspondence, count_pairwise_ops
from chromatch.errors import DataError, ParameterError
from chromatch.pipeline import (
    PipelineConfig,
    finish,
    prepare,
    result_artifacts,
    run,
)
from chromatch.segmentation import (
    apply_reduction,
    assign_classes,
    fit_centers,
    reduce_categories,
    save_class_map,
)
from chromatch.features import extract_builtin_features, crop_to_grid
from chromatch.tensor_io import (
    SptnError,
    load_png,
    rgb_to_lab,
    save_png,
    save_tensor,
)

EXIT_OK = 0
EXIT_UNREADABLE = 2
EXIT_BAD_CONFIG = 3
EXIT_PIPELINE = 4


def _load_image(path: str) -> np.ndarray:
    try:
        return load_png(path)
    except Exception as e:
        raise _Unreadable(f"cannot read image {path}: {e}") from e


class _Unreadable(Exception):
    pass


def _parse_remap(value: str) -> tuple[dict[int, int], dict[int, int]]:
    """Remap argument: a JSON file path, or inline JSON starting with '{'.

    Shape: {"target": {"<label>": <label>, ...}, "reference": {...}}.
    """
    try:
        if value.lstrip().startswith("{"):
            spec = json.loads(value)
        else:
            spec = json.loads(Path(value).read_text())
    except FileNotFoundError as e:
        raise _Unreadable(f"cannot read remap file {value}") from e
    except json.JSONDecodeError as e:
        raise ParameterError(f"remap is not valid JSON: {e}") from e
    if not isinstance(spec, dict):
        raise ParameterError("remap must be a JSON object")
    out = []
    for key in ("target", "reference"):
        section = spec.get(key, {})
        if not isinstance(section, dict):
            raise ParameterError(f"remap[{key!r}] must be an object")
        try:
            out.append({int(k): int(v) for k, v in section.items()})
        except (TypeError, ValueError) as e:
            raise ParameterError(f"remap[{key!r}] has non-integer labels") from e
    return out[0], out[1]


def _split_paths(value: str, n: int, what: str) -> tuple[str, ...]:
    parts = tuple(p for p in value.split(",") if p)
    if len(parts) != n:
        raise ParameterError(f"{what} expects {n} comma-separated paths")
    return parts


def _config_from_args(args: argparse.Namespace) -> PipelineConfig:
    cfg = PipelineConfig(
        stride=args.stride,
        initial_classes=args.classes_n,
        reduced_k=args.k,
        tau=args.tau,
        seed=args.seed,
        fill=args.fill,
    )
    if getattr(args, "features", "builtin") != "builtin":
        cfg.feature_files = _split_paths(args.features, 2, "--features")
    if getattr(args, "classmaps", None):
        cfg.classmap_files = _split_paths(args.classmaps, 2, "--classmaps")
    if getattr(args, "remap", None):
        cfg.remap_target, cfg.remap_reference = _parse_remap(args.remap)
    cfg.validate()
    return cfg


def cmd_colorize(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    target = _load_image(args.target)
    reference = _load_image(args.ref)
    try:
        res = run(target, reference, cfg)
    except (FileNotFoundError, PermissionError) as e:
        # feature/classmap side files named in the config
        raise _Unreadable(str(e)) from e
    save_png(res.rgb, args.out)
    if args.dump_dir:
        dump = Path(args.dump_dir)
        dump.mkdir(parents=True, exist_ok=True)
        for name, tensor in result_artifacts(res).items():
            save_tensor(tensor, dump / f"{name}.sptn")
        (dump / "report.json").write_text(
            json.dumps(
                {"meta": res.meta, "losses": res.losses.to_dict()},
                indent=2,
                sort_keys=True,
            )
            + "\n"
        )
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    try:
        k_list = [int(v) for v in args.k_list.split(",") if v]
    except ValueError as e:
        raise ParameterError(f"bad --k-list: {e}") from e
    if not k_list:
        raise ParameterError("--k-list is empty")
    if args.repeats < 1:
        raise ParameterError("--repeats must be >= 1")
    for k in k_list:
        if not 1 <= k <= args.classes_n:
            raise ParameterError(
                f"k={k} outside [1, {args.classes_n}] in --k-list"
            )

    target = _load_image(args.target)
    reference = _load_image(args.ref)
    base = PipelineConfig(
        stride=args.stride,
        initial_classes=args.classes_n,
        reduced_k=max(k_list),
        tau=args.tau,
        seed=args.seed,
    )
    base.validate()

    # features, centers and raw assignments are shared across all k
    lab_t = rgb_to_lab(target)
    lab_r = rgb_to_lab(reference)
    plane_t, _, _ = crop_to_grid(lab_t.L.astype(np.float64), base.stride)
    plane_r, _, _ = crop_to_grid(lab_r.L.astype(np.float64), base.stride)
    f_t = extract_builtin_features(plane_t, base.stride)
    f_r = extract_builtin_features(plane_r, base.stride)
    centers = fit_centers([f_t, f_r], base.initial_classes, base.seed)
    raw_t, _ = assign_classes(f_t, centers)
    raw_r, _ = assign_classes(f_r, centers)

    rows = []
    for k in k_list:
        table = reduce_categories(centers, k, base.seed)
        c_t = apply_reduction(raw_t, table)
        c_r = apply_reduction(raw_r, table)
        total_ops, part_ops = count_pairwise_ops(c_t, c_r)
        times = []
        corr = None
        for _ in range(args.repeats):
            t0 = time.perf_counter()
            corr = classwise_correspondence(f_t, f_r, c_t, c_r, tau=base.tau)
            times.append(time.perf_counter() - t0)
        rows.append(
            {
                "k": k,
                "global_ops": total_ops,
                "partitioned_ops": part_ops,
                "ops_ratio": part_ops / total_ops if total_ops else 0.0,
                "correspondence_ms_median": 1e3 * statistics.median(times),
                "related_fraction": float(corr.related.mean()),
            }
        )

    by_k = sorted(rows, key=lambda r: r["k"])
    violations = [
        (lo["k"], hi["k"])
        for lo, hi in zip(by_k, by_k[1:])
        if hi["partitioned_ops"] > lo["partitioned_ops"]
    ]
    report = {
        "grid_target": [f_t.grid_h, f_t.grid_w],
        "grid_reference": [f_r.grid_h, f_r.grid_w],
        "repeats": args.repeats,
        "rows": rows,
        "op_count_monotonicity": {
            "nonincreasing_in_k": not violations,
            "violations": [
                {"from_k": lo, "to_k": hi} for lo, hi in violations
            ],
        },
    }
    Path(args.out).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")

    header = f"{'k':>4} {'global ops':>12} {'partitioned':>12} {'ratio':>7} {'median ms':>10} {'related':>8}"
    print(header)
    for r in rows:
        print(
            f"{r['k']:>4} {r['global_ops']:>12} {r['partitioned_ops']:>12} "
            f"{r['ops_ratio']:>7.3f} {r['correspondence_ms_median']:>10.2f} "
            f"{r['related_fraction']:>8.3f}"
        )
    return EXIT_OK


def cmd_segment(args: argparse.Namespace) -> int:
    img = _load_image(args.infile)
    cfg = PipelineConfig(
        stride=args.stride,
        initial_classes=args.classes_n,
        reduced_k=args.k,
        seed=args.seed,
    )
    cfg.validate()
    lab = rgb_to_lab(img)
    plane, _, _ = crop_to_grid(lab.L.astype(np.float64), cfg.stride)
    f = extract_builtin_features(plane, cfg.stride)
    centers = fit_centers(f, cfg.initial_classes, cfg.seed)
    raw, _ = assign_classes(f, centers)
    table = reduce_categories(centers, cfg.reduced_k, cfg.seed)
    save_class_map(apply_reduction(raw, table), args.out_labels)
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from chromatch.service import create_app

    host = args.host
    if host not in ("127.0.0.1", "localhost", "::1") and not args.allow_external:
        raise ParameterError(
            f"refusing to bind non-loopback host {host!r} without --allow-external"
        )
    app = create_app(static_dir=args.static)
    uvicorn.run(app, host=host, port=args.port, log_level="warning")
    return EXIT_OK


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--k", type=int, default=22, help="reduced class count")
    p.add_argument(
        "--classes-n", type=int, default=27, help="initial class count"
    )
    p.add_argument("--tau", type=float, default=0.01, help="softmax temperature")
    p.add_argument("--stride", type=int, default=4, help="pixels per cell")
    p.add_argument("--seed", type=int, default=0, help="clustering seed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chromatch",
        description="Deterministic exemplar-based image colorization.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    c = sub.add_parser("colorize", help="transfer color from a reference image")
    c.add_argument("--target", required=True, help="grayscale target PNG")
    c.add_argument("--ref", required=True, help="color reference PNG")
    c.add_argument("--out", required=True, help="output PNG path")
    _add_common(c)
    c.add_argument(
        "--fill",
        choices=["neutral", "propagate"],
        default="propagate",
        help="chrominance fill for unrelated regions",
    )
    c.add_argument(
        "--features",
        default="builtin",
        help="'builtin' or <target.sptn>,<reference.sptn>",
    )
    c.add_argument(
        "--classmaps",
        default=None,
        help="optional <target.sptn>,<reference.sptn> precomputed class maps",
    )
    c.add_argument(
        "--remap",
        default=None,
        help="remap spec: JSON file path or inline JSON",
    )
    c.add_argument(
        "--dump-dir", default=None, help="directory for tensor dumps + report"
    )
    c.set_defaults(func=cmd_colorize)

    b = sub.add_parser("bench", help="op-count/time sweep over class counts")
    b.add_argument("--target", required=True)
    b.add_argument("--ref", required=True)
    b.add_argument("--k-list", required=True, help="comma-separated k values")
    b.add_argument("--repeats", type=int, default=3)
    b.add_argument("--out", required=True, help="JSON report path")
    _add_common(b)
    b.set_defaults(func=cmd_bench)

    s = sub.add_parser("segment", help="write a class map for one image")
    s.add_argument("--in", dest="infile", required=True)
    s.add_argument("--out-labels", required=True, help="output SPTN path")
    _add_common(s)
    s.set_defaults(func=cmd_segment)

    v = sub.add_parser("serve", help="run the local session service")
    v.add_argument("--host", default="127.0.0.1")
    v.add_argument("--port", type=int, default=8077)
    v.add_argument(
        "--allow-external",
        action="store_true",
        help="permit binding a non-loopback host",
    )
    v.add_argument(
        "--static",
        default=None,
        help="directory with the browser editor build to serve at /",
    )
    v.set_defaults(func=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _Unreadable as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_UNREADABLE
    except ParameterError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_BAD_CONFIG
    except (DataError, SptnError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_PIPELINE


if __name__ == "__main__":
    sys.exit(main())
