"""Command-line entry point: ``fdeskew <subcommand> ...``.

Exit codes: 0 success, 1 fatal error, 2 partial failure (some images failed).
Data goes to stdout; diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import dataset, evaluation, imageio
from .errors import DeskewError, NoContentError
from .estimator import (
    PRESETS,
    RANGES,
    EstimatorConfig,
    deskew,
    estimate_skew,
    load_config,
    load_preset,
    page_spectrum,
)

log = logging.getLogger("fdeskew")

EXIT_OK, EXIT_FATAL, EXIT_PARTIAL = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_FATAL, f"{self.prog}: error: {message}\n")


def _float_list(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _config(args) -> EstimatorConfig:
    if getattr(args, "config", None):
        cfg = load_config(args.config)
    else:
        cfg = load_preset(args.height, args.range)
    if getattr(args, "step", None) is not None:
        cfg = cfg.replace(angle_step=args.step)
    return cfg


def _add_estimator_flags(p, height_default=1024):
    p.add_argument("--height", type=int, default=height_default, help=f"working height preset {sorted(PRESETS)} (default {height_default})")
    p.add_argument("--range", type=int, default=15, choices=sorted(RANGES), help="search range: 15 (+-15) or 45 (+-44.9) degrees (default 15)")
    p.add_argument("--step", type=float, default=None, help="angle grid step in degrees (default 0.05)")
    p.add_argument("--config", type=Path, default=None, help="JSON/TOML estimator config; replaces the preset")


def _add_threads(p):
    p.add_argument("--threads", type=int, default=None, help="worker threads (default: $DESKEW_THREADS or all cores)")


def _threads(args) -> int:
    return args.threads if args.threads else evaluation.default_threads()


def _inputs(args) -> list[Path]:
    if args.input_dir:
        return dataset.list_images(args.input_dir)
    return [args.input]


def cmd_estimate(args) -> int:
    cfg = _config(args)
    paths = _inputs(args)
    failed = False
    for path in paths:
        try:
            gray = imageio.load_gray(path)
            est = estimate_skew(gray, cfg, keep_profiles=bool(args.profiles_out))
        except (DeskewError, OSError) as exc:
            print(f"{path}: {exc}", file=sys.stderr)
            failed = True
            continue
        if args.json:
            print(json.dumps({"path": str(path), **est.to_dict()}))
        else:
            print(f"{path}\t{est.theta_f:.2f}")
        if args.profiles_out:
            initial, correction = est.profiles
            out = Path(args.profiles_out)
            out.mkdir(parents=True, exist_ok=True)
            (out / f"{path.stem}_initial.csv").write_text(initial.to_csv(), encoding="utf-8")
            (out / f"{path.stem}_correction.csv").write_text(correction.to_csv(), encoding="utf-8")
        if args.dump_spectrum:
            spec = page_spectrum(gray, cfg)
            out = Path(args.dump_spectrum)
            imageio.save_png(np.rint(spec.values * 65535).astype(np.uint16), out / f"{path.stem}_spectrum.png")
    return EXIT_PARTIAL if failed else EXIT_OK


def cmd_deskew(args) -> int:
    cfg = _config(args)
    gray = imageio.load_gray(args.input)
    try:
        corrected, est = deskew(gray, cfg)
    except NoContentError as exc:
        print(f"{args.input}: {exc}", file=sys.stderr)
        return EXIT_PARTIAL
    imageio.save_png(corrected, args.output)
    print(f"{est.theta_f:.2f}")
    return EXIT_OK


def cmd_generate(args) -> int:
    m = dataset.generate_skew_dataset(args.source_dir, RANGES[args.range], args.per_image, args.seed, args.out)
    print(args.out / "manifest.json")
    print(f"{len(m.entries)} images from {len(m.sources())} sources", file=sys.stderr)
    return EXIT_OK


def cmd_synth(args) -> int:
    print(dataset.synth_corpus(args.count, args.out, args.seed))
    return EXIT_OK


def cmd_split(args) -> int:
    m = dataset.load_manifest(args.manifest)
    split = dataset.split_dev_test(m, args.dev_ratio, args.seed)
    out = Path(args.out) if args.out else m.root
    if out.resolve() != m.root.resolve():
        # keep image paths valid relative to the new manifest location
        entries = [
            replace(e, image_path=Path(os.path.relpath(split.resolve(e).resolve(), out.resolve())).as_posix())
            for e in split.entries
        ]
        split = replace(split, entries=tuple(entries), root=out)
    path = split.write(out)
    n_dev = len({e.source_path for e in split.select("dev")})
    n_test = len({e.source_path for e in split.select("test")})
    print(path)
    print(f"dev sources={n_dev} test sources={n_test}", file=sys.stderr)
    return EXIT_OK


def _manifest_config(args, manifest) -> EstimatorConfig:
    if args.config:
        return load_config(args.config)
    wide = max(abs(manifest.theta_min), abs(manifest.theta_max)) > 15.0
    return load_preset(args.height, 45 if wide else 15)


def cmd_evaluate(args) -> int:
    manifest = dataset.load_manifest(args.manifest)
    cfg = _manifest_config(args, manifest)
    report = evaluation.evaluate_manifest(manifest, cfg, args.split, threads=_threads(args))
    if args.report:
        Path(args.report).write_text(report.to_json(), encoding="utf-8")
    if args.per_image_csv:
        Path(args.per_image_csv).write_text(report.per_image_csv(), encoding="utf-8")
    if args.curve:
        evaluation.export_error_curve(report, args.curve)
    print(report.summary())
    for r in report.failures:
        print(f"failed: {r.path}: {r.failure}", file=sys.stderr)
    return EXIT_PARTIAL if report.failures else EXIT_OK


def cmd_search_params(args) -> int:
    manifest = dataset.load_manifest(args.manifest)
    result = evaluation.search_params(manifest, args.height, split=args.split, threads=_threads(args))
    w, d = result.params
    print(f"window={w}")
    print(f"distance={d:.2f}")
    print(f"coarse_candidates={len(result.window.coarse)}")
    print(f"fine_candidates={len(result.window.fine)}")
    if args.sweep_out:
        out = Path(args.sweep_out)
        out.write_text(result.window.to_csv() + "\n" + result.distance.to_csv(), encoding="utf-8")
    return EXIT_OK


def cmd_ablate(args) -> int:
    manifest = dataset.load_manifest(args.manifest)
    threads = _threads(args)
    base = evaluation.config_for(manifest, args.height)
    if args.mode == "division":
        values = args.values or [0.1, 0.2, 0.5, 0.9, 1.0]
        rows = evaluation.ablate_division(manifest, base, values, args.split, threads)
    elif args.mode == "power":
        rows = evaluation.ablate_spectrum(manifest, base, args.split, threads)
    else:
        values = args.values or [15, 35, 55, 75]
        rows = evaluation.ablate_window(manifest, base, [int(v) for v in values], args.split, threads)
    text = evaluation.ablation_csv(rows)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    failed = any(r.report.failures for r in rows)
    return EXIT_PARTIAL if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fdeskew", description="Fourier-spectrum document skew estimation")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("estimate", help="estimate skew angles")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--input", type=Path, help="image file")
    src.add_argument("--input-dir", type=Path, help="directory of images")
    _add_estimator_flags(p)
    p.add_argument("--json", action="store_true", help="one JSON record per image")
    p.add_argument("--profiles-out", type=Path, default=None, help="directory for projection profile CSVs")
    p.add_argument("--dump-spectrum", type=Path, default=None, help="directory for 16-bit spectrum PNGs")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("deskew", help="estimate and correct the skew of one image")
    p.add_argument("--input", type=Path, required=True)
    p.add_argument("--output", type=Path, required=True)
    _add_estimator_flags(p)
    p.set_defaults(func=cmd_deskew)

    p = sub.add_parser("generate", help="rotate straight sources into a skew dataset")
    p.add_argument("--source-dir", type=Path, required=True)
    p.add_argument("--range", type=int, default=15, choices=sorted(RANGES))
    p.add_argument("--per-image", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("synth", help="render straight synthetic documents")
    p.add_argument("--count", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("split", help="split a manifest into dev/test by source image")
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--dev-ratio", type=float, default=0.7)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, default=None, help="output directory (default: next to the manifest)")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("evaluate", help="score the estimator on a manifest")
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--height", type=int, default=1024)
    p.add_argument("--config", type=Path, default=None)
    p.add_argument("--split", choices=["dev", "test", "all"], default="all")
    p.add_argument("--report", type=Path, default=None, help="full JSON report")
    p.add_argument("--per-image-csv", type=Path, default=None)
    p.add_argument("--curve", type=Path, default=None, help="sorted error curve CSV")
    _add_threads(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("search-params", help="search the window offset W and distance D")
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--height", type=int, default=1024)
    p.add_argument("--split", choices=["dev", "test", "all"], default="dev")
    p.add_argument("--sweep-out", type=Path, default=None, help="CSV of every evaluated W and D")
    _add_threads(p)
    p.set_defaults(func=cmd_search_params)

    p = sub.add_parser("ablate", help="ablation tables: image division, spectrum kind, window offset")
    p.add_argument("--mode", choices=["division", "power", "window"], required=True)
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--height", type=int, default=1024)
    p.add_argument("--values", type=_float_list, default=None, help="comma-separated block fractions or window sizes")
    p.add_argument("--split", choices=["dev", "test", "all"], default="all")
    p.add_argument("--out", type=Path, default=None)
    _add_threads(p)
    p.set_defaults(func=cmd_ablate)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (DeskewError, OSError, ValueError) as exc:
        print(f"fdeskew {args.command}: {exc}", file=sys.stderr)
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
