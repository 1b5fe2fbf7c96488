"""Benchmark metrics, batch evaluation, parameter search and ablation tables.

Metrics follow the usual skew-benchmark conventions:

* AED   - mean absolute error
* TOP80 - mean of the best ``ceil(0.8 n)`` errors
* CE    - fraction of errors ``<= 0.1`` degree (inclusive)
* WE    - worst (largest) error
"""

from __future__ import annotations

import csv
import decimal
import io
import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from . import imageio
from .dataset import DatasetManifest, ManifestEntry
from .errors import DeskewError, ValidationError
from .projection import DIFF_DECIMALS
from .estimator import (
    EstimatorConfig,
    SpectrumKind,
    estimate_skew,
    initial_angle,
    offset_sweep,
)

log = logging.getLogger(__name__)

CE_THRESHOLD = 0.1
TOP_FRACTION = 0.8
N_CANDIDATES = 20
DISTANCE_GRID = np.round(np.arange(61) * 0.05, 2)  # 0.00 .. 3.00 degrees
# errors are rounded so decimal angles compare exactly against the CE threshold
ERROR_DECIMALS = 9


@dataclass(frozen=True)
class ImageResult:
    path: str
    truth: float
    estimate: float | None
    error: float
    failure: str | None = None


@dataclass(frozen=True)
class EvalReport:
    aed: float
    top80: float
    ce: float
    we: float
    n: int
    sorted_errors: tuple[float, ...]
    per_image: tuple[ImageResult, ...] = ()

    @property
    def failures(self) -> list[ImageResult]:
        return [r for r in self.per_image if r.failure is not None]

    def summary(self) -> str:
        return f"AED={self.aed:.3f} TOP80={self.top80:.3f} CE={self.ce:.3f} WE={self.we:.3f} N={self.n}"

    def to_json(self) -> str:
        doc = {
            "aed": self.aed,
            "top80": self.top80,
            "ce": self.ce,
            "we": self.we,
            "n": self.n,
            "sorted_errors": list(self.sorted_errors),
            "per_image": [r.__dict__ for r in self.per_image],
            "failures": [r.path for r in self.failures],
        }
        return json.dumps(doc, indent=2) + "\n"

    def per_image_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["path", "truth", "estimate", "error", "failure"])
        for r in self.per_image:
            est = "" if r.estimate is None else f"{r.estimate:.2f}"
            writer.writerow([r.path, f"{r.truth:.2f}", est, f"{r.error:.4f}", r.failure or ""])
        return buf.getvalue()


def angle_error(estimate: float, truth: float) -> float:
    return round(abs(estimate - truth), ERROR_DECIMALS)


def _decimal_mean(values: Sequence[float]) -> float:
    # Errors are decimal quantities (rounded differences of 0.01-degree angles);
    # averaging their shortest decimal forms keeps e.g. 0.35 / 4 == 0.0875 exact.
    return float(sum(decimal.Decimal(repr(v)) for v in values) / len(values))


def compute_metrics(errors: Iterable[float], per_image: Sequence[ImageResult] = ()) -> EvalReport:
    """Aggregate absolute errors (degrees) into AED, TOP80, CE and WE."""
    errs = sorted(float(e) for e in errors)
    if not errs:
        raise ValidationError("cannot compute metrics of an empty error list")
    if errs[0] < 0 or not all(math.isfinite(e) for e in errs):
        raise ValidationError("errors must be finite and non-negative")
    n = len(errs)
    top = errs[: math.ceil(TOP_FRACTION * n)]
    return EvalReport(
        aed=_decimal_mean(errs),
        top80=_decimal_mean(top),
        ce=sum(e <= CE_THRESHOLD for e in errs) / n,
        we=errs[-1],
        n=n,
        sorted_errors=tuple(errs),
        per_image=tuple(per_image),
    )


def export_error_curve(report: EvalReport, path: str | Path) -> Path:
    """Write the sorted absolute error curve as CSV (rank, fraction, error, log10_error)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n = report.n
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["rank", "fraction", "error", "log10_error"])
        for rank, err in enumerate(report.sorted_errors, start=1):
            writer.writerow([rank, f"{rank / n:.6f}", f"{err:.6f}", f"{math.log10(max(err, 1e-4)):.6f}"])
    return path


def default_threads() -> int:
    env = os.environ.get("DESKEW_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _map(fn, items, threads: int) -> list:
    """Order-preserving map; results never depend on the worker count."""
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


Estimator = Callable[[Path, ManifestEntry], float]


def skew_estimator(cfg: EstimatorConfig) -> Estimator:
    def run(path: Path, entry: ManifestEntry) -> float:
        return estimate_skew(imageio.load_gray(path), cfg).theta_f

    return run


def _score(manifest, entries, estimator, penalty, threads) -> EvalReport:
    def one(entry: ManifestEntry) -> ImageResult:
        try:
            est = float(estimator(manifest.resolve(entry), entry))
        except (DeskewError, OSError) as exc:
            log.warning("%s: %s", entry.image_path, exc)
            return ImageResult(entry.image_path, entry.ground_truth_angle, None, penalty, f"{type(exc).__name__}: {exc}")
        return ImageResult(entry.image_path, entry.ground_truth_angle, est, angle_error(est, entry.ground_truth_angle))

    results = _map(one, entries, threads)
    return compute_metrics([r.error for r in results], results)


def evaluate_manifest(
    manifest: DatasetManifest,
    cfg: EstimatorConfig,
    split: str = "all",
    *,
    estimator: Estimator | None = None,
    threads: int = 1,
) -> EvalReport:
    """Run an estimator over a manifest split and score it.

    Images that fail (blank page, unreadable file) are kept in the report with
    the range width as their error, and listed in ``report.failures``.
    """
    entries = manifest.select(split)
    if not entries:
        raise ValidationError(f"manifest has no entries for split {split!r}")
    return _score(manifest, entries, estimator or skew_estimator(cfg), cfg.range_width, threads)


def config_for(manifest: DatasetManifest, height: int, **overrides) -> EstimatorConfig:
    """Working config whose search range covers the manifest's angle range."""
    wide = max(abs(manifest.theta_min), abs(manifest.theta_max)) > 15.0
    lo, hi = (-44.9, 44.9) if wide else (-15.0, 15.0)
    lo, hi = min(lo, manifest.theta_min), max(hi, manifest.theta_max)
    params = dict(target_height=height, window_offset=0, distance=0.0, theta_min=lo, theta_max=hi)
    params.update(overrides)
    return EstimatorConfig(**params)


# --- parameter search ---------------------------------------------------------


def window_limit(height: int) -> int:
    """Largest allowed window offset: the search stays in [0, H/2)."""
    return math.ceil(height / 2) - 1


def coarse_windows(height: int) -> list[int]:
    """20 evenly spaced offsets spanning [0, H/3]."""
    return [int(w) for w in np.rint(np.linspace(0, height / 3, N_CANDIDATES))]


def fine_windows(height: int, center: int) -> list[int]:
    """20 evenly spaced offsets within +-(2/30) H of ``center``, clamped to [0, H/2)."""
    dev = height * 2 / 30
    ws = np.rint(np.linspace(center - dev, center + dev, N_CANDIDATES))
    return [int(w) for w in np.clip(ws, 0, window_limit(height))]


@dataclass
class OffsetTable:
    """Correction-projection angles per image for every offset in ``[0, H/2)``.

    Built once per (manifest, height); the window and distance searches and
    the window ablation all read from it instead of re-running the FFT.
    """

    cfg: EstimatorConfig
    entries: list[ManifestEntry]
    truths: np.ndarray
    angles: np.ndarray  # (n_images, n_offsets); NaN rows for failed images
    failures: list[str] = field(default_factory=list)

    def theta_b(self, window: int) -> np.ndarray:
        return self.angles[:, window]

    @property
    def theta_a(self) -> np.ndarray:
        return self.angles[:, 0]

    def report(self, estimates: np.ndarray) -> EvalReport:
        results = []
        for entry, truth, est in zip(self.entries, self.truths, estimates):
            if np.isnan(est):
                results.append(ImageResult(entry.image_path, truth, None, self.cfg.range_width, "failed"))
            else:
                results.append(ImageResult(entry.image_path, truth, float(est), angle_error(est, truth)))
        return compute_metrics([r.error for r in results], results)


def build_offset_table(
    manifest: DatasetManifest, cfg: EstimatorConfig, split: str = "all", threads: int = 1
) -> OffsetTable:
    entries = manifest.select(split)
    if not entries:
        raise ValidationError(f"manifest has no entries for split {split!r}")
    offsets = np.arange(window_limit(cfg.target_height) + 1)
    failures = []

    def one(entry):
        try:
            return offset_sweep(imageio.load_gray(manifest.resolve(entry)), cfg, offsets)
        except (DeskewError, OSError) as exc:
            log.warning("%s: %s", entry.image_path, exc)
            failures.append(entry.image_path)
            return np.full(len(offsets), np.nan)

    rows = _map(one, entries, threads)
    truths = np.array([e.ground_truth_angle for e in entries])
    return OffsetTable(cfg, entries, truths, np.vstack(rows), sorted(failures))


@dataclass(frozen=True)
class WindowSearch:
    window: int
    coarse: list[tuple[int, float]]  # (W, CE)
    fine: list[tuple[int, float]]

    def to_csv(self) -> str:
        rows = ["stage,window,ce"]
        rows += [f"coarse,{w},{ce:.6f}" for w, ce in self.coarse]
        rows += [f"fine,{w},{ce:.6f}" for w, ce in self.fine]
        return "\n".join(rows) + "\n"


@dataclass(frozen=True)
class DistanceSearch:
    distance: float
    sweep: list[tuple[float, float, float]]  # (D, AED, CE)

    def to_csv(self) -> str:
        rows = ["distance,aed,ce"]
        rows += [f"{d:.2f},{aed:.6f},{ce:.6f}" for d, aed, ce in self.sweep]
        return "\n".join(rows) + "\n"


def _best_window(scored: list[tuple[int, float]]) -> int:
    # highest CE, ties toward the smaller window
    return min(scored, key=lambda wc: (-wc[1], wc[0]))[0]


def search_window(
    dev: DatasetManifest | OffsetTable, height: int | None = None, *, split: str = "dev", threads: int = 1
) -> WindowSearch:
    """Pick the window offset W that maximizes CE of the correction projection alone.

    A coarse pass over 20 offsets in [0, H/3] is refined by 20 offsets within
    +-(2/30) H of the coarse winner.
    """
    table = dev if isinstance(dev, OffsetTable) else build_offset_table(dev, config_for(dev, height), split, threads)
    h = table.cfg.target_height

    def ce(w: int) -> float:
        return table.report(table.theta_b(w)).ce

    coarse = [(w, ce(w)) for w in coarse_windows(h)]
    fine = [(w, ce(w)) for w in fine_windows(h, _best_window(coarse))]
    return WindowSearch(_best_window(coarse + fine), coarse, fine)


def aggregate_many(theta_a: np.ndarray, theta_b: np.ndarray, distance: float) -> np.ndarray:
    """Vectorized decision rule; agrees with :func:`fdeskew.projection.aggregate`."""
    diff = np.round(np.abs(theta_a - theta_b), DIFF_DECIMALS)
    return np.where(diff > distance, theta_a, theta_b)


def search_distance(
    dev: DatasetManifest | OffsetTable,
    height: int | None = None,
    window: int = 0,
    *,
    split: str = "dev",
    threads: int = 1,
) -> DistanceSearch:
    """Pick D in 0..3 degrees (0.05 steps) minimizing AED of the combined estimate.

    Ties go to the larger CE, then to the smaller D.
    """
    table = dev if isinstance(dev, OffsetTable) else build_offset_table(dev, config_for(dev, height), split, threads)
    theta_a, theta_b = table.theta_a, table.theta_b(window)
    sweep = []
    for d in DISTANCE_GRID:
        rep = table.report(aggregate_many(theta_a, theta_b, float(d)))
        sweep.append((float(d), rep.aed, rep.ce))
    best = min(sweep, key=lambda r: (r[1], -r[2], r[0]))
    return DistanceSearch(best[0], sweep)


@dataclass(frozen=True)
class ParamSearch:
    window: WindowSearch
    distance: DistanceSearch

    @property
    def params(self) -> tuple[int, float]:
        return self.window.window, self.distance.distance


def search_params(dev: DatasetManifest, height: int, *, split: str = "dev", threads: int = 1) -> ParamSearch:
    """Two-stage search: W for the best CE, then D for the best AED at that W."""
    table = build_offset_table(dev, config_for(dev, height), split, threads)
    win = search_window(table)
    return ParamSearch(win, search_distance(table, window=win.window))


# --- ablations ---------------------------------------------------------------


@dataclass(frozen=True)
class AblationRow:
    value: str
    report: EvalReport

    def cells(self) -> list[str]:
        r = self.report
        return [self.value, f"{r.aed:.4f}", f"{r.top80:.4f}", f"{r.ce:.4f}", f"{r.we:.4f}"]


def ablation_csv(rows: Sequence[AblationRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["value", "aed", "top80", "ce", "we"])
    for row in rows:
        writer.writerow(row.cells())
    return buf.getvalue()


def _initial_only(cfg: EstimatorConfig) -> Estimator:
    def run(path: Path, entry: ManifestEntry) -> float:
        return initial_angle(imageio.load_gray(path), cfg)

    return run


def ablate_division(
    manifest: DatasetManifest, cfg: EstimatorConfig, fractions: Sequence[float], split: str = "all", threads: int = 1
) -> list[AblationRow]:
    """Initial-projection estimates from averaged N x N tile spectra, N = fraction * H."""
    rows = []
    for k in fractions:
        c = cfg.replace(block_fraction=float(k))
        rows.append(AblationRow(f"{k:g}", evaluate_manifest(manifest, c, split, estimator=_initial_only(c), threads=threads)))
    return rows


def ablate_spectrum(
    manifest: DatasetManifest, cfg: EstimatorConfig, split: str = "all", threads: int = 1
) -> list[AblationRow]:
    """Initial-projection estimates on magnitude vs power spectra."""
    rows = []
    for kind in (SpectrumKind.MAGNITUDE, SpectrumKind.POWER):
        c = cfg.replace(spectrum_kind=kind)
        rows.append(AblationRow(kind.value, evaluate_manifest(manifest, c, split, estimator=_initial_only(c), threads=threads)))
    return rows


def ablate_window(
    manifest: DatasetManifest | OffsetTable,
    cfg: EstimatorConfig | None,
    windows: Sequence[int],
    split: str = "all",
    threads: int = 1,
) -> list[AblationRow]:
    """Correction-projection-only estimates for each start offset W."""
    table = manifest if isinstance(manifest, OffsetTable) else build_offset_table(manifest, cfg, split, threads)
    limit = table.angles.shape[1]
    rows = []
    for w in windows:
        if not 0 <= w < limit:
            raise ValidationError(f"window {w} outside [0, {limit})")
        rows.append(AblationRow(str(int(w)), table.report(table.theta_b(int(w)))))
    return rows
