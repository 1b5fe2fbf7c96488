"""End-to-end skew estimation, presets, deskewing and the ablation variants.

Angles follow :func:`fdeskew.imageio.rotate`: a page rotated by +a degrees
(counter-clockwise) is estimated at +a, and ``deskew`` rotates by -a.
"""

from __future__ import annotations

import dataclasses
import enum
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

import numpy as np
import scipy.fft

from . import imageio
from .errors import NoContentError, PresetError, ValidationError
from .projection import (
    AngleGrid,
    Branch,
    ProjectionProfile,
    Sampling,
    aggregate,
    inscribed_radius,
    offset_sums,
    radial_samples,
)
from .spectrum import (
    MagnitudeSpectrum,
    dft2_magnitude,
    log_normalize,
    normalize_and_center,
    power_spectrum,
)

# target height -> (window offset W in pixels, distance D in degrees)
PRESETS: dict[int, tuple[int, float]] = {
    1024: (247, 0.7),
    1500: (328, 0.55),
    2048: (304, 0.55),
    3072: (307, 0.45),
    4096: (250, 0.5),
}
RANGES: dict[int, tuple[float, float]] = {15: (-15.0, 15.0), 45: (-44.9, 44.9)}
MIN_FOREGROUND = 1e-4
MIN_BLOCK = 32


class SpectrumKind(str, enum.Enum):
    MAGNITUDE = "magnitude"
    POWER = "power"


@dataclass(frozen=True)
class EstimatorConfig:
    target_height: int = 1024
    window_offset: int = 247
    distance: float = 0.7
    theta_min: float = -15.0
    theta_max: float = 15.0
    angle_step: float = 0.05
    spectrum_kind: SpectrumKind = SpectrumKind.MAGNITUDE
    block_fraction: float = 1.0
    sampling: Sampling = Sampling.NEAREST

    def __post_init__(self):
        object.__setattr__(self, "spectrum_kind", SpectrumKind(self.spectrum_kind))
        object.__setattr__(self, "sampling", Sampling(self.sampling))
        if self.target_height < 256:
            raise ValidationError(f"target_height must be >= 256, got {self.target_height}")
        if not 0 <= self.window_offset < self.target_height:
            raise ValidationError(f"window_offset must be in [0, target_height), got {self.window_offset}")
        if not self.distance >= 0:
            raise ValidationError(f"distance must be >= 0, got {self.distance}")
        if not self.theta_min < self.theta_max:
            raise ValidationError("theta_min must be < theta_max")
        if not 0 < self.angle_step <= 0.1:
            raise ValidationError(f"angle_step must be in (0, 0.1], got {self.angle_step}")
        if not 0 < self.block_fraction <= 1:
            raise ValidationError(f"block_fraction must be in (0, 1], got {self.block_fraction}")

    @property
    def grid(self) -> AngleGrid:
        return AngleGrid(self.theta_min, self.theta_max, self.angle_step)

    @property
    def range_width(self) -> float:
        return self.theta_max - self.theta_min

    def replace(self, **changes) -> "EstimatorConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        d["spectrum_kind"] = self.spectrum_kind.value
        d["sampling"] = self.sampling.value
        return d

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> "EstimatorConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ValidationError(f"unknown config fields: {sorted(unknown)}")
        return cls(**data)


def load_config(path: str | Path) -> EstimatorConfig:
    """Read an :class:`EstimatorConfig` from a ``.json`` or ``.toml`` file."""
    path = Path(path)
    if path.suffix.lower() == ".toml":
        import tomli

        data = tomli.loads(path.read_text(encoding="utf-8"))
    else:
        data = json.loads(path.read_text(encoding="utf-8"))
    return EstimatorConfig.from_mapping(data)


def load_preset(height: int, angle_range: int = 15, **overrides) -> EstimatorConfig:
    """Tuned {H, W, D} preset for one of the five working heights.

    ``angle_range`` selects the +-15 or +-44.9 degree search range.
    """
    if height not in PRESETS:
        raise PresetError(f"no preset for height {height}; valid presets: {sorted(PRESETS)}")
    if angle_range not in RANGES:
        raise PresetError(f"angle_range must be one of {sorted(RANGES)}, got {angle_range}")
    window, distance = PRESETS[height]
    lo, hi = RANGES[angle_range]
    return EstimatorConfig(height, window, distance, lo, hi, **overrides)


@dataclass(frozen=True, eq=False)
class SkewEstimate:
    theta_f: float
    theta_a: float
    theta_b: float
    branch: Branch
    profiles: tuple[ProjectionProfile, ProjectionProfile] | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "theta_f": self.theta_f,
            "theta_a": self.theta_a,
            "theta_b": self.theta_b,
            "branch": self.branch.value,
        }


def preprocess(img: np.ndarray, cfg: EstimatorConfig) -> np.ndarray:
    """Resize to the working height and binarize; rejects blank pages."""
    binary = imageio.binarize(imageio.resize_to_height(imageio.check_gray(img), cfg.target_height))
    if binary.mean() < MIN_FOREGROUND:
        raise NoContentError("page has no foreground after binarization")
    return binary


def _square_canvas(binary: np.ndarray) -> np.ndarray:
    # The ray formula works in bin indices, so bins must be square: on an
    # HxW spectrum a line at angle a appears at atan(tan(a) * W / H).
    # Rows are flipped so the ray angle reads as counter-clockwise skew.
    side = scipy.fft.next_fast_len(max(binary.shape))
    canvas = np.zeros((side, side), dtype=np.float64)
    canvas[: binary.shape[0], : binary.shape[1]] = binary[::-1]
    return canvas


def _raw_spectrum(binary: np.ndarray, kind: SpectrumKind) -> MagnitudeSpectrum:
    raw = dft2_magnitude(binary)
    return power_spectrum(raw) if kind is SpectrumKind.POWER else raw


def page_spectrum(img: np.ndarray, cfg: EstimatorConfig) -> MagnitudeSpectrum:
    """Centered, normalized spectrum of the whole preprocessed page."""
    binary = _square_canvas(preprocess(img, cfg))
    return normalize_and_center(_raw_spectrum(binary, cfg.spectrum_kind))


def _offset_table(spectrum: MagnitudeSpectrum, cfg: EstimatorConfig) -> np.ndarray:
    # Rays stop at the inscribed circle.  Past it, diagonal rays keep sampling
    # the noise floor while axial rays have left the array, which drags wide
    # searches toward +-45 degrees.
    radius = inscribed_radius(spectrum)
    return offset_sums(radial_samples(spectrum, cfg.grid, cfg.sampling, radius))


def estimate_skew(img: np.ndarray, cfg: EstimatorConfig, keep_profiles: bool = False) -> SkewEstimate:
    """Estimate the dominant skew angle of a page, in degrees.

    Raises:
        NoContentError: the page is blank after binarization.
    """
    if cfg.block_fraction != 1:
        raise ValidationError("estimate_skew works on the whole page; use estimate_blockwise")
    spectrum = page_spectrum(img, cfg)
    radius = inscribed_radius(spectrum)
    if cfg.window_offset > radius:
        raise ValidationError(f"window_offset {cfg.window_offset} exceeds projection radius {radius}")
    sums = _offset_table(spectrum, cfg)
    grid = cfg.grid
    initial = sums[:, 0]
    correction = sums[:, cfg.window_offset]
    theta_a = float(grid.angles[int(np.argmax(initial))])
    theta_b = float(grid.angles[int(np.argmax(correction))])
    theta_f, branch = aggregate(theta_a, theta_b, cfg.distance)
    profiles = None
    if keep_profiles:
        profiles = (ProjectionProfile(grid, initial.copy()), ProjectionProfile(grid, correction.copy()))
    return SkewEstimate(theta_f, theta_a, theta_b, branch, profiles)


def offset_sweep(img: np.ndarray, cfg: EstimatorConfig, offsets: np.ndarray) -> np.ndarray:
    """Correction-projection argmax angle for each start offset in ``offsets``.

    Offsets at or past the projection radius give an all-zero profile, whose
    argmax is the first grid angle.  Entry ``k`` equals the ``theta_b`` that
    :func:`estimate_skew` reports with ``window_offset = offsets[k]``.
    """
    sums = _offset_table(page_spectrum(img, cfg), cfg)
    angles = cfg.grid.angles
    offsets = np.asarray(offsets, dtype=np.int64)
    out = np.full(offsets.shape, angles[0])
    inside = offsets < sums.shape[1]
    out[inside] = angles[np.argmax(sums[:, offsets[inside]], axis=0)]
    return out


def block_size(cfg: EstimatorConfig) -> int:
    return int(round(cfg.block_fraction * cfg.target_height))


def tile_grid(shape: tuple[int, int], n: int) -> tuple[int, int]:
    """Rows and columns of full ``n x n`` tiles; ragged edges are dropped."""
    return shape[0] // n, shape[1] // n


def estimate_blockwise(img: np.ndarray, cfg: EstimatorConfig) -> SkewEstimate:
    """Initial-projection estimate from the average of per-tile spectra.

    The resized page is cut into full ``N x N`` tiles (``N`` = block fraction
    times working height, ragged edges dropped, a side shorter than ``N``
    padded with background); each tile's spectrum is
    log-normalized on its own and the normalized spectra are averaged.
    ``block_fraction = 1`` means the whole page and matches the initial
    projection of :func:`estimate_skew` exactly.
    """
    if cfg.block_fraction == 1:
        est = estimate_skew(img, cfg.replace(window_offset=0))
        return SkewEstimate(est.theta_a, est.theta_a, est.theta_a, Branch.INITIAL)
    n = block_size(cfg)
    if n < MIN_BLOCK:
        raise ValidationError(f"block size {n} px is below the {MIN_BLOCK} px minimum")
    binary = preprocess(img, cfg)[::-1]
    if binary.shape[0] < n or binary.shape[1] < n:
        # a side shorter than one block is padded with background, as the
        # whole-page path pads to a square canvas
        padded = np.zeros((max(n, binary.shape[0]), max(n, binary.shape[1])), dtype=binary.dtype)
        padded[: binary.shape[0], : binary.shape[1]] = binary
        binary = padded
    rows, cols = tile_grid(binary.shape, n)
    tiles = (
        binary[: rows * n, : cols * n]
        .reshape(rows, n, cols, n)
        .swapaxes(1, 2)
        .reshape(rows * cols, n, n)
        .astype(np.float64)
    )
    raw = np.abs(scipy.fft.fft2(tiles, axes=(-2, -1)))
    if cfg.spectrum_kind is SpectrumKind.POWER:
        raw = raw**2
    total = np.zeros((n, n))
    for tile in raw:
        total += log_normalize(tile)
    averaged = np.fft.fftshift(total / len(raw))
    spectrum = MagnitudeSpectrum(averaged, centered=True, normalized=True)
    theta = float(cfg.grid.angles[int(np.argmax(_offset_table(spectrum, cfg)[:, 0]))])
    return SkewEstimate(theta, theta, theta, Branch.INITIAL)


def deskew(img: np.ndarray, cfg: EstimatorConfig) -> tuple[np.ndarray, SkewEstimate]:
    """Estimate the skew and rotate the page back; white fills the new corners."""
    est = estimate_skew(img, cfg)
    return imageio.rotate(img, -est.theta_f, fill=255), est


def initial_angle(img: np.ndarray, cfg: EstimatorConfig) -> float:
    """Initial-projection-only angle (the ablation baseline)."""
    if cfg.block_fraction != 1:
        return estimate_blockwise(img, cfg).theta_f
    return estimate_skew(img, cfg.replace(window_offset=0)).theta_a
