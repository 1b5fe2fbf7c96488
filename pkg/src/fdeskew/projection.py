"""Radial projections over a centered spectrum and the two-projection decision rule.

A ray at angle ``theta`` (degrees) leaves the DC bin and visits the bins
``(c_y + s*cos(theta), c_x - s*sin(theta))`` for ``s = 0 .. R`` with
``R = min(height, width)``.  Summing the spectrum along the ray gives one
profile value; the angle of the strongest ray is the candidate skew.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .spectrum import MagnitudeSpectrum


class Branch(str, enum.Enum):
    INITIAL = "initial"
    CORRECTION = "correction"


class Sampling(str, enum.Enum):
    NEAREST = "nearest"
    BILINEAR = "bilinear"


@dataclass(frozen=True, eq=False)
class AngleGrid:
    theta_min: float
    theta_max: float
    step: float
    angles: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not (math.isfinite(self.theta_min) and math.isfinite(self.theta_max)):
            raise ValidationError("angle bounds must be finite")
        if self.theta_min >= self.theta_max:
            raise ValidationError(f"theta_min ({self.theta_min}) must be < theta_max ({self.theta_max})")
        if not self.step > 0:
            raise ValidationError(f"angle step must be positive, got {self.step}")
        n = int(math.floor((self.theta_max - self.theta_min) / self.step + 1e-9)) + 1
        # rounding keeps grid points such as 7.3 identical to their literals
        angles = np.round(self.theta_min + self.step * np.arange(n), 10)
        angles.setflags(write=False)
        object.__setattr__(self, "angles", angles)

    def __len__(self) -> int:
        return len(self.angles)

    def __contains__(self, angle: float) -> bool:
        return bool(np.any(self.angles == angle))


@dataclass(frozen=True, eq=False)
class ProjectionProfile:
    grid: AngleGrid
    values: np.ndarray

    def __post_init__(self):
        if len(self.values) != len(self.grid):
            raise ValidationError("profile length does not match its grid")

    def to_csv(self) -> str:
        rows = ["angle,value"]
        rows += [f"{a:.4f},{v:.10g}" for a, v in zip(self.grid.angles, self.values)]
        return "\n".join(rows) + "\n"


def _require_centered(spectrum: MagnitudeSpectrum) -> None:
    if not spectrum.centered:
        raise ValidationError("radial projection needs a centered spectrum (DC at height//2, width//2)")


def _gather(values: np.ndarray, ys: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """values[ys, xs] with zero for out-of-bounds integer coordinates."""
    h, w = values.shape
    flat = np.append(values.ravel(), 0.0)
    inside = (ys >= 0) & (ys < h) & (xs >= 0) & (xs < w)
    idx = np.where(inside, ys * w + xs, h * w)
    return flat[idx]


def inscribed_radius(spectrum: MagnitudeSpectrum) -> int:
    """Longest ray that stays inside the array for every angle in [-90, 90]."""
    return min(spectrum.height - 1 - spectrum.c_y, spectrum.c_x, spectrum.width - 1 - spectrum.c_x)


def _radius(spectrum: MagnitudeSpectrum, radius: int | None) -> int:
    full = min(spectrum.height, spectrum.width)
    if radius is None:
        return full
    if not 0 <= radius <= full:
        raise ValidationError(f"radius must be in [0, {full}], got {radius}")
    return int(radius)


def radial_samples(
    spectrum: MagnitudeSpectrum,
    grid: AngleGrid,
    sampling: Sampling | str = Sampling.NEAREST,
    radius: int | None = None,
) -> np.ndarray:
    """Spectrum values along every ray: shape ``(len(grid), R + 1)``.

    ``radius`` defaults to ``R = min(height, width)``.
    """
    _require_centered(spectrum)
    radius = _radius(spectrum, radius)
    out = np.zeros((len(grid), radius + 1))
    # beyond the center-to-corner distance (plus rounding slack) every ray is out of bounds
    reach = min(radius, int(math.hypot(spectrum.c_y, spectrum.c_x)) + 2)
    rad = np.deg2rad(grid.angles)[:, None]
    s = np.arange(reach + 1, dtype=np.float64)[None, :]
    ys = spectrum.c_y + s * np.cos(rad)
    xs = spectrum.c_x - s * np.sin(rad)
    out[:, : reach + 1] = _sample(spectrum.values, ys, xs, Sampling(sampling))
    return out


def _sample(values: np.ndarray, ys: np.ndarray, xs: np.ndarray, sampling: Sampling) -> np.ndarray:
    if sampling is Sampling.NEAREST:
        return _gather(values, np.rint(ys).astype(np.int64), np.rint(xs).astype(np.int64))

    y0 = np.floor(ys)
    x0 = np.floor(xs)
    fy = ys - y0
    fx = xs - x0
    y0 = y0.astype(np.int64)
    x0 = x0.astype(np.int64)
    v = values
    return (
        _gather(v, y0, x0) * (1 - fy) * (1 - fx)
        + _gather(v, y0, x0 + 1) * (1 - fy) * fx
        + _gather(v, y0 + 1, x0) * fy * (1 - fx)
        + _gather(v, y0 + 1, x0 + 1) * fy * fx
    )


def offset_sums(samples: np.ndarray) -> np.ndarray:
    """Column ``w`` holds every ray's sum over ``s >= w``.

    All profiles are read from this table so that a profile at offset W is
    bit-identical no matter which code path asked for it.
    """
    return np.cumsum(samples[:, ::-1], axis=1)[:, ::-1]


def radial_projection(
    spectrum: MagnitudeSpectrum,
    grid: AngleGrid,
    start_offset: int = 0,
    sampling: Sampling | str = Sampling.NEAREST,
    radius: int | None = None,
) -> ProjectionProfile:
    """Sum the spectrum along each grid ray from ``start_offset`` out to ``radius``.

    ``start_offset = 0`` gives the initial projection; a positive offset
    skips the DC bin and the lowest frequencies (correction projection).
    ``radius`` defaults to ``R = min(height, width)``; samples outside the
    array count as zero.
    """
    _require_centered(spectrum)
    radius = _radius(spectrum, radius)
    if not 0 <= start_offset < radius:
        raise ValidationError(f"start_offset must be in [0, {radius}), got {start_offset}")
    sums = offset_sums(radial_samples(spectrum, grid, sampling, radius))
    return ProjectionProfile(grid, sums[:, int(start_offset)].copy())


def argmax_angle(profile: ProjectionProfile) -> float:
    """Grid angle with the largest value; ties go to the smallest angle."""
    if len(profile.values) == 0:
        raise ValidationError("empty profile")
    return float(profile.grid.angles[int(np.argmax(profile.values))])


# angle differences are compared at this many decimals so that grid angles
# such as 5.45 - 5.0 meet a distance of 0.45 exactly
DIFF_DECIMALS = 9


def aggregate(theta_a: float, theta_b: float, distance: float) -> tuple[float, Branch]:
    """Keep the correction angle unless it strays more than ``distance`` from the initial one."""
    if round(abs(theta_a - theta_b), DIFF_DECIMALS) > distance:
        return theta_a, Branch.INITIAL
    return theta_b, Branch.CORRECTION
