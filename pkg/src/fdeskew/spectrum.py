"""2-D DFT magnitude spectra of binary pages."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft

from .errors import ValidationError


@dataclass(frozen=True, eq=False)
class MagnitudeSpectrum:
    """A magnitude (or power) spectrum.

    Raw spectra keep the DC bin at (0, 0).  After :func:`normalize_and_center`
    the DC bin sits at ``(c_y, c_x) = (height // 2, width // 2)`` and values
    lie in [0, 1].
    """

    values: np.ndarray
    centered: bool = False
    normalized: bool = False

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def c_y(self) -> int:
        return self.height // 2

    @property
    def c_x(self) -> int:
        return self.width // 2


def dft2_magnitude(binary: np.ndarray) -> MagnitudeSpectrum:
    """|F(u, v)| of the unpadded 2-D DFT, DC at the origin."""
    binary = np.asarray(binary)
    if binary.ndim != 2 or binary.size == 0:
        raise ValidationError(f"expected a non-empty 2-D image, got shape {binary.shape}")
    h, w = binary.shape
    # real input: compute half the columns, mirror the rest via |F(u,v)| = |F(-u,-v)|
    half = np.abs(scipy.fft.rfft2(binary.astype(np.float64)))
    k = half.shape[1]
    mag = np.empty((h, w))
    mag[:, :k] = half
    if w > k:
        rows = (-np.arange(h)) % h
        mag[:, k:] = half[rows[:, None], (w - np.arange(k, w))[None, :]]
    return MagnitudeSpectrum(mag)


def power_spectrum(raw: MagnitudeSpectrum) -> MagnitudeSpectrum:
    if raw.centered or raw.normalized:
        raise ValidationError("power spectrum must be taken from a raw magnitude spectrum")
    return MagnitudeSpectrum(raw.values**2)


def log_normalize(values: np.ndarray) -> np.ndarray:
    """log(1 + v) scaled so the maximum is 1; an all-zero input stays zero."""
    out = np.log1p(values)
    peak = out.max()
    if peak > 0:
        out /= peak
    return out


def normalize_and_center(raw: MagnitudeSpectrum) -> MagnitudeSpectrum:
    if raw.centered or raw.normalized:
        raise ValidationError("spectrum is already centered/normalized")
    shifted = np.fft.fftshift(raw.values)
    return MagnitudeSpectrum(log_normalize(shifted), centered=True, normalized=True)
