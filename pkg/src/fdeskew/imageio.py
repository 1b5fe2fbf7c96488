"""Raster plumbing: decoding, grayscale reduction, resizing, binarization, rotation.

Gray images are 2-D ``uint8`` arrays (row-major, luminance 0..255).  Binary
images are 2-D ``uint8`` arrays holding 0 or 1 with 1 marking ink.  EXIF
orientation tags are deliberately ignored: pixels are used as stored.
"""

from __future__ import annotations

import math
from pathlib import Path

import cv2
import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import ImageFormatError, ValidationError

# ITU-R BT.601 luma weights
_LUMA = np.array([0.299, 0.587, 0.114])


def check_gray(img: np.ndarray) -> np.ndarray:
    if not isinstance(img, np.ndarray) or img.ndim != 2:
        raise ValidationError("expected a 2-D grayscale array")
    if img.shape[0] < 1 or img.shape[1] < 1:
        raise ValidationError(f"image has a zero dimension: {img.shape}")
    if img.dtype != np.uint8:
        if np.any(img < 0) or np.any(img > 255):
            raise ValidationError("gray values must lie in [0, 255]")
        img = img.astype(np.uint8)
    return img


def to_gray(pixels: np.ndarray) -> np.ndarray:
    """Reduce an HxWx3 (RGB order) or HxW array to rounded BT.601 luminance."""
    if pixels.ndim == 2:
        return check_gray(pixels)
    if pixels.ndim != 3 or pixels.shape[2] < 3:
        raise ValidationError(f"unsupported pixel array shape {pixels.shape}")
    luma = pixels[..., :3].astype(np.float64) @ _LUMA
    return check_gray(np.clip(np.rint(luma), 0, 255).astype(np.uint8))


def load_gray(path: str | Path) -> np.ndarray:
    """Decode a PNG/JPEG/TIFF/BMP file into a grayscale array.

    Color inputs are reduced with BT.601 weights and rounded.  Alpha is
    composited over white first so transparent regions read as paper.

    Raises:
        FileNotFoundError / OSError: the file cannot be read.
        ImageFormatError: the bytes are not a supported image.
        ValidationError: the decoded image has a zero dimension.
    """
    path = Path(path)
    try:
        with Image.open(path) as im:
            im.load()
            if im.width < 1 or im.height < 1:
                raise ValidationError(f"{path}: zero-dimension image")
            if im.mode in ("I;16", "I;16B", "I;16L", "I"):
                arr = np.asarray(im, dtype=np.float64)
                top = 65535.0 if arr.max() > 255 else 255.0
                return np.clip(np.rint(arr * 255.0 / top), 0, 255).astype(np.uint8)
            if im.mode == "L":
                return check_gray(np.asarray(im, dtype=np.uint8).copy())
            if im.mode in ("RGBA", "LA", "PA") or (im.mode == "P" and "transparency" in im.info):
                rgba = im.convert("RGBA")
                white = Image.new("RGBA", rgba.size, (255, 255, 255, 255))
                rgb = Image.alpha_composite(white, rgba).convert("RGB")
            else:
                rgb = im.convert("RGB")
            return to_gray(np.asarray(rgb))
    except UnidentifiedImageError as exc:
        raise ImageFormatError(f"{path}: not a decodable image") from exc
    except Image.DecompressionBombError as exc:
        raise ImageFormatError(f"{path}: {exc}") from exc


def save_png(img: np.ndarray, path: str | Path) -> None:
    """Write a gray (uint8) or 16-bit (uint16) array as PNG."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if img.dtype == np.uint16:
        Image.fromarray(img).save(path, format="PNG", compress_level=1)
    else:
        Image.fromarray(check_gray(img), mode="L").save(path, format="PNG", compress_level=1)


def resize_to_height(img: np.ndarray, target_height: int) -> np.ndarray:
    """Bilinear resize to ``target_height`` rows, keeping the aspect ratio."""
    img = check_gray(img)
    if target_height < 2:
        raise ValidationError(f"target_height must be >= 2, got {target_height}")
    h, w = img.shape
    new_w = max(1, int(round(w * target_height / h)))
    if (h, w) == (target_height, new_w):
        return img.copy()
    return cv2.resize(img, (new_w, target_height), interpolation=cv2.INTER_LINEAR)


def otsu_threshold(img: np.ndarray) -> int | None:
    """Return t such that the Otsu split is ``{v < t}`` vs ``{v >= t}``.

    ``None`` when the image holds a single gray level.
    """
    hist = np.bincount(img.ravel(), minlength=256).astype(np.float64)
    if np.count_nonzero(hist) < 2:
        return None
    levels = np.arange(256, dtype=np.float64)
    total = hist.sum()
    # lower class is {v <= k}; evaluated for k = 0..254
    w0 = np.cumsum(hist)[:-1]
    m0 = np.cumsum(hist * levels)[:-1]
    w1 = total - w0
    mu_total = (hist * levels).sum()
    valid = (w0 > 0) & (w1 > 0)
    between = np.zeros(255)
    between[valid] = (mu_total * w0[valid] - total * m0[valid]) ** 2 / (w0[valid] * w1[valid])
    return int(np.argmax(between)) + 1


def binarize(img: np.ndarray) -> np.ndarray:
    """Global Otsu binarization; pixels darker than the threshold become 1."""
    img = check_gray(img)
    t = otsu_threshold(img)
    if t is None:
        return np.zeros(img.shape, dtype=np.uint8)
    return (img < t).astype(np.uint8)


def rotated_size(width: int, height: int, angle: float) -> tuple[int, int]:
    """Smallest canvas (width, height) holding the rotated input, with dimensions of the same parity as the input."""
    rad = math.radians(angle)
    c, s = abs(math.cos(rad)), abs(math.sin(rad))
    # slack absorbs cos/sin rounding at multiples of 90 degrees
    new_w = max(1, math.ceil(width * c + height * s - 1e-6))
    new_h = max(1, math.ceil(width * s + height * c - 1e-6))
    # match the input's parity so the image center stays on the pixel lattice
    new_w += (new_w - width) % 2
    new_h += (new_h - height) % 2
    return new_w, new_h


def rotate(img: np.ndarray, angle: float, fill: int = 255) -> np.ndarray:
    """Rotate counter-clockwise (as displayed) about the image center.

    The canvas grows to the rotated bounding box; samples that fall outside
    the source take ``fill``.  Bilinear interpolation.
    """
    img = check_gray(img)
    if not math.isfinite(angle):
        raise ValidationError(f"rotation angle must be finite, got {angle}")
    if angle % 360.0 == 0.0:
        return img.copy()
    h, w = img.shape
    new_w, new_h = rotated_size(w, h, angle)
    mat = cv2.getRotationMatrix2D(((w - 1) / 2.0, (h - 1) / 2.0), angle, 1.0)
    mat[0, 2] += (new_w - w) / 2.0
    mat[1, 2] += (new_h - h) / 2.0
    return cv2.warpAffine(
        img,
        mat,
        (new_w, new_h),
        flags=cv2.INTER_LINEAR,
        borderMode=cv2.BORDER_CONSTANT,
        borderValue=int(fill),
    )
