"""Skewed datasets with ground-truth manifests, dev/test splits and a synthetic corpus.

Layout written by :func:`generate_skew_dataset`::

    out_dir/images/*.png
    out_dir/manifest.json
    out_dir/manifest.csv      # path,angle,split
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import cv2
import numpy as np

from . import imageio
from .errors import DeskewError, ValidationError

IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".tif", ".tiff", ".bmp"}
DEV, TEST = "dev", "test"
# ranges wider than this get twice the variants per source
NARROW_RANGE = 15.0


@dataclass(frozen=True)
class ManifestEntry:
    image_path: str
    source_path: str
    ground_truth_angle: float
    split: str | None = None


@dataclass(frozen=True)
class DatasetManifest:
    entries: tuple[ManifestEntry, ...]
    theta_min: float
    theta_max: float
    seed: int
    root: Path | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        paths = [e.image_path for e in self.entries]
        if len(set(paths)) != len(paths):
            raise ValidationError("manifest image paths must be unique")
        for e in self.entries:
            if not self.theta_min <= e.ground_truth_angle <= self.theta_max:
                raise ValidationError(f"{e.image_path}: angle {e.ground_truth_angle} outside range")
            if e.split not in (None, DEV, TEST):
                raise ValidationError(f"{e.image_path}: unknown split {e.split!r}")

    def resolve(self, entry: ManifestEntry) -> Path:
        p = Path(entry.image_path)
        if p.is_absolute() or self.root is None:
            return p
        return self.root / p

    def select(self, split: str = "all") -> list[ManifestEntry]:
        if split == "all":
            return list(self.entries)
        if split not in (DEV, TEST):
            raise ValidationError(f"split must be dev, test or all, got {split!r}")
        return [e for e in self.entries if e.split == split]

    def sources(self) -> list[str]:
        return sorted({e.source_path for e in self.entries})

    def to_json(self) -> str:
        doc = {
            "theta_min": self.theta_min,
            "theta_max": self.theta_max,
            "seed": self.seed,
            "entries": [asdict(e) for e in self.entries],
        }
        return json.dumps(doc, indent=2) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["path", "angle", "split"])
        for e in self.entries:
            writer.writerow([e.image_path, f"{e.ground_truth_angle:.2f}", e.split or ""])
        return buf.getvalue()

    def write(self, out_dir: str | Path) -> Path:
        """Write ``manifest.json`` and its CSV mirror; returns the JSON path."""
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / "manifest.json"
        path.write_text(self.to_json(), encoding="utf-8", newline="\n")
        (out_dir / "manifest.csv").write_text(self.to_csv(), encoding="utf-8", newline="\n")
        return path


def load_manifest(path: str | Path) -> DatasetManifest:
    path = Path(path)
    if path.is_dir():
        path = path / "manifest.json"
    doc = json.loads(path.read_text(encoding="utf-8"))
    entries = [ManifestEntry(**e) for e in doc["entries"]]
    return DatasetManifest(entries, doc["theta_min"], doc["theta_max"], doc["seed"], root=path.parent)


def list_images(directory: str | Path) -> list[Path]:
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"not a directory: {directory}")
    return sorted(p for p in directory.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)


def variants_per_source(theta_min: float, theta_max: float, per_image: int) -> int:
    wide = max(abs(theta_min), abs(theta_max)) > NARROW_RANGE
    return per_image * 2 if wide else per_image


def draw_angle(seed: int, source_index: int, variant: int, theta_min: float, theta_max: float) -> float:
    """Uniform angle for one variant, rounded to 0.01 degree.

    Each (seed, source, variant) triple owns its own stream, so the value does
    not depend on generation order.
    """
    rng = np.random.default_rng([seed, source_index, variant])
    angle = round(float(rng.uniform(theta_min, theta_max)), 2)
    return min(max(angle, theta_min), theta_max)


def generate_skew_dataset(
    straight_dir: str | Path,
    angle_range: tuple[float, float],
    per_image: int,
    seed: int,
    out_dir: str | Path,
) -> DatasetManifest:
    """Rotate every straight source into skewed variants with known angles.

    Ranges wider than +-15 degrees get ``2 * per_image`` variants per source.
    The image is rotated by exactly the recorded (rounded) angle, with white
    fill on an expanded canvas.
    """
    theta_min, theta_max = map(float, angle_range)
    if not theta_min < theta_max:
        raise ValidationError(f"invalid angle range {angle_range}")
    if per_image < 1:
        raise ValidationError(f"per_image must be >= 1, got {per_image}")
    sources = list_images(straight_dir)
    if not sources:
        raise DeskewError(f"no source images in {straight_dir}")
    out_dir = Path(out_dir)
    n_variants = variants_per_source(theta_min, theta_max, per_image)

    entries = []
    for i, src in enumerate(sources):
        gray = imageio.load_gray(src)
        for v in range(n_variants):
            angle = draw_angle(seed, i, v, theta_min, theta_max)
            rel = f"images/{i:04d}_{src.stem}_{v:02d}.png"
            imageio.save_png(imageio.rotate(gray, angle, fill=255), out_dir / rel)
            entries.append(ManifestEntry(rel, src.as_posix(), angle))

    manifest = DatasetManifest(entries, theta_min, theta_max, seed, root=out_dir)
    manifest.write(out_dir)
    return manifest


def split_dev_test(manifest: DatasetManifest, dev_ratio: float = 0.7, seed: int = 0) -> DatasetManifest:
    """Assign whole source images to dev or test so no source leaks across."""
    if not 0 < dev_ratio < 1:
        raise ValidationError(f"dev_ratio must be in (0, 1), got {dev_ratio}")
    sources = manifest.sources()
    if len(sources) < 2:
        raise ValidationError("need at least two source images to split")
    n_dev = min(max(int(round(dev_ratio * len(sources))), 1), len(sources) - 1)
    order = np.random.default_rng(seed).permutation(len(sources))
    dev = {sources[k] for k in order[:n_dev]}
    entries = [replace(e, split=DEV if e.source_path in dev else TEST) for e in manifest.entries]
    return replace(manifest, entries=tuple(entries))


# --- synthetic straight documents -------------------------------------------


_FONTS = (
    cv2.FONT_HERSHEY_SIMPLEX,
    cv2.FONT_HERSHEY_DUPLEX,
    cv2.FONT_HERSHEY_COMPLEX,
    cv2.FONT_HERSHEY_TRIPLEX,
    cv2.FONT_HERSHEY_COMPLEX_SMALL,
)
_LETTERS = "etaoinshrdlcumwfgypbvkjxqz"


def _word(rng) -> str:
    n = int(rng.integers(1, 10))
    word = "".join(rng.choice(list(_LETTERS), size=n))
    if rng.random() < 0.15:
        word = word.capitalize()
    elif rng.random() < 0.05:
        word = str(int(rng.integers(0, 10**n)))
    return word


def _text_line(page, rng, x0, x1, baseline, style, ink):
    font, scale, thickness = style
    space = cv2.getTextSize("n", font, scale, thickness)[0][0]
    x = x0
    while True:
        word = _word(rng)
        (w, _), _ = cv2.getTextSize(word, font, scale, thickness)
        if x + w > x1:
            return
        cv2.putText(page, word, (x, baseline), font, scale, ink, thickness, cv2.LINE_AA)
        x += w + int(space * rng.uniform(0.8, 1.6))


def _paragraph(page, rng, x0, x1, y0, y_end, ink):
    font = int(rng.choice(_FONTS))
    if rng.random() < 0.2:
        font |= cv2.FONT_ITALIC
    x_height = rng.uniform(7, 16) * page.shape[0] / 1200
    scale = x_height / 12.0
    thickness = max(1, int(round(x_height / 7 * rng.uniform(0.7, 1.3))))
    style = (font, scale, thickness)
    pitch = x_height * rng.uniform(2.4, 3.4)
    if rng.random() < 0.3:  # heading
        _text_line(page, rng, x0, x1, int(y0 + 2.5 * pitch), (font, scale * 1.8, thickness + 1), ink)
        y0 += 3 * pitch
    y = y0 + pitch
    lines = int(rng.integers(3, 14))
    for k in range(lines):
        if y + pitch > y_end:
            break
        end = x1 if k < lines - 1 else int(x0 + (x1 - x0) * rng.uniform(0.3, 0.9))
        indent = int(4 * x_height) if k == 0 and rng.random() < 0.5 else 0
        _text_line(page, rng, x0 + indent, end, int(y), style, ink)
        y += pitch
    return int(y + pitch * 0.5)


def _photo(page, rng, x0, x1, y0, y_end, ink):
    """Halftone-like block: smoothed noise, which binarizes into random blobs."""
    h = int(min(page.shape[0] * rng.uniform(0.08, 0.2), y_end - y0))
    w = int((x1 - x0) * rng.uniform(0.35, 1.0))
    if h < 20 or w < 20:
        return y0
    left = x0 + int(rng.integers(0, max(1, x1 - x0 - w)))
    blur = rng.uniform(2, 8)
    noise = cv2.GaussianBlur(rng.normal(0, 1, (h, w)), (0, 0), blur)
    noise = (noise - noise.min()) / max(noise.max() - noise.min(), 1e-9)
    paper = int(page[0, 0])
    page[y0 : y0 + h, left : left + w] = (ink + noise * (paper - ink)).astype(np.uint8)
    return y0 + h + int(page.shape[0] * 0.02)


def _table(page, rng, x0, x1, y0, y_end, ink):
    rows = int(rng.integers(3, 8))
    cols = int(rng.integers(2, 6))
    row_h = int(page.shape[0] * rng.uniform(0.02, 0.035))
    height = min(rows * row_h, y_end - y0)
    if height < 2 * row_h:
        return y0
    lw = max(1, page.shape[0] // 600)
    for r in range(height // row_h + 1):
        yy = y0 + r * row_h
        page[yy : yy + lw, x0:x1] = ink
    for xx in np.linspace(x0, x1 - lw, cols + 1).astype(int):
        page[y0 : y0 + (height // row_h) * row_h + lw, xx : xx + lw] = ink
    return y0 + height + row_h


def _figure(page, rng, x0, x1, y0, y_end, ink):
    h = int(min(page.shape[0] * rng.uniform(0.08, 0.18), y_end - y0))
    if h < 20:
        return y0
    w = int((x1 - x0) * rng.uniform(0.3, 0.7))
    left = x0 + int(rng.integers(0, max(1, x1 - x0 - w)))
    lw = max(1, page.shape[0] // 500)
    page[y0 : y0 + lw, left : left + w] = ink
    page[y0 + h - lw : y0 + h, left : left + w] = ink
    page[y0 : y0 + h, left : left + lw] = ink
    page[y0 : y0 + h, left + w - lw : left + w] = ink
    # a few solid marks inside the frame
    for _ in range(int(rng.integers(1, 4))):
        bh, bw = int(h * rng.uniform(0.1, 0.3)), int(w * rng.uniform(0.1, 0.3))
        by = y0 + int(rng.integers(lw + 1, max(lw + 2, h - bh - lw)))
        bx = left + int(rng.integers(lw + 1, max(lw + 2, w - bw - lw)))
        page[by : by + bh, bx : bx + bw] = ink
    return y0 + h + int(page.shape[0] * 0.02)


def render_document(rng: np.random.Generator) -> np.ndarray:
    """One straight synthetic page: text paragraphs, ruled lines, tables, figures."""
    height = int(rng.integers(800, 2401))
    aspect = rng.uniform(0.62, 1.0) if rng.random() < 0.8 else rng.uniform(1.0, 1.45)
    width = int(np.clip(round(height * aspect), 800, 2400))
    paper = int(rng.integers(225, 256))
    page = np.full((height, width), paper, dtype=np.uint8)
    ink = int(rng.integers(0, 70))

    margin_x = int(width * rng.uniform(0.06, 0.12))
    margin_y = int(height * rng.uniform(0.05, 0.1))
    x0, x1 = margin_x, width - margin_x
    columns = 2 if rng.random() < 0.25 else 1
    gutter = int(width * 0.04)
    col_w = (x1 - x0 - gutter * (columns - 1)) // columns

    if rng.random() < 0.3:
        _sparse_layout(page, rng, x0, x1, margin_y, height - margin_y, ink)
        columns = 0
    for c in range(columns):
        cx0 = x0 + c * (col_w + gutter)
        cx1 = cx0 + col_w
        y = margin_y
        y_end = height - margin_y
        while y < y_end - 20:
            kind = rng.choice(["para", "para", "para", "para", "para", "rule", "table", "figure", "photo"])
            if kind == "para":
                y = _paragraph(page, rng, cx0, cx1, y, y_end, ink)
            elif kind == "rule":
                lw = max(1, height // 600)
                page[y : y + lw, cx0:cx1] = ink
                y += int(height * 0.02)
            elif kind == "table":
                y = _table(page, rng, cx0, cx1, y, y_end, ink)
            elif kind == "figure":
                y = _figure(page, rng, cx0, cx1, y, y_end, ink)
            else:
                y = _photo(page, rng, cx0, cx1, y, y_end, ink)
            y += int(height * rng.uniform(0.005, 0.03))

    # off-axis clutter that real pages carry; the text itself stays straight
    if rng.random() < 0.35:
        _stamp(page, rng, ink)
    if rng.random() < 0.35:
        _signature(page, rng, ink)
    if rng.random() < 0.3:
        _scanner_edge(page, rng)
    return _scan_noise(page, rng)


def _sparse_layout(page, rng, x0, x1, y0, y_end, ink):
    """Letter/form/advert style page: a few short text lines around large graphics."""
    y = y0
    while y < y_end - 20:
        kind = rng.choice(["para", "photo", "photo", "figure", "gap"])
        if kind == "para":
            width = int((x1 - x0) * rng.uniform(0.2, 0.6))
            left = x0 + int(rng.integers(0, x1 - x0 - width))
            stop = min(y_end, y + int(page.shape[0] * rng.uniform(0.03, 0.08)))
            y = _paragraph(page, rng, left, left + width, y, stop, ink)
        elif kind == "photo":
            y = _photo(page, rng, x0, x1, y, y_end, ink)
        elif kind == "figure":
            y = _figure(page, rng, x0, x1, y, y_end, ink)
        y += int(page.shape[0] * rng.uniform(0.03, 0.12))


def _stamp(page, rng, ink):
    """A rotated rubber stamp: framed text pasted at a random angle."""
    h, w = page.shape
    sw = int(w * rng.uniform(0.15, 0.3))
    sh = int(sw * rng.uniform(0.3, 0.6))
    paper = int(page[0, 0])
    patch = np.full((sh, sw), paper, dtype=np.uint8)
    lw = max(2, sh // 20)
    cv2.rectangle(patch, (lw, lw), (sw - lw - 1, sh - lw - 1), ink, lw)
    scale = sh / 60.0
    cv2.putText(patch, _word(rng).upper(), (3 * lw, sh // 2 + int(10 * scale)), cv2.FONT_HERSHEY_DUPLEX, scale, ink, lw, cv2.LINE_AA)
    patch = imageio.rotate(patch, float(rng.uniform(-45, 45)), fill=paper)
    ph, pw = patch.shape
    if ph >= h or pw >= w:
        return
    y = int(rng.integers(0, h - ph))
    x = int(rng.integers(0, w - pw))
    region = page[y : y + ph, x : x + pw]
    np.minimum(region, patch, out=region)


def _signature(page, rng, ink):
    """A handwritten-looking scrawl: a jittered sum of sinusoids along a slanted baseline."""
    h, w = page.shape
    length = w * rng.uniform(0.15, 0.35)
    slope = np.tan(np.deg2rad(rng.uniform(-35, 35)))
    x0 = rng.uniform(0.05, 0.95 - length / w) * w
    y0 = rng.uniform(0.1, 0.9) * h
    t = np.linspace(0, 1, 400)
    amp = h * rng.uniform(0.01, 0.03)
    xs = x0 + t * length + amp * 0.5 * np.sin(2 * np.pi * t * rng.uniform(8, 20))
    ys = y0 + slope * t * length + amp * np.sin(2 * np.pi * t * rng.uniform(5, 15) + rng.uniform(0, 6))
    pts = np.stack([xs, ys], axis=1).round().astype(np.int32)
    cv2.polylines(page, [pts], False, ink, max(1, h // 500), cv2.LINE_AA)


def _scanner_edge(page, rng):
    """Dark band along one side of the scan, slightly out of square with the page."""
    h, w = page.shape
    band = int(min(h, w) * rng.uniform(0.01, 0.04))
    tilt = np.tan(np.deg2rad(rng.uniform(-2.5, 2.5)))
    tone = int(rng.integers(10, 60))
    side = int(rng.integers(0, 4))
    if side < 2:  # left or right
        ys = np.arange(h)
        edge = band + tilt * (ys - h / 2)
        cols = np.arange(w)[None, :]
        mask = cols < edge[:, None] if side == 0 else cols >= (w - edge[:, None])
    else:  # top or bottom
        xs = np.arange(w)
        edge = band + tilt * (xs - w / 2)
        rows = np.arange(h)[:, None]
        mask = rows < edge[None, :] if side == 2 else rows >= (h - edge[None, :])
    page[mask] = tone


def _scan_noise(page, rng):
    """Optical blur, sensor noise and dust specks."""
    out = page.astype(np.float64)
    out = cv2.GaussianBlur(out, (0, 0), rng.uniform(0.4, 1.2))
    out += rng.normal(0, rng.uniform(2, 12), out.shape)
    specks = rng.random(out.shape) < rng.uniform(0, 5e-4)
    out[specks] = rng.uniform(0, 80)
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def synth_corpus(count: int, out_dir: str | Path, seed: int = 0) -> Path:
    """Render ``count`` straight synthetic pages as ``doc_XXXX.png`` into ``out_dir``."""
    if count < 1:
        raise ValidationError(f"count must be >= 1, got {count}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for k in range(count):
        page = render_document(np.random.default_rng([seed, k]))
        imageio.save_png(page, out_dir / f"doc_{k:04d}.png")
    return out_dir


def stripe_document(height: int = 1200, width: int = 900, bars: int = 20) -> np.ndarray:
    """White page with ``bars`` evenly spaced black horizontal bars."""
    page = np.full((height, width), 255, dtype=np.uint8)
    top, bottom = int(height * 0.08), int(height * 0.92)
    pitch = (bottom - top) / bars
    thick = max(1, int(pitch * 0.4))
    left, right = int(width * 0.1), int(width * 0.9)
    for k in range(bars):
        y = int(round(top + k * pitch))
        page[y : y + thick, left:right] = 0
    return page
