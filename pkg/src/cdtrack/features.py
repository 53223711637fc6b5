"""Patch extraction, multi-channel feature providers, and file formats.

Providers turn an image patch into a (d, H, W) feature stack:

* ``grayscale``  - 1 luminance channel
* ``color3``     - 3 color channels (gray inputs are replicated)
* ``gradhist``   - ``bins`` orientation-histogram channels, cell-pooled
* ``file``       - externally computed features loaded per frame from the
                   MCFD container (see ``save_feature_file``)

After the provider runs, channels are optionally multiplied by a 2-D Hann
window and then shifted to zero mean and scaled to unit L2 norm.  A
feature spec may also append temporally inconsistent Gaussian noise
channels (used by the synthetic benchmark); those are emitted raw, with no
windowing or normalization, so their amplitude stays exactly sigma-scaled.
"""

from __future__ import annotations

import hashlib
import re
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import DimensionMismatchError

MCFD_MAGIC = b"MCFD"
MCFD_VERSION = 1

_LUMA = np.array([0.299, 0.587, 0.114])


class FeatureFileError(ValueError):
    """Malformed MCFD feature file."""


class BadMagicError(FeatureFileError):
    pass


class BadVersionError(FeatureFileError):
    pass


class TruncatedFileError(FeatureFileError):
    pass


class NonFiniteDataError(FeatureFileError):
    pass


@dataclass(frozen=True)
class Patch:
    """Image window resampled to a fixed size.

    ``pixels`` is (H, W) or (H, W, 3) float64 in [0, 1]; ``source_box`` is
    the (x, y, w, h) box the window was extracted around, before padding.
    """

    pixels: np.ndarray
    source_box: tuple
    padding_factor: float
    frame_index: int = 0


@dataclass(frozen=True)
class FeatureSpec:
    """Provider choice plus the shared post-processing switches.

    ``normalize=None`` resolves to True for hand-crafted providers and
    False for file-loaded features, whose external scaling is preserved.
    """

    provider: str = "grayscale"
    bins: int = 8
    cell_size: int = 1
    window: bool = True
    normalize: bool | None = None
    path_template: str = ""
    noise_channels: int = 0
    noise_sigma: float = 0.0
    noise_seed: int = 0

    def __post_init__(self):
        if self.provider not in ("grayscale", "color3", "gradhist", "file"):
            raise ValueError(f"unknown provider {self.provider!r}")
        if self.provider == "gradhist" and self.bins < 2:
            raise ValueError(f"gradhist needs at least 2 bins, got {self.bins}")
        if self.provider == "file" and not self.path_template:
            raise ValueError("file provider needs a path_template")
        if self.cell_size < 1:
            raise ValueError(f"cell_size must be positive, got {self.cell_size}")
        if self.noise_channels < 0 or self.noise_sigma < 0:
            raise ValueError("noise channel count and sigma must be nonnegative")

    @property
    def resolved_normalize(self) -> bool:
        if self.normalize is None:
            return self.provider != "file"
        return self.normalize


# ---------------------------------------------------------------------------
# patch extraction
# ---------------------------------------------------------------------------


def _bilinear(frame, ys, xs):
    h, w = frame.shape[:2]
    ys = np.clip(ys, 0.0, h - 1.0)
    xs = np.clip(xs, 0.0, w - 1.0)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    wy = (ys - y0)[..., None] if frame.ndim == 3 else ys - y0
    wx = (xs - x0)[..., None] if frame.ndim == 3 else xs - x0
    top = frame[y0[:, None], x0[None, :]] * (1 - wx[None, :]) + frame[y0[:, None], x1[None, :]] * wx[None, :]
    bot = frame[y1[:, None], x0[None, :]] * (1 - wx[None, :]) + frame[y1[:, None], x1[None, :]] * wx[None, :]
    return top * (1 - wy[:, None]) + bot * wy[:, None]


def extract_patch(frame, box, padding_factor: float = 2.0, out_size=(64, 64), frame_index: int = 0) -> Patch:
    """Crop the padded box and bilinearly resample it to ``out_size``.

    The sampled region is the box scaled by ``padding_factor`` about its
    center; coordinates outside the frame replicate the nearest edge pixel.
    """
    frame = np.asarray(frame, dtype=np.float64)
    x, y, w, h = (float(v) for v in box)
    if w <= 0 or h <= 0:
        raise ValueError(f"degenerate box {box}")
    if padding_factor < 1.0:
        raise ValueError(f"padding_factor must be >= 1, got {padding_factor}")
    out_h, out_w = int(out_size[0]), int(out_size[1])
    if out_h < 1 or out_w < 1:
        raise ValueError(f"output size must be positive, got {out_size}")
    cx, cy = x + w / 2.0, y + h / 2.0
    region_w, region_h = w * padding_factor, h * padding_factor
    x0, y0 = cx - region_w / 2.0, cy - region_h / 2.0
    ys = y0 + (np.arange(out_h) + 0.5) * (region_h / out_h) - 0.5
    xs = x0 + (np.arange(out_w) + 0.5) * (region_w / out_w) - 0.5
    pixels = _bilinear(frame, ys, xs)
    return Patch(
        pixels=pixels,
        source_box=(x, y, w, h),
        padding_factor=float(padding_factor),
        frame_index=int(frame_index),
    )


# ---------------------------------------------------------------------------
# providers
# ---------------------------------------------------------------------------


def _luma(pixels):
    if pixels.ndim == 2:
        return pixels
    return pixels @ _LUMA


def _pool_cells(channels, cell_size):
    if cell_size == 1:
        return channels
    d, h, w = channels.shape
    if h % cell_size or w % cell_size:
        raise DimensionMismatchError(
            f"cell_size {cell_size} does not divide channel dims {h}x{w}"
        )
    pooled = channels.reshape(d, h // cell_size, cell_size, w // cell_size, cell_size)
    return pooled.mean(axis=(2, 4))


def _gradhist(pixels, bins, cell_size):
    gray = _luma(pixels)
    gy, gx = np.gradient(gray)
    mag = np.hypot(gy, gx)
    theta = np.mod(np.arctan2(gy, gx), np.pi)
    idx = np.minimum((theta / np.pi * bins).astype(int), bins - 1)
    channels = np.zeros((bins,) + gray.shape)
    for b in range(bins):
        channels[b] = np.where(idx == b, mag, 0.0)
    return _pool_cells(channels, cell_size)


def hann2d(h, w):
    wy = np.hanning(h) if h > 1 else np.ones(1)
    wx = np.hanning(w) if w > 1 else np.ones(1)
    return np.outer(wy, wx)


def _normalize_channels(channels):
    flat = channels.reshape(channels.shape[0], -1)
    centered = flat - flat.mean(axis=1, keepdims=True)
    norms = np.linalg.norm(centered, axis=1, keepdims=True)
    safe = np.where(norms > 1e-12, norms, 1.0)
    out = np.where(norms > 1e-12, centered / safe, 0.0)
    return out.reshape(channels.shape)


def _noise_channels(patch: Patch, spec: FeatureSpec, shape):
    digest = hashlib.blake2b(
        np.ascontiguousarray(patch.pixels).tobytes(), digest_size=8
    ).digest()
    frame_key = int.from_bytes(digest, "little")
    rng = np.random.default_rng([spec.noise_seed, frame_key])
    return rng.normal(0.0, spec.noise_sigma, (spec.noise_channels,) + shape)


def featurize(patch: Patch, spec: FeatureSpec) -> np.ndarray:
    """Run the provider and post-processing; returns (d, H, W) float64."""
    pixels = np.asarray(patch.pixels, dtype=np.float64)
    if spec.provider == "grayscale":
        channels = _pool_cells(_luma(pixels)[None], spec.cell_size)
    elif spec.provider == "color3":
        if pixels.ndim == 2:
            stack = np.repeat(pixels[None], 3, axis=0)
        else:
            stack = np.moveaxis(pixels, -1, 0)
        channels = _pool_cells(stack, spec.cell_size)
    elif spec.provider == "gradhist":
        channels = _gradhist(pixels, spec.bins, spec.cell_size)
    else:
        channels = load_feature_file(spec.path_template.format(frame=patch.frame_index))
    if spec.window:
        channels = channels * hann2d(channels.shape[1], channels.shape[2])[None]
    if spec.resolved_normalize:
        channels = _normalize_channels(channels)
    if spec.noise_channels > 0:
        noise = _noise_channels(patch, spec, channels.shape[1:])
        channels = np.concatenate([channels, noise], axis=0)
    return channels


# ---------------------------------------------------------------------------
# MCFD feature container
# ---------------------------------------------------------------------------


def save_feature_file(path, fmap):
    """Write a (d, H, W) map as little-endian float32 with an MCFD header."""
    fmap = np.asarray(fmap)
    if fmap.ndim != 3:
        raise DimensionMismatchError(f"expected (d, H, W), got shape {fmap.shape}")
    d, h, w = fmap.shape
    payload = np.ascontiguousarray(fmap, dtype="<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(MCFD_MAGIC)
        fh.write(struct.pack("<IIII", MCFD_VERSION, d, h, w))
        fh.write(payload)


def load_feature_file(path) -> np.ndarray:
    """Read an MCFD container back into a (d, H, W) float64 map."""
    data = Path(path).read_bytes()
    if len(data) < 4 or data[:4] != MCFD_MAGIC:
        raise BadMagicError(f"{path}: not an MCFD file")
    if len(data) < 20:
        raise TruncatedFileError(f"{path}: header truncated")
    version, d, h, w = struct.unpack("<IIII", data[4:20])
    if version != MCFD_VERSION:
        raise BadVersionError(f"{path}: version {version}, expected {MCFD_VERSION}")
    expected = 20 + 4 * d * h * w
    if len(data) < expected:
        raise TruncatedFileError(
            f"{path}: payload has {len(data) - 20} bytes, header promises {expected - 20}"
        )
    values = np.frombuffer(data[20:expected], dtype="<f4").astype(np.float64)
    if not np.all(np.isfinite(values)):
        raise NonFiniteDataError(f"{path}: payload contains non-finite values")
    return values.reshape(d, h, w)


# ---------------------------------------------------------------------------
# sequence directories
# ---------------------------------------------------------------------------

_IMG_EXTS = (".png", ".pgm", ".jpg", ".jpeg")


def write_sequence(seq_dir, frames, boxes):
    """Write img/0001.png ... plus a 1-based groundtruth.txt."""
    seq_dir = Path(seq_dir)
    img_dir = seq_dir / "img"
    img_dir.mkdir(parents=True, exist_ok=True)
    if len(frames) != len(boxes):
        raise ValueError(f"{len(frames)} frames but {len(boxes)} boxes")
    for i, frame in enumerate(frames, start=1):
        arr = np.asarray(frame)
        data = np.clip(np.round(arr * 255.0), 0, 255).astype(np.uint8)
        Image.fromarray(data).save(img_dir / f"{i:04d}.png")
    with open(seq_dir / "groundtruth.txt", "w") as fh:
        for x, y, w, h in boxes:
            fh.write(f"{x + 1:g},{y + 1:g},{w:g},{h:g}\n")


def read_sequence(seq_dir):
    """Load frames as float [0, 1] arrays and 0-based ground-truth boxes."""
    seq_dir = Path(seq_dir)
    img_dir = seq_dir / "img"
    paths = sorted(p for p in img_dir.iterdir() if p.suffix.lower() in _IMG_EXTS)
    if not paths:
        raise FileNotFoundError(f"no frames under {img_dir}")
    frames = []
    for p in paths:
        with Image.open(p) as img:
            frames.append(np.asarray(img, dtype=np.float64) / 255.0)
    boxes = read_groundtruth(seq_dir / "groundtruth.txt")
    return frames, boxes


def read_groundtruth(path):
    boxes = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line:
            continue
        parts = [float(v) for v in re.split(r"[,\s]+", line) if v]
        if len(parts) != 4:
            raise ValueError(f"groundtruth line {line!r} is not x,y,w,h")
        x, y, w, h = parts
        boxes.append((x - 1.0, y - 1.0, w, h))
    return boxes
