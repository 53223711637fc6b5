"""Synthetic sequences with exact ground truth and controllable channels.

A seeded random-texture rectangle translates over a contrasting textured
background; boxes are exact by construction, and every pixel value is a
multiple of 1/255 so the PNG round trip is lossless.  The noisy-channel
provider appends per-frame re-seeded Gaussian channels to any base feature
spec, producing channels that are temporally inconsistent on purpose.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .features import FeatureSpec


class MotionBoundsError(ValueError):
    """The commanded motion pushes the object out of the frame."""


@dataclass(frozen=True)
class SynthSpec:
    """Scene geometry, motion, and channel-noise parameters."""

    frames: int = 10
    frame_size: tuple = (96, 96)
    object_size: tuple = (24, 24)
    motion: tuple = ((0.0, 0.0),)  # per-frame (dx, dy); cycled if shorter than frames
    texture_seed: int = 0
    noise_channels: int = 0
    noise_sigma: float = 0.0
    informative_channels: int = 1
    background_amplitude: float = 0.25
    object_low: float = 0.55

    def __post_init__(self):
        if self.frames < 1:
            raise ValueError(f"need at least one frame, got {self.frames}")
        oh, ow = self.object_size
        fh, fw = self.frame_size
        if oh < 1 or ow < 1 or oh > fh - 2 or ow > fw - 2:
            raise ValueError(f"object {self.object_size} does not fit frame {self.frame_size}")
        if self.noise_channels < 0 or self.noise_sigma < 0:
            raise ValueError("noise parameters must be nonnegative")

    def motion_at(self, step: int) -> tuple:
        seq = self.motion
        if seq and isinstance(seq[0], (int, float)):
            seq = (tuple(seq),)
        return tuple(seq[step % len(seq)])


def _quantize(img):
    return np.round(np.clip(img, 0.0, 1.0) * 255.0) / 255.0


def generate_sequence(spec: SynthSpec):
    """Render the sequence; returns (frames, boxes) with integer-exact boxes.

    Object positions are rounded to whole pixels before rendering so the
    reported boxes match the drawn object exactly.  Deterministic given
    ``texture_seed``.
    """
    rng = np.random.default_rng(spec.texture_seed)
    fh, fw = spec.frame_size
    oh, ow = spec.object_size
    background = _quantize(rng.uniform(0.0, spec.background_amplitude, (fh, fw)))
    texture = _quantize(rng.uniform(spec.object_low, 1.0, (oh, ow)))
    x = (fw - ow) / 2.0
    y = (fh - oh) / 2.0
    frames = []
    boxes = []
    for i in range(spec.frames):
        if i > 0:
            dx, dy = spec.motion_at(i - 1)
            x += dx
            y += dy
        xi, yi = int(round(x)), int(round(y))
        if xi < 1 or yi < 1 or xi + ow > fw - 1 or yi + oh > fh - 1:
            raise MotionBoundsError(
                f"frame {i}: object at ({xi}, {yi}) leaves the 1 px safety margin"
            )
        frame = background.copy()
        frame[yi : yi + oh, xi : xi + ow] = texture
        frames.append(frame)
        boxes.append((float(xi), float(yi), float(ow), float(oh)))
    return frames, boxes


def noisy_channel_provider(base: FeatureSpec, spec: SynthSpec) -> FeatureSpec:
    """Base provider plus ``spec.noise_channels`` raw Gaussian channels.

    Noise is re-seeded from each patch's content, so consecutive frames get
    independent draws: the appended channels score poorly on temporal
    stability by construction.  Their per-pair temporal score concentrates
    around -2 * m * sigma^2 for channels with m cells.
    """
    if spec.noise_channels == 0:
        return base
    return replace(
        base,
        noise_channels=spec.noise_channels,
        noise_sigma=spec.noise_sigma,
        noise_seed=spec.texture_seed,
    )
