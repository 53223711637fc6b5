"""Online translation tracker with two-frame channel distillation.

Frame 1 fits an all-channel filter from a single sample.  On frame 2 the
tracker first localizes with that filter, then ranks channels by
friendliness over the two history frames, prunes and swap-searches a
selection, restricts its normal-equation accumulators to the surviving
channels, and keeps that channel count for the rest of the sequence.

The model is maintained as per-bin Gram / right-hand-side accumulators
blended with learning rate eta each frame and re-solved, which makes the
filter after n frames identical to a single weighted fit with geometric
sample weights eta * (1 - eta)^(n - i) (and (1 - eta)^(n - 1) for the
first sample).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .dcf import ChannelSelection, FreqFilter, TrainingSet, locate, response, solve_bins
from .distill import distill_channels
from .errors import DimensionMismatchError
from .factorized import Projection, pca_projection, project
from .features import FeatureSpec, extract_patch, featurize
from .fourier import fft_channels, hermitian_symmetrize
from .labels import LabelConfig, gaussian_label


@dataclass(frozen=True)
class TrackerConfig:
    feature_spec: FeatureSpec = field(default_factory=FeatureSpec)
    lam: float = 1e-2
    learning_rate: float = 0.015
    label_sigma: float = 0.1
    max_rounds: int = 5
    projection_dim: int = 0  # 0 disables the projected pipeline
    distill: bool = True
    prune_max_iters: int | None = None
    padding: float = 2.0
    out_size: tuple = (64, 64)

    def __post_init__(self):
        if not 0.0 <= self.learning_rate <= 1.0:
            raise ValueError(f"learning_rate must lie in [0, 1], got {self.learning_rate}")
        if self.lam < 0:
            raise ValueError(f"lam must be nonnegative, got {self.lam}")
        if self.projection_dim < 0:
            raise ValueError(f"projection_dim must be >= 0, got {self.projection_dim}")


class Tracker:
    """Single-target tracker; one instance tracks one sequence."""

    def __init__(self, config: TrackerConfig = None):
        self.config = config or TrackerConfig()
        self.selection: ChannelSelection = None
        self.filter: FreqFilter = None
        self.gram: np.ndarray = None  # (m, c, c) Hermitian accumulators
        self.rhs: np.ndarray = None  # (m, c)
        self.box: tuple = None
        self.frame_index: int = 0
        self.frame_shape: tuple = None
        self.projection: Projection = None
        self.history: list = []  # most recent feature maps, capacity 2
        self.label: np.ndarray = None
        self.label_spectrum: np.ndarray = None
        self.last_loss_trace: list = []

    # -- feature pipeline ---------------------------------------------------

    def _raw_features(self, frame, box):
        patch = extract_patch(
            frame,
            box,
            padding_factor=self.config.padding,
            out_size=self.config.out_size,
            frame_index=self.frame_index,
        )
        return featurize(patch, self.config.feature_spec)

    def _features(self, frame, box):
        fmap = self._raw_features(frame, box)
        if self.projection is not None:
            fmap = project(fmap, self.projection)
        return fmap

    def _grid_to_pixels(self, dy, dx):
        _, _, w, h = self.box
        grid_h, grid_w = self.label.shape
        scale_y = h * self.config.padding / grid_h
        scale_x = w * self.config.padding / grid_w
        return dy * scale_y, dx * scale_x

    def _clamp_box(self, x, y, w, h):
        fh, fw = self.frame_shape
        x = min(max(x, 0.0), max(fw - w, 0.0))
        y = min(max(y, 0.0), max(fh - h, 0.0))
        return (x, y, w, h)

    # -- model maintenance ----------------------------------------------------

    def _sample_equations(self, fmap):
        c = self.selection.count
        spectra = fft_channels(fmap[self.selection.indices]).reshape(c, -1)
        gram = np.einsum("pk,qk->kpq", spectra.conj(), spectra, optimize=True)
        rhs = np.einsum("pk,k->kp", spectra.conj(), self.label_spectrum.reshape(-1), optimize=True)
        return gram, rhs

    def _solve_model(self):
        c = self.selection.count
        g = solve_bins(self.gram, self.rhs, self.config.lam / c, plane_shape=self.label.shape)
        planes = hermitian_symmetrize(g.conj().T.reshape(c, *self.label.shape))
        self.filter = FreqFilter(planes=planes, channel_indices=tuple(int(i) for i in self.selection.indices))

    def _restrict_accumulators(self, sel: ChannelSelection):
        old = self.selection.indices
        positions = np.searchsorted(old, sel.indices)
        if not np.array_equal(old[positions], sel.indices):
            raise DimensionMismatchError("new selection is not a subset of the accumulated channels")
        self.gram = np.ascontiguousarray(self.gram[:, positions[:, None], positions[None, :]])
        self.rhs = np.ascontiguousarray(self.rhs[:, positions])
        self.selection = sel

    # -- public protocol ------------------------------------------------------

    def init(self, frame, box):
        """Fit the frame-1 model over all channels at the given box."""
        frame = np.asarray(frame, dtype=np.float64)
        x, y, w, h = (float(v) for v in box)
        if w <= 0 or h <= 0:
            raise ValueError(f"degenerate box {box}")
        self.frame_shape = frame.shape[:2]
        self.frame_index = 1
        self.box = self._clamp_box(x, y, w, h)

        raw = self._raw_features(frame, self.box)
        if self.config.projection_dim > 0:
            self.projection = pca_projection([raw], self.config.projection_dim)
            fmap = project(raw, self.projection)
        else:
            fmap = raw
        d, grid_h, grid_w = fmap.shape
        cfg = LabelConfig(height=grid_h, width=grid_w, sigma_factor=self.config.label_sigma)
        self.label = gaussian_label(
            cfg, grid_h / self.config.padding, grid_w / self.config.padding
        )
        self.label_spectrum = np.fft.fft2(self.label)

        self.selection = ChannelSelection.full(d)
        self.gram, self.rhs = self._sample_equations(fmap)
        self._solve_model()
        self.history = [fmap]
        return self

    def step(self, frame):
        """Localize in the next frame, then distill (frame 2) and update."""
        if self.frame_index < 1:
            raise RuntimeError("tracker is not initialized")
        frame = np.asarray(frame, dtype=np.float64)
        if frame.shape[:2] != self.frame_shape:
            raise DimensionMismatchError(
                f"frame shape {frame.shape[:2]} differs from init {self.frame_shape}"
            )
        self.frame_index += 1

        f_loc = self._features(frame, self.box)
        resp = response(f_loc, self.filter, self.selection)
        dy, dx = locate(resp)
        dy_px, dx_px = self._grid_to_pixels(dy, dx)
        x, y, w, h = self.box
        self.box = self._clamp_box(x + dx_px, y + dy_px, w, h)

        f_train = self._features(frame, self.box)
        self.history.append(f_train)
        if len(self.history) > 2:
            self.history.pop(0)

        if self.frame_index == 2 and self.config.distill and self.selection.d > 1:
            ts = TrainingSet(
                samples=np.stack(self.history),
                label=self.label,
                lam=self.config.lam,
            )
            _flt, sel, trace = distill_channels(
                self.history,
                ts,
                max_rounds=self.config.max_rounds,
                prune_max_iters=self.config.prune_max_iters,
            )
            self.last_loss_trace = trace
            if sel != self.selection:
                self._restrict_accumulators(sel)

        eta = self.config.learning_rate
        if eta > 0:
            gram_new, rhs_new = self._sample_equations(f_train)
            self.gram = (1.0 - eta) * self.gram + eta * gram_new
            self.rhs = (1.0 - eta) * self.rhs + eta * rhs_new
        self._solve_model()
        return self.box, resp


def run_sequence(frames, init_box, config: TrackerConfig = None):
    """Track a whole sequence; returns per-frame records for serialization.

    Record fields: ``frame`` (1-based), ``box``, ``peak`` (response maximum,
    None for the init frame), ``time_s``, and ``channels`` used for that
    frame's localization.
    """
    tracker = Tracker(config)
    records = []
    t0 = time.perf_counter()
    tracker.init(frames[0], init_box)
    records.append(
        {
            "frame": 1,
            "box": [float(v) for v in tracker.box],
            "peak": None,
            "time_s": time.perf_counter() - t0,
            "channels": tracker.selection.count,
        }
    )
    for i, frame in enumerate(frames[1:], start=2):
        channels_used = tracker.selection.count
        t0 = time.perf_counter()
        box, resp = tracker.step(frame)
        elapsed = time.perf_counter() - t0
        records.append(
            {
                "frame": i,
                "box": [float(v) for v in box],
                "peak": float(resp.max()),
                "time_s": elapsed,
                "channels": channels_used,
            }
        )
    return records
