"""Multi-channel correlation-filter ridge regression in the frequency domain.

The model correlates each selected feature channel with its own filter
plane and sums the results; training fits all planes jointly by ridge
regression against a desired response.  Writing the objective per
frequency bin decouples it into m independent c-by-c Hermitian systems
(m = bins, c = selected channels), which is what ``solve_filter`` solves.

Losses are reported in spatial-domain units: with an unnormalized forward
DFT a squared spectrum norm is m times the squared spatial norm, so every
frequency-domain sum below carries an explicit 1/m.  The regularizer is
scaled by lam / c, keeping the total penalty invariant to how many
channels are selected.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import (
    DimensionMismatchError,
    EmptySelectionError,
    SingularSystemError,
)
from .fourier import fft_channels, hermitian_symmetrize, idft2


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ChannelSelection:
    """Binary mask over feature channels."""

    mask: np.ndarray

    def __post_init__(self):
        mask = np.asarray(self.mask, dtype=bool)
        if mask.ndim != 1 or mask.size < 1:
            raise DimensionMismatchError(f"selection mask must be 1-D and nonempty, got shape {mask.shape}")
        object.__setattr__(self, "mask", mask)

    @classmethod
    def full(cls, d: int) -> "ChannelSelection":
        return cls(np.ones(d, dtype=bool))

    @classmethod
    def from_indices(cls, indices, d: int) -> "ChannelSelection":
        mask = np.zeros(d, dtype=bool)
        mask[list(indices)] = True
        return cls(mask)

    @property
    def d(self) -> int:
        return int(self.mask.size)

    @property
    def count(self) -> int:
        return int(self.mask.sum())

    @property
    def indices(self) -> np.ndarray:
        return np.flatnonzero(self.mask)

    def key(self) -> tuple:
        return tuple(self.indices.tolist())

    def drop(self, channel: int) -> "ChannelSelection":
        mask = self.mask.copy()
        mask[channel] = False
        return ChannelSelection(mask)

    def swap(self, out_channel: int, in_channel: int) -> "ChannelSelection":
        mask = self.mask.copy()
        mask[out_channel] = False
        mask[in_channel] = True
        return ChannelSelection(mask)

    def __eq__(self, other):
        if not isinstance(other, ChannelSelection):
            return NotImplemented
        return self.mask.shape == other.mask.shape and bool(np.all(self.mask == other.mask))

    def __hash__(self):
        return hash((self.d, self.key()))


@dataclass(frozen=True, eq=False)
class FreqFilter:
    """Frequency-domain filter planes for an ascending set of channels."""

    planes: np.ndarray  # (c, H, W) complex128
    channel_indices: tuple

    def __post_init__(self):
        planes = np.asarray(self.planes, dtype=np.complex128)
        idx = tuple(int(i) for i in self.channel_indices)
        if planes.ndim != 3:
            raise DimensionMismatchError(f"filter planes must be (c, H, W), got shape {planes.shape}")
        if len(idx) != planes.shape[0]:
            raise DimensionMismatchError(
                f"{len(idx)} channel indices for {planes.shape[0]} filter planes"
            )
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ValueError(f"channel indices must be strictly increasing, got {idx}")
        object.__setattr__(self, "planes", planes)
        object.__setattr__(self, "channel_indices", idx)

    @property
    def count(self) -> int:
        return self.planes.shape[0]

    @property
    def shape(self) -> tuple:
        return self.planes.shape[1:]

    def spatial(self) -> np.ndarray:
        """Inverse-transform every plane; real for filters fit on real data."""
        return np.stack([idft2(p) for p in self.planes])

    def gamma(self, d: int) -> np.ndarray:
        """Per-channel squared plane norms on a length-d axis, 0 where unsolved."""
        g = np.zeros(d)
        for j, l in enumerate(self.channel_indices):
            g[l] = float(np.vdot(self.planes[j], self.planes[j]).real)
        return g

    def padded(self, d: int) -> np.ndarray:
        """(d, H, W) plane stack with zeros for channels without a plane."""
        h, w = self.shape
        full = np.zeros((d, h, w), dtype=np.complex128)
        full[list(self.channel_indices)] = self.planes
        return full


@dataclass(eq=False)
class TrainingSet:
    """Weighted samples, one shared label, and the ridge weight."""

    samples: np.ndarray  # (n, d, H, W) float64
    label: np.ndarray  # (H, W) float64
    weights: np.ndarray = None
    lam: float = 1e-2

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        self.label = np.asarray(self.label, dtype=np.float64)
        if self.samples.ndim != 4:
            raise DimensionMismatchError(f"samples must be (n, d, H, W), got shape {self.samples.shape}")
        if self.label.shape != self.samples.shape[2:]:
            raise DimensionMismatchError(
                f"label shape {self.label.shape} does not match sample planes {self.samples.shape[2:]}"
            )
        if self.weights is None:
            self.weights = np.ones(self.samples.shape[0])
        else:
            self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.shape != (self.samples.shape[0],):
            raise DimensionMismatchError(
                f"need one weight per sample, got {self.weights.shape} for n={self.samples.shape[0]}"
            )
        if np.any(self.weights <= 0):
            raise ValueError("sample weights must be positive")
        if self.lam < 0:
            raise ValueError(f"regularizer must be nonnegative, got {self.lam}")

    @property
    def n(self) -> int:
        return self.samples.shape[0]

    @property
    def d(self) -> int:
        return self.samples.shape[1]

    @property
    def plane_shape(self) -> tuple:
        return self.samples.shape[2:]

    @property
    def m(self) -> int:
        h, w = self.plane_shape
        return h * w

    @cached_property
    def spectra(self) -> np.ndarray:
        """(n, d, H, W) per-channel sample spectra, computed once."""
        return np.fft.fft2(self.samples, axes=(-2, -1))

    @cached_property
    def label_spectrum(self) -> np.ndarray:
        return np.fft.fft2(self.label)

    def subset(self, index) -> "TrainingSet":
        """New set over samples[index]; spectra are recomputed lazily."""
        idx = np.atleast_1d(np.arange(self.n)[index])
        return TrainingSet(
            samples=self.samples[idx],
            label=self.label,
            weights=self.weights[idx],
            lam=self.lam,
        )


# ---------------------------------------------------------------------------
# per-bin normal equations
# ---------------------------------------------------------------------------


def _cho_solve_batched(chol, rhs):
    """Solve L L^H x = rhs for stacked lower-triangular factors.

    chol: (m, c, c), rhs: (m, c).  Substitution runs over the (small) c
    axis while staying vectorized across bins.
    """
    m, c = rhs.shape
    z = np.empty_like(rhs)
    for j in range(c):
        acc = rhs[:, j].copy()
        for p in range(j):
            acc -= chol[:, j, p] * z[:, p]
        z[:, j] = acc / chol[:, j, j]
    x = np.empty_like(rhs)
    for j in range(c - 1, -1, -1):
        acc = z[:, j].copy()
        for p in range(j + 1, c):
            acc -= np.conj(chol[:, p, j]) * x[:, p]
        x[:, j] = acc / np.conj(chol[:, j, j])
    return x


def solve_bins(gram, rhs, ridge, plane_shape=None):
    """Solve (ridge*I + gram[k]) x[k] = rhs[k] for every bin k.

    gram: (m, c, c) Hermitian PSD stacks, rhs: (m, c).  With a positive
    ridge the systems are Hermitian positive definite and a Cholesky
    factorization is used; with ridge == 0 a pivoted solve runs instead and
    a singular bin raises SingularSystemError naming the bin.
    """
    m, c = rhs.shape
    a = gram.copy()
    a[:, np.arange(c), np.arange(c)] += ridge
    if ridge > 0:
        try:
            chol = np.linalg.cholesky(a)
        except np.linalg.LinAlgError:
            return np.linalg.solve(a, rhs[..., None])[..., 0]
        return _cho_solve_batched(chol, rhs)
    try:
        return np.linalg.solve(a, rhs[..., None])[..., 0]
    except np.linalg.LinAlgError:
        ranks = np.linalg.matrix_rank(a)
        bad = int(np.argmax(ranks < c))
        if plane_shape is not None:
            pos = np.unravel_index(bad, plane_shape)
        else:
            pos = (bad, 0)
        raise SingularSystemError(bad, pos) from None


def _selected_spectra(ts: TrainingSet, sel: ChannelSelection):
    if sel.d != ts.d:
        raise DimensionMismatchError(f"selection over {sel.d} channels, features have {ts.d}")
    if sel.count < 1:
        raise EmptySelectionError("at least one channel must be selected")
    return ts.spectra[:, sel.indices]


def solve_filter(ts: TrainingSet, sel: ChannelSelection) -> FreqFilter:
    """Fit the selected-channel filter minimizing the weighted ridge loss.

    Per bin, with f the c-vector of selected sample spectra and y the label
    spectrum, the conjugated filter g solves

        (lam/c * I + sum_i w_i conj(f_i) f_i^T) g = sum_i w_i conj(f_i) y

    and the filter plane values are conj(g).  For real data the result is
    conjugate symmetric, so the spatial filter is real.
    """
    h, w = ts.plane_shape
    c = sel.count
    fsel = _selected_spectra(ts, sel).reshape(ts.n, c, ts.m)
    y = ts.label_spectrum.reshape(ts.m)
    ridge = ts.lam / c
    if ts.n == 1 and ridge > 0:
        # Rank-one Gram: (ridge*I + w conj(f) f^T) conj(f) = (ridge + w ||f||^2) conj(f),
        # so the solution is a per-bin rescaling of the conjugated features.
        f0 = fsel[0]
        w0 = ts.weights[0]
        denom = ridge + w0 * (np.abs(f0) ** 2).sum(axis=0)
        g = (w0 * f0.conj() * y[None]) / denom[None]
        planes = hermitian_symmetrize(g.conj().reshape(c, h, w))
        return FreqFilter(planes=planes, channel_indices=tuple(int(i) for i in sel.indices))
    gram = np.einsum("i,ipk,iqk->kpq", ts.weights, fsel.conj(), fsel, optimize=True)
    rhs = np.einsum("i,ipk,k->kp", ts.weights, fsel.conj(), y, optimize=True)
    g = solve_bins(gram, rhs, ts.lam / c, plane_shape=(h, w))
    planes = hermitian_symmetrize(g.conj().T.reshape(c, h, w))
    return FreqFilter(planes=planes, channel_indices=tuple(int(i) for i in sel.indices))


# ---------------------------------------------------------------------------
# loss, response, localization
# ---------------------------------------------------------------------------


def weighted_residual_energy(pred_spectra, label_spectrum, weights, m):
    """(1/m) * sum_i w_i || pred_i - label ||^2 over spectra stacks."""
    resid = pred_spectra - label_spectrum[None]
    per_sample = np.abs(resid).reshape(resid.shape[0], -1)
    return float(weights @ (per_sample**2).sum(axis=1)) / m


def loss(ts: TrainingSet, flt: FreqFilter, sel: ChannelSelection) -> float:
    """Ridge loss of a filter under a selection, in spatial-domain units.

    Selected channels without a filter plane contribute zero; the filter
    may carry planes for more channels than are selected.
    """
    if flt.shape != ts.plane_shape:
        raise DimensionMismatchError(f"filter planes {flt.shape} vs samples {ts.plane_shape}")
    idx = sel.indices
    c = sel.count
    if c < 1:
        raise EmptySelectionError("loss needs at least one selected channel")
    if sel.d != ts.d:
        raise DimensionMismatchError(f"selection over {sel.d} channels, features have {ts.d}")
    hsel = flt.padded(ts.d)[idx]
    products = ts.spectra[:, idx] * hsel.conj()[None]
    pred = products.sum(axis=1)
    data = weighted_residual_energy(pred, ts.label_spectrum, ts.weights, ts.m)
    gamma_sel = flt.gamma(ts.d)[idx]
    reg = (ts.lam / c) * float(gamma_sel.sum()) / ts.m
    return data + reg


def response(fmap, flt: FreqFilter, sel: ChannelSelection = None) -> np.ndarray:
    """Correlation response of a feature map under the filter.

    Only the filter's channels are transformed.  If a selection is given it
    must cover the filter's channels.
    """
    fmap = np.asarray(fmap, dtype=np.float64)
    if fmap.ndim != 3:
        raise DimensionMismatchError(f"expected (d, H, W) features, got shape {fmap.shape}")
    if fmap.shape[1:] != flt.shape:
        raise DimensionMismatchError(f"feature planes {fmap.shape[1:]} vs filter {flt.shape}")
    idx = list(flt.channel_indices)
    if max(idx) >= fmap.shape[0]:
        raise DimensionMismatchError(
            f"filter references channel {max(idx)} but features have {fmap.shape[0]}"
        )
    if sel is not None and not all(sel.mask[l] for l in idx):
        raise ValueError("filter uses channels outside the given selection")
    spectra = fft_channels(fmap[idx])
    return idft2((spectra * flt.planes.conj()).sum(axis=0))


def locate(resp) -> tuple:
    """Wrap-around offset (dy, dx) of the response peak.

    Offsets land in (-H/2, H/2] x (-W/2, W/2]; ties resolve to the smallest
    row, then smallest column.
    """
    resp = np.asarray(resp)
    if resp.ndim != 2 or resp.size == 0:
        raise DimensionMismatchError(f"response must be a nonempty 2-D map, got shape {resp.shape}")
    h, w = resp.shape
    iy, ix = np.unravel_index(int(np.argmax(resp)), resp.shape)
    dy = iy - h if iy > h // 2 else iy
    dx = ix - w if ix > w // 2 else ix
    return int(dy), int(dx)
