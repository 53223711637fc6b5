"""Per-channel usefulness scores and the ranked pruning loop.

A channel is scored on two axes over consecutive frames: spatial
discrimination s = ||f|| / m (L2 norm over the m channel elements) and
temporal stability t = -||f_t - f_{t+1}||^2.  The combined friendliness is
r = (s - 1) * t, averaged over all consecutive frame pairs.  Channels are
ranked by descending average friendliness and pruned worst-first until the
selection quality stops improving.

The formulas are implemented verbatim.  Note that s divides an L2 norm by
m rather than sqrt(m), so s is typically far below 1 for unit-norm
channels and the sign of (s - 1) flips accordingly; rankings are therefore
sensitive to the feature scaling chosen by the provider.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dcf import ChannelSelection, TrainingSet, loss, solve_filter
from .errors import DimensionMismatchError


def spatial_score(fmap, l: int) -> float:
    """s(l) = ||f^(l)||_2 / m with m the channel element count."""
    fmap = np.asarray(fmap, dtype=np.float64)
    chan = fmap[l]
    return float(np.linalg.norm(chan)) / chan.size


def temporal_score(fmap_t, fmap_next, l: int) -> float:
    """t(l) = -||f_t^(l) - f_{t+1}^(l)||^2; zero means perfectly stable."""
    a = np.asarray(fmap_t, dtype=np.float64)[l]
    b = np.asarray(fmap_next, dtype=np.float64)[l]
    if a.shape != b.shape:
        raise DimensionMismatchError(f"channel shapes differ: {a.shape} vs {b.shape}")
    return -float(((a - b) ** 2).sum())


def friendliness(s: float, t: float) -> float:
    """Combined score r = (s - 1) * t."""
    return (s - 1.0) * t


@dataclass(frozen=True)
class FriendlinessReport:
    """Averaged channel scores and the descending-friendliness ranking."""

    spatial: np.ndarray
    temporal: np.ndarray
    friendliness: np.ndarray
    ranking: np.ndarray  # channel indices, best first; ties go to the lower index

    @property
    def d(self) -> int:
        return self.friendliness.size

    def rows(self):
        """(channel, spatial, temporal, friendliness, rank) tuples for CSV export."""
        rank_of = np.empty(self.d, dtype=int)
        rank_of[self.ranking] = np.arange(self.d)
        return [
            (l, float(self.spatial[l]), float(self.temporal[l]), float(self.friendliness[l]), int(rank_of[l]))
            for l in range(self.d)
        ]


def average_friendliness(frames) -> FriendlinessReport:
    """Average per-pair scores over k >= 2 consecutive feature maps.

    The reported spatial and temporal columns are pair averages as well;
    the friendliness column averages the per-pair products (s_i - 1) * t_i,
    which is what the ranking sorts on.
    """
    maps = [np.asarray(f, dtype=np.float64) for f in frames]
    if len(maps) < 2:
        raise ValueError(f"need at least 2 frames, got {len(maps)}")
    shape = maps[0].shape
    if any(f.shape != shape for f in maps):
        raise DimensionMismatchError("all frames must share (d, H, W)")
    d = shape[0]
    k = len(maps)
    s_sum = np.zeros(d)
    t_sum = np.zeros(d)
    r_sum = np.zeros(d)
    for i in range(k - 1):
        cur, nxt = maps[i], maps[i + 1]
        s_i = np.linalg.norm(cur.reshape(d, -1), axis=1) / (shape[1] * shape[2])
        t_i = -((cur - nxt) ** 2).reshape(d, -1).sum(axis=1)
        s_sum += s_i
        t_sum += t_i
        r_sum += (s_i - 1.0) * t_i
    pairs = k - 1
    r_bar = r_sum / pairs
    ranking = np.lexsort((np.arange(d), -r_bar))
    return FriendlinessReport(
        spatial=s_sum / pairs,
        temporal=t_sum / pairs,
        friendliness=r_bar,
        ranking=ranking,
    )


def selection_quality(ts: TrainingSet, sel: ChannelSelection) -> float:
    """Loss used to compare channel selections of different sizes.

    The training loss cannot drive pruning: any filter fit on a subset
    extends by zero planes to a feasible filter for a superset, and the
    lam/c scaling shrinks as c grows, so the re-solved training loss is
    non-increasing in the selection size.  With two or more samples the
    last sample is therefore held out: the filter is fit on the others and
    the loss evaluated on the held-out one, which penalizes channels whose
    content is not reproducible across frames.  With a single sample the
    training loss is returned unchanged.
    """
    if ts.n < 2:
        return loss(ts, solve_filter(ts, sel), sel)
    train = ts.subset(slice(0, ts.n - 1))
    heldout = ts.subset(slice(ts.n - 1, ts.n))
    return loss(heldout, solve_filter(train, sel), sel)


def prune_loop(frames, ts: TrainingSet, max_iters: int, report: FriendlinessReport = None) -> ChannelSelection:
    """Drop channels worst-friendliness-first, keeping the best selection seen.

    Starts from the full selection; each iteration removes the remaining
    channel with the lowest average friendliness, refits, and re-evaluates.
    Up to ``max_iters`` drops are explored (never below one channel) and
    the selection with the minimal observed quality is returned.

    The walk does not stop at the first quality increase: with few frames
    the held-out signal is noisy, and redundant bad channels can mask each
    other so that the quality dips only once the last of them is gone.
    Exploring the whole ranked path and returning the argmin is robust to
    both effects and still returns the full selection when nothing smaller
    evaluates better.
    """
    if max_iters < 0:
        raise ValueError(f"max_iters must be >= 0, got {max_iters}")
    if report is None:
        report = average_friendliness(frames)
    if report.d != ts.d:
        raise DimensionMismatchError(f"report covers {report.d} channels, features have {ts.d}")
    current = ChannelSelection.full(ts.d)
    if max_iters == 0:
        return current
    best = current
    best_quality = selection_quality(ts, current)
    worst_first = report.ranking[::-1]
    drops = 0
    for channel in worst_first:
        if current.count <= 1 or drops >= max_iters:
            break
        current = current.drop(int(channel))
        drops += 1
        quality = selection_quality(ts, current)
        if quality < best_quality:
            best_quality = quality
            best = current
    return best
