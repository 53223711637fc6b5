"""Fixed linear channel compression ahead of selection and filtering.

Features with d channels are projected per pixel to q < d channels through
a fixed matrix P (g = P^T f), after which the usual selection pipeline
runs on the projected channels.  P is initialized once from PCA of the
pooled per-pixel feature vectors and is not refined afterwards; the
spatial penalty stays scalar so the per-bin solver applies unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dcf import TrainingSet
from .distill import distill_channels
from .errors import DimensionMismatchError

#: Relative eigenvalue threshold below which a principal direction is
#: considered numerically absent.
RANK_EPS = 1e-10


@dataclass(frozen=True, eq=False)
class Projection:
    """d x q compression matrix with unit-norm columns."""

    matrix: np.ndarray
    rank_deficient: bool = False

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=np.float64)
        if mat.ndim != 2 or mat.shape[1] < 1 or mat.shape[1] >= mat.shape[0]:
            raise DimensionMismatchError(
                f"projection must be d x q with 1 <= q < d, got shape {mat.shape}"
            )
        if not np.all(np.isfinite(mat)):
            raise ValueError("projection matrix contains non-finite values")
        norms = np.linalg.norm(mat, axis=0)
        if np.any(np.abs(norms - 1.0) > 1e-8):
            raise ValueError("projection columns must have unit L2 norm")
        object.__setattr__(self, "matrix", mat)

    @property
    def d(self) -> int:
        return self.matrix.shape[0]

    @property
    def q(self) -> int:
        return self.matrix.shape[1]

    @classmethod
    def identity_prefix(cls, d: int, q: int) -> "Projection":
        """Projection that passes the first q channels through unchanged."""
        return cls(np.eye(d)[:, :q])


def pca_projection(samples, q: int) -> Projection:
    """Top-q principal directions of the pooled per-pixel channel vectors.

    Every pixel of every sample contributes one d-vector; directions come
    from the mean-removed covariance.  If the data rank falls below q the
    remaining columns are an arbitrary orthonormal completion and the
    result is flagged ``rank_deficient``.  Column signs are fixed so the
    entry of largest magnitude is positive.
    """
    maps = [np.asarray(f, dtype=np.float64) for f in samples]
    if len(maps) < 1:
        raise ValueError("need at least one sample")
    d = maps[0].shape[0]
    if not 1 <= q < d:
        raise ValueError(f"need 1 <= q < d, got q={q}, d={d}")
    pooled = np.concatenate([f.reshape(d, -1).T for f in maps], axis=0)
    pooled = pooled - pooled.mean(axis=0, keepdims=True)
    cov = pooled.T @ pooled / max(pooled.shape[0], 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1]
    eigvals = eigvals[order]
    eigvecs = eigvecs[:, order]
    rank = int(np.sum(eigvals > RANK_EPS * max(eigvals[0], 1e-300)))
    cols = eigvecs[:, :q].copy()
    for j in range(q):
        pivot = int(np.argmax(np.abs(cols[:, j])))
        if cols[pivot, j] < 0:
            cols[:, j] = -cols[:, j]
    return Projection(matrix=cols, rank_deficient=rank < q)


def project(fmap, proj: Projection) -> np.ndarray:
    """Per-pixel matrix-vector compression g^(j) = sum_l P[l, j] f^(l)."""
    fmap = np.asarray(fmap, dtype=np.float64)
    if fmap.ndim != 3 or fmap.shape[0] != proj.d:
        raise DimensionMismatchError(
            f"expected ({proj.d}, H, W) features, got shape {fmap.shape}"
        )
    return np.einsum("lj,lhw->jhw", proj.matrix, fmap, optimize=True)


def project_training_set(ts: TrainingSet, proj: Projection) -> TrainingSet:
    """Project every sample of a training set; label and weights carry over."""
    if ts.d != proj.d:
        raise DimensionMismatchError(f"training set has {ts.d} channels, projection expects {proj.d}")
    projected = np.einsum("lj,nlhw->njhw", proj.matrix, ts.samples, optimize=True)
    return TrainingSet(samples=projected, label=ts.label, weights=ts.weights, lam=ts.lam)


def distill_projected(
    ts: TrainingSet,
    proj: Projection,
    seed_frames,
    max_rounds: int = 5,
    prune_max_iters: int = None,
):
    """Run the selection pipeline on projected channels.

    Projects the training samples and the friendliness frames, then seeds,
    prunes, and alternates exactly as the unprojected pipeline does over
    the q projected channels.  With an identity-prefix projection this
    reproduces the plain pipeline on the first q raw channels.

    Returns ``(filter, selection)`` over projected channel indices.
    """
    projected_ts = project_training_set(ts, proj)
    projected_frames = [project(f, proj) for f in seed_frames]
    flt, sel, _trace = distill_channels(
        projected_frames,
        projected_ts,
        max_rounds=max_rounds,
        prune_max_iters=prune_max_iters,
    )
    return flt, sel
