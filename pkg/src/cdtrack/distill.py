"""Alternating channel-selection search at fixed filter, then refit.

With the filter held fixed, the loss of any candidate selection depends on
the data only through the per-channel filtered spectra A_il = f_i^(l)
spectrum times the conjugated filter plane, the label spectra, and the
per-channel filter energies gamma_l.  ``SelectionSearchState`` caches all
three so candidate selections are scored without re-running transforms.

The swap search walks the ranked seed channels from worst to best; for
each it scores every one-for-one exchange with a channel outside the
current selection and commits the best exchange only if it is strictly
below the current loss.  Selection cardinality never changes.  Channels
the cached filter was never solved for carry zero planes and zero gamma;
swapping one in is justified by the data term alone and corrected at the
next refit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dcf import (
    ChannelSelection,
    FreqFilter,
    TrainingSet,
    loss,
    solve_filter,
    weighted_residual_energy,
)
from .errors import DimensionMismatchError, EmptySelectionError

#: Absolute loss-change threshold below which alternation stops.
CONVERGENCE_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class SelectionSearchState:
    """Cached quantities for scoring selections under one fixed filter."""

    products: np.ndarray  # (n, d, H, W) complex: per-channel filtered spectra
    label_spectrum: np.ndarray  # (H, W) complex
    gamma: np.ndarray  # (d,) squared filter-plane norms, 0 where unsolved
    weights: np.ndarray  # (n,)
    lam: float
    selection: ChannelSelection  # selection the state was built around
    ranking: tuple  # all d channels, best first

    @property
    def d(self) -> int:
        return self.products.shape[1]

    @property
    def m(self) -> int:
        return self.products.shape[2] * self.products.shape[3]


def build_search_state(
    ts: TrainingSet,
    flt: FreqFilter,
    selection: ChannelSelection,
    ranking=None,
) -> SelectionSearchState:
    """Assemble caches from a training set and a fixed filter.

    ``ranking`` orders all d channels best-first for the swap scan; when
    omitted, ascending channel index is used.
    """
    if flt.shape != ts.plane_shape:
        raise DimensionMismatchError(f"filter planes {flt.shape} vs samples {ts.plane_shape}")
    if selection.d != ts.d:
        raise DimensionMismatchError(f"selection over {selection.d} channels, features have {ts.d}")
    padded = flt.padded(ts.d)
    products = ts.spectra * padded.conj()[None]
    if ranking is None:
        ranking = tuple(range(ts.d))
    else:
        ranking = tuple(int(i) for i in ranking)
        if sorted(ranking) != list(range(ts.d)):
            raise ValueError("ranking must be a permutation of all channel indices")
    return SelectionSearchState(
        products=products,
        label_spectrum=ts.label_spectrum,
        gamma=flt.gamma(ts.d),
        weights=ts.weights,
        lam=ts.lam,
        selection=selection,
        ranking=ranking,
    )


def selection_loss(state: SelectionSearchState, sel: ChannelSelection) -> float:
    """Loss of a selection under the state's fixed filter.

    Agrees with ``dcf.loss`` for the same (filter, selection) pair; the
    cache only reorders the computation.
    """
    if sel.d != state.d:
        raise DimensionMismatchError(f"selection over {sel.d} channels, state has {state.d}")
    c = sel.count
    if c < 1:
        raise EmptySelectionError("selection loss needs at least one selected channel")
    idx = sel.indices
    pred = state.products[:, idx].sum(axis=1)
    data = weighted_residual_energy(pred, state.label_spectrum, state.weights, state.m)
    reg = (state.lam / c) * float(state.gamma[idx].sum()) / state.m
    return data + reg


def swap_search(state: SelectionSearchState, seed: ChannelSelection = None) -> ChannelSelection:
    """One backward pass of best-exchange search over the ranked seed.

    Returns a selection whose loss under the fixed filter is less than or
    equal to the seed's, with the same cardinality.  Deterministic: the
    scan follows the ranking, candidates are tried in ascending channel
    order, and only strict improvements commit.
    """
    if seed is None:
        seed = state.selection
    if seed.count < 1:
        raise EmptySelectionError("swap search needs a nonempty seed")
    current = seed
    current_loss = selection_loss(state, current)
    c = current.count
    ranked_seed = [l for l in state.ranking if seed.mask[l]]
    lam_over_c = state.lam / c
    for out_channel in reversed(ranked_seed):
        if not current.mask[out_channel]:
            continue
        complement = np.flatnonzero(~current.mask)
        if complement.size == 0:
            break
        # Residual with out_channel removed; adding one complement channel
        # at a time completes each candidate prediction.
        pred_base = state.products[:, current.indices].sum(axis=1)
        pred_base -= state.products[:, out_channel]
        base_resid = pred_base - state.label_spectrum[None]
        cand = base_resid[None] + state.products[:, complement].transpose(1, 0, 2, 3)
        energies = np.einsum(
            "cnhw,n->c", np.abs(cand) ** 2, state.weights, optimize=True
        ) / state.m
        regs = (
            lam_over_c
            * (state.gamma[current.indices].sum() - state.gamma[out_channel] + state.gamma[complement])
            / state.m
        )
        cand_losses = energies + regs
        best_j = int(np.argmin(cand_losses))
        in_channel = int(complement[best_j])
        candidate = current.swap(int(out_channel), in_channel)
        candidate_loss = selection_loss(state, candidate)
        if candidate_loss < current_loss:
            current = candidate
            current_loss = candidate_loss
    return current


def alternate(
    ts: TrainingSet,
    seed: ChannelSelection,
    max_rounds: int = 5,
    tol: float = CONVERGENCE_TOL,
    ranking=None,
    cache_filter: FreqFilter = None,
):
    """Alternate filter refits with swap searches from a seed selection.

    Each round solves the filter, rebuilds the caches, and runs one swap
    pass; iteration stops at ``max_rounds`` or when the loss changes by
    less than ``tol``.  Round one fits the filter at the seed selection
    unless ``cache_filter`` supplies one; passing a filter with support
    beyond the seed (for example one solved over all channels) gives every
    channel a live cache entry, which is what makes first-round swaps
    informative.

    Returns ``(filter, selection, loss_trace)`` where the trace starts at
    the seed's loss and is non-increasing, and the filter is solved at the
    returned selection.
    """
    if max_rounds < 1:
        raise ValueError(f"max_rounds must be >= 1, got {max_rounds}")
    if seed.count < 1:
        raise EmptySelectionError("alternation needs a nonempty seed")
    sel = seed
    trace = []
    solved: dict[tuple, FreqFilter] = {}
    for rnd in range(1, max_rounds + 1):
        if rnd == 1 and cache_filter is not None:
            flt = cache_filter
        else:
            flt = solved.get(sel.key())
            if flt is None:
                flt = solve_filter(ts, sel)
                solved[sel.key()] = flt
        state = build_search_state(ts, flt, sel, ranking=ranking)
        if rnd == 1:
            trace.append(selection_loss(state, sel))
        new_sel = swap_search(state, sel)
        trace.append(selection_loss(state, new_sel))
        sel = new_sel
        if abs(trace[-1] - trace[-2]) < tol:
            break
    flt = solved.get(sel.key())
    if flt is None:
        flt = solve_filter(ts, sel)
    return flt, sel, trace


def distill_channels(
    frames,
    ts: TrainingSet,
    max_rounds: int = 5,
    prune_max_iters: int = None,
):
    """Full selection pipeline: friendliness seed, prune, alternate.

    ``frames`` are the consecutive feature maps used for friendliness
    scoring; ``ts`` is the training set the filter is fit on.  Alternation
    starts from the filter solved at the pruned seed: with the few samples
    available online, a filter solved over all channels interpolates the
    data through whatever channels carry the most energy, and selections
    scored against it rank noisy channels as indispensable.  Against the
    seed-solved filter a swap commits only when dropping a seed channel's
    own contribution lowers the loss, so the pass cannot degrade the seed.

    Returns ``(filter, selection, loss_trace)``.
    """
    from .friendliness import average_friendliness, prune_loop

    report = average_friendliness(frames)
    if prune_max_iters is None:
        prune_max_iters = ts.d - 1
    seed = prune_loop(frames, ts, prune_max_iters, report=report)
    return alternate(
        ts,
        seed,
        max_rounds=max_rounds,
        ranking=report.ranking,
    )
