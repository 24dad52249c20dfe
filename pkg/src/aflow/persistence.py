"""Persistent-link extraction: view filters, presence smoothing, homophily.

A directed link is persistent when, after view-based filtering and a 7-day
majority smoothing of its daily presence vector, it is present on every day
of the observation window.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Mapping

import numpy as np

from .data_model import DataFormatError, Dataset, DynamicNetwork, VideoMeta
from .graph_analysis import build_graph

TARGET_MIN_MEAN_VIEWS = 100.0
SOURCE_VIEW_FRACTION = 0.01
HALF_WINDOW = 3


@dataclass(frozen=True)
class ViewFilters:
    """Pre-computed view means plus the two eligibility predicates.

    A target is eligible when its mean daily views over the full window reach
    ``target_min``.  A (source, target) pair is eligible when the source mean
    reaches ``source_frac`` of the target mean.  Both thresholds are
    inclusive.
    """

    mean_views: Mapping[str, float]
    target_min: float = TARGET_MIN_MEAN_VIEWS
    source_frac: float = SOURCE_VIEW_FRACTION

    def target_eligible(self, target: str) -> bool:
        return self.mean_views[target] >= self.target_min

    def pair_eligible(self, source: str, target: str) -> bool:
        return self.mean_views[source] >= self.source_frac * self.mean_views[target]


def apply_view_filters(
    dataset: Dataset,
    target_min: float = TARGET_MIN_MEAN_VIEWS,
    source_frac: float = SOURCE_VIEW_FRACTION,
) -> ViewFilters:
    """Compute per-video mean daily views over the observation window."""
    means = {
        vid: float(dataset.aligned_views(vid).mean()) for vid in sorted(dataset.corpus)
    }
    return ViewFilters(means, target_min, source_frac)


def _smooth_rows(bits: np.ndarray, half_window: int = HALF_WINDOW) -> np.ndarray:
    """Majority-smooth each row over clipped windows [t-h, t+h].

    A day is kept when the link is present on at least ceil(k/2) of the k
    days the clipped window actually covers; for interior days k = 2h+1 = 7
    and the threshold is 4.  Single pass, the input rows are not re-smoothed.
    """
    m, n = bits.shape
    cum = np.zeros((m, n + 1), dtype=np.int32)
    np.cumsum(bits, axis=1, out=cum[:, 1:])
    t = np.arange(n)
    lo = np.maximum(t - half_window, 0)
    hi = np.minimum(t + half_window, n - 1)
    width = hi - lo + 1
    counts = cum[:, hi + 1] - cum[:, lo]
    return counts >= (width + 1) // 2


def smooth_link_presence(bits: np.ndarray | list[int], half_window: int = HALF_WINDOW) -> np.ndarray:
    """Smooth one daily presence vector; returns a boolean vector of equal length."""
    arr = np.asarray(bits)
    if arr.ndim != 1 or arr.size == 0:
        raise DataFormatError("presence vector must be a non-empty 1-D sequence")
    return _smooth_rows(arr.astype(bool)[None, :], half_window)[0]


def link_presence(
    network: DynamicNetwork, corpus: frozenset[str] | set[str], cutoff: int = 15
) -> tuple[list[tuple[str, str]], np.ndarray]:
    """All (source, target) pairs ever present, with their daily presence matrix.

    Pairs come out sorted; the matrix has one boolean row per pair and one
    column per observation day, under the same construction rules as the
    daily graphs.
    """
    daily_edges = [build_graph(snap, corpus, cutoff).edges for snap in network.snapshots]
    pairs = sorted(set().union(*daily_edges))
    index = {pair: i for i, pair in enumerate(pairs)}
    matrix = np.zeros((len(pairs), len(daily_edges)), dtype=bool)
    for day, edges in enumerate(daily_edges):
        for pair in edges:
            matrix[index[pair], day] = True
    return pairs, matrix


@dataclass(frozen=True)
class PersistentEdge:
    source: str
    target: str
    reciprocal: bool
    days_present: int


@dataclass(frozen=True, eq=False)
class PersistentNetwork:
    """Directed persistent links with reciprocity flags."""

    edges: tuple[PersistentEdge, ...]

    @cached_property
    def pair_set(self) -> frozenset[tuple[str, str]]:
        return frozenset((e.source, e.target) for e in self.edges)

    @cached_property
    def sources(self) -> frozenset[str]:
        return frozenset(e.source for e in self.edges)

    @cached_property
    def targets(self) -> frozenset[str]:
        return frozenset(e.target for e in self.edges)

    @cached_property
    def in_edges(self) -> dict[str, tuple[str, ...]]:
        incoming: dict[str, list[str]] = {}
        for e in self.edges:
            incoming.setdefault(e.target, []).append(e.source)
        return {t: tuple(sorted(s)) for t, s in incoming.items()}

    @property
    def reciprocal_count(self) -> int:
        return sum(1 for e in self.edges if e.reciprocal)


def classify_links(
    network: DynamicNetwork,
    dataset: Dataset,
    cutoff: int = 15,
    filters: ViewFilters | None = None,
) -> tuple[PersistentNetwork, tuple[tuple[str, str], ...]]:
    """Split filter-passing links into persistent and ephemeral.

    Candidates are the pairs that pass both view filters; a candidate is
    persistent when its smoothed presence vector is all-ones and ephemeral
    otherwise.
    """
    filters = filters or apply_view_filters(dataset)
    pairs, matrix = link_presence(network, dataset.corpus, cutoff)
    keep = [
        i
        for i, (src, tgt) in enumerate(pairs)
        if filters.target_eligible(tgt) and filters.pair_eligible(src, tgt)
    ]
    persistent_pairs: list[tuple[str, str]] = []
    ephemeral: list[tuple[str, str]] = []
    raw_days: dict[tuple[str, str], int] = {}
    if keep:
        kept = matrix[keep]
        smoothed = _smooth_rows(kept)
        all_days = smoothed.all(axis=1)
        for row, i in enumerate(keep):
            pair = pairs[i]
            if all_days[row]:
                persistent_pairs.append(pair)
                raw_days[pair] = int(kept[row].sum())
            else:
                ephemeral.append(pair)
    pair_set = set(persistent_pairs)
    edges = tuple(
        PersistentEdge(src, tgt, (tgt, src) in pair_set, raw_days[(src, tgt)])
        for src, tgt in sorted(persistent_pairs)
    )
    return PersistentNetwork(edges), tuple(ephemeral)


def extract_persistent_network(
    network: DynamicNetwork,
    dataset: Dataset,
    cutoff: int = 15,
    filters: ViewFilters | None = None,
) -> PersistentNetwork:
    """Extract the persistent network; see :func:`classify_links`."""
    persistent, _ = classify_links(network, dataset, cutoff, filters)
    return persistent


@dataclass(frozen=True)
class HomophilyStats:
    n_edges: int
    same_artist_fraction: float
    shared_genre_fraction: float


def homophily_stats(
    network: PersistentNetwork, metadata: Mapping[str, VideoMeta]
) -> HomophilyStats:
    """Fractions of persistent edges joining same-artist / genre-sharing videos.

    Genre sharing means a non-empty intersection of the two genre sets.
    """
    if not network.edges:
        raise DataFormatError("persistent network has no edges")
    same_artist = 0
    shared_genre = 0
    for e in network.edges:
        try:
            src, tgt = metadata[e.source], metadata[e.target]
        except KeyError as exc:
            raise DataFormatError(f"missing metadata for {exc.args[0]}") from None
        if src.artist_id == tgt.artist_id:
            same_artist += 1
        if src.genres & tgt.genres:
            shared_genre += 1
    n = len(network.edges)
    return HomophilyStats(n, same_artist / n, shared_genre / n)


def simulate_persistence_probability(
    presence_prob: float,
    n_days: int = 63,
    trials: int = 100_000,
    seed: int = 0,
    half_window: int = HALF_WINDOW,
) -> float:
    """Probability that an i.i.d. Bernoulli presence vector survives as persistent.

    Draws ``trials`` random presence vectors, smooths them, and returns the
    fraction that come out all-ones.  Deterministic for a fixed seed.
    """
    if not 0.0 <= presence_prob <= 1.0:
        raise DataFormatError(f"presence probability {presence_prob} outside [0, 1]")
    if n_days < 1 or trials < 1:
        raise DataFormatError("n_days and trials must be positive")
    rng = np.random.default_rng(seed)
    survived = 0
    chunk = 200_000
    remaining = trials
    while remaining > 0:
        size = min(chunk, remaining)
        bits = rng.random((size, n_days)) < presence_prob
        survived += int(_smooth_rows(bits, half_window).all(axis=1).sum())
        remaining -= size
    return survived / trials
