"""Synthetic dataset generation with planted ground truth.

Videos are indexed 0..n-1 and links only run from lower to higher index, so
the true influence graph is a DAG and views can be generated in one pass per
day.  Each video's daily views follow

    y_v[t] = rint(max(0, base_v * s_v[t mod 7]
                          + sum_tau alpha[tau] * y_v[t - tau]
                          + sum_{(u,v)} beta_uv * y_u[t]
                          + noise))

with a per-video sinusoidal weekly profile s_v at a random phase.  Snapshot
edges mirror the true graph, each present on a given day with probability
``presence_prob``; targets land on shuffled relevant-list positions.
Everything is driven by one seeded generator: equal seeds give byte-identical
exports.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import date, timedelta
from pathlib import Path
from typing import Mapping

import numpy as np

from .data_model import (
    DailySnapshot,
    DataFormatError,
    Dataset,
    DynamicNetwork,
    NumericalError,
    ObservationWindow,
    RankedList,
    VideoMeta,
    ViewSeries,
    serialize_metadata,
    serialize_snapshots,
    serialize_views,
    validate_dataset,
)
from .list_alignment import PositionBins

START_DATE = date(2018, 9, 1)
GENRE_POOL = ("g0", "g1", "g2", "g3", "g4", "g5", "g6", "g7")
VALUE_CEILING = 1e15


@dataclass(frozen=True)
class GenConfig:
    """Generator knobs.

    The default layout links random low-to-high index pairs at
    ``edge_density``.  Structured layouts override that: ``edges`` plants an
    explicit (source index, target index, beta) list, while
    ``in_edges_per_target`` gives every video from ``n_sources`` upward that
    many incoming links drawn from the first ``n_sources`` videos.
    """

    n_videos: int = 60
    n_artists: int = 12
    days: int = 63
    base_level_range: tuple[float, float] = (200.0, 2000.0)
    seasonal_amplitude: float = 0.3
    noise_scale: float = 5.0
    edge_density: float = 0.02
    presence_prob: float = 1.0
    seed: int = 0
    alpha_profile: tuple[float, ...] = (0.3, 0.0, 0.0, 0.0, 0.0, 0.0, 0.3)
    beta_range: tuple[float, float] = (0.2, 0.8)
    n_sources: int | None = None
    in_edges_per_target: int | None = None
    edges: tuple[tuple[int, int, float], ...] | None = None
    base_levels: tuple[float, ...] | None = None
    phases: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if self.n_videos < 2 or self.n_artists < 1 or self.days < 1:
            raise DataFormatError("need at least 2 videos, 1 artist and 1 day")
        if not 0.0 <= self.edge_density <= 1.0:
            raise DataFormatError("edge density outside [0, 1]")
        if not 0.0 <= self.presence_prob <= 1.0:
            raise DataFormatError("presence probability outside [0, 1]")
        if self.seasonal_amplitude < 0 or self.noise_scale < 0:
            raise DataFormatError("amplitude and noise scale must be non-negative")
        if len(self.alpha_profile) != 7 or any(a < 0 for a in self.alpha_profile):
            raise DataFormatError("alpha profile must be 7 non-negative lags")
        if self.base_levels is not None and len(self.base_levels) != self.n_videos:
            raise DataFormatError("base_levels length must match n_videos")
        if self.phases is not None and len(self.phases) != self.n_videos:
            raise DataFormatError("phases length must match n_videos")


@dataclass(frozen=True)
class GroundTruth:
    """Planted parameters: per-video lag profile and per-edge weights."""

    alpha: Mapping[str, tuple[float, ...]]
    beta: Mapping[tuple[str, str], float]
    presence_prob: float

    @property
    def edges(self) -> tuple[tuple[str, str], ...]:
        return tuple(sorted(self.beta))


def _video_id(i: int) -> str:
    return f"v{i:05d}"


def _draw_edges(config: GenConfig, rng: np.random.Generator) -> list[tuple[int, int, float]]:
    lo, hi = config.beta_range
    if config.edges is not None:
        out = []
        for src, dst, beta in config.edges:
            if not 0 <= src < dst < config.n_videos:
                raise DataFormatError(f"edge ({src}, {dst}) must run low to high index")
            if not 0.0 <= beta <= 1.0:
                raise DataFormatError(f"edge weight {beta} outside [0, 1]")
            out.append((int(src), int(dst), float(beta)))
        return sorted(out)
    if config.in_edges_per_target is not None:
        n_sources = config.n_sources if config.n_sources is not None else config.n_videos // 2
        if not 0 < n_sources < config.n_videos:
            raise DataFormatError("n_sources must leave at least one target")
        if config.in_edges_per_target > n_sources:
            raise DataFormatError("more in-edges requested than sources available")
        out = []
        for dst in range(n_sources, config.n_videos):
            srcs = rng.choice(n_sources, size=config.in_edges_per_target, replace=False)
            betas = rng.uniform(lo, hi, size=config.in_edges_per_target)
            out.extend((int(s), dst, float(b)) for s, b in zip(np.sort(srcs), betas))
        return sorted(out)
    mask = rng.random((config.n_videos, config.n_videos)) < config.edge_density
    pairs = [(i, j) for i in range(config.n_videos) for j in range(i + 1, config.n_videos) if mask[i, j]]
    betas = rng.uniform(lo, hi, size=len(pairs))
    return [(i, j, float(b)) for (i, j), b in zip(pairs, betas)]


def generate(config: GenConfig) -> tuple[Dataset, GroundTruth]:
    """Generate a validated dataset plus the parameters that produced it."""
    rng = np.random.default_rng(config.seed)
    n, days = config.n_videos, config.days
    ids = [_video_id(i) for i in range(n)]
    window = ObservationWindow(START_DATE, days)

    artists = [f"a{i % config.n_artists:04d}" for i in range(n)]
    genre_counts = rng.integers(1, 4, size=n)
    genre_picks = [rng.choice(len(GENRE_POOL), size=int(k), replace=False) for k in genre_counts]
    upload_offsets = rng.integers(30, 3000, size=n)
    metadata = {
        ids[i]: VideoMeta(
            ids[i],
            artists[i],
            frozenset(GENRE_POOL[g] for g in genre_picks[i]),
            START_DATE - timedelta(days=int(upload_offsets[i])),
        )
        for i in range(n)
    }

    edge_list = _draw_edges(config, rng)
    incoming: dict[int, list[tuple[int, float]]] = {}
    for src, dst, beta in edge_list:
        incoming.setdefault(dst, []).append((src, beta))

    if config.base_levels is not None:
        base = np.asarray(config.base_levels, dtype=float)
    else:
        base = rng.uniform(*config.base_level_range, size=n)
    if config.phases is not None:
        phase = np.asarray(config.phases, dtype=float)
    else:
        phase = rng.uniform(0.0, 7.0, size=n)
    weekday = np.arange(7)
    profile = np.maximum(
        0.05, 1.0 + config.seasonal_amplitude * np.sin(2 * math.pi * (weekday[None, :] + phase[:, None]) / 7.0)
    )
    noise = (
        rng.normal(0.0, config.noise_scale, size=(days, n))
        if config.noise_scale > 0
        else np.zeros((days, n))
    )

    alpha = np.asarray(config.alpha_profile, dtype=float)
    y = np.zeros((days, n))
    for t in range(days):
        for v in range(n):
            val = base[v] * profile[v, t % 7]
            for tau in range(1, 8):
                if t - tau >= 0:
                    val += alpha[tau - 1] * y[t - tau, v]
            for u, beta in incoming.get(v, ()):
                val += beta * y[t, u]
            val += noise[t, v]
            y[t, v] = np.rint(max(0.0, val))
    if y.max() > VALUE_CEILING:
        raise NumericalError("generated views overflow; lower alpha/beta or base levels")

    views = {ids[i]: ViewSeries(ids[i], START_DATE, y[:, i].astype(np.int64)) for i in range(n)}

    snapshots = []
    for t in range(days):
        if config.presence_prob >= 1.0:
            present = [True] * len(edge_list)
        else:
            present = list(rng.random(len(edge_list)) < config.presence_prob)
        by_source: dict[int, list[int]] = {}
        for keep, (src, dst, _) in zip(present, edge_list):
            if keep:
                by_source.setdefault(src, []).append(dst)
        relevant: dict[str, RankedList] = {}
        for src in sorted(by_source):
            targets = by_source[src]
            k = len(targets)
            slots = rng.permutation(np.arange(1, max(15, k) + 1))[:k]
            order = rng.permutation(k)
            entries = sorted(
                ((ids[targets[order[m]]], int(pos)) for m, pos in enumerate(np.sort(slots))),
                key=lambda e: e[1],
            )
            src_id = ids[src]
            relevant[src_id] = RankedList(src_id, tuple(entries), "relevant")
        snapshots.append(DailySnapshot(START_DATE + timedelta(days=t), relevant, {}))
    network = DynamicNetwork(window, tuple(snapshots))

    dataset = validate_dataset(metadata, views, network)
    truth = GroundTruth(
        alpha={vid: tuple(config.alpha_profile) for vid in ids},
        beta={(ids[s], ids[d]): b for s, d, b in edge_list},
        presence_prob=config.presence_prob,
    )
    return dataset, truth


def generate_paired_lists(
    kernel: np.ndarray,
    n_pairs: int,
    seed: int = 0,
    bins: PositionBins | None = None,
    pairs_per_day: int = 2000,
) -> DynamicNetwork:
    """Snapshots with matched relevant/recommended lists for alignment tests.

    ``kernel[r-1][b]`` is the probability that the single tracked entry at
    relevant rank r is displayed inside recommended-position bin b; leftover
    row mass means "not displayed".  Each (day, source) carries one tracked
    relevant entry and a full 15-slot recommended list padded with fillers,
    so the empirical display matrix is an unbiased binomial estimate of the
    kernel.
    """
    k = np.asarray(kernel, dtype=float)
    bins = bins or PositionBins()
    if k.ndim != 2 or k.shape[1] != len(bins.ranges):
        raise DataFormatError("kernel columns must match the position bins")
    if np.any(k < 0) or np.any(k.sum(axis=1) > 1.0 + 1e-12):
        raise DataFormatError("kernel rows must be sub-probability vectors")
    if n_pairs < 1 or pairs_per_day < 1:
        raise DataFormatError("need positive pair counts")

    rng = np.random.default_rng(seed)
    max_rel = k.shape[0]
    n_days = (n_pairs + pairs_per_day - 1) // pairs_per_day
    window = ObservationWindow(START_DATE, n_days)
    rec_positions = list(range(1, bins.max_position + 1))

    relevant_by_day: list[dict[str, RankedList]] = [dict() for _ in range(n_days)]
    recommended_by_day: list[dict[str, RankedList]] = [dict() for _ in range(n_days)]
    cumulative = np.cumsum(k, axis=1)
    for i in range(n_pairs):
        day = i // pairs_per_day
        rank = (i % max_rel) + 1
        src = f"s{i:07d}"
        tgt = f"t{i:07d}"
        relevant_by_day[day][src] = RankedList(src, ((tgt, rank),), "relevant")

        u = rng.random()
        row = cumulative[rank - 1]
        chosen_bin = int(np.searchsorted(row, u, side="right"))
        display_pos = None
        if chosen_bin < len(bins.ranges):
            lo, hi = bins.ranges[chosen_bin]
            display_pos = int(rng.integers(lo, hi + 1))
        entries = tuple(
            (tgt if pos == display_pos else f"f{i:07d}p{pos:02d}", pos) for pos in rec_positions
        )
        recommended_by_day[day][src] = RankedList(src, entries, "recommended")

    snapshots = tuple(
        DailySnapshot(START_DATE + timedelta(days=d), relevant_by_day[d], recommended_by_day[d])
        for d in range(n_days)
    )
    return DynamicNetwork(window, snapshots)


def export_dataset(dataset: Dataset, out_dir: str | Path) -> dict[str, Path]:
    """Write the three canonical CSVs; returns the paths keyed by file kind."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "snapshots": out / "snapshots.csv",
        "views": out / "views.csv",
        "metadata": out / "metadata.csv",
    }
    paths["snapshots"].write_text(serialize_snapshots(dataset.network), encoding="utf-8")
    paths["views"].write_text(serialize_views(dataset.views), encoding="utf-8")
    paths["metadata"].write_text(serialize_metadata(dataset.metadata), encoding="utf-8")
    return paths


def ground_truth_to_json(truth: GroundTruth) -> dict:
    """JSON-friendly ground-truth layout with string edge keys."""
    return {
        "alpha": {vid: list(profile) for vid, profile in sorted(truth.alpha.items())},
        "beta": {f"{src}->{dst}": b for (src, dst), b in sorted(truth.beta.items())},
        "presence_prob": truth.presence_prob,
    }
