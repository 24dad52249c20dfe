"""Alignment between relevant and recommended lists.

Both matrices below condition on (day, source) pairs where the snapshot holds
both a relevant and a recommended list; days where either list is missing are
excluded from numerators and denominators alike.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data_model import DataFormatError, DynamicNetwork

DEFAULT_BINS: tuple[tuple[int, int], ...] = ((1, 1), (2, 5), (6, 10), (11, 15))


@dataclass(frozen=True)
class PositionBins:
    """Disjoint ascending inclusive position ranges, e.g. (1,1),(2,5),(6,10),(11,15)."""

    ranges: tuple[tuple[int, int], ...] = DEFAULT_BINS

    def __post_init__(self) -> None:
        prev_hi = 0
        for lo, hi in self.ranges:
            if lo < 1 or hi < lo:
                raise DataFormatError(f"bad position bin ({lo}, {hi})")
            if lo <= prev_hi:
                raise DataFormatError("position bins must be disjoint and ascending")
            prev_hi = hi

    @property
    def max_position(self) -> int:
        return self.ranges[-1][1]

    def index_of(self, pos: int) -> int | None:
        for i, (lo, hi) in enumerate(self.ranges):
            if lo <= pos <= hi:
                return i
        return None

    def labels(self) -> list[str]:
        return [f"{lo}" if lo == hi else f"{lo}-{hi}" for lo, hi in self.ranges]


@dataclass(frozen=True, eq=False)
class DisplayProbabilityMatrix:
    """Conditional placement probabilities with their per-row sample sizes.

    ``probs[i, j]`` is the fraction of row i's denominator landing in column
    bin j; rows with a zero denominator stay all-zero.  Row sums never exceed
    1 because the remaining mass is "not placed within the binned range".
    """

    probs: np.ndarray
    denominators: np.ndarray
    row_labels: tuple[str, ...]
    col_labels: tuple[str, ...]


def display_probability_matrix(
    network: DynamicNetwork,
    bins: PositionBins | None = None,
    max_rel: int = 50,
) -> DisplayProbabilityMatrix:
    """P(recommended position falls in bin b | relevant rank r).

    One observation per (day, source, relevant entry) with rank <= max_rel.
    The entry's target contributes to a numerator cell only when it also
    appears in that day's recommended list inside one of the bins.
    """
    if max_rel < 1:
        raise DataFormatError(f"max_rel must be at least 1, got {max_rel}")
    bins = bins or PositionBins()
    num = np.zeros((max_rel, len(bins.ranges)), dtype=np.int64)
    den = np.zeros(max_rel, dtype=np.int64)
    for snap in network.snapshots:
        for src, rel in snap.relevant.items():
            rec = snap.recommended.get(src)
            if rec is None:
                continue
            rec_pos = {t: p for t, p in rec.entries}
            for tgt, r in rel.entries:
                if r > max_rel:
                    continue
                den[r - 1] += 1
                q = rec_pos.get(tgt)
                if q is not None:
                    b = bins.index_of(q)
                    if b is not None:
                        num[r - 1, b] += 1
    probs = num / np.maximum(den, 1)[:, None]
    return DisplayProbabilityMatrix(
        probs=probs,
        denominators=den,
        row_labels=tuple(str(r) for r in range(1, max_rel + 1)),
        col_labels=tuple(bins.labels()),
    )


def origin_probability_matrix(
    network: DynamicNetwork,
    bins: PositionBins | None = None,
    max_rec: int = 15,
) -> DisplayProbabilityMatrix:
    """P(relevant rank falls in bin b | recommended position q).

    One observation per (day, source, recommended entry) with position
    <= max_rec.  Targets absent from the relevant list (or ranked beyond the
    binned range) contribute to the denominator only, so row sums below 1
    measure recommendations that did not originate from the binned ranks.
    """
    if max_rec < 1:
        raise DataFormatError(f"max_rec must be at least 1, got {max_rec}")
    bins = bins or PositionBins()
    num = np.zeros((max_rec, len(bins.ranges)), dtype=np.int64)
    den = np.zeros(max_rec, dtype=np.int64)
    for snap in network.snapshots:
        for src, rec in snap.recommended.items():
            rel = snap.relevant.get(src)
            if rel is None:
                continue
            rel_pos = {t: p for t, p in rel.entries}
            for tgt, q in rec.entries:
                if q > max_rec:
                    continue
                den[q - 1] += 1
                r = rel_pos.get(tgt)
                if r is not None:
                    b = bins.index_of(r)
                    if b is not None:
                        num[q - 1, b] += 1
    probs = num / np.maximum(den, 1)[:, None]
    return DisplayProbabilityMatrix(
        probs=probs,
        denominators=den,
        row_labels=tuple(str(q) for q in range(1, max_rec + 1)),
        col_labels=tuple(bins.labels()),
    )
