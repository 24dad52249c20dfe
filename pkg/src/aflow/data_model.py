"""Core data types, CSV parsing, validation and canonical serialization.

All input files are plain CSV (RFC 4180, LF line endings, header row).
Three file kinds exist:

* snapshots:  ``date,source_id,target_id,position,list_kind``
* views:      ``video_id,date,views``
* metadata:   ``video_id,artist_id,upload_date,genres`` (genres joined by ``|``)

Parsing is strict: malformed rows raise :class:`DataFormatError` with the
offending line number, there is no silent repair and no imputation.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from datetime import date, timedelta
from pathlib import Path
from typing import IO, Iterable, Iterator, Mapping, Sequence

import numpy as np

LIST_KINDS = ("relevant", "recommended")

SNAPSHOT_HEADER = ("date", "source_id", "target_id", "position", "list_kind")
VIEWS_HEADER = ("video_id", "date", "views")
METADATA_HEADER = ("video_id", "artist_id", "upload_date", "genres")


class DataFormatError(ValueError):
    """An input file or assembled dataset violates the documented format."""


class NumericalError(RuntimeError):
    """A numerical routine failed to produce a usable result."""


def _parse_date(text: str, line_no: int) -> date:
    try:
        return date.fromisoformat(text)
    except ValueError:
        raise DataFormatError(f"line {line_no}: bad date {text!r}") from None


@dataclass(frozen=True)
class ObservationWindow:
    """Consecutive daily observation period.

    Attributes:
        start: First observed calendar day.
        n_days: Number of consecutive days, at least 1.
    """

    start: date
    n_days: int

    def __post_init__(self) -> None:
        if self.n_days < 1:
            raise DataFormatError("observation window must span at least one day")

    @property
    def end(self) -> date:
        return self.start + timedelta(days=self.n_days - 1)

    def dates(self) -> list[date]:
        return [self.start + timedelta(days=i) for i in range(self.n_days)]

    def index(self, d: date) -> int:
        i = (d - self.start).days
        if not 0 <= i < self.n_days:
            raise KeyError(f"{d} outside window {self.start}..{self.end}")
        return i

    def __contains__(self, d: date) -> bool:
        return self.start <= d <= self.end


@dataclass(frozen=True)
class VideoMeta:
    """Static attributes of one video."""

    id: str
    artist_id: str
    genres: frozenset[str]
    upload_date: date


@dataclass(frozen=True, eq=False)
class ViewSeries:
    """Daily view counts for one video over consecutive days."""

    id: str
    start_date: date
    values: np.ndarray

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=np.int64)
        if vals.ndim != 1 or vals.size == 0:
            raise DataFormatError(f"view series for {self.id} must be a non-empty vector")
        if np.any(vals < 0):
            raise DataFormatError(f"view series for {self.id} contains negative counts")
        object.__setattr__(self, "values", vals)

    @property
    def end_date(self) -> date:
        return self.start_date + timedelta(days=len(self.values) - 1)

    def covers(self, window: ObservationWindow) -> bool:
        return self.start_date <= window.start and self.end_date >= window.end

    def slice_to(self, window: ObservationWindow) -> np.ndarray:
        """Values aligned to the window; requires ``covers(window)``."""
        if not self.covers(window):
            raise DataFormatError(
                f"view series for {self.id} does not cover {window.start}..{window.end}"
            )
        off = (window.start - self.start_date).days
        return self.values[off : off + window.n_days]


@dataclass(frozen=True)
class RankedList:
    """One ranked list shown on a source video's page on one day.

    Entries are (target_id, position) pairs sorted by strictly increasing
    position.  Positions are 1-based and need not be contiguous.  Targets are
    distinct and never equal to the source.
    """

    source: str
    entries: tuple[tuple[str, int], ...]
    list_kind: str

    def __post_init__(self) -> None:
        if self.list_kind not in LIST_KINDS:
            raise DataFormatError(f"unknown list kind {self.list_kind!r}")
        prev = 0
        seen: set[str] = set()
        for target, pos in self.entries:
            if pos <= prev:
                raise DataFormatError(
                    f"positions in {self.list_kind} list of {self.source} "
                    "must be strictly increasing and >= 1"
                )
            if target == self.source:
                raise DataFormatError(f"self-link in list of {self.source}")
            if target in seen:
                raise DataFormatError(
                    f"duplicate target {target} in {self.list_kind} list of {self.source}"
                )
            seen.add(target)
            prev = pos

    def targets_within(self, cutoff: int) -> list[str]:
        return [t for t, p in self.entries if p <= cutoff]

    def position_of(self, target: str) -> int | None:
        for t, p in self.entries:
            if t == target:
                return p
        return None


@dataclass(frozen=True)
class DailySnapshot:
    """All ranked lists observed on one day, separated by list kind."""

    date: date
    relevant: Mapping[str, RankedList]
    recommended: Mapping[str, RankedList]

    def lists_of(self, kind: str) -> Mapping[str, RankedList]:
        if kind == "relevant":
            return self.relevant
        if kind == "recommended":
            return self.recommended
        raise DataFormatError(f"unknown list kind {kind!r}")


@dataclass(frozen=True)
class DynamicNetwork:
    """Sequence of daily snapshots over a consecutive observation window."""

    window: ObservationWindow
    snapshots: tuple[DailySnapshot, ...]

    def __post_init__(self) -> None:
        if len(self.snapshots) != self.window.n_days:
            raise DataFormatError("snapshot count does not match window length")
        for i, snap in enumerate(self.snapshots):
            if snap.date != self.window.start + timedelta(days=i):
                raise DataFormatError("snapshot dates are not consecutive")

    def snapshot_on(self, d: date) -> DailySnapshot:
        return self.snapshots[self.window.index(d)]


@dataclass(frozen=True)
class DatasetSummary:
    n_videos: int
    n_artists: int
    n_days: int
    mean_edges_per_day: float
    n_external_targets: int


@dataclass(frozen=True)
class Dataset:
    """Validated bundle of metadata, view series and the dynamic network.

    ``corpus`` holds every id with metadata; ``external`` holds ids that
    appear in snapshots without metadata.  Every corpus video has a view
    series covering the observation window.
    """

    metadata: Mapping[str, VideoMeta]
    views: Mapping[str, ViewSeries]
    network: DynamicNetwork
    corpus: frozenset[str]
    external: frozenset[str]
    summary: DatasetSummary

    @property
    def window(self) -> ObservationWindow:
        return self.network.window

    def aligned_views(self, video_id: str) -> np.ndarray:
        return self.views[video_id].slice_to(self.window)

    def views_on(self, video_id: str, d: date) -> int:
        return int(self.aligned_views(video_id)[self.window.index(d)])


# ---------------------------------------------------------------------------
# parsing


def _open_rows(source: str | Path | IO[str], expected_header: Sequence[str]):
    """Yield (line_no, row) pairs after checking the header row."""
    if isinstance(source, (str, Path)):
        handle: IO[str] = open(source, "r", newline="", encoding="utf-8")
        close = True
    else:
        handle = source
        close = False
    try:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError("empty file, expected a header row") from None
        if tuple(header) != tuple(expected_header):
            raise DataFormatError(
                f"line 1: expected header {','.join(expected_header)!r}, "
                f"got {','.join(header)!r}"
            )
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            yield line_no, row
    finally:
        if close:
            handle.close()


def parse_snapshots(source: str | Path | IO[str]) -> DynamicNetwork:
    """Parse a snapshots CSV into a :class:`DynamicNetwork`.

    Raises :class:`DataFormatError` (with line numbers) on malformed rows,
    positions below 1, self-links, duplicate positions inside one list, or
    observation days that are not consecutive.
    """
    # (date, source, kind) -> {position: (target, line_no)}
    lists: dict[tuple[date, str, str], dict[int, tuple[str, int]]] = {}
    for line_no, row in _open_rows(source, SNAPSHOT_HEADER):
        if len(row) != 5:
            raise DataFormatError(f"line {line_no}: expected 5 fields, got {len(row)}")
        d = _parse_date(row[0], line_no)
        src, tgt = row[1], row[2]
        if not src or not tgt:
            raise DataFormatError(f"line {line_no}: empty video id")
        try:
            pos = int(row[3])
        except ValueError:
            raise DataFormatError(f"line {line_no}: bad position {row[3]!r}") from None
        if pos < 1:
            raise DataFormatError(f"line {line_no}: position {pos} is below 1")
        kind = row[4]
        if kind not in LIST_KINDS:
            raise DataFormatError(f"line {line_no}: unknown list kind {kind!r}")
        if tgt == src:
            raise DataFormatError(f"line {line_no}: self-link on {src}")
        slot = lists.setdefault((d, src, kind), {})
        if pos in slot:
            raise DataFormatError(
                f"line {line_no}: duplicate position {pos} in {kind} list of {src} "
                f"on {d} (first seen at line {slot[pos][1]})"
            )
        slot[pos] = (tgt, line_no)

    if not lists:
        raise DataFormatError("snapshots file holds no rows")

    days = sorted({key[0] for key in lists})
    window = ObservationWindow(days[0], (days[-1] - days[0]).days + 1)
    if len(days) != window.n_days:
        missing = sorted(set(window.dates()) - set(days))
        raise DataFormatError(f"snapshot days are not consecutive, missing {missing[0]}")

    per_day: dict[date, dict[str, dict[str, RankedList]]] = {
        d: {"relevant": {}, "recommended": {}} for d in days
    }
    for (d, src, kind), slot in lists.items():
        entries = tuple((slot[p][0], p) for p in sorted(slot))
        per_day[d][kind][src] = RankedList(src, entries, kind)

    snapshots = tuple(
        DailySnapshot(d, per_day[d]["relevant"], per_day[d]["recommended"]) for d in days
    )
    return DynamicNetwork(window, snapshots)


def parse_views(source: str | Path | IO[str]) -> dict[str, ViewSeries]:
    """Parse a views CSV into per-video series.

    Each video's rows must form one contiguous date range with non-negative
    counts; gaps and negatives are errors, nothing is imputed.
    """
    rows: dict[str, dict[date, int]] = {}
    for line_no, row in _open_rows(source, VIEWS_HEADER):
        if len(row) != 3:
            raise DataFormatError(f"line {line_no}: expected 3 fields, got {len(row)}")
        vid = row[0]
        if not vid:
            raise DataFormatError(f"line {line_no}: empty video id")
        d = _parse_date(row[1], line_no)
        try:
            count = int(row[2])
        except ValueError:
            raise DataFormatError(f"line {line_no}: bad view count {row[2]!r}") from None
        if count < 0:
            raise DataFormatError(f"line {line_no}: negative view count for {vid}")
        per = rows.setdefault(vid, {})
        if d in per:
            raise DataFormatError(f"line {line_no}: duplicate day {d} for {vid}")
        per[d] = count

    if not rows:
        raise DataFormatError("views file holds no rows")

    out: dict[str, ViewSeries] = {}
    for vid, per in rows.items():
        days = sorted(per)
        span = (days[-1] - days[0]).days + 1
        if len(days) != span:
            missing = sorted(set(ObservationWindow(days[0], span).dates()) - set(days))
            raise DataFormatError(f"view series for {vid} has a gap at {missing[0]}")
        values = np.array([per[d] for d in days], dtype=np.int64)
        out[vid] = ViewSeries(vid, days[0], values)
    return out


def parse_metadata(source: str | Path | IO[str]) -> dict[str, VideoMeta]:
    """Parse a metadata CSV; genres field is ``|``-joined and may be empty."""
    out: dict[str, VideoMeta] = {}
    for line_no, row in _open_rows(source, METADATA_HEADER):
        if len(row) != 4:
            raise DataFormatError(f"line {line_no}: expected 4 fields, got {len(row)}")
        vid, artist = row[0], row[1]
        if not vid or not artist:
            raise DataFormatError(f"line {line_no}: empty id field")
        if vid in out:
            raise DataFormatError(f"line {line_no}: duplicate metadata for {vid}")
        upload = _parse_date(row[2], line_no)
        genres = frozenset(g for g in row[3].split("|") if g)
        out[vid] = VideoMeta(vid, artist, genres, upload)
    if not out:
        raise DataFormatError("metadata file holds no rows")
    return out


# ---------------------------------------------------------------------------
# validation


def validate_dataset(
    metadata: Mapping[str, VideoMeta],
    views: Mapping[str, ViewSeries],
    network: DynamicNetwork,
) -> Dataset:
    """Cross-check the three inputs and assemble a :class:`Dataset`.

    The corpus is the set of ids with metadata.  Every corpus video must have
    a view series covering the observation window (a longer series is fine,
    it is sliced on access).  Ids seen in snapshots without metadata are kept
    in ``external`` so they can be dropped at graph construction.
    """
    corpus = frozenset(metadata)
    window = network.window

    for vid in sorted(corpus):
        series = views.get(vid)
        if series is None:
            raise DataFormatError(f"corpus video {vid} has no view series")
        if not series.covers(window):
            raise DataFormatError(
                f"view series for {vid} spans {series.start_date}..{series.end_date}, "
                f"window needs {window.start}..{window.end}"
            )
        if metadata[vid].upload_date > series.start_date:
            raise DataFormatError(
                f"{vid} uploaded {metadata[vid].upload_date}, "
                f"after its first observed day {series.start_date}"
            )

    seen: set[str] = set()
    edge_rows = 0
    for snap in network.snapshots:
        for kind in LIST_KINDS:
            for src, rlist in snap.lists_of(kind).items():
                seen.add(src)
                seen.update(t for t, _ in rlist.entries)
                if kind == "relevant":
                    edge_rows += len(rlist.entries)
    external = frozenset(seen - corpus)

    summary = DatasetSummary(
        n_videos=len(corpus),
        n_artists=len({m.artist_id for m in metadata.values()}),
        n_days=window.n_days,
        mean_edges_per_day=edge_rows / window.n_days,
        n_external_targets=len(external),
    )
    return Dataset(dict(metadata), dict(views), network, corpus, external, summary)


def load_dataset(data_dir: str | Path) -> Dataset:
    """Load ``snapshots.csv``, ``views.csv`` and ``metadata.csv`` from a directory."""
    base = Path(data_dir)
    network = parse_snapshots(base / "snapshots.csv")
    views = parse_views(base / "views.csv")
    metadata = parse_metadata(base / "metadata.csv")
    return validate_dataset(metadata, views, network)


# ---------------------------------------------------------------------------
# canonical serialization

_KIND_ORDER = {"relevant": 0, "recommended": 1}


def serialize_snapshots(network: DynamicNetwork) -> str:
    """Canonical snapshots CSV: rows sorted by (date, source, kind, position)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SNAPSHOT_HEADER)
    for snap in network.snapshots:
        keyed = []
        for kind in LIST_KINDS:
            for src, rlist in snap.lists_of(kind).items():
                for tgt, pos in rlist.entries:
                    keyed.append((src, _KIND_ORDER[kind], pos, tgt, kind))
        for src, _, pos, tgt, kind in sorted(keyed):
            writer.writerow([snap.date.isoformat(), src, tgt, pos, kind])
    return buf.getvalue()


def serialize_views(views: Mapping[str, ViewSeries]) -> str:
    """Canonical views CSV: rows sorted by (video_id, date)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(VIEWS_HEADER)
    for vid in sorted(views):
        series = views[vid]
        for i, val in enumerate(series.values):
            d = series.start_date + timedelta(days=i)
            writer.writerow([vid, d.isoformat(), int(val)])
    return buf.getvalue()


def serialize_metadata(metadata: Mapping[str, VideoMeta]) -> str:
    """Canonical metadata CSV: rows sorted by video_id, genres sorted."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(METADATA_HEADER)
    for vid in sorted(metadata):
        meta = metadata[vid]
        writer.writerow(
            [vid, meta.artist_id, meta.upload_date.isoformat(), "|".join(sorted(meta.genres))]
        )
    return buf.getvalue()
