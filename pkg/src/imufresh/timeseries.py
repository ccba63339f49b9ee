"""Multi-channel recordings, CSV ingestion, and fixed-length segmentation.

A :class:`Recording` holds synchronized, uniformly sampled channels keyed by
*kind* (e.g. ``accel_y_r``).  Recordings are ingested from long-format CSV
(``time,kind,value``) and segmented into labeled fixed-length windows, the
sample unit of everything downstream.

Recordings and window sets are immutable after construction and safe to read
concurrently.
"""

from __future__ import annotations

import csv
import io
import math
import re
from dataclasses import dataclass, field
from typing import BinaryIO, Iterable, Sequence, TextIO

import numpy as np

from .errors import (
    InconsistentChannels,
    InvalidKindName,
    InvalidValue,
    NonUniformSampling,
    OverlappingLabels,
    UnknownKind,
    WindowOutOfRange,
    WindowTooShort,
)

# Relative tolerance for the per-channel uniform-sampling check.
UNIFORM_STEP_RTOL = 1e-6

# Slack (seconds) when testing whether a window lies inside a label interval,
# absorbing float noise in regenerated time grids.
_LABEL_EDGE_EPS = 1e-9

_KIND_RE = re.compile(r"^[A-Za-z0-9]+(?:_[A-Za-z0-9]+)*$")


def validate_kind(name: str) -> str:
    """Check that *name* is a legal channel kind and return it.

    Kinds are non-empty, consist of alphanumerics separated by single
    underscores, and in particular never contain ``__``, which is reserved
    as the feature-name separator.
    """
    if not isinstance(name, str) or not _KIND_RE.match(name):
        raise InvalidKindName(f"invalid channel kind: {name!r}")
    return name


def render_float(v: float) -> str:
    """Shortest decimal string that round-trips to the same 64-bit float."""
    return repr(float(v))


@dataclass(frozen=True, eq=False)
class Recording:
    """Synchronized multi-channel signal store.

    Parameters
    ----------
    sample_rate_hz : float
        Common sampling rate of all channels, > 0.
    channels : dict
        Maps channel kind to a 1-D float array; all arrays share one length.
    t0 : float
        Time of the first sample, in seconds.
    """

    sample_rate_hz: float
    channels: dict[str, np.ndarray]
    t0: float = 0.0

    def __post_init__(self) -> None:
        if not self.channels:
            raise InconsistentChannels("recording has no channels")
        if not (self.sample_rate_hz > 0):
            raise InvalidValue(f"sample_rate_hz must be positive, got {self.sample_rate_hz}")
        frozen: dict[str, np.ndarray] = {}
        length = None
        for kind, values in self.channels.items():
            validate_kind(kind)
            arr = np.asarray(values, dtype=np.float64)
            if arr.ndim != 1 or arr.shape[0] < 1:
                raise InconsistentChannels(f"channel {kind!r} must be a non-empty 1-D sequence")
            if length is None:
                length = arr.shape[0]
            elif arr.shape[0] != length:
                raise InconsistentChannels(
                    f"channel {kind!r} has length {arr.shape[0]}, expected {length}"
                )
            if not np.all(np.isfinite(arr)):
                raise InvalidValue(f"channel {kind!r} contains NaN or infinite values")
            arr = arr.copy()
            arr.setflags(write=False)
            frozen[kind] = arr
        object.__setattr__(self, "channels", frozen)

    @property
    def length(self) -> int:
        return next(iter(self.channels.values())).shape[0]

    @property
    def kinds(self) -> tuple[str, ...]:
        return tuple(sorted(self.channels))

    @property
    def duration_s(self) -> float:
        return self.length / self.sample_rate_hz

    def sample_time(self, index: int) -> float:
        return self.t0 + index / self.sample_rate_hz

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Recording):
            return NotImplemented
        return (
            self.sample_rate_hz == other.sample_rate_hz
            and self.t0 == other.t0
            and self.kinds == other.kinds
            and all(np.array_equal(self.channels[k], other.channels[k]) for k in self.channels)
        )

    def __repr__(self) -> str:
        return (
            f"Recording(rate={self.sample_rate_hz}, kinds={len(self.channels)}, "
            f"length={self.length}, t0={self.t0})"
        )


@dataclass(frozen=True)
class Window:
    """One fixed-length segment of a recording."""

    window_id: int
    start_index: int
    length: int
    label: str | None = None

    def __post_init__(self) -> None:
        if self.start_index < 0:
            raise WindowOutOfRange(f"start_index must be >= 0, got {self.start_index}")
        if self.length < 2:
            raise WindowTooShort(f"window length must be >= 2 samples, got {self.length}")


@dataclass(frozen=True)
class WindowSet:
    """Ordered windows over one recording.

    ``windows`` holds the labeled windows when label intervals were supplied
    (all windows otherwise); windows that straddle a label boundary or cover
    unlabeled time are kept separately in ``unlabeled`` so prediction can
    still run on them.
    """

    recording: Recording
    windows: tuple[Window, ...]
    unlabeled: tuple[Window, ...] = ()
    label_domain: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        ids = [w.window_id for w in self.windows] + [w.window_id for w in self.unlabeled]
        if len(set(ids)) != len(ids):
            raise ValueError("window_id values must be unique")
        for group in (self.windows, self.unlabeled):
            if any(a.window_id >= b.window_id for a, b in zip(group, group[1:])):
                raise ValueError("window_id values must be ascending")
        present = {w.label for w in self.windows if w.label is not None}
        if present != set(self.label_domain):
            raise ValueError("label_domain must equal the set of labels present")

    @property
    def labels(self) -> tuple[str, ...] | None:
        if not self.label_domain:
            return None
        return tuple(w.label for w in self.windows)  # type: ignore[misc]

    def window_times(self, window: Window) -> tuple[float, float]:
        """(start_s, end_s) of a window on the recording's time base."""
        rate = self.recording.sample_rate_hz
        t0 = self.recording.t0
        return (t0 + window.start_index / rate, t0 + (window.start_index + window.length) / rate)


# ---------------------------------------------------------------------------
# CSV ingestion
# ---------------------------------------------------------------------------

def load_recording_csv(stream: BinaryIO | TextIO) -> Recording:
    """Ingest a long-format CSV (``time,kind,value``) into a Recording.

    Rows must be sorted by (kind, time) with a uniform time step per kind and
    identical time grids across kinds.  The sample rate is inferred as
    1/median(dt) and validated uniform to relative tolerance 1e-6.

    Raises
    ------
    InconsistentChannels, NonUniformSampling, InvalidValue, InvalidKindName
    """
    if hasattr(stream, "mode") and "b" in getattr(stream, "mode", ""):
        text: TextIO = io.TextIOWrapper(stream, encoding="utf-8")  # type: ignore[arg-type]
    elif isinstance(stream, (io.RawIOBase, io.BufferedIOBase)):
        text = io.TextIOWrapper(stream, encoding="utf-8")
    else:
        text = stream  # already text

    header = text.readline().rstrip("\n").rstrip("\r")
    if header != "time,kind,value":
        raise InconsistentChannels(f"expected header 'time,kind,value', got {header!r}")

    times_by_kind: dict[str, list[str]] = {}
    values_by_kind: dict[str, list[str]] = {}
    for lineno, line in enumerate(text, start=2):
        line = line.rstrip("\n").rstrip("\r")
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 3:
            raise InconsistentChannels(f"line {lineno}: expected 3 fields, got {len(parts)}")
        t_s, kind, v_s = parts
        if kind not in times_by_kind:
            validate_kind(kind)
            times_by_kind[kind] = []
            values_by_kind[kind] = []
        times_by_kind[kind].append(t_s)
        values_by_kind[kind].append(v_s)

    if not times_by_kind:
        raise InconsistentChannels("CSV contains no data rows")

    channels: dict[str, np.ndarray] = {}
    grid: np.ndarray | None = None
    grid_kind = ""
    for kind in times_by_kind:
        try:
            times = np.asarray(times_by_kind[kind], dtype=np.float64)
            values = np.asarray(values_by_kind[kind], dtype=np.float64)
        except ValueError as exc:
            raise InvalidValue(f"channel {kind!r}: unparseable numeric field ({exc})") from None
        if not np.all(np.isfinite(values)):
            raise InvalidValue(f"channel {kind!r} contains NaN or infinite values")
        if not np.all(np.isfinite(times)):
            raise InvalidValue(f"channel {kind!r} has NaN or infinite timestamps")
        if grid is None:
            grid = times
            grid_kind = kind
        else:
            if times.shape != grid.shape:
                raise InconsistentChannels(
                    f"channel {kind!r} has {times.shape[0]} rows, "
                    f"{grid_kind!r} has {grid.shape[0]}"
                )
            if not np.array_equal(times, grid):
                raise InconsistentChannels(
                    f"channel {kind!r} is not on the same time grid as {grid_kind!r}"
                )
        channels[kind] = values

    assert grid is not None
    if grid.shape[0] >= 2:
        steps = np.diff(grid)
        dt = float(np.median(steps))
        if dt <= 0:
            raise NonUniformSampling("time values must be strictly increasing")
        if np.any(np.abs(steps - dt) > UNIFORM_STEP_RTOL * dt):
            raise NonUniformSampling(
                f"non-uniform time step: median {dt}, worst deviation "
                f"{float(np.max(np.abs(steps - dt)))}"
            )
        rate = 1.0 / dt
    else:
        raise InconsistentChannels("each channel needs at least 2 samples to infer a rate")

    return Recording(sample_rate_hz=rate, channels=channels, t0=float(grid[0]))


def load_recording(path: str) -> Recording:
    """Open *path* and ingest it with :func:`load_recording_csv`."""
    with open(path, "rb") as fh:
        return load_recording_csv(fh)


def save_recording_csv(recording: Recording, stream: TextIO) -> None:
    """Serialize a recording back to long-format CSV.

    Values and times use the shortest round-trip decimal rendering, so
    ingesting the output reproduces the channel values exactly.
    """
    stream.write("time,kind,value\n")
    rate = recording.sample_rate_hz
    t0 = recording.t0
    n = recording.length
    for kind in recording.kinds:
        values = recording.channels[kind]
        for i in range(n):
            stream.write(f"{render_float(t0 + i / rate)},{kind},{render_float(values[i])}\n")


def save_recording(recording: Recording, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        save_recording_csv(recording, fh)


def load_labels_csv(stream: TextIO) -> list[tuple[float, float, str]]:
    """Read a labels CSV with header ``start_s,end_s,label``."""
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise InconsistentChannels("labels CSV is empty") from None
    if header != ["start_s", "end_s", "label"]:
        raise InconsistentChannels(
            f"expected header 'start_s,end_s,label', got {','.join(header)!r}"
        )
    out: list[tuple[float, float, str]] = []
    for row in reader:
        if not row:
            continue
        if len(row) != 3:
            raise InconsistentChannels(f"labels CSV row has {len(row)} fields: {row!r}")
        try:
            start, end = float(row[0]), float(row[1])
        except ValueError as exc:
            raise InvalidValue(f"labels CSV: {exc}") from None
        if not (math.isfinite(start) and math.isfinite(end)) or end <= start:
            raise InvalidValue(f"labels CSV: bad interval ({row[0]}, {row[1]})")
        out.append((start, end, row[2]))
    return out


def load_labels(path: str) -> list[tuple[float, float, str]]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        return load_labels_csv(fh)


def save_labels(intervals: Iterable[tuple[float, float, str]], path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("start_s,end_s,label\n")
        for start, end, label in intervals:
            fh.write(f"{render_float(start)},{render_float(end)},{label}\n")


# ---------------------------------------------------------------------------
# Segmentation
# ---------------------------------------------------------------------------

def _check_intervals(labels: Sequence[tuple[float, float, str]]) -> list[tuple[float, float, str]]:
    ordered = sorted(labels, key=lambda iv: (iv[0], iv[1]))
    for (s0, e0, _), (s1, _, _) in zip(ordered, ordered[1:]):
        if s1 < e0 - _LABEL_EDGE_EPS:
            raise OverlappingLabels(f"label intervals overlap near t={s1}")
    return ordered


def resolve_label(
    start_s: float, end_s: float, intervals: Sequence[tuple[float, float, str]]
) -> str | None:
    """Label of the interval fully containing [start_s, end_s], else None."""
    for iv_start, iv_end, label in intervals:
        if start_s >= iv_start - _LABEL_EDGE_EPS and end_s <= iv_end + _LABEL_EDGE_EPS:
            return label
    return None


def segment_fixed(
    recording: Recording,
    window_seconds: float,
    labels: Sequence[tuple[float, float, str]] | None = None,
) -> WindowSet:
    """Tile the recording with consecutive non-overlapping windows.

    Windows are ``round(window_seconds * sample_rate_hz)`` samples long and
    start at index 0.  A window is labeled iff its full time span lies inside
    a single label interval; windows covering a boundary or unlabeled time go
    to the ``unlabeled`` list.  With ``labels=None`` every window is returned
    unlabeled (prediction mode).
    """
    w = int(round(window_seconds * recording.sample_rate_hz))
    if w < 2:
        raise WindowTooShort(
            f"{window_seconds} s at {recording.sample_rate_hz} Hz is {w} samples"
        )
    intervals = _check_intervals(labels) if labels else []

    labeled: list[Window] = []
    unlabeled: list[Window] = []
    wid = 0
    for start in range(0, recording.length - w + 1, w):
        if labels is None:
            labeled.append(Window(wid, start, w, None))
        else:
            t_start = recording.sample_time(start)
            t_end = recording.sample_time(start + w)
            label = resolve_label(t_start, t_end, intervals)
            if label is None:
                unlabeled.append(Window(wid, start, w, None))
            else:
                labeled.append(Window(wid, start, w, label))
        wid += 1

    domain = frozenset(w_.label for w_ in labeled if w_.label is not None)
    return WindowSet(
        recording=recording,
        windows=tuple(labeled),
        unlabeled=tuple(unlabeled),
        label_domain=domain,
    )


def slice_window(recording: Recording, window: Window, kind: str) -> np.ndarray:
    """Contiguous read-only view of one channel under one window."""
    if kind not in recording.channels:
        raise UnknownKind(f"no channel {kind!r} in recording")
    end = window.start_index + window.length
    if end > recording.length:
        raise WindowOutOfRange(
            f"window [{window.start_index}, {end}) exceeds recording length {recording.length}"
        )
    return recording.channels[kind][window.start_index:end]
