"""Batch feature extraction into a windows-by-features matrix.

The work grid (window x settings entry) is embarrassingly parallel: every
cell has a pre-assigned (row, column) slot, so the result is bitwise
identical no matter how many workers compute it.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Sequence, TextIO

import numpy as np

from .calculators import (
    CALCULATORS,
    ExtractionSettings,
    decode_feature_name,
)
from .errors import DataError, UnknownKind
from .names import FeatureName
from .timeseries import Recording, Window, WindowSet, render_float, slice_window


@dataclass(eq=False)
class FeatureMatrix:
    """Windows x named features, column-associated to FeatureName.

    Columns are sorted by canonical feature name and rows by window id.
    Cells may be NaN only where a calculator is documented undefined.
    """

    feature_names: tuple[FeatureName, ...]
    values: np.ndarray
    window_ids: np.ndarray
    labels: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        self.feature_names = tuple(self.feature_names)
        self.values = np.asarray(self.values, dtype=np.float64)
        self.window_ids = np.asarray(self.window_ids, dtype=np.int64)
        if self.values.ndim != 2:
            raise DataError("feature matrix values must be 2-D")
        n_rows, n_cols = self.values.shape
        if n_cols != len(self.feature_names):
            raise DataError(
                f"{n_cols} value columns but {len(self.feature_names)} feature names"
            )
        if self.window_ids.shape != (n_rows,):
            raise DataError("window_ids length must equal the number of rows")
        if np.any(np.diff(self.window_ids) <= 0):
            raise DataError("window_ids must be strictly ascending")
        canon = [f.canonical() for f in self.feature_names]
        if canon != sorted(canon):
            raise DataError("feature columns must be sorted by canonical name")
        if self.labels is not None:
            self.labels = tuple(self.labels)
            if len(self.labels) != n_rows:
                raise DataError("labels length must equal the number of rows")
        self.values.setflags(write=False)
        self.window_ids.setflags(write=False)

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_cols(self) -> int:
        return self.values.shape[1]

    def canonical_names(self) -> tuple[str, ...]:
        return tuple(f.canonical() for f in self.feature_names)

    def column_index(self, name: FeatureName | str) -> int:
        canonical = name if isinstance(name, str) else name.canonical()
        for i, f in enumerate(self.feature_names):
            if f.canonical() == canonical:
                return i
        raise KeyError(canonical)

    def column(self, name: FeatureName | str) -> np.ndarray:
        return self.values[:, self.column_index(name)]

    def subset(self, names: Sequence[FeatureName | str]) -> "FeatureMatrix":
        """New matrix with just the given columns (re-sorted canonically)."""
        canon = sorted(n if isinstance(n, str) else n.canonical() for n in names)
        idx = [self.column_index(c) for c in canon]
        return FeatureMatrix(
            feature_names=tuple(self.feature_names[i] for i in idx),
            values=self.values[:, idx].copy(),
            window_ids=self.window_ids.copy(),
            labels=self.labels,
        )


# ---------------------------------------------------------------------------
# Extraction
# ---------------------------------------------------------------------------

def _compute_rows(
    recording: Recording,
    windows: Sequence[Window],
    plan: Sequence[tuple[str, tuple]],
    n_cols: int,
) -> np.ndarray:
    """Rows for *windows*; plan maps each kind to its (calculator, params,
    column) entries so every channel is sliced once per window."""
    out = np.empty((len(windows), n_cols), dtype=np.float64)
    for r, window in enumerate(windows):
        for kind, entries in plan:
            x = slice_window(recording, window, kind)
            for calc_name, params, col in entries:
                out[r, col] = CALCULATORS[calc_name].func(x, **params)
    return out


_POOL_STATE: dict = {}


def _pool_init(recording: Recording, windows: tuple[Window, ...], plan, n_cols: int) -> None:
    _POOL_STATE["args"] = (recording, windows, plan, n_cols)


def _pool_task(chunk: tuple[int, int]) -> tuple[int, np.ndarray]:
    recording, windows, plan, n_cols = _POOL_STATE["args"]
    lo, hi = chunk
    return lo, _compute_rows(recording, windows[lo:hi], plan, n_cols)


def extract(
    windows: WindowSet,
    recording: Recording,
    settings: ExtractionSettings,
    workers: int = 1,
) -> FeatureMatrix:
    """Compute every configured feature for every window.

    One row per window in ``windows.windows``, one column per settings entry,
    columns in canonical-name order.  The output is independent of
    ``workers``; parameters are validated once up front so worker processes
    only run the numeric kernels.
    """
    for kind in settings.kinds:
        if kind not in recording.channels:
            raise UnknownKind(f"settings reference kind {kind!r} not in recording")

    features = settings.feature_names()
    # (kind -> [(calculator, validated params, column index)]) in column order
    plan_map: dict[str, list[tuple[str, dict, int]]] = {}
    for col, feature in enumerate(features):
        plan_map.setdefault(feature.kind, []).append(
            (feature.calculator, feature.param_dict(), col)
        )
    plan = tuple((kind, tuple(entries)) for kind, entries in plan_map.items())

    window_list = windows.windows
    n_rows = len(window_list)
    n_cols = len(features)
    if n_rows == 0 or n_cols == 0:
        values = np.empty((n_rows, n_cols), dtype=np.float64)
    elif workers <= 1:
        values = _compute_rows(recording, window_list, plan, n_cols)
    else:
        chunk_size = max(1, -(-n_rows // (workers * 4)))
        chunks = [(lo, min(lo + chunk_size, n_rows)) for lo in range(0, n_rows, chunk_size)]
        values = np.empty((n_rows, n_cols), dtype=np.float64)
        with ProcessPoolExecutor(
            max_workers=workers,
            initializer=_pool_init,
            initargs=(recording, window_list, plan, n_cols),
        ) as pool:
            for lo, block in pool.map(_pool_task, chunks):
                values[lo : lo + block.shape[0]] = block

    labels = windows.labels
    return FeatureMatrix(
        feature_names=features,
        values=values,
        window_ids=np.asarray([w.window_id for w in window_list], dtype=np.int64),
        labels=labels,
    )


# ---------------------------------------------------------------------------
# CSV round-trip
# ---------------------------------------------------------------------------

def save_matrix_csv(matrix: FeatureMatrix, stream: TextIO) -> None:
    """``window_id[,label],<canonical names...>`` with round-trip floats."""
    header = ["window_id"]
    if matrix.labels is not None:
        header.append("label")
    header.extend(matrix.canonical_names())
    stream.write(",".join(header) + "\n")
    for r in range(matrix.n_rows):
        cells = [str(int(matrix.window_ids[r]))]
        if matrix.labels is not None:
            cells.append(matrix.labels[r])
        cells.extend(render_float(v) for v in matrix.values[r])
        stream.write(",".join(cells) + "\n")


def save_matrix(matrix: FeatureMatrix, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        save_matrix_csv(matrix, fh)


def load_matrix_csv(stream: TextIO, known_kinds: set[str] | None = None) -> FeatureMatrix:
    header_line = stream.readline().rstrip("\n").rstrip("\r")
    if not header_line:
        raise DataError("feature matrix CSV is empty")
    header = header_line.split(",")
    if header[0] != "window_id":
        raise DataError("feature matrix CSV must start with a window_id column")
    has_labels = len(header) > 1 and header[1] == "label"
    name_start = 2 if has_labels else 1
    names = tuple(decode_feature_name(c, known_kinds) for c in header[name_start:])

    ids: list[int] = []
    labels: list[str] = []
    rows: list[list[float]] = []
    for line in stream:
        line = line.rstrip("\n").rstrip("\r")
        if not line:
            continue
        cells = line.split(",")
        if len(cells) != len(header):
            raise DataError(f"feature matrix row has {len(cells)} cells, expected {len(header)}")
        ids.append(int(cells[0]))
        if has_labels:
            labels.append(cells[1])
        rows.append([float(c) for c in cells[name_start:]])

    values = (
        np.asarray(rows, dtype=np.float64)
        if rows
        else np.empty((0, len(names)), dtype=np.float64)
    )
    return FeatureMatrix(
        feature_names=names,
        values=values,
        window_ids=np.asarray(ids, dtype=np.int64),
        labels=tuple(labels) if has_labels else None,
    )


def load_matrix(path: str, known_kinds: set[str] | None = None) -> FeatureMatrix:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        return load_matrix_csv(fh, known_kinds)
