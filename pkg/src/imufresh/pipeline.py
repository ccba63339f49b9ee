"""End-to-end workflow orchestration and artifact persistence.

:func:`run_full_pipeline` executes the five steps in order, persisting an
artifact after each one:

1. ingest + virtual sensors      -> ``engineered.csv``
2. segmentation + full extraction -> ``features_full.csv``
3. FDR selection                  -> ``selection.csv``
4. importance ranking over the selected columns, top-k cut
                                  -> ``importance.csv``, ``settings_topk.txt``
5. specialized refit on the top-k columns
                                  -> ``model.txt``, ``manifest.txt``

The manifest records seeds, counts, the virtual-sensor specs, and per-step
wall times; :func:`predict` replays the manifest's virtual sensors so a
deployed model regenerates exactly the channels its features reference.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence, TextIO

import numpy as np

from . import __version__
from .calculators import (
    default_settings,
    read_settings_file,
    settings_from_feature_names,
    write_settings_file,
)
from .errors import (
    ConfigError,
    DataError,
    FeatureSetMismatch,
    NothingSelected,
)
from .extraction import FeatureMatrix, extract, save_matrix
from .forest import (
    CVReport,
    ForestModel,
    ForestParams,
    aggregate_importances,
    cross_validate,
    load_model_file,
    predict_proba,
    save_model_file,
    top_k_features,
    train_forest,
)
from .names import FeatureName
from .selection import SelectionReport, save_report, select_features
from .timeseries import (
    Recording,
    load_labels,
    load_recording,
    render_float,
    resolve_label,
    save_recording,
    segment_fixed,
)
from .virtual import VirtualSensorSpec, apply_virtual_sensors, default_pairing

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PipelineConfig:
    """Everything a full run needs; parsed from key=value files + CLI flags."""

    recording: str
    output_dir: str
    labels: str | None = None
    window_seconds: float = 4.0
    q: float = 0.05
    top_k: int = 20
    repeats: int = 100
    seed: int = 0
    workers: int = 1
    n_trees: int = 100
    min_leaf: int = 1
    max_depth: int | None = None
    mtry: int | None = None
    cv_folds: int = 10
    virtual_sensors: tuple[VirtualSensorSpec, ...] = ()
    auto_pair: tuple[str, str] | None = None
    settings_file: str | None = None

    def __post_init__(self) -> None:
        if not (0.0 < self.q < 1.0):
            raise ConfigError(f"q must be in (0, 1), got {self.q}")
        if self.window_seconds <= 0:
            raise ConfigError(f"window_seconds must be positive, got {self.window_seconds}")
        if self.top_k < 0:
            raise ConfigError(f"top_k must be >= 0, got {self.top_k}")
        if self.repeats < 1:
            raise ConfigError(f"repeats must be >= 1, got {self.repeats}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        if self.cv_folds < 2:
            raise ConfigError(f"cv_folds must be >= 2, got {self.cv_folds}")

    def forest_params(self) -> ForestParams:
        return ForestParams(
            n_trees=self.n_trees,
            mtry=self.mtry,
            min_leaf=self.min_leaf,
            max_depth=self.max_depth,
            seed=self.seed,
        )


_INT_KEYS = {"top_k", "repeats", "seed", "workers", "n_trees", "min_leaf",
             "max_depth", "mtry", "cv_folds"}
_FLOAT_KEYS = {"window_seconds", "q"}
_PATH_KEYS = {"recording", "labels", "output_dir", "settings_file"}


def load_config(path: str, overrides: dict | None = None) -> PipelineConfig:
    """Parse a flat ``key = value`` config file; *overrides* win over the file.

    Repeated ``virtual_sensor`` keys accumulate (one spec per line, e.g.
    ``abs_diff accel_x_l accel_x_r accel_x_diff``); ``auto_pair`` takes two
    suffixes (``_l _r``).  Relative paths resolve against the config file's
    directory.
    """
    base = Path(path).resolve().parent
    raw: dict[str, object] = {}
    specs: list[VirtualSensorSpec] = []
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    for lineno, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        key, sep, value = stripped.partition("=")
        if not sep:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key = key.strip()
        value = value.strip()
        if key == "virtual_sensor":
            specs.append(VirtualSensorSpec.from_line(value))
            continue
        if key == "auto_pair":
            parts = value.split()
            if len(parts) != 2:
                raise ConfigError(f"{path}:{lineno}: auto_pair needs two suffixes")
            raw["auto_pair"] = (parts[0], parts[1])
            continue
        if key in _INT_KEYS:
            try:
                raw[key] = int(value)
            except ValueError:
                raise ConfigError(f"{path}:{lineno}: {key} must be an integer") from None
        elif key in _FLOAT_KEYS:
            try:
                raw[key] = float(value)
            except ValueError:
                raise ConfigError(f"{path}:{lineno}: {key} must be a number") from None
        elif key in _PATH_KEYS:
            raw[key] = str((base / value).resolve()) if value else None
        else:
            raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
    raw["virtual_sensors"] = tuple(specs)
    if overrides:
        raw.update({k: v for k, v in overrides.items() if v is not None})
    if "recording" not in raw:
        raise ConfigError(f"{path}: missing required key 'recording'")
    if "output_dir" not in raw:
        raise ConfigError(f"{path}: missing required key 'output_dir'")
    try:
        return PipelineConfig(**raw)  # type: ignore[arg-type]
    except TypeError as exc:
        raise ConfigError(f"{path}: {exc}") from None


# ---------------------------------------------------------------------------
# Manifest
# ---------------------------------------------------------------------------

def write_manifest(entries: Sequence[tuple[str, str]], stream: TextIO) -> None:
    for key, value in entries:
        stream.write(f"{key} = {value}\n")


def read_manifest(path: str) -> dict[str, list[str]]:
    out: dict[str, list[str]] = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DataError(f"cannot read manifest {path}: {exc}") from None
    for line in lines:
        stripped = line.strip()
        if not stripped:
            continue
        key, sep, value = stripped.partition("=")
        if not sep:
            raise DataError(f"malformed manifest line: {line!r}")
        out.setdefault(key.strip(), []).append(value.strip())
    return out


def manifest_value(manifest: dict[str, list[str]], key: str) -> str:
    values = manifest.get(key)
    if not values:
        raise DataError(f"manifest is missing key {key!r}")
    return values[0]


# ---------------------------------------------------------------------------
# Full pipeline
# ---------------------------------------------------------------------------

@dataclass
class PipelineResult:
    """Artifact bundle produced by one full run."""

    config: PipelineConfig
    engineered_path: str
    matrix_path: str
    selection_path: str
    importance_path: str
    settings_path: str
    model_path: str
    manifest_path: str
    matrix: FeatureMatrix
    report: SelectionReport
    ranked: list[tuple[FeatureName, float]]
    top_features: list[FeatureName]
    model: ForestModel
    cv: CVReport
    step_seconds: dict[str, float] = field(default_factory=dict)


def _resolve_specs(config: PipelineConfig, recording: Recording) -> list[VirtualSensorSpec]:
    specs: list[VirtualSensorSpec] = []
    if config.auto_pair is not None:
        specs.extend(default_pairing(recording, config.auto_pair[0], config.auto_pair[1]))
    specs.extend(config.virtual_sensors)
    return specs


def run_full_pipeline(config: PipelineConfig) -> PipelineResult:
    """Execute all five steps, persisting after each; see the module docs.

    Raises :class:`NothingSelected` when no feature survives FDR selection
    (earlier artifacts stay on disk).
    """
    if config.labels is None:
        raise ConfigError("a labels file is required for a training run")
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    timings: dict[str, float] = {}
    started = time.perf_counter()

    # Step 1: ingest + virtual sensors.
    recording = load_recording(config.recording)
    intervals = load_labels(config.labels)
    specs = _resolve_specs(config, recording)
    engineered = apply_virtual_sensors(recording, specs)
    engineered_path = str(out / "engineered.csv")
    save_recording(engineered, engineered_path)
    timings["engineer"] = time.perf_counter() - started
    logger.info(
        "step 1: %d physical + %d virtual channels", len(recording.channels), len(specs)
    )

    # Step 2: segmentation + exhaustive extraction.
    t1 = time.perf_counter()
    windows = segment_fixed(engineered, config.window_seconds, intervals)
    if not windows.windows:
        raise DataError("no labeled windows; check the label intervals")
    if config.settings_file is not None:
        with open(config.settings_file, "r", encoding="utf-8") as fh:
            settings = read_settings_file(fh, set(engineered.channels))
    else:
        settings = default_settings(engineered.channels)
    matrix = extract(windows, engineered, settings, workers=config.workers)
    matrix_path = str(out / "features_full.csv")
    save_matrix(matrix, matrix_path)
    timings["extract"] = time.perf_counter() - t1
    logger.info(
        "step 2: %d labeled windows x %d features (%d dropped as unlabeled)",
        matrix.n_rows, matrix.n_cols, len(windows.unlabeled),
    )

    # Step 3: FRESH selection at FDR q.
    t2 = time.perf_counter()
    labels = list(windows.labels or ())
    report = select_features(matrix, labels, q=config.q, workers=config.workers)
    selection_path = str(out / "selection.csv")
    save_report(report, selection_path)
    timings["select"] = time.perf_counter() - t2
    logger.info("step 3: %d of %d features selected at q=%s",
                len(report.selected), matrix.n_cols, config.q)
    if not report.selected:
        raise NothingSelected(
            f"no features passed FDR selection at q={config.q}; artifacts up to "
            f"{selection_path} were written"
        )

    # Step 4: importance ranking over the selected columns only.
    t3 = time.perf_counter()
    selected_matrix = matrix.subset(report.selected)
    nan_free = [
        f for f in selected_matrix.feature_names
        if not np.any(np.isnan(selected_matrix.column(f)))
    ]
    dropped = selected_matrix.n_cols - len(nan_free)
    if dropped:
        logger.info("step 4: dropping %d selected columns containing NaN", dropped)
    if not nan_free:
        raise NothingSelected("every selected feature column contains NaN")
    usable = selected_matrix.subset(nan_free)
    ranked = aggregate_importances(usable, labels, config.repeats, config.forest_params())
    top_k = config.top_k
    if top_k > len(ranked):
        logger.warning("top_k=%d exceeds %d usable features; clamping", top_k, len(ranked))
        top_k = len(ranked)
    top = top_k_features(ranked, top_k)
    importance_path = str(out / "importance.csv")
    with open(importance_path, "w", encoding="utf-8", newline="") as fh:
        fh.write("feature,mean_importance\n")
        for feature, importance in ranked:
            fh.write(f"{feature.canonical()},{render_float(importance)}\n")
    settings_path = str(out / "settings_topk.txt")
    restricted = settings_from_feature_names([f.canonical() for f in top])
    with open(settings_path, "w", encoding="utf-8", newline="") as fh:
        write_settings_file(restricted, fh)
    timings["rank"] = time.perf_counter() - t3
    logger.info("step 4: top %d of %d usable features kept", top_k, len(ranked))

    # Step 5: specialized model on the top-k columns.
    t4 = time.perf_counter()
    specialized = matrix.subset(top)
    cv_folds = min(config.cv_folds, specialized.n_rows)
    cv = cross_validate(specialized, labels, cv_folds, config.forest_params())
    model = train_forest(specialized, labels, config.forest_params())
    model_path = str(out / "model.txt")
    save_model_file(model, model_path)
    timings["fit"] = time.perf_counter() - t4
    logger.info("step 5: specialized %d-fold CV accuracy %.4f", cv_folds, cv.mean_accuracy)

    manifest_path = str(out / "manifest.txt")
    entries: list[tuple[str, str]] = [
        ("tool_version", __version__),
        ("seed", str(config.seed)),
        ("q", render_float(config.q)),
        ("window_seconds", render_float(config.window_seconds)),
        ("workers", str(config.workers)),
        ("n_trees", str(config.n_trees)),
        ("repeats", str(config.repeats)),
        ("top_k", str(config.top_k)),
        ("top_k_effective", str(top_k)),
        ("n_windows", str(len(windows.windows) + len(windows.unlabeled))),
        ("n_labeled_windows", str(matrix.n_rows)),
        ("n_kinds", str(len(engineered.channels))),
        ("n_features_full", str(matrix.n_cols)),
        ("n_selected", str(len(report.selected))),
        ("n_selected_usable", str(len(nan_free))),
        ("classes", ",".join(sorted(set(labels)))),
        ("specialized_cv_folds", str(cv_folds)),
        ("specialized_cv_accuracy", render_float(cv.mean_accuracy)),
    ]
    entries.extend(("virtual_sensor", spec.to_line()) for spec in specs)
    entries.extend((f"time_{name}_seconds", render_float(seconds))
                   for name, seconds in timings.items())
    with open(manifest_path, "w", encoding="utf-8", newline="") as fh:
        write_manifest(entries, fh)

    return PipelineResult(
        config=config,
        engineered_path=engineered_path,
        matrix_path=matrix_path,
        selection_path=selection_path,
        importance_path=importance_path,
        settings_path=settings_path,
        model_path=model_path,
        manifest_path=manifest_path,
        matrix=matrix,
        report=report,
        ranked=ranked,
        top_features=top,
        model=model,
        cv=cv,
        step_seconds=timings,
    )


# ---------------------------------------------------------------------------
# Deployment: restricted extraction + prediction
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TimelineRow:
    window_id: int
    start_s: float
    end_s: float
    probabilities: tuple[float, ...]
    predicted: str
    true_label: str | None = None


@dataclass(frozen=True)
class PredictionTimeline:
    classes: tuple[str, ...]
    rows: tuple[TimelineRow, ...]

    def accuracy(self) -> float | None:
        """Accuracy over rows with a known true label; None if there are none."""
        scored = [(r.predicted == r.true_label) for r in self.rows if r.true_label is not None]
        if not scored:
            return None
        return float(np.mean(scored))

    def misclassified_ids(self) -> list[int]:
        return [
            r.window_id
            for r in self.rows
            if r.true_label is not None and r.predicted != r.true_label
        ]


def save_timeline(timeline: PredictionTimeline, stream: TextIO) -> None:
    header = ["window_id", "start_s", "end_s"]
    header.extend(f"prob_{c}" for c in timeline.classes)
    header.extend(["predicted", "true_label", "misclassified"])
    stream.write(",".join(header) + "\n")
    for row in timeline.rows:
        cells = [str(row.window_id), render_float(row.start_s), render_float(row.end_s)]
        cells.extend(render_float(p) for p in row.probabilities)
        cells.append(row.predicted)
        if row.true_label is None:
            cells.extend(["", ""])
        else:
            cells.extend([row.true_label, str(row.predicted != row.true_label)])
        stream.write(",".join(cells) + "\n")


def predict(
    model_path: str,
    settings_path: str,
    recording_path: str,
    manifest_path: str,
    window_seconds: float | None = None,
    labels_path: str | None = None,
    out_path: str | None = None,
    workers: int = 1,
) -> PredictionTimeline:
    """Deployment path: restricted extraction driven by parsed feature names.

    Replays the manifest's virtual-sensor specs on the new recording,
    segments it (unlabeled), extracts exactly the model's features, and
    predicts per window.  When a labels file is supplied, true labels and
    misclassification flags are attached to every window whose span lies in
    a label interval.
    """
    manifest = read_manifest(manifest_path)
    if window_seconds is None:
        window_seconds = float(manifest_value(manifest, "window_seconds"))
    specs = [VirtualSensorSpec.from_line(line) for line in manifest.get("virtual_sensor", [])]

    model = load_model_file(model_path)
    recording = load_recording(recording_path)
    engineered = apply_virtual_sensors(recording, specs)
    with open(settings_path, "r", encoding="utf-8") as fh:
        settings = read_settings_file(fh, set(engineered.channels))
    if settings.canonical_names() != tuple(f.canonical() for f in model.feature_names):
        raise FeatureSetMismatch(
            "restricted settings do not match the model's feature list"
        )

    windows = segment_fixed(engineered, window_seconds, labels=None)
    matrix = extract(windows, engineered, settings, workers=workers)
    probs = predict_proba(model, matrix.values)
    predicted = [model.classes[i] for i in np.argmax(probs, axis=1)]

    intervals = load_labels(labels_path) if labels_path else []
    rows = []
    for i, window in enumerate(windows.windows):
        start_s, end_s = windows.window_times(window)
        true = resolve_label(start_s, end_s, intervals) if intervals else None
        rows.append(
            TimelineRow(
                window_id=window.window_id,
                start_s=start_s,
                end_s=end_s,
                probabilities=tuple(float(p) for p in probs[i]),
                predicted=predicted[i],
                true_label=true,
            )
        )
    timeline = PredictionTimeline(classes=model.classes, rows=tuple(rows))
    if out_path is not None:
        with open(out_path, "w", encoding="utf-8", newline="") as fh:
            save_timeline(timeline, fh)
    return timeline


# ---------------------------------------------------------------------------
# Benchmark
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BenchmarkReport:
    stage_seconds: tuple[tuple[str, float], ...]
    extraction: tuple[tuple[int, float, float], ...]  # (workers, seconds, rows/s)
    predict_seconds: float | None = None

    def to_text(self) -> str:
        lines = ["stage timings:"]
        lines.extend(f"  {name:<24} {seconds:9.3f} s" for name, seconds in self.stage_seconds)
        lines.append("extraction throughput:")
        for workers, seconds, rate in self.extraction:
            lines.append(f"  workers={workers:<3} {seconds:9.3f} s   {rate:12.1f} rows/s")
        if self.predict_seconds is not None:
            lines.append(f"restricted predict: {self.predict_seconds:.3f} s")
        return "\n".join(lines)


def benchmark(
    config: PipelineConfig,
    worker_counts: Sequence[int] | None = None,
    artifacts_dir: str | None = None,
) -> BenchmarkReport:
    """Wall-clock the data path: ingest, engineer, segment, extract.

    Extraction is timed once per entry of *worker_counts* (default: 1 and
    the configured worker count).  With *artifacts_dir* pointing at a
    completed run, the full restricted predict path is timed as well.
    """
    if worker_counts is None:
        worker_counts = sorted({1, config.workers})
    stages: list[tuple[str, float]] = []

    t = time.perf_counter()
    recording = load_recording(config.recording)
    stages.append(("ingest", time.perf_counter() - t))

    t = time.perf_counter()
    engineered = apply_virtual_sensors(recording, _resolve_specs(config, recording))
    stages.append(("virtual_sensors", time.perf_counter() - t))

    t = time.perf_counter()
    intervals = load_labels(config.labels) if config.labels else None
    windows = segment_fixed(engineered, config.window_seconds, intervals)
    stages.append(("segment", time.perf_counter() - t))

    if config.settings_file is not None:
        with open(config.settings_file, "r", encoding="utf-8") as fh:
            settings = read_settings_file(fh, set(engineered.channels))
    else:
        settings = default_settings(engineered.channels)

    extraction: list[tuple[int, float, float]] = []
    for workers in worker_counts:
        t = time.perf_counter()
        matrix = extract(windows, engineered, settings, workers=workers)
        seconds = time.perf_counter() - t
        rate = matrix.n_rows / seconds if seconds > 0 else float("inf")
        extraction.append((workers, seconds, rate))

    predict_seconds = None
    if artifacts_dir is not None:
        art = Path(artifacts_dir)
        t = time.perf_counter()
        predict(
            model_path=str(art / "model.txt"),
            settings_path=str(art / "settings_topk.txt"),
            recording_path=config.recording,
            manifest_path=str(art / "manifest.txt"),
            window_seconds=config.window_seconds,
            workers=config.workers,
        )
        predict_seconds = time.perf_counter() - t

    return BenchmarkReport(
        stage_seconds=tuple(stages),
        extraction=tuple(extraction),
        predict_seconds=predict_seconds,
    )
