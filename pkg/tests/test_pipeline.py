from pathlib import Path

import pytest

from imufresh.calculators import settings_from_feature_names
from imufresh.errors import ConfigError, FeatureSetMismatch, NothingSelected
from imufresh.extraction import extract
from imufresh.pipeline import (
    PipelineConfig,
    benchmark,
    load_config,
    predict,
    read_manifest,
    run_full_pipeline,
)
from imufresh.synth import synth_multi_activity, synth_walk_run
from imufresh.timeseries import (
    load_recording,
    save_labels,
    save_recording,
    segment_fixed,
)
from imufresh.virtual import VirtualSensorSpec


@pytest.fixture(scope="module")
def train_data(tmp_path_factory):
    root = tmp_path_factory.mktemp("synth")
    result = synth_walk_run(duration_s=120.0, sample_rate_hz=50.0, seed=7)
    rec_path = root / "rec.csv"
    lab_path = root / "labels.csv"
    save_recording(result.recording, str(rec_path))
    save_labels(result.labels, str(lab_path))
    return rec_path, lab_path


def _config(train_data, out_dir, **kw):
    rec_path, lab_path = train_data
    defaults = dict(
        recording=str(rec_path),
        labels=str(lab_path),
        output_dir=str(out_dir),
        window_seconds=4.0,
        q=0.05,
        top_k=20,
        repeats=2,
        seed=11,
        n_trees=50,
        auto_pair=("_l", "_r"),
    )
    defaults.update(kw)
    return PipelineConfig(**defaults)


@pytest.fixture(scope="module")
def run_result(train_data, tmp_path_factory):
    out = tmp_path_factory.mktemp("artifacts")
    config = _config(train_data, out)
    return run_full_pipeline(config)


class TestSynth:
    def test_walk_run_shape(self):
        result = synth_walk_run(duration_s=40.0, sample_rate_hz=50.0, seed=1)
        assert result.recording.length == 2000
        assert len(result.recording.channels) == 6
        assert {lab for _, _, lab in result.labels} == {"walk", "run"}

    def test_blocks_tile_duration_on_window_multiples(self):
        result = synth_walk_run(duration_s=48.0, sample_rate_hz=50.0, seed=2)
        assert result.labels[0][0] == 0.0
        assert result.labels[-1][1] == 48.0
        for (_, end, _), (start, _, _) in zip(result.labels, result.labels[1:]):
            assert start == end
        assert all((end - start) % 4.0 == 0.0 for start, end, _ in result.labels)

    def test_deterministic(self):
        a = synth_walk_run(duration_s=24.0, seed=5)
        b = synth_walk_run(duration_s=24.0, seed=5)
        assert a.recording == b.recording
        assert a.labels == b.labels

    def test_seed_changes_noise(self):
        a = synth_walk_run(duration_s=24.0, seed=5)
        b = synth_walk_run(duration_s=24.0, seed=6)
        assert a.recording != b.recording

    def test_multi_activity_covers_all_four(self):
        result = synth_multi_activity(person=2, seed=3)
        assert {lab for _, _, lab in result.labels} == {"lay", "pushup", "run", "walk"}

    def test_persons_differ(self):
        a = synth_multi_activity(person=0, seed=3)
        b = synth_multi_activity(person=1, seed=3)
        assert a.recording != b.recording


class TestConfig:
    def test_parse_and_paths_relative_to_file(self, tmp_path):
        (tmp_path / "rec.csv").write_text("time,kind,value\n0.0,a,1.0\n0.01,a,2.0\n")
        cfg_path = tmp_path / "pipe.cfg"
        cfg_path.write_text(
            "recording = rec.csv\n"
            "output_dir = out\n"
            "window_seconds = 2.5\n"
            "q = 0.01\n"
            "top_k = 5\n"
            "virtual_sensor = abs_diff a b c\n"
            "auto_pair = _l _r\n"
        )
        config = load_config(str(cfg_path))
        assert config.recording == str(tmp_path / "rec.csv")
        assert config.window_seconds == 2.5
        assert config.q == 0.01
        assert len(config.virtual_sensors) == 1
        assert config.auto_pair == ("_l", "_r")

    def test_overrides_win(self, tmp_path):
        cfg_path = tmp_path / "pipe.cfg"
        cfg_path.write_text("recording = r.csv\noutput_dir = out\nq = 0.01\n")
        config = load_config(str(cfg_path), {"q": 0.2, "seed": 9})
        assert config.q == 0.2
        assert config.seed == 9

    def test_unknown_key(self, tmp_path):
        cfg_path = tmp_path / "pipe.cfg"
        cfg_path.write_text("recording = r.csv\noutput_dir = out\nbogus = 1\n")
        with pytest.raises(ConfigError):
            load_config(str(cfg_path))

    def test_missing_required(self, tmp_path):
        cfg_path = tmp_path / "pipe.cfg"
        cfg_path.write_text("output_dir = out\n")
        with pytest.raises(ConfigError):
            load_config(str(cfg_path))

    def test_invalid_q(self):
        with pytest.raises(ConfigError):
            PipelineConfig(recording="r", output_dir="o", q=1.5)


class TestFullRun:
    def test_artifacts_exist(self, run_result):
        for path in (
            run_result.engineered_path,
            run_result.matrix_path,
            run_result.selection_path,
            run_result.importance_path,
            run_result.settings_path,
            run_result.model_path,
            run_result.manifest_path,
        ):
            assert Path(path).exists(), path

    def test_selected_at_least_one(self, run_result):
        assert len(run_result.report.selected) >= 1

    def test_manifest_counts(self, run_result):
        manifest = read_manifest(run_result.manifest_path)
        assert manifest["n_labeled_windows"] == [str(run_result.matrix.n_rows)]
        assert manifest["n_features_full"] == [str(run_result.matrix.n_cols)]
        assert manifest["n_selected"] == [str(len(run_result.report.selected))]
        assert int(manifest["top_k_effective"][0]) == len(run_result.top_features)
        assert len(manifest["virtual_sensor"]) == 3
        assert "classes" in manifest

    def test_specialized_cv_recorded(self, run_result):
        manifest = read_manifest(run_result.manifest_path)
        assert float(manifest["specialized_cv_accuracy"][0]) == run_result.cv.mean_accuracy

    def test_ranking_restricted_to_selected(self, run_result):
        selected = set(run_result.report.selected_canonical())
        assert {f.canonical() for f, _ in run_result.ranked} <= selected

    def test_restriction_consistency_bitwise(self, run_result):
        """Restricted re-extraction must reproduce the full-matrix columns."""
        engineered = load_recording(run_result.engineered_path)
        windows = segment_fixed(
            engineered, run_result.config.window_seconds,
            labels=None,
        )
        settings = settings_from_feature_names(
            [f.canonical() for f in run_result.top_features]
        )
        restricted = extract(windows, engineered, settings)
        full_subset = run_result.matrix.subset(run_result.top_features)
        # prediction-mode windows include unlabeled ones; align on window id
        id_to_row = {wid: i for i, wid in enumerate(restricted.window_ids)}
        rows = [id_to_row[wid] for wid in full_subset.window_ids]
        assert restricted.values[rows].tobytes() == full_subset.values.tobytes()

    def test_nothing_selected_halts_after_step3(self, train_data, tmp_path):
        config = _config(train_data, tmp_path / "strict", q=1e-9, repeats=1)
        with pytest.raises(NothingSelected):
            run_full_pipeline(config)
        assert (tmp_path / "strict" / "selection.csv").exists()
        assert not (tmp_path / "strict" / "model.txt").exists()

    def test_top_k_clamped(self, train_data, tmp_path):
        config = _config(
            train_data, tmp_path / "clamp",
            settings_file=None, top_k=10**6, repeats=1, n_trees=20,
        )
        result = run_full_pipeline(config)
        assert len(result.top_features) <= result.matrix.n_cols
        manifest = read_manifest(result.manifest_path)
        assert int(manifest["top_k_effective"][0]) == len(result.top_features)


class TestPredict:
    def test_training_recording_accuracy_bounds_cv(self, run_result, train_data):
        rec_path, lab_path = train_data
        timeline = predict(
            run_result.model_path,
            run_result.settings_path,
            str(rec_path),
            run_result.manifest_path,
            labels_path=str(lab_path),
        )
        accuracy = timeline.accuracy()
        assert accuracy is not None
        assert accuracy >= run_result.cv.mean_accuracy

    def test_holdout_with_drift(self, run_result, tmp_path):
        holdout = synth_walk_run(duration_s=48.0, sample_rate_hz=50.0, seed=99, drift=1.03)
        rec = tmp_path / "hold.csv"
        lab = tmp_path / "hold_labels.csv"
        save_recording(holdout.recording, str(rec))
        save_labels(holdout.labels, str(lab))
        out = tmp_path / "timeline.csv"
        timeline = predict(
            run_result.model_path,
            run_result.settings_path,
            str(rec),
            run_result.manifest_path,
            labels_path=str(lab),
            out_path=str(out),
        )
        assert timeline.accuracy() >= 0.85
        lines = out.read_text().splitlines()
        assert lines[0] == (
            "window_id,start_s,end_s,prob_run,prob_walk,predicted,true_label,misclassified"
        )
        assert len(lines) == len(timeline.rows) + 1

    def test_probabilities_sum_to_one(self, run_result, train_data):
        rec_path, _ = train_data
        timeline = predict(
            run_result.model_path,
            run_result.settings_path,
            str(rec_path),
            run_result.manifest_path,
        )
        for row in timeline.rows:
            assert abs(sum(row.probabilities) - 1.0) <= 1e-9
            assert row.true_label is None

    def test_feature_set_mismatch(self, run_result, train_data, tmp_path):
        rec_path, _ = train_data
        wrong = tmp_path / "wrong_settings.txt"
        wrong.write_text("accel_x_l__minimum\n")
        with pytest.raises(FeatureSetMismatch):
            predict(
                run_result.model_path,
                str(wrong),
                str(rec_path),
                run_result.manifest_path,
            )

    def test_windows_ordered_by_time(self, run_result, train_data):
        rec_path, _ = train_data
        timeline = predict(
            run_result.model_path,
            run_result.settings_path,
            str(rec_path),
            run_result.manifest_path,
        )
        starts = [r.start_s for r in timeline.rows]
        assert starts == sorted(starts)


class TestDeterminism:
    def test_identical_runs_bitwise(self, train_data, tmp_path):
        config_a = _config(train_data, tmp_path / "a", repeats=1, n_trees=20)
        config_b = _config(train_data, tmp_path / "b", repeats=1, n_trees=20)
        ra = run_full_pipeline(config_a)
        rb = run_full_pipeline(config_b)
        assert Path(ra.model_path).read_text() == Path(rb.model_path).read_text()
        assert Path(ra.selection_path).read_text() == Path(rb.selection_path).read_text()
        assert Path(ra.settings_path).read_text() == Path(rb.settings_path).read_text()

        def stable_manifest(path):
            return [
                line for line in Path(path).read_text().splitlines()
                if not line.startswith("time_")
            ]

        assert stable_manifest(ra.manifest_path) == stable_manifest(rb.manifest_path)


class TestBenchmark:
    def test_report_structure(self, train_data, tmp_path):
        rec_path, lab_path = train_data
        settings_path = tmp_path / "tiny_settings.txt"
        settings_path.write_text("accel_x_l__minimum\naccel_x_r__variance\n")
        config = PipelineConfig(
            recording=str(rec_path),
            labels=str(lab_path),
            output_dir=str(tmp_path / "bench"),
            settings_file=str(settings_path),
            workers=2,
        )
        report = benchmark(config)
        stages = dict(report.stage_seconds)
        assert {"ingest", "virtual_sensors", "segment"} <= set(stages)
        assert [w for w, _, _ in report.extraction] == [1, 2]
        text = report.to_text()
        assert "rows/s" in text

    def test_empty_settings_near_zero_extraction(self, train_data, tmp_path):
        rec_path, lab_path = train_data
        settings_path = tmp_path / "empty_settings.txt"
        settings_path.write_text("")
        config = PipelineConfig(
            recording=str(rec_path),
            labels=str(lab_path),
            output_dir=str(tmp_path / "bench0"),
            settings_file=str(settings_path),
        )
        report = benchmark(config, worker_counts=[1])
        assert report.extraction[0][1] < 0.5


class TestExplicitVirtualSensors:
    def test_derivative_spec_flows_through_run_and_predict(self, train_data, tmp_path):
        rec_path, _ = train_data
        settings_path = tmp_path / "restricted.txt"
        settings_path.write_text("accel_x_l_rate__variance\naccel_x_l__variance\n")
        config = _config(
            train_data, tmp_path / "vs",
            auto_pair=None,
            virtual_sensors=(
                VirtualSensorSpec("derivative", ("accel_x_l",), "accel_x_l_rate"),
            ),
            settings_file=str(settings_path),
            repeats=1, n_trees=20,
        )
        result = run_full_pipeline(config)
        engineered = load_recording(result.engineered_path)
        assert "accel_x_l_rate" in engineered.channels
        # predict must replay the derivative spec recorded in the manifest
        timeline = predict(
            result.model_path, result.settings_path, str(rec_path), result.manifest_path
        )
        assert len(timeline.rows) == 30
