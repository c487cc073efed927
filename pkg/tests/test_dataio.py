import json
import logging
import os

import numpy as np
import pytest

from survbv import (
    DatasetSchema,
    DecompositionReport,
    EmptyAfterFiltering,
    ExponentialBaseline,
    ParseError,
    SchemaError,
    SurvivalDataset,
    SyntheticSpec,
    WeibullBaseline,
    concordance_index,
    dataset_hash,
    fit_cox,
    generate_synthetic,
    load_csv,
    read_curves,
    write_curves,
    write_dataset,
)
from survbv.harness import CoxPHAlgorithm, CurveCell, LearningCurve, ProtocolConfig
from conftest import make_survival_data

REPO_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def write_lines(path, lines):
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return str(path)


class TestLoadCsv:
    def test_bundled_clinical_table_shape(self):
        data = load_csv(os.path.join(REPO_ROOT, "data", "pbc_like.csv"))
        assert (data.n, data.p) == (228, 17)

    def test_bundled_expression_table_shape(self):
        data = load_csv(os.path.join(REPO_ROOT, "data", "lymphoma_like.csv"))
        assert (data.n, data.p) == (240, 7)

    def test_missing_cell_drops_row_with_log(self, tmp_path, caplog):
        path = write_lines(tmp_path / "d.csv", [
            "time,status,x1",
            "1.0,1,0.5",
            "2.0,0,",
            "3.0,1,1.5",
        ])
        with caplog.at_level(logging.INFO, logger="survbv.dataio"):
            data = load_csv(path)
        assert data.n == 2
        assert any("dropped 1 row" in m for m in caplog.messages)

    def test_explicit_feature_subset(self, tmp_path):
        path = write_lines(tmp_path / "d.csv", [
            "time,status,a,b,c",
            "1.0,1,1,2,3",
            "2.0,0,4,5,6",
        ])
        data = load_csv(path, DatasetSchema(feature_columns=("c", "a")))
        assert data.feature_names == ("c", "a")
        np.testing.assert_array_equal(data.covariates, [[3, 1], [6, 4]])

    def test_missing_column_rejected(self, tmp_path):
        path = write_lines(tmp_path / "d.csv", ["time,x1", "1.0,1"])
        with pytest.raises(SchemaError):
            load_csv(path)

    def test_bad_event_value_rejected(self, tmp_path):
        path = write_lines(tmp_path / "d.csv", ["time,status,x1", "1.0,2,0.5"])
        with pytest.raises(SchemaError):
            load_csv(path)

    def test_nonpositive_time_rejected(self, tmp_path):
        path = write_lines(tmp_path / "d.csv", ["time,status,x1", "0.0,1,0.5"])
        with pytest.raises(SchemaError):
            load_csv(path)

    def test_garbage_number_reports_row_and_column(self, tmp_path):
        path = write_lines(tmp_path / "d.csv", ["time,status,x1", "1.0,1,abc"])
        with pytest.raises(ParseError, match="row 2.*x1"):
            load_csv(path)

    def test_ragged_row_rejected(self, tmp_path):
        path = write_lines(tmp_path / "d.csv", ["time,status,x1", "1.0,1"])
        with pytest.raises(ParseError):
            load_csv(path)

    def test_all_rows_filtered(self, tmp_path):
        path = write_lines(tmp_path / "d.csv", ["time,status,x1", "1.0,1,nan"])
        with pytest.raises(EmptyAfterFiltering):
            load_csv(path)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("", encoding="utf-8")
        with pytest.raises(ParseError):
            load_csv(str(path))

    def test_schema_overlap_rejected(self):
        with pytest.raises(SchemaError):
            DatasetSchema(feature_columns=("time", "a"))


class TestRoundTrip:
    def test_write_then_load_is_exact(self, tmp_path, rng):
        data = make_survival_data(rng, 25, 4, censor_rate=0.4)
        path = str(tmp_path / "round.csv")
        write_dataset(data, path)
        back = load_csv(path)
        np.testing.assert_array_equal(back.covariates, data.covariates)
        np.testing.assert_array_equal(back.times, data.times)
        np.testing.assert_array_equal(back.events, data.events)
        assert back.feature_names == data.feature_names


class TestSyntheticGenerator:
    def test_null_effect_scores_are_constant(self):
        data, truth = generate_synthetic(
            SyntheticSpec(n=2000, true_beta=(0.0, 0.0), censoring_rate_target=0.0, seed=3)
        )
        # a zero coefficient vector scores every subject identically
        assert concordance_index(truth.linear_predictors, data) == 0.5

    def test_informative_truth_beats_chance(self):
        data, truth = generate_synthetic(
            SyntheticSpec(n=2000, true_beta=(1.0, -1.0), censoring_rate_target=0.0, seed=4)
        )
        assert concordance_index(truth.linear_predictors, data) > 0.55

    def test_zero_censoring_target(self):
        data, truth = generate_synthetic(
            SyntheticSpec(n=500, true_beta=(0.5,), censoring_rate_target=0.0, seed=5)
        )
        assert data.n_events == 500
        assert truth.realized_censoring_rate == 0.0

    def test_censoring_calibration(self):
        for target in (0.2, 0.5):
            _, truth = generate_synthetic(
                SyntheticSpec(n=2000, true_beta=(1.0, -1.0, 0.0),
                              censoring_rate_target=target, seed=6)
            )
            assert abs(truth.realized_censoring_rate - target) <= 0.05

    def test_weibull_baseline(self):
        data, truth = generate_synthetic(
            SyntheticSpec(n=800, true_beta=(0.8,), baseline=WeibullBaseline(shape=1.7, scale=2.0),
                          censoring_rate_target=0.3, seed=7)
        )
        assert abs(truth.realized_censoring_rate - 0.3) <= 0.07
        assert concordance_index(truth.linear_predictors, data) > 0.55

    def test_ground_truth_recovery(self):
        data, truth = generate_synthetic(
            SyntheticSpec(n=2000, true_beta=(1.0, -1.0, 0.0),
                          censoring_rate_target=0.3, seed=8)
        )
        model = fit_cox(data)
        assert np.all(np.abs(model.beta - truth.true_beta) <= 0.1)

    def test_determinism(self):
        spec = SyntheticSpec(n=100, true_beta=(1.0,), censoring_rate_target=0.3, seed=9)
        d1, _ = generate_synthetic(spec)
        d2, _ = generate_synthetic(spec)
        np.testing.assert_array_equal(d1.covariates, d2.covariates)
        np.testing.assert_array_equal(d1.times, d2.times)

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            SyntheticSpec(n=1, true_beta=(1.0,))
        with pytest.raises(ValueError):
            SyntheticSpec(n=10, true_beta=(1.0,), censoring_rate_target=1.0)
        with pytest.raises(ValueError):
            ExponentialBaseline(rate=0.0)


class TestDatasetHash:
    def test_changes_with_any_byte(self, rng):
        data = make_survival_data(rng, 20, 3)
        base = dataset_hash(data)
        bumped_cov = data.covariates.copy()
        bumped_cov[5, 1] = np.nextafter(bumped_cov[5, 1], np.inf)
        assert dataset_hash(SurvivalDataset(bumped_cov, data.times, data.events,
                                            data.feature_names)) != base
        bumped_times = data.times.copy()
        bumped_times[0] = np.nextafter(bumped_times[0], np.inf)
        assert dataset_hash(SurvivalDataset(data.covariates, bumped_times, data.events,
                                            data.feature_names)) != base
        renamed = tuple(["zz"] + list(data.feature_names[1:]))
        assert dataset_hash(SurvivalDataset(data.covariates, data.times, data.events,
                                            renamed)) != base
        assert dataset_hash(data.subset(np.arange(20))) == base


def tiny_curve():
    cells = []
    for algorithm in ("coxph", "coxpath"):
        for size, err, var in [(40, 0.31, 0.06), (80, 0.28, 0.04), (160, 0.26, 0.02)]:
            report = DecompositionReport(err, var, err - var, 1.0 - err)
            cells.append(CurveCell(algorithm, size, report, 0, 6))
    config = ProtocolConfig(training_sizes=(40, 80, 160), algorithms=(CoxPHAlgorithm(),),
                            replicates_per_size=3, repetitions=2, master_seed=1)
    return LearningCurve(tuple(cells), config)


class TestWriteCurves:
    def test_row_count_and_columns(self, tmp_path):
        curves_path, meta_path = write_curves(tiny_curve(), str(tmp_path))
        lines = open(curves_path).read().splitlines()
        assert len(lines) == 1 + 6
        assert lines[0] == "algorithm,train_size,expected_error,variance,bias_plus_noise,performance,fit_failures"

    def test_round_trip_and_identity_column(self, tmp_path):
        curve = tiny_curve()
        curves_path, _ = write_curves(curve, str(tmp_path))
        records = read_curves(curves_path)
        assert len(records) == len(curve.cells)
        for record, cell in zip(records, curve.cells):
            assert record["algorithm"] == cell.algorithm
            assert record["train_size"] == cell.train_size
            assert record["expected_error"] == pytest.approx(cell.report.expected_error, rel=1e-9)
            assert record["performance"] == pytest.approx(1.0 - record["expected_error"], abs=1e-9)

    def test_metadata_contents(self, tmp_path):
        _, meta_path = write_curves(tiny_curve(), str(tmp_path), metadata={"selection": "cv_deviance"})
        meta = json.load(open(meta_path))
        assert meta["master_seed"] == 1
        assert meta["selection"] == "cv_deviance"
        assert meta["protocol"]["training_sizes"] == [40, 80, 160]
        assert "training_subsets" in meta
