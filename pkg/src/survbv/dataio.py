"""CSV loading, synthetic proportional-hazards data, and curve output files.

CSV contract: UTF-8, comma separated, one header row, '.' decimal
separator, no quoting of numeric fields. Empty cells and the tokens
na/nan/null (any case) are missing values; rows containing any are dropped
with a logged count (complete-case analysis). Event values must be 0 or 1.

Outputs of an experiment run are `curves.csv` (one row per algorithm and
training size, numbers at 10 significant digits) and `run_meta.json`
(seed, configuration echo, dataset hash, selection criterion).
"""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import os
from dataclasses import dataclass

import numpy as np

from .exceptions import (
    CalibrationFailed,
    EmptyAfterFiltering,
    ParseError,
    SchemaError,
)
from .harness import LearningCurve
from .survival import SurvivalDataset

logger = logging.getLogger(__name__)

_MISSING_TOKENS = {"", "na", "nan", "null"}
CURVES_FILENAME = "curves.csv"
META_FILENAME = "run_meta.json"
_CURVE_COLUMNS = (
    "algorithm",
    "train_size",
    "expected_error",
    "variance",
    "bias_plus_noise",
    "performance",
    "fit_failures",
)


@dataclass(frozen=True)
class DatasetSchema:
    """Column layout of a survival CSV; None feature list means all remaining."""

    time_column: str = "time"
    event_column: str = "status"
    feature_columns: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.time_column == self.event_column:
            raise SchemaError("time and event columns must differ")
        if self.feature_columns is not None:
            features = tuple(self.feature_columns)
            overlap = {self.time_column, self.event_column} & set(features)
            if overlap:
                raise SchemaError(f"feature columns overlap time/event columns: {sorted(overlap)}")
            if len(set(features)) != len(features):
                raise SchemaError("feature columns contain duplicates")
            object.__setattr__(self, "feature_columns", features)


def _parse_cell(token: str, row: int, column: str) -> float | None:
    stripped = token.strip()
    if stripped.lower() in _MISSING_TOKENS:
        return None
    try:
        return float(stripped)
    except ValueError:
        raise ParseError(f"row {row}, column {column!r}: cannot parse {token!r} as a number") from None


def load_csv(path, schema: DatasetSchema | None = None) -> SurvivalDataset:
    """Load and validate a survival dataset, dropping incomplete rows.

    Raises ParseError (with row/column) on malformed numbers or ragged rows,
    SchemaError on missing columns or out-of-domain time/event values, and
    EmptyAfterFiltering when no complete row survives.
    """
    if schema is None:
        schema = DatasetSchema()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file, header row required") from None
        header = [h.strip() for h in header]
        if len(set(header)) != len(header):
            raise SchemaError(f"{path}: duplicate column names in header")
        for required in (schema.time_column, schema.event_column):
            if required not in header:
                raise SchemaError(f"{path}: required column {required!r} not found")
        if schema.feature_columns is None:
            feature_names = tuple(
                h for h in header if h not in (schema.time_column, schema.event_column)
            )
        else:
            missing = [c for c in schema.feature_columns if c not in header]
            if missing:
                raise SchemaError(f"{path}: feature columns not found: {missing}")
            feature_names = schema.feature_columns
        if not feature_names:
            raise SchemaError(f"{path}: no feature columns")
        col_index = {name: header.index(name) for name in header}
        used = [schema.time_column, schema.event_column, *feature_names]

        rows = []
        dropped = 0
        for row_number, raw in enumerate(reader, start=2):
            if not raw or all(not c.strip() for c in raw):
                continue
            if len(raw) != len(header):
                raise ParseError(
                    f"row {row_number}: expected {len(header)} fields, got {len(raw)}"
                )
            values = {}
            complete = True
            for name in used:
                value = _parse_cell(raw[col_index[name]], row_number, name)
                if value is None:
                    complete = False
                    break
                values[name] = value
            if not complete:
                dropped += 1
                continue
            time = values[schema.time_column]
            event = values[schema.event_column]
            if not (np.isfinite(time) and time > 0):
                raise SchemaError(f"row {row_number}: time must be positive, got {time}")
            if event not in (0.0, 1.0):
                raise SchemaError(f"row {row_number}: event must be 0 or 1, got {event}")
            features = [values[name] for name in feature_names]
            if not all(np.isfinite(v) for v in features):
                raise SchemaError(f"row {row_number}: non-finite covariate value")
            rows.append((features, time, int(event)))

    if dropped:
        logger.info("%s: dropped %d row(s) with missing values", path, dropped)
    if not rows:
        raise EmptyAfterFiltering(f"{path}: no complete rows after filtering")
    covariates = np.array([r[0] for r in rows], dtype=float)
    times = np.array([r[1] for r in rows], dtype=float)
    events = np.array([r[2] for r in rows], dtype=np.int8)
    return SurvivalDataset(covariates, times, events, feature_names)


def write_dataset(data: SurvivalDataset, path, schema: DatasetSchema | None = None) -> None:
    """Write a dataset as CSV with exact float round-trip (repr formatting)."""
    if schema is None:
        schema = DatasetSchema()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([schema.time_column, schema.event_column, *data.feature_names])
        for i in range(data.n):
            writer.writerow(
                [repr(float(data.times[i])), int(data.events[i])]
                + [repr(float(v)) for v in data.covariates[i]]
            )


@dataclass(frozen=True)
class ExponentialBaseline:
    rate: float = 1.0

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError("exponential rate must be positive")

    def draw_times(self, relative_hazard: np.ndarray, rng) -> np.ndarray:
        return rng.standard_exponential(relative_hazard.size) / (self.rate * relative_hazard)


@dataclass(frozen=True)
class WeibullBaseline:
    shape: float
    scale: float

    def __post_init__(self):
        if not (self.shape > 0 and self.scale > 0):
            raise ValueError("Weibull shape and scale must be positive")

    def draw_times(self, relative_hazard: np.ndarray, rng) -> np.ndarray:
        exceedance = rng.standard_exponential(relative_hazard.size)
        return self.scale * (exceedance / relative_hazard) ** (1.0 / self.shape)


@dataclass(frozen=True)
class SyntheticSpec:
    """Generator recipe: standard normal covariates, PH times, exponential censoring."""

    n: int
    true_beta: tuple[float, ...]
    baseline: ExponentialBaseline | WeibullBaseline = ExponentialBaseline(1.0)
    censoring_rate_target: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("n must be at least 2")
        if not (0.0 <= self.censoring_rate_target < 1.0):
            raise ValueError("censoring_rate_target must lie in [0, 1)")
        object.__setattr__(self, "true_beta", tuple(float(b) for b in self.true_beta))
        if not self.true_beta:
            raise ValueError("true_beta must have at least one coefficient")


@dataclass(frozen=True)
class SyntheticTruth:
    """Ground truth kept alongside a generated dataset for oracle checks."""

    true_beta: np.ndarray
    linear_predictors: np.ndarray
    uncensored_times: np.ndarray
    censoring_times: np.ndarray
    realized_censoring_rate: float


def _calibrate_censoring_rate(uncensored_times: np.ndarray, target: float) -> float:
    """Exponential censoring rate whose expected censored fraction hits target.

    The expected fraction given the realized failure times is
    mean_i(1 - exp(-rate * t_i)), monotone in the rate; solved by bracketing
    and bisection.
    """

    def expected_fraction(rate: float) -> float:
        return float(np.mean(1.0 - np.exp(-rate * uncensored_times)))

    hi = 1.0 / float(np.median(uncensored_times))
    doublings = 0
    while expected_fraction(hi) < target:
        hi *= 2.0
        doublings += 1
        if doublings > 200:
            raise CalibrationFailed(
                f"cannot reach a censoring fraction of {target} by exponential censoring"
            )
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if expected_fraction(mid) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def generate_synthetic(spec: SyntheticSpec) -> tuple[SurvivalDataset, SyntheticTruth]:
    """Draw a dataset from the proportional-hazards model of the spec.

    Times follow the configured baseline scaled by exp(x . true_beta);
    censoring times are independent exponentials with the calibrated rate.
    The returned truth record keeps the uncensored times and linear
    predictors for oracle tests.
    """
    rng = np.random.default_rng(np.random.SeedSequence(spec.seed))
    p = len(spec.true_beta)
    beta = np.array(spec.true_beta)
    covariates = rng.standard_normal((spec.n, p))
    eta = covariates @ beta
    uncensored = spec.baseline.draw_times(np.exp(eta), rng)
    uncensored = np.maximum(uncensored, np.finfo(float).tiny)

    if spec.censoring_rate_target == 0.0:
        censoring = np.full(spec.n, np.inf)
    else:
        rate = _calibrate_censoring_rate(uncensored, spec.censoring_rate_target)
        censoring = np.maximum(rng.standard_exponential(spec.n) / rate, np.finfo(float).tiny)

    times = np.minimum(uncensored, censoring)
    events = (uncensored <= censoring).astype(np.int8)
    data = SurvivalDataset.from_arrays(covariates, times, events)
    truth = SyntheticTruth(
        true_beta=beta,
        linear_predictors=eta,
        uncensored_times=uncensored,
        censoring_times=censoring,
        realized_censoring_rate=float(1.0 - events.mean()),
    )
    return data, truth


def dataset_hash(data: SurvivalDataset) -> str:
    """SHA-256 over a canonical byte serialization of the dataset."""
    digest = hashlib.sha256()
    digest.update(b"survbv-dataset-v1")
    digest.update(np.int64(data.n).tobytes())
    digest.update(np.int64(data.p).tobytes())
    digest.update("\x1f".join(data.feature_names).encode("utf-8"))
    digest.update(np.ascontiguousarray(data.times, dtype=float).tobytes())
    digest.update(np.ascontiguousarray(data.events, dtype=np.int8).tobytes())
    digest.update(np.ascontiguousarray(data.covariates, dtype=float).tobytes())
    return digest.hexdigest()


def _fmt(value: float) -> str:
    return format(float(value), ".10g")


def write_curves(curve: LearningCurve, out_dir, metadata: dict | None = None) -> tuple[str, str]:
    """Write curves.csv and run_meta.json into out_dir; returns their paths.

    Files are written to temporary names and renamed, so a failed write
    leaves no half-finished output behind.
    """
    if not curve.cells:
        raise ValueError("cannot write an empty learning curve")
    os.makedirs(out_dir, exist_ok=True)
    curves_path = os.path.join(out_dir, CURVES_FILENAME)
    meta_path = os.path.join(out_dir, META_FILENAME)

    meta = {
        "format": "survbv-run-meta-v1",
        "master_seed": curve.config.master_seed,
        "protocol": {
            "test_fraction": curve.config.test_fraction,
            "replicates_per_size": curve.config.replicates_per_size,
            "repetitions": curve.config.repetitions,
            "training_sizes": list(curve.config.training_sizes),
            "algorithms": [a.name for a in curve.config.algorithms],
        },
        "training_subsets": "independent draws without replacement; may overlap",
        "fit_failures": {
            c.algorithm: int(
                sum(x.fit_failures for x in curve.cells if x.algorithm == c.algorithm)
            )
            for c in curve.cells
        },
    }
    if metadata:
        meta.update(metadata)

    tmp_curves = curves_path + ".tmp"
    tmp_meta = meta_path + ".tmp"
    try:
        with open(tmp_curves, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(_CURVE_COLUMNS)
            for cell in curve.cells:
                writer.writerow(
                    [
                        cell.algorithm,
                        cell.train_size,
                        _fmt(cell.report.expected_error),
                        _fmt(cell.report.variance),
                        _fmt(cell.report.bias_plus_noise),
                        _fmt(cell.report.performance),
                        cell.fit_failures,
                    ]
                )
        with open(tmp_meta, "w", encoding="utf-8") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)
            fh.write("\n")
        os.replace(tmp_curves, curves_path)
        os.replace(tmp_meta, meta_path)
    finally:
        for tmp in (tmp_curves, tmp_meta):
            if os.path.exists(tmp):
                os.unlink(tmp)
    return curves_path, meta_path


def read_curves(path) -> list[dict]:
    """Parse curves.csv back into plain records (round-trip checks, plotting)."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != _CURVE_COLUMNS:
            raise ParseError(f"{path}: unexpected curve columns {reader.fieldnames}")
        records = []
        for row in reader:
            records.append(
                {
                    "algorithm": row["algorithm"],
                    "train_size": int(row["train_size"]),
                    "expected_error": float(row["expected_error"]),
                    "variance": float(row["variance"]),
                    "bias_plus_noise": float(row["bias_plus_noise"]),
                    "performance": float(row["performance"]),
                    "fit_failures": int(row["fit_failures"]),
                }
            )
    return records
