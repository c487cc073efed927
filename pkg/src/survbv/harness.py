"""End-to-end resampling protocol producing decomposition learning curves.

One run: repeatedly set aside a random test fraction, draw many training
subsets of each configured size from the remaining pool, fit every
algorithm on each subset, score the fixed test set, decompose the
pair-outcome matrix per (algorithm, size), and average the reports across
test-set repetitions.

Randomness is fully determined by the master seed: every test draw and
every training draw gets its own seed substream derived from
(master_seed, role, repetition, size index, replicate), so serial and
parallel executions of any worker count produce identical curves.
"""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .biasvar import DecompositionReport, aggregate_reports, decompose, pair_outcomes
from .coxfit import FitConfig, fit_cox, risk_scores
from .coxpath import PathConfig, fit_path
from .exceptions import (
    DegenerateFold,
    Diverged,
    InsufficientData,
    TooFewReplicates,
    TooManyDegenerateDraws,
)
from .survival import SurvivalDataset, comparable_pair_matrix

logger = logging.getLogger(__name__)

_MAX_REDRAWS = 50
_MIN_TRAINING_EVENTS = 2


@dataclass(frozen=True)
class CoxPHAlgorithm:
    """Unregularized Cox proportional hazards."""

    fit_config: FitConfig = field(default_factory=FitConfig)
    name: str = "coxph"

    def fit_score(self, training: SurvivalDataset, test: SurvivalDataset) -> np.ndarray:
        model = fit_cox(training, self.fit_config)
        return risk_scores(model, test)


@dataclass(frozen=True)
class CoxPathAlgorithm:
    """L1 path over the penalty grid with configured model selection."""

    path_config: PathConfig = field(default_factory=PathConfig)
    name: str = "coxpath"

    def fit_score(self, training: SurvivalDataset, test: SurvivalDataset) -> np.ndarray:
        path = fit_path(training, self.path_config)
        return test.covariates @ path.selected_beta


@dataclass(frozen=True)
class FitFailure:
    """Recorded in place of scores when a replicate's fit fails."""

    reason: str


@dataclass(frozen=True)
class ProtocolConfig:
    training_sizes: tuple[int, ...]
    algorithms: tuple = (CoxPHAlgorithm(), CoxPathAlgorithm())
    test_fraction: float = 0.20
    replicates_per_size: int = 20
    repetitions: int = 10
    master_seed: int = 0

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.training_sizes)
        if not sizes:
            raise ValueError("training_sizes must not be empty")
        if any(s < 2 for s in sizes):
            raise ValueError("every training size must be at least 2")
        if any(b <= a for a, b in zip(sizes, sizes[1:])):
            raise ValueError("training_sizes must be strictly increasing")
        if not (0.0 < self.test_fraction < 1.0):
            raise ValueError("test_fraction must lie in (0, 1)")
        if self.replicates_per_size < 2:
            raise ValueError("replicates_per_size must be at least 2")
        if self.repetitions < 1:
            raise ValueError("repetitions must be at least 1")
        if self.master_seed < 0:
            raise ValueError("master_seed must be nonnegative")
        names = [a.name for a in self.algorithms]
        if not names:
            raise ValueError("at least one algorithm is required")
        if len(set(names)) != len(names):
            raise ValueError("algorithm names must be unique")
        object.__setattr__(self, "training_sizes", sizes)
        object.__setattr__(self, "algorithms", tuple(self.algorithms))


@dataclass(frozen=True)
class CurveCell:
    algorithm: str
    train_size: int
    report: DecompositionReport
    fit_failures: int
    attempts: int


@dataclass(frozen=True)
class LearningCurve:
    """Aggregated decomposition per (algorithm, training size)."""

    cells: tuple[CurveCell, ...]
    config: ProtocolConfig

    def cell(self, algorithm: str, train_size: int) -> CurveCell:
        for c in self.cells:
            if c.algorithm == algorithm and c.train_size == train_size:
                return c
        raise KeyError(f"no cell for ({algorithm!r}, {train_size})")


def _rng(*parts: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(tuple(int(x) for x in parts)))


def fit_and_score(algorithm, training: SurvivalDataset, test: SurvivalDataset):
    """Train on a replicate subset and score the fixed test set.

    Divergence or fold degeneracy becomes a FitFailure value instead of an
    exception, so one bad replicate only shrinks its outcome-matrix column
    count.
    """
    try:
        scores = np.asarray(algorithm.fit_score(training, test), dtype=float)
    except (Diverged, DegenerateFold) as exc:
        return FitFailure(f"{type(exc).__name__}: {exc}")
    if scores.shape != (test.n,):
        raise ValueError(
            f"algorithm {algorithm.name!r} returned {scores.shape} scores for {test.n} test rows"
        )
    return scores


@dataclass(frozen=True)
class _RepetitionPlan:
    test_indices: np.ndarray
    training_draws: tuple  # [size_index][replicate] -> index array


def _draw_test_split(data: SurvivalDataset, n_test: int, rng) -> np.ndarray | None:
    test_idx = np.sort(rng.choice(data.n, size=n_test, replace=False))
    test_data = data.subset(test_idx)
    if comparable_pair_matrix(test_data).shape[0] == 0:
        return None
    return test_idx


def _plan_repetition(data: SurvivalDataset, config: ProtocolConfig, n_test: int,
                     r: int) -> _RepetitionPlan:
    rng = _rng(config.master_seed, 0, r)
    test_idx = None
    for _ in range(_MAX_REDRAWS):
        test_idx = _draw_test_split(data, n_test, rng)
        if test_idx is not None:
            break
    if test_idx is None:
        raise TooManyDegenerateDraws(
            f"no test set with comparable pairs in {_MAX_REDRAWS} draws (repetition {r})"
        )
    pool = np.setdiff1d(np.arange(data.n), test_idx)
    draws = []
    for si, size in enumerate(config.training_sizes):
        per_size = []
        for k in range(config.replicates_per_size):
            sub_rng = _rng(config.master_seed, 1, r, si, k)
            chosen = None
            for _ in range(_MAX_REDRAWS):
                candidate = np.sort(sub_rng.choice(pool, size=size, replace=False))
                if int(data.events[candidate].sum()) >= _MIN_TRAINING_EVENTS:
                    chosen = candidate
                    break
            if chosen is None:
                raise TooManyDegenerateDraws(
                    f"no training draw of size {size} with >= {_MIN_TRAINING_EVENTS} events "
                    f"in {_MAX_REDRAWS} tries (repetition {r}, replicate {k})"
                )
            per_size.append(chosen)
        draws.append(tuple(per_size))
    return _RepetitionPlan(test_indices=test_idx, training_draws=tuple(draws))


def _run_cell_task(args):
    data, algorithm, train_idx, test_idx = args
    return fit_and_score(algorithm, data.subset(train_idx), data.subset(test_idx))


def run_protocol(data: SurvivalDataset, config: ProtocolConfig, workers: int = 1,
                 progress: Callable[[str], None] | None = None) -> LearningCurve:
    """Execute the full protocol and aggregate per-(algorithm, size) reports.

    workers > 1 spreads replicate fits of each cell over a process pool;
    results are collected in submission order, so the curve is bit-identical
    for every worker count.
    """
    n_test = int(round(config.test_fraction * data.n))
    if not (1 <= n_test <= data.n - 2):
        raise InsufficientData(
            f"test fraction {config.test_fraction} of n={data.n} leaves no usable split"
        )
    pool_size = data.n - n_test
    if max(config.training_sizes) > pool_size:
        raise InsufficientData(
            f"largest training size {max(config.training_sizes)} exceeds the "
            f"non-test pool of {pool_size} observations"
        )

    plans = [_plan_repetition(data, config, n_test, r) for r in range(config.repetitions)]

    # reports[algorithm index][size index] -> list of per-repetition reports
    reports = [[[] for _ in config.training_sizes] for _ in config.algorithms]
    failures = np.zeros((len(config.algorithms), len(config.training_sizes)), dtype=int)

    executor = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for r, plan in enumerate(plans):
            test_idx = plan.test_indices
            test_data = data.subset(test_idx)
            pairs = comparable_pair_matrix(test_data)
            for si, size in enumerate(config.training_sizes):
                for ai, algorithm in enumerate(config.algorithms):
                    tasks = [
                        (data, algorithm, train_idx, test_idx)
                        for train_idx in plan.training_draws[si]
                    ]
                    if executor is None:
                        results = [_run_cell_task(t) for t in tasks]
                    else:
                        results = list(executor.map(_run_cell_task, tasks))
                    kept = [res for res in results if not isinstance(res, FitFailure)]
                    n_failed = len(results) - len(kept)
                    failures[ai, si] += n_failed
                    if n_failed:
                        logger.info(
                            "repetition %d size %d %s: %d fit failure(s) excluded",
                            r, size, algorithm.name, n_failed,
                        )
                    if len(kept) < 2:
                        raise TooFewReplicates(
                            f"repetition {r} size {size} {algorithm.name}: only "
                            f"{len(kept)} of {len(results)} replicates usable"
                        )
                    matrix = pair_outcomes(kept, pairs, test_data)
                    reports[ai][si].append(decompose(matrix))
                if progress is not None:
                    progress(f"repetition {r + 1}/{config.repetitions} size {size} done")
    finally:
        if executor is not None:
            executor.shutdown()

    attempts = config.repetitions * config.replicates_per_size
    cells = []
    for ai, algorithm in enumerate(config.algorithms):
        for si, size in enumerate(config.training_sizes):
            cells.append(
                CurveCell(
                    algorithm=algorithm.name,
                    train_size=size,
                    report=aggregate_reports(reports[ai][si]),
                    fit_failures=int(failures[ai, si]),
                    attempts=attempts,
                )
            )
    cells.sort(key=lambda c: (c.algorithm, c.train_size))
    return LearningCurve(cells=tuple(cells), config=config)
