"""Bias-variance decomposition of pairwise ordering error across training replicates.

Each comparable test pair is a binary classification case whose true label
is the observed failure order. A matrix of per-pair outcomes over models
trained on resampled training sets yields, per pair x, the estimated
probability p of ordering it correctly (ties credited 0.5, the same
convention the concordance index uses); the per-pair error is 1 - p.

The per-pair variance is half the expected disagreement between two
independently trained replicas, with the 0.5 credit carried through:
opposite definite calls disagree fully, a tie half-disagrees with a
definite call, and identical outcomes agree. With tie fractions
(q_correct, q_incorrect, q_tie) this is

    variance_x = q_correct * q_incorrect + 0.5 * q_tie * (1 - q_tie)
               = p (1 - p) - q_tie^2 / 4,

which reduces to the classical (1 - sum_y P(y)^2) / 2 = p (1 - p) whenever
no ties occur and is exactly zero for any deterministic model, including a
constant-score one. The unexplainable remainder (systematic bias plus label
noise) is error - variance. On observed data the true label distribution is
degenerate, so bias and noise are only identified as their sum; the
separate terms are computable on synthetic pairs where the generating
distribution is known (see the bernoulli_* helpers).
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from typing import Sequence

import numpy as np

from .exceptions import DimensionMismatch, EmptyInput, TooFewReplicates
from .survival import ComparablePair, SurvivalDataset, _pairs_as_matrix, classify_pairs

_IDENTITY_TOL = 1e-12


class PairOutcome(IntEnum):
    """Outcome of one model's ordering of one pair against the observed order."""

    INCORRECT = 0
    CORRECT = 1
    TIE = 2


@dataclass(frozen=True)
class PairPredictionMatrix:
    """Comparable-pair by training-replicate outcome matrix.

    Every column is one trained model applied to one fixed test set.
    """

    outcomes: np.ndarray
    pair_ids: tuple[ComparablePair, ...]

    def __post_init__(self):
        outcomes = np.asarray(self.outcomes, dtype=np.int8)
        if outcomes.ndim != 2:
            raise DimensionMismatch("outcomes must be a pairs x replicates matrix")
        if outcomes.shape[0] != len(self.pair_ids):
            raise DimensionMismatch(
                f"{outcomes.shape[0]} outcome rows for {len(self.pair_ids)} pairs"
            )
        if outcomes.size and not np.all((outcomes >= 0) & (outcomes <= 2)):
            raise ValueError("outcome entries must be PairOutcome codes")
        outcomes.setflags(write=False)
        object.__setattr__(self, "outcomes", outcomes)
        object.__setattr__(self, "pair_ids", tuple(self.pair_ids))

    @property
    def replicate_count(self) -> int:
        return self.outcomes.shape[1]

    @property
    def pair_count(self) -> int:
        return self.outcomes.shape[0]


@dataclass(frozen=True)
class DecompositionReport:
    """Expected pairwise error split into variance and the bias-plus-noise rest.

    The estimator identity expected_error = variance + bias_plus_noise holds
    exactly (checked at construction to 1e-12); bias_plus_noise is reported
    unclamped and may go slightly negative under sampling noise.
    performance = 1 - expected_error.
    """

    expected_error: float
    variance: float
    bias_plus_noise: float
    performance: float

    def __post_init__(self):
        if not (0.0 <= self.expected_error <= 1.0):
            raise ValueError(f"expected_error out of [0, 1]: {self.expected_error}")
        if not (0.0 <= self.variance <= 0.5):
            raise ValueError(f"variance out of [0, 0.5]: {self.variance}")
        if abs(self.expected_error - self.variance - self.bias_plus_noise) > _IDENTITY_TOL:
            raise ValueError("decomposition identity violated")
        if abs(self.performance - (1.0 - self.expected_error)) > _IDENTITY_TOL:
            raise ValueError("performance must equal 1 - expected_error")


def pair_outcomes(scores_per_replicate: Sequence, pairs, data: SurvivalDataset) -> PairPredictionMatrix:
    """Score each replicate's ordering of every comparable pair.

    CORRECT when the model's classification matches the observed order,
    INCORRECT when reversed, TIE on exact score equality. Pair labels and
    outcomes share integer codes because pairs are oriented
    (earlier, later): concordant is correct.
    """
    if not len(scores_per_replicate):
        raise EmptyInput("need at least one replicate's scores")
    idx = _pairs_as_matrix(pairs)
    if idx.shape[0] == 0:
        raise EmptyInput("need at least one comparable pair")
    if isinstance(pairs, np.ndarray):
        pair_ids = tuple(ComparablePair(int(i), int(j)) for i, j in idx)
    else:
        pair_ids = tuple(pairs)
    columns = []
    for scores in scores_per_replicate:
        s = np.asarray(scores, dtype=float)
        if s.shape != (data.n,):
            raise DimensionMismatch(f"each score vector must have length {data.n}")
        columns.append(classify_pairs(s, idx))
    return PairPredictionMatrix(np.column_stack(columns), tuple(pair_ids))


def _outcome_fractions(matrix: PairPredictionMatrix):
    outcomes = matrix.outcomes
    reps = matrix.replicate_count
    q_correct = (outcomes == PairOutcome.CORRECT).sum(axis=1) / reps
    q_tie = (outcomes == PairOutcome.TIE).sum(axis=1) / reps
    q_incorrect = 1.0 - q_correct - q_tie
    return q_correct, q_incorrect, q_tie


def correct_probabilities(matrix: PairPredictionMatrix) -> np.ndarray:
    """Per-pair estimate of P(correct ordering), ties counting half."""
    q_correct, _, q_tie = _outcome_fractions(matrix)
    return q_correct + 0.5 * q_tie


def decision_spread(q_correct, q_incorrect, q_tie) -> np.ndarray:
    """Half the expected 0.5-credit disagreement of two independent replicas.

    Equals p(1-p) with p = q_correct + q_tie/2 when q_tie = 0; zero whenever
    the outcome distribution is degenerate. Never exceeds 0.25.
    """
    return np.asarray(q_correct) * np.asarray(q_incorrect) + 0.5 * np.asarray(q_tie) * (
        1.0 - np.asarray(q_tie)
    )


def decompose(matrix: PairPredictionMatrix) -> DecompositionReport:
    """Average the per-pair error and variance over all comparable pairs.

    Needs at least two replicates for the variance to mean anything.
    """
    if matrix.replicate_count < 2:
        raise TooFewReplicates(
            f"variance estimation needs >= 2 replicates, got {matrix.replicate_count}"
        )
    q_correct, q_incorrect, q_tie = _outcome_fractions(matrix)
    error_x = 1.0 - (q_correct + 0.5 * q_tie)
    variance_x = decision_spread(q_correct, q_incorrect, q_tie)
    expected_error = float(error_x.mean())
    variance = float(variance_x.mean())
    return DecompositionReport(
        expected_error=expected_error,
        variance=variance,
        bias_plus_noise=expected_error - variance,
        performance=1.0 - expected_error,
    )


def per_pair_breakdown(matrix: PairPredictionMatrix) -> dict[str, np.ndarray]:
    """Per-pair arrays behind the aggregate report, for debugging only."""
    q_correct, q_incorrect, q_tie = _outcome_fractions(matrix)
    p = q_correct + 0.5 * q_tie
    return {
        "p_correct": p,
        "error": 1.0 - p,
        "variance": decision_spread(q_correct, q_incorrect, q_tie),
    }


def aggregate_reports(reports: Sequence[DecompositionReport]) -> DecompositionReport:
    """Unweighted mean of every field across reports.

    bias_plus_noise and performance are recomputed from the averaged error
    and variance, which equals the mean of the per-report fields (the mean
    is linear) while keeping the decomposition identity exact.
    """
    if not reports:
        raise EmptyInput("cannot aggregate zero reports")
    expected_error = float(np.mean([r.expected_error for r in reports]))
    variance = float(np.mean([r.variance for r in reports]))
    return DecompositionReport(
        expected_error=expected_error,
        variance=variance,
        bias_plus_noise=expected_error - variance,
        performance=1.0 - expected_error,
    )


def bernoulli_spread(p):
    """Half of one minus the collision probability of a Bernoulli(p) draw.

    (1 - (p^2 + (1-p)^2)) / 2, which simplifies to p(1-p). Applied to the
    replicate distribution it is the per-pair variance; applied to the true
    label distribution it is the per-pair noise.
    """
    p = np.asarray(p, dtype=float)
    return 0.5 * (1.0 - (p * p + (1.0 - p) * (1.0 - p)))


def bernoulli_bias_sq(p_true, p_model):
    """Half squared L2 distance between two Bernoulli label distributions."""
    p_true = np.asarray(p_true, dtype=float)
    p_model = np.asarray(p_model, dtype=float)
    return 0.5 * ((p_true - p_model) ** 2 + ((1.0 - p_true) - (1.0 - p_model)) ** 2)


def disagreement_rate(p_true, p_model):
    """Probability that independent draws from the two distributions differ.

    This is the per-pair expected error when the true label and the model
    label are drawn independently; it equals
    bernoulli_bias_sq + bernoulli_spread(p_model) + bernoulli_spread(p_true)
    identically, which is the closed-loop check used on synthetic pairs.
    """
    p_true = np.asarray(p_true, dtype=float)
    p_model = np.asarray(p_model, dtype=float)
    return p_true * (1.0 - p_model) + (1.0 - p_true) * p_model
