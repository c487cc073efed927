"""Survival data types, the censoring-induced partial order, and the concordance index.

Score orientation is fixed library-wide: a larger score means higher risk,
i.e. earlier expected failure. Cox linear predictors satisfy this natively,
so a pair (earlier, later) is concordant when score[earlier] > score[later].
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from typing import Iterable, Sequence

import numpy as np

from .exceptions import DimensionMismatch, NoComparablePairs


class PairLabel(IntEnum):
    """Model-side classification of one comparable pair."""

    DISCORDANT = 0
    CONCORDANT = 1
    TIE = 2


@dataclass(frozen=True)
class Observation:
    """One subject: covariate vector, positive follow-up time, event indicator.

    event is 1 when the failure was observed and 0 when the observation is
    right-censored at `time`.
    """

    covariates: np.ndarray
    time: float
    event: int

    def __post_init__(self):
        cov = np.asarray(self.covariates, dtype=float)
        if cov.ndim != 1:
            raise DimensionMismatch("observation covariates must be a 1-d vector")
        if not np.all(np.isfinite(cov)):
            raise ValueError("observation covariates must be finite")
        if not (np.isfinite(self.time) and self.time > 0):
            raise ValueError(f"observation time must be positive, got {self.time}")
        if self.event not in (0, 1):
            raise ValueError(f"event indicator must be 0 or 1, got {self.event}")
        cov.setflags(write=False)
        object.__setattr__(self, "covariates", cov)
        object.__setattr__(self, "time", float(self.time))
        object.__setattr__(self, "event", int(self.event))


@dataclass(frozen=True)
class SurvivalDataset:
    """A right-censored sample: covariate matrix plus (time, event) per row.

    Immutable after construction; the arrays are marked read-only so a
    dataset can be shared freely across concurrent fits.
    """

    covariates: np.ndarray
    times: np.ndarray
    events: np.ndarray
    feature_names: tuple[str, ...]

    def __post_init__(self):
        cov = np.ascontiguousarray(self.covariates, dtype=float)
        times = np.ascontiguousarray(self.times, dtype=float)
        events = np.ascontiguousarray(self.events)
        if cov.ndim != 2:
            raise DimensionMismatch("covariates must be a 2-d matrix")
        n, p = cov.shape
        if times.shape != (n,) or events.shape != (n,):
            raise DimensionMismatch(
                f"times/events must have length {n}, got {times.shape} and {events.shape}"
            )
        if not np.all(np.isfinite(cov)):
            raise ValueError("covariates must be finite (no NaN or infinity)")
        if not np.all(np.isfinite(times)) or not np.all(times > 0):
            raise ValueError("all times must be finite and positive")
        ev = events.astype(np.int8)
        if not np.array_equal(ev, events) or not np.all((ev == 0) | (ev == 1)):
            raise ValueError("event indicators must be 0 or 1")
        names = tuple(str(f) for f in self.feature_names)
        if len(names) != p:
            raise DimensionMismatch(f"expected {p} feature names, got {len(names)}")
        for arr in (cov, times, ev):
            arr.setflags(write=False)
        object.__setattr__(self, "covariates", cov)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "events", ev)
        object.__setattr__(self, "feature_names", names)

    @classmethod
    def from_arrays(cls, covariates, times, events, feature_names=None) -> "SurvivalDataset":
        cov = np.atleast_2d(np.asarray(covariates, dtype=float))
        if feature_names is None:
            feature_names = tuple(f"x{j + 1}" for j in range(cov.shape[1]))
        return cls(cov, np.asarray(times), np.asarray(events), tuple(feature_names))

    @classmethod
    def from_observations(
        cls, observations: Sequence[Observation], feature_names=None
    ) -> "SurvivalDataset":
        if not observations:
            raise DimensionMismatch("cannot build a dataset from zero observations")
        cov = np.vstack([o.covariates for o in observations])
        times = np.array([o.time for o in observations])
        events = np.array([o.event for o in observations])
        return cls.from_arrays(cov, times, events, feature_names)

    @property
    def n(self) -> int:
        return self.covariates.shape[0]

    @property
    def p(self) -> int:
        return self.covariates.shape[1]

    @property
    def n_events(self) -> int:
        return int(self.events.sum())

    def observation(self, i: int) -> Observation:
        return Observation(self.covariates[i].copy(), float(self.times[i]), int(self.events[i]))

    def subset(self, indices) -> "SurvivalDataset":
        """Row subset as a new dataset (indices keep their given order)."""
        idx = np.asarray(indices, dtype=int)
        return SurvivalDataset(
            self.covariates[idx], self.times[idx], self.events[idx], self.feature_names
        )


@dataclass(frozen=True)
class ComparablePair:
    """Ordered pair of observation indices whose failure order is known.

    earlier failed (event = 1) strictly before later's recorded time, which
    is the only configuration right censoring leaves fully ordered.
    """

    earlier_index: int
    later_index: int

    def __post_init__(self):
        if self.earlier_index == self.later_index:
            raise ValueError("a comparable pair needs two distinct observations")


@dataclass(frozen=True)
class ConcordanceCounts:
    concordant: int
    discordant: int
    tied_score: int

    @property
    def total(self) -> int:
        return self.concordant + self.discordant + self.tied_score


def comparable_pair_matrix(data: SurvivalDataset) -> np.ndarray:
    """All comparable pairs as an (m, 2) index array, lexicographic by (i, j).

    Pair (i, j) qualifies when time[i] < time[j] strictly and event[i] = 1;
    tied times are never comparable.
    """
    t = data.times
    mask = (t[:, None] < t[None, :]) & (data.events[:, None] == 1)
    return np.argwhere(mask)


def enumerate_comparable_pairs(data: SurvivalDataset) -> list[ComparablePair]:
    """Comparable pairs in deterministic lexicographic order (may be empty)."""
    return [ComparablePair(int(i), int(j)) for i, j in comparable_pair_matrix(data)]


def _pairs_as_matrix(pairs) -> np.ndarray:
    if isinstance(pairs, np.ndarray):
        arr = pairs
    else:
        arr = np.array([(p.earlier_index, p.later_index) for p in pairs], dtype=int)
    return arr.reshape(-1, 2)


def classify_pairs(scores, pairs: Iterable[ComparablePair] | np.ndarray) -> np.ndarray:
    """Label each pair CONCORDANT, DISCORDANT, or TIE against the given scores.

    TIE means exact score equality; anything else is resolved by the fixed
    higher-score-fails-earlier orientation.
    """
    s = np.asarray(scores, dtype=float)
    idx = _pairs_as_matrix(pairs)
    if idx.size and idx.max() >= s.shape[0]:
        raise DimensionMismatch(
            f"scores cover {s.shape[0]} observations but pairs index up to {idx.max()}"
        )
    earlier, later = s[idx[:, 0]], s[idx[:, 1]]
    labels = np.full(idx.shape[0], PairLabel.TIE, dtype=np.int8)
    labels[earlier > later] = PairLabel.CONCORDANT
    labels[earlier < later] = PairLabel.DISCORDANT
    return labels


def concordance_counts(scores, data: SurvivalDataset) -> ConcordanceCounts:
    s = np.asarray(scores, dtype=float)
    if s.shape != (data.n,):
        raise DimensionMismatch(f"expected {data.n} scores, got shape {s.shape}")
    labels = classify_pairs(s, comparable_pair_matrix(data))
    return ConcordanceCounts(
        concordant=int(np.count_nonzero(labels == PairLabel.CONCORDANT)),
        discordant=int(np.count_nonzero(labels == PairLabel.DISCORDANT)),
        tied_score=int(np.count_nonzero(labels == PairLabel.TIE)),
    )


def concordance_index(scores, data: SurvivalDataset) -> float:
    """Concordance index with half credit for exact score ties.

    (concordant + 0.5 * tied) / (all comparable pairs). Always in [0, 1];
    equal scores everywhere give exactly 0.5.
    """
    counts = concordance_counts(scores, data)
    if counts.total == 0:
        raise NoComparablePairs("no comparable pairs: concordance index undefined")
    return (counts.concordant + 0.5 * counts.tied_score) / counts.total
