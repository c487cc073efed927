"""L1-regularized Cox regression along a decreasing penalty grid with warm starts.

The fitter minimizes

    f(beta) = -l(beta) / n + lambda * ||beta||_1

by cyclic coordinate descent with soft thresholding on the local quadratic
(IRLS) model of the scaled negative log partial likelihood, using the
curvature diagonal in eta space as working weights. The penalty applies to
coefficients of internally standardized covariates; returned coefficients
are on the original covariate scale.

Model selection over the grid is cross-validated partial-likelihood
deviance (default), cross-validated concordance, or a fixed penalty value.
Folds are event-stratified so small samples do not produce event-free folds
by construction.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DegenerateFold, DimensionMismatch, Diverged, NoComparablePairs, NoEvents
from .coxfit import CoxWorkspace, standardize_columns
from .survival import SurvivalDataset, comparable_pair_matrix, concordance_index

CV_DEVIANCE = "cv_deviance"
CV_CINDEX = "cv_cindex"
FIXED_LAMBDA = "fixed_lambda"

_SELECTION_RULES = (CV_DEVIANCE, CV_CINDEX, FIXED_LAMBDA)
_MAX_OUTER_ITERATIONS = 1000
_MAX_BACKTRACKS = 20


@dataclass(frozen=True)
class PathConfig:
    """Grid, solver and selection controls for the path fitter.

    lambda_min_ratio None means the standard data-size default: 0.01 when
    n > p, else 0.05. cd_tolerance is on the largest coefficient change,
    both within coordinate-descent passes and between outer IRLS rounds.
    """

    n_lambda: int = 100
    lambda_min_ratio: float | None = None
    selection: str = CV_DEVIANCE
    fixed_lambda: float | None = None
    cv_folds: int = 5
    cd_tolerance: float = 1e-7
    cd_max_passes: int = 100_000
    seed: int = 0

    def __post_init__(self):
        if self.n_lambda < 2:
            raise ValueError("n_lambda must be at least 2")
        if self.lambda_min_ratio is not None and not (0 < self.lambda_min_ratio < 1):
            raise ValueError("lambda_min_ratio must lie in (0, 1)")
        if self.selection not in _SELECTION_RULES:
            raise ValueError(f"selection must be one of {_SELECTION_RULES}")
        if self.selection == FIXED_LAMBDA and self.fixed_lambda is None:
            raise ValueError("fixed_lambda selection needs a lambda value")
        if self.fixed_lambda is not None and self.fixed_lambda < 0:
            raise ValueError("fixed_lambda must be nonnegative")
        if self.cv_folds < 2:
            raise ValueError("cv_folds must be at least 2")
        if not self.cd_tolerance > 0:
            raise ValueError("cd_tolerance must be positive")
        if self.cd_max_passes < 1:
            raise ValueError("cd_max_passes must be at least 1")

    def resolved_min_ratio(self, n: int, p: int) -> float:
        if self.lambda_min_ratio is not None:
            return self.lambda_min_ratio
        return 0.01 if n > p else 0.05


@dataclass(frozen=True)
class PathSolution:
    """Fits along the penalty grid plus the selected index.

    lambdas is strictly decreasing and betas[0] is the all-zero fit at the
    smallest penalty that nullifies every coefficient. selection_scores is
    the per-lambda criterion value (summed CV deviance, mean CV concordance,
    or log-scale distance to the fixed value).
    """

    lambdas: np.ndarray
    betas: np.ndarray
    selected_index: int
    selection_scores: np.ndarray
    nonzero_counts: np.ndarray
    selection_rule: str

    def __post_init__(self):
        for name in ("lambdas", "betas", "selection_scores", "nonzero_counts"):
            arr = np.asarray(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.lambdas.size > 1 and not np.all(np.diff(self.lambdas) < 0):
            raise ValueError("lambda grid must be strictly decreasing")
        if not (0 <= self.selected_index < self.lambdas.size):
            raise ValueError("selected_index out of range")

    @property
    def selected_beta(self) -> np.ndarray:
        return self.betas[self.selected_index]

    @property
    def selected_lambda(self) -> float:
        return float(self.lambdas[self.selected_index])


class _PathEngine:
    """Standardized design plus workspace shared by repeated penalized fits."""

    def __init__(self, data: SurvivalDataset):
        if data.n_events == 0:
            raise NoEvents("cannot fit a penalized Cox model without observed events")
        self.data = data
        self.n = data.n
        self.p = data.p
        self.ws = CoxWorkspace(data.times, data.events)
        X_std, sd, active = standardize_columns(data.covariates)
        self.sd = sd
        self.active = active
        self.Xa = np.ascontiguousarray(X_std[:, active])
        self.pa = self.Xa.shape[1]

    def lambda_max(self) -> float:
        if self.pa == 0:
            return 0.0
        u = self.ws.eta_gradient(np.zeros(self.n))
        return float(np.max(np.abs(self.Xa.T @ u)) / self.n)

    def to_std(self, beta) -> np.ndarray:
        beta = np.asarray(beta, dtype=float)
        return beta[self.active] * self.sd[self.active]

    def to_original(self, b_active) -> np.ndarray:
        beta = np.zeros(self.p)
        beta[self.active] = b_active / self.sd[self.active]
        return beta

    def penalized_objective(self, b_active, lam: float) -> float:
        ll = self.ws.loglik(self.Xa @ b_active)
        return -ll / self.n + lam * float(np.abs(b_active).sum())

    def fit(self, lam: float, b_start, config: PathConfig, trace: list | None = None) -> np.ndarray:
        """One penalized fit at a single lambda, standardized scale in and out.

        Each outer round builds the quadratic model of -l/n at the current
        iterate (exact gradient and Hessian) and minimizes model-plus-penalty
        by cyclic coordinate descent with soft thresholding, then line
        searches the true penalized objective along the step. trace, when
        given, collects the objective after the start point and after every
        accepted outer step; the recorded sequence is non-increasing by
        construction.
        """
        n = self.n
        b = np.array(b_start, dtype=float, copy=True)
        if b.shape != (self.pa,):
            raise DimensionMismatch(f"warm start must have {self.pa} active coefficients")
        if self.pa == 0:
            return b
        eta = self.Xa @ b
        obj = -self.ws.loglik(eta) / n + lam * np.abs(b).sum()
        if not np.isfinite(obj):
            b[:] = 0.0
            eta = self.Xa @ b
            obj = -self.ws.loglik(eta) / n + lam * np.abs(b).sum()
        if trace is not None:
            trace.append(obj)
        passes = 0
        inner_tol = min(config.cd_tolerance, 1e-10)

        for _ in range(_MAX_OUTER_ITERATIONS):
            grad = -(self.Xa.T @ self.ws.eta_gradient(eta)) / n
            curv = -self.ws.hessian_beta(self.Xa, eta) / n
            if not (np.all(np.isfinite(grad)) and np.all(np.isfinite(curv))):
                raise Diverged("non-finite working response in coordinate descent")
            diag = np.diag(curv).copy()
            # q tracks the model gradient of the smooth part at the current b.
            q = grad.copy()
            b_prev = b.copy()
            while True:
                max_step = 0.0
                for j in range(self.pa):
                    dj = diag[j]
                    if dj <= 0.0:
                        continue
                    b_new = _soft_threshold(dj * b[j] - q[j], lam) / dj
                    step_j = b_new - b[j]
                    if step_j != 0.0:
                        q += curv[:, j] * step_j
                        b[j] = b_new
                        max_step = max(max_step, abs(step_j))
                passes += 1
                if max_step < inner_tol or passes >= config.cd_max_passes:
                    break

            eta_new = self.Xa @ b
            obj_new = -self.ws.loglik(eta_new) / n + lam * np.abs(b).sum()
            backtracks = 0
            while (not np.isfinite(obj_new) or obj_new > obj + 1e-12) and backtracks < _MAX_BACKTRACKS:
                b = 0.5 * (b + b_prev)
                eta_new = self.Xa @ b
                obj_new = -self.ws.loglik(eta_new) / n + lam * np.abs(b).sum()
                backtracks += 1
            if not np.isfinite(obj_new):
                raise Diverged("penalized objective non-finite after backtracking")
            if obj_new > obj + 1e-12:
                b = b_prev
                break
            eta = eta_new
            obj = obj_new
            if trace is not None:
                trace.append(obj)
            if np.max(np.abs(b - b_prev), initial=0.0) < config.cd_tolerance:
                break
            if passes >= config.cd_max_passes:
                break
        return b


def _soft_threshold(value: float, threshold: float) -> float:
    if value > threshold:
        return value - threshold
    if value < -threshold:
        return value + threshold
    return 0.0


def lambda_max(data: SurvivalDataset) -> float:
    """Smallest penalty at which every coefficient is zero.

    Computed as max_j |g_j(0)| / n on standardized covariates, g being the
    gradient of the log partial likelihood at beta = 0.
    """
    return _PathEngine(data).lambda_max()


def fit_l1(data: SurvivalDataset, lam: float, warm_start=None,
           config: PathConfig | None = None, trace: list | None = None) -> np.ndarray:
    """Solve the L1-penalized Cox problem at one penalty value.

    warm_start is a coefficient vector on the original covariate scale
    (defaults to zero). Deterministic given its inputs. Returns exactly zero
    coefficients whenever lam >= lambda_max(data).
    """
    if config is None:
        config = PathConfig()
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    engine = _PathEngine(data)
    if warm_start is None:
        warm_start = np.zeros(data.p)
    warm_start = np.asarray(warm_start, dtype=float)
    if warm_start.shape != (data.p,):
        raise DimensionMismatch(f"warm start must have length {data.p}")
    if lam >= engine.lambda_max():
        return np.zeros(data.p)
    b = engine.fit(lam, engine.to_std(warm_start), config, trace=trace)
    return engine.to_original(b)


def _lambda_grid(lam_max: float, config: PathConfig, n: int, p: int) -> np.ndarray:
    ratio = config.resolved_min_ratio(n, p)
    grid = np.geomspace(lam_max, lam_max * ratio, config.n_lambda)
    grid[0] = lam_max
    return grid


def _fit_grid(engine: _PathEngine, lambdas: np.ndarray, config: PathConfig) -> np.ndarray:
    """Warm-started fits along a decreasing grid; rows on the original scale."""
    lam_max = engine.lambda_max()
    betas = np.zeros((lambdas.size, engine.p))
    b = np.zeros(engine.pa)
    for i, lam in enumerate(lambdas):
        if lam >= lam_max:
            b = np.zeros(engine.pa)
        else:
            b = engine.fit(float(lam), b, config)
        betas[i] = engine.to_original(b)
    return betas


def cv_fold_assignment(data: SurvivalDataset, k: int, seed: int) -> np.ndarray:
    """Event-stratified fold label per observation, deterministic in (data, k, seed).

    Events and censored observations are shuffled separately and dealt
    round-robin, so every fold receives a proportional share of events.
    """
    events = data.events
    rng = np.random.default_rng(np.random.SeedSequence((int(seed), data.n, data.n_events)))
    folds = np.empty(data.n, dtype=int)
    event_idx = rng.permutation(np.flatnonzero(events == 1))
    censored_idx = rng.permutation(np.flatnonzero(events == 0))
    folds[event_idx] = np.arange(event_idx.size) % k
    folds[censored_idx] = (event_idx.size + np.arange(censored_idx.size)) % k
    return folds


def _cv_scores(data: SurvivalDataset, lambdas: np.ndarray, config: PathConfig) -> np.ndarray:
    """Per-lambda CV criterion: summed held-out deviance or mean held-out CI."""
    k = config.cv_folds
    folds = cv_fold_assignment(data, k, config.seed)
    per_fold = np.empty((k, lambdas.size))
    for f in range(k):
        held_out = np.flatnonzero(folds == f)
        train = np.flatnonzero(folds != f)
        fold_data = data.subset(held_out)
        train_data = data.subset(train)
        if fold_data.n_events == 0:
            raise DegenerateFold(f"fold {f} has no events")
        if train_data.n_events == 0:
            raise DegenerateFold(f"training split for fold {f} has no events")
        betas = _fit_grid(_PathEngine(train_data), lambdas, config)
        if config.selection == CV_DEVIANCE:
            fold_ws = CoxWorkspace(fold_data.times, fold_data.events)
            for i in range(lambdas.size):
                per_fold[f, i] = -2.0 * fold_ws.loglik(fold_data.covariates @ betas[i])
        else:
            if comparable_pair_matrix(fold_data).shape[0] == 0:
                raise DegenerateFold(f"fold {f} has no comparable pairs")
            for i in range(lambdas.size):
                try:
                    per_fold[f, i] = concordance_index(fold_data.covariates @ betas[i], fold_data)
                except NoComparablePairs as exc:  # pragma: no cover - guarded above
                    raise DegenerateFold(str(exc)) from exc
    if config.selection == CV_DEVIANCE:
        return per_fold.sum(axis=0)
    return per_fold.mean(axis=0)


def _select(lambdas: np.ndarray, data: SurvivalDataset, config: PathConfig):
    """Selected index plus per-lambda scores for the configured rule."""
    if config.selection == FIXED_LAMBDA:
        target = max(float(config.fixed_lambda), np.finfo(float).tiny)
        floor = np.finfo(float).tiny
        scores = np.abs(np.log(np.maximum(lambdas, floor)) - np.log(target))
        return int(np.argmin(scores)), scores
    scores = _cv_scores(data, lambdas, config)
    if config.selection == CV_DEVIANCE:
        return int(np.argmin(scores)), scores
    return int(np.argmax(scores)), scores


def fit_path(data: SurvivalDataset, config: PathConfig | None = None) -> PathSolution:
    """Fit the full penalty path and select one model.

    The grid is log-spaced from lambda_max down to lambda_max times the
    minimum ratio; each fit warm-starts from the previous grid point. When
    the data carry no covariate signal at beta = 0 (lambda_max = 0) the
    exact solution is beta = 0 for every penalty, returned as a single-point
    path.
    """
    if config is None:
        config = PathConfig()
    engine = _PathEngine(data)
    lam_max = engine.lambda_max()
    if lam_max <= 0.0:
        lambdas = np.array([0.0])
        betas = np.zeros((1, data.p))
        scores = np.zeros(1)
        return PathSolution(lambdas, betas, 0, scores, np.zeros(1, dtype=int),
                            selection_rule=config.selection)
    lambdas = _lambda_grid(lam_max, config, data.n, data.p)
    betas = _fit_grid(engine, lambdas, config)
    selected, scores = _select(lambdas, data, config)
    nonzero = np.count_nonzero(betas, axis=1)
    return PathSolution(lambdas, betas, selected, scores, nonzero,
                        selection_rule=config.selection)


def select_model(path: PathSolution, data: SurvivalDataset, config: PathConfig | None = None) -> int:
    """Re-run model selection over an existing path; returns the chosen index.

    Exact ties in the criterion resolve toward larger lambda (the sparser
    model) because the scan runs from the head of the decreasing grid.
    """
    if config is None:
        config = PathConfig()
    if path.lambdas.size == 0:
        raise DimensionMismatch("cannot select from an empty path")
    index, _ = _select(path.lambdas, data, config)
    return index
