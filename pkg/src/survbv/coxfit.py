"""Unregularized Cox proportional-hazards regression via Newton-Raphson.

Everything is built on the Breslow form of the log partial likelihood,
where tied failure times share a single risk-set denominator:

    l(beta) = sum over events i of [ eta_i - log sum_{j: t_j >= t_i} exp(eta_j) ]

with eta = X @ beta. The baseline hazard is never estimated; the fitted
object carries only the proportionality coefficients, and its linear
predictor is the risk score used everywhere else in the library.

All evaluators recentre eta before exponentiating, so likelihood, gradient
and Hessian values are stable for any shift of the linear predictor.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionMismatch, Diverged, NoEvents
from .survival import SurvivalDataset

_MAX_STEP_HALVINGS = 20


@dataclass(frozen=True)
class FitConfig:
    """Newton-Raphson controls.

    tolerance is on the relative change of the log partial likelihood
    between accepted iterations; ridge_fallback is the tiny quadratic
    penalty added to the Hessian only when it is numerically singular.
    """

    max_iterations: int = 100
    tolerance: float = 1e-9
    ridge_fallback: float = 1e-8

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.ridge_fallback < 0:
            raise ValueError("ridge_fallback must be nonnegative")


@dataclass(frozen=True)
class CoxModel:
    beta: np.ndarray
    converged: bool
    iterations: int
    final_log_partial_likelihood: float

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=float)
        beta.setflags(write=False)
        object.__setattr__(self, "beta", beta)


class CoxWorkspace:
    """Precomputed sort and tie structure for one (times, events) sample.

    Risk-set sums become reversed cumulative sums over observations sorted
    by time; observations with equal times form groups that share those
    sums. Building the workspace once lets many evaluations at different
    linear predictors reuse the O(n log n) sorting work.
    """

    def __init__(self, times, events):
        times = np.asarray(times, dtype=float)
        events = np.asarray(events)
        if int(events.sum()) == 0:
            raise NoEvents("the sample contains no observed events")
        self.n = times.shape[0]
        self.order = np.argsort(times, kind="stable")
        t_sorted = times[self.order]
        self.events_sorted = events[self.order].astype(float)
        is_first = np.empty(self.n, dtype=bool)
        is_first[0] = True
        is_first[1:] = t_sorted[1:] != t_sorted[:-1]
        self.group_first = np.flatnonzero(is_first)
        self.obs_group = np.cumsum(is_first) - 1
        self.d = np.add.reduceat(self.events_sorted, self.group_first)
        self.event_groups = self.d > 0

    def _risk_sums(self, eta):
        """Shifted exponentials (sorted order) and per-group risk-set sums."""
        eta_sorted = np.asarray(eta, dtype=float)[self.order]
        shifted = eta_sorted - eta_sorted.max()
        w = np.exp(shifted)
        s0 = np.cumsum(w[::-1])[::-1][self.group_first]
        return shifted, w, s0

    def loglik(self, eta) -> float:
        shifted, _, s0 = self._risk_sums(eta)
        ev = self.event_groups
        value = (shifted * self.events_sorted).sum() - (self.d[ev] * np.log(s0[ev])).sum()
        return float(value)

    def eta_gradient(self, eta) -> np.ndarray:
        """d l / d eta per observation, in the original order."""
        _, w, s0 = self._risk_sums(eta)
        ev = self.event_groups
        a = np.zeros_like(s0)
        a[ev] = self.d[ev] / s0[ev]
        u_sorted = self.events_sorted - w * np.cumsum(a)[self.obs_group]
        u = np.empty(self.n)
        u[self.order] = u_sorted
        return u

    def eta_derivatives(self, eta):
        """Gradient and curvature diagonal of the log partial likelihood in eta.

        Returns (u, h) in the original observation order, where u_i is
        d l / d eta_i and h_i = -d^2 l / d eta_i^2 >= 0. h is the diagonal
        curvature available to quadratic working models.
        """
        _, w, s0 = self._risk_sums(eta)
        ev = self.event_groups
        a = np.zeros_like(s0)
        b = np.zeros_like(s0)
        a[ev] = self.d[ev] / s0[ev]
        b[ev] = self.d[ev] / (s0[ev] * s0[ev])
        cum_a = np.cumsum(a)[self.obs_group]
        cum_b = np.cumsum(b)[self.obs_group]
        u_sorted = self.events_sorted - w * cum_a
        h_sorted = w * cum_a - (w * w) * cum_b
        u = np.empty(self.n)
        h = np.empty(self.n)
        u[self.order] = u_sorted
        h[self.order] = h_sorted
        return u, h

    def gradient_beta(self, X, eta) -> np.ndarray:
        return X.T @ self.eta_gradient(eta)

    def hessian_beta(self, X, eta) -> np.ndarray:
        """Full p x p Hessian of the log partial likelihood (negative semidefinite)."""
        _, w, s0 = self._risk_sums(eta)
        Xs = X[self.order]
        wx = w[:, None] * Xs
        s1 = np.cumsum(wx[::-1], axis=0)[::-1][self.group_first]
        wxx = wx[:, :, None] * Xs[:, None, :]
        s2 = np.cumsum(wxx[::-1], axis=0)[::-1][self.group_first]
        ev = self.event_groups
        d = self.d[ev]
        mu = s1[ev] / s0[ev, None]
        second_moment = np.einsum("g,gij->ij", d, s2[ev] / s0[ev, None, None])
        outer = np.einsum("g,gi,gj->ij", d, mu, mu)
        return -(second_moment - outer)


def _check_fit_inputs(beta, data: SurvivalDataset):
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (data.p,):
        raise DimensionMismatch(f"beta must have length {data.p}, got shape {beta.shape}")
    if data.n_events == 0:
        raise NoEvents("dataset has no observed events")
    return beta


def log_partial_likelihood(beta, data: SurvivalDataset) -> float:
    """Breslow log partial likelihood at the given coefficient vector."""
    beta = _check_fit_inputs(beta, data)
    ws = CoxWorkspace(data.times, data.events)
    return ws.loglik(data.covariates @ beta)


def gradient(beta, data: SurvivalDataset) -> np.ndarray:
    """Gradient of the log partial likelihood with respect to beta."""
    beta = _check_fit_inputs(beta, data)
    ws = CoxWorkspace(data.times, data.events)
    return ws.gradient_beta(data.covariates, data.covariates @ beta)


def hessian(beta, data: SurvivalDataset) -> np.ndarray:
    """Hessian of the log partial likelihood; symmetric, negative semidefinite."""
    beta = _check_fit_inputs(beta, data)
    ws = CoxWorkspace(data.times, data.events)
    return ws.hessian_beta(data.covariates, data.covariates @ beta)


def standardize_columns(X):
    """Center and scale columns to mean 0, variance 1 (population variance).

    Returns (X_std, sd, active) where active marks columns with nonzero
    variance; inactive columns are zeroed out and must keep coefficient 0.
    """
    mean = X.mean(axis=0)
    sd = X.std(axis=0)
    active = sd > 0
    X_std = np.zeros_like(X, dtype=float)
    X_std[:, active] = (X[:, active] - mean[active]) / sd[active]
    return X_std, sd, active


def fit_cox(data: SurvivalDataset, config: FitConfig | None = None) -> CoxModel:
    """Maximize the log partial likelihood by Newton-Raphson with step halving.

    Covariates are standardized internally for conditioning and the
    coefficients mapped back to the original scale on output; zero-variance
    columns get coefficient 0. Convergence is declared when the relative
    change of the log partial likelihood between accepted (non-decreasing)
    iterations falls below config.tolerance.

    Raises Diverged when the likelihood is non-finite even after all step
    halvings or the Hessian stays singular after the ridge fallback, both
    signs of separable or otherwise degenerate data.
    """
    if config is None:
        config = FitConfig()
    if data.n_events == 0:
        raise NoEvents("cannot fit a Cox model without observed events")
    X_std, sd, active = standardize_columns(data.covariates)
    ws = CoxWorkspace(data.times, data.events)
    p = data.p

    if not active.any():
        beta = np.zeros(p)
        ll = ws.loglik(np.zeros(data.n))
        return CoxModel(beta, converged=True, iterations=1, final_log_partial_likelihood=ll)

    Xa = X_std[:, active]
    b = np.zeros(int(active.sum()))
    ll = ws.loglik(Xa @ b)
    converged = False
    iterations = 0

    for it in range(1, config.max_iterations + 1):
        iterations = it
        eta = Xa @ b
        g = Xa.T @ ws.eta_gradient(eta)
        H = ws.hessian_beta(Xa, eta)
        if not (np.all(np.isfinite(g)) and np.all(np.isfinite(H))):
            raise Diverged("non-finite gradient or Hessian during Newton iteration")
        try:
            delta = np.linalg.solve(-H, g)
        except np.linalg.LinAlgError:
            try:
                delta = np.linalg.solve(-H + config.ridge_fallback * np.eye(H.shape[0]), g)
            except np.linalg.LinAlgError:
                raise Diverged("Hessian singular even after ridge fallback") from None

        step = 1.0
        ll_new = ws.loglik(Xa @ (b + step * delta))
        halvings = 0
        while (not np.isfinite(ll_new) or ll_new < ll) and halvings < _MAX_STEP_HALVINGS:
            step *= 0.5
            ll_new = ws.loglik(Xa @ (b + step * delta))
            halvings += 1
        if not np.isfinite(ll_new):
            raise Diverged("log partial likelihood non-finite after all step halvings")
        if ll_new < ll:
            # No step along the Newton direction improves the likelihood at
            # float resolution: already at the numerical optimum.
            converged = True
            break
        b = b + step * delta
        rel_change = abs(ll_new - ll) / max(1.0, abs(ll))
        ll = ll_new
        if rel_change < config.tolerance:
            converged = True
            break

    beta = np.zeros(p)
    beta[active] = b / sd[active]
    final_ll = log_partial_likelihood(beta, data)
    return CoxModel(beta, converged=converged, iterations=iterations,
                    final_log_partial_likelihood=final_ll)


def risk_scores(model: CoxModel, data: SurvivalDataset) -> np.ndarray:
    """Linear predictor x_i . beta per observation.

    Monotone in the relative hazard exp(x . beta), so concordance computed
    on these scores equals concordance on the hazard scale.
    """
    if model.beta.shape != (data.p,):
        raise DimensionMismatch(
            f"model has {model.beta.shape[0]} coefficients but data has {data.p} features"
        )
    return data.covariates @ model.beta
