"""Automatic choice of the number of clusters.

Each column ``c`` of ``Z`` is switched on or off by a binary indicator
``alpha_c``.  The indicators share a Beta-Bernoulli prior which favours few
active columns.  ``q(alpha)`` and ``q(Z)`` are updated alternately, each with
the other fixed at its mean: inside the likelihood, column ``d`` of ``Z``
enters as the effective entries ``<alpha_d> * theta_id``, so pairwise
overlaps are weighted by ``<alpha_d>^2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numba
import numpy as np
from scipy.special import betaln

from .graph import AdjacencyMatrix, CliqueMatrix
from .meanfield import SolverConfig, ModelParams, VariationalState, _g, _logistic, init_state, run_epoch
from .rng import child_seeds

ALPHA_INIT = 0.9


@dataclass
class IndicatorState:
    alpha_mean: np.ndarray
    a: float = 1.0
    b: float = 3.0

    def __post_init__(self):
        am = np.asarray(self.alpha_mean, dtype=np.float64)
        if ((am < 0) | (am > 1)).any():
            raise ValueError("alpha_mean entries must lie in [0, 1]")
        if not (self.a > 0 and self.b > 0):
            raise ValueError("Beta hyperparameters must be positive")
        self.alpha_mean = am


def beta_bernoulli_log_prior(n_active: float, c_max: int, a: float, b: float) -> float:
    """``log B(a + N, b + C_max - N) - log B(a, b)``; ``N`` may be fractional."""
    if not 0 <= n_active <= c_max:
        raise ValueError(f"n_active={n_active} outside [0, {c_max}]")
    return float(betaln(a + n_active, b + c_max - n_active) - betaln(a, b))


@numba.njit(cache=True)
def _column_loglik_pair(theta_t, adj, over, c, beta):
    """Log-likelihood with column ``c`` switched off and on.

    ``over`` holds the alpha-weighted overlaps including column ``c`` at its
    current weight ``w``; ``w`` is removed by the caller beforehand.
    """
    col = theta_t[c]
    v = col.shape[0]
    off = 0.0
    on = 0.0
    for i in range(v):
        ti = col[i]
        for j in range(i + 1, v):
            base = over[i, j]
            pres = adj[i, j]
            g0 = _g(pres, base, beta)
            off += g0
            inc = ti * col[j]
            if inc == 0.0:
                on += g0
            else:
                on += _g(pres, base + inc, beta)
    return off, on


@numba.njit(cache=True)
def _alpha_sweep(theta_t, adj, over, alpha, order, beta, a, b, use_lik):
    ncol, v = theta_t.shape
    max_delta = 0.0
    total = 0.0
    for c in range(ncol):
        total += alpha[c]
    for c in order:
        col = theta_t[c]
        w = alpha[c] * alpha[c]
        # remove column c from the cached overlaps
        for i in range(v):
            if col[i] == 0.0:
                continue
            for j in range(v):
                over[i, j] -= w * col[i] * col[j]
        rest = total - alpha[c]
        if rest < 0.0:
            rest = 0.0
        if rest > ncol - 1:
            rest = ncol - 1.0
        lp0 = math.lgamma(a + rest) + math.lgamma(b + ncol - rest) - math.lgamma(a + b + ncol)
        lp1 = math.lgamma(a + rest + 1) + math.lgamma(b + ncol - rest - 1) - math.lgamma(a + b + ncol)
        logit = lp1 - lp0
        if use_lik:
            off, on = _column_loglik_pair(theta_t, adj, over, c, beta)
            logit += on - off
        new = _logistic(logit)
        d = new - alpha[c]
        if abs(d) > max_delta:
            max_delta = abs(d)
        total += d
        alpha[c] = new
        w = new * new
        for i in range(v):
            if col[i] == 0.0:
                continue
            for j in range(v):
                over[i, j] += w * col[i] * col[j]
    return max_delta


def _weighted_overlap(theta: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray((theta * alpha**2) @ theta.T)


def update_alpha(c: int, z_mean: np.ndarray, ind: IndicatorState, a_adj: AdjacencyMatrix,
                 beta: float) -> float:
    """New ``<alpha_c>`` with every other indicator at its current mean.

    The two states of ``alpha_c`` are scored by the Beta-Bernoulli prior (with
    the fractional count ``state + sum_{d != c} <alpha_d>``) plus the graph
    log-likelihood evaluated at the mean matrix ``z_mean``.
    """
    theta = np.asarray(z_mean, dtype=np.float64)
    alpha = ind.alpha_mean
    c_max = alpha.shape[0]
    w = alpha**2
    w_off = w.copy()
    w_off[c] = 0.0
    over = (theta * w_off) @ theta.T
    rest = min(max(float(alpha.sum() - alpha[c]), 0.0), c_max - 1.0)
    logit = (beta_bernoulli_log_prior(rest + 1, c_max, ind.a, ind.b)
             - beta_bernoulli_log_prior(rest, c_max, ind.a, ind.b))
    theta_t = np.ascontiguousarray(theta.T)
    off, on = _column_loglik_pair(theta_t, a_adj.bits, np.ascontiguousarray(over), c, float(beta))
    return float(_logistic(logit + on - off))


def alpha_sweep(theta: np.ndarray, ind: IndicatorState, a_adj: Optional[AdjacencyMatrix],
                beta: float, rng: np.random.Generator) -> Tuple[IndicatorState, float]:
    """Update every indicator once in random order.

    With ``a_adj=None`` the likelihood term is dropped and only the prior acts.
    """
    alpha = ind.alpha_mean.copy()
    theta_t = np.ascontiguousarray(theta.T)
    order = rng.permutation(alpha.shape[0])
    if a_adj is None:
        adj = np.ones((theta.shape[0], theta.shape[0]), dtype=bool)
        over = np.zeros((theta.shape[0], theta.shape[0]))
        use_lik = False
    else:
        adj = a_adj.bits
        over = _weighted_overlap(theta, alpha)
        use_lik = True
    delta = _alpha_sweep(theta_t, adj, over, alpha, order, float(beta), float(ind.a), float(ind.b),
                         use_lik)
    return IndicatorState(alpha, ind.a, ind.b), float(delta)


def retained_matrix(theta: np.ndarray, alpha: np.ndarray) -> CliqueMatrix:
    """Columns with ``<alpha_c> > 0.5``, rounded at 0.5, empty ones dropped."""
    keep = alpha > 0.5
    return CliqueMatrix.from_rounded(theta[:, keep], 0.5)


def _run_single(a_adj, c_max, beta, config, a, b, rng):
    params = ModelParams(beta=beta, c=c_max)
    state = init_state(a_adj.v, c_max, rng)
    ind = IndicatorState(np.full(c_max, ALPHA_INIT), a, b)
    for _ in range(config.max_epochs):
        state, dz = run_epoch(state, a_adj, params, config, scale=ind.alpha_mean**2)
        ind, da = alpha_sweep(state.theta, ind, a_adj, beta, rng)
        if dz < config.tol and da < config.tol:
            state.converged = True
            break
    return state, ind


def solve_auto_c(a_adj: AdjacencyMatrix, c_max: int, beta: float = 10.0,
                 config: SolverConfig = SolverConfig(), a: float = 1.0, b: float = 3.0
                 ) -> Tuple[CliqueMatrix, IndicatorState]:
    """Decompose with at most ``c_max`` columns, pruning unneeded ones.

    Each outer iteration is one full ``q(Z)`` epoch followed by one sweep of
    indicator updates.  Of ``config.restarts`` runs, the one whose retained
    matrix has the highest likelihood is returned; ties keep fewer columns.
    """
    from .meanfield import log_likelihood

    if c_max < 1:
        raise ValueError("c_max must be at least 1")
    best = None
    for seed in child_seeds(config.seed, config.restarts):
        state, ind = _run_single(a_adj, c_max, beta, config, a, b, np.random.default_rng(seed))
        z = retained_matrix(state.theta, ind.alpha_mean)
        key = (log_likelihood(a_adj, z, beta), -z.c)
        if best is None or key > best[0]:
            best = (key, z, ind, state)
    _, z, ind, state = best
    return z, ind
