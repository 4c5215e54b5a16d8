"""Fixed-C variational clique decomposition.

The likelihood of a graph given a binary ``V x C`` matrix ``Z`` is

    p(A | Z) = prod_{i~j} sigma(z_i . z_j) prod_{i!~j} (1 - sigma(z_i . z_j))

over unordered off-diagonal pairs, with the shifted logistic
``sigma(x) = 1 / (1 + exp(beta * (0.5 - x)))``.  The posterior over ``Z`` is
approximated by a fully factorised ``q(Z) = prod q(z_ic)``, ``theta_ic =
q(z_ic = 1)``, updated one coordinate at a time.  Each update needs the
"field" ``sum_d z_kd z_jd`` for every other vertex ``j``; its mean (and
optionally its variance) under ``q`` is obtained from cached row overlaps.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Tuple

import numba
import numpy as np

from .graph import AdjacencyMatrix, CliqueMatrix, DimensionError
from .rng import child_seeds

FIELD_MODES = ("zero_variance", "gaussian")


@dataclass(frozen=True)
class ModelParams:
    beta: float = 10.0
    c: int = 1

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if self.c < 1:
            raise ValueError("column count must be at least 1")


@dataclass(frozen=True)
class SolverConfig:
    max_epochs: int = 100
    tol: float = 1e-4
    seed: int = 0
    restarts: int = 1
    field_mode: str = "zero_variance"
    quadrature_points: int = 20

    def __post_init__(self):
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be positive")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.restarts < 1:
            raise ValueError("restarts must be at least 1")
        if self.field_mode not in FIELD_MODES:
            raise ValueError(f"field_mode must be one of {FIELD_MODES}")
        if self.quadrature_points < 1:
            raise ValueError("quadrature_points must be positive")


@dataclass
class VariationalState:
    """Factorised posterior ``theta[i, c] = q(z_ic = 1)``."""

    theta: np.ndarray
    epoch: int = 0
    converged: bool = False
    rng: Optional[np.random.Generator] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        t = np.asarray(self.theta, dtype=np.float64)
        if t.ndim != 2:
            raise ValueError("theta must be a V x C matrix")
        if ((t < 0) | (t > 1)).any() or not np.isfinite(t).all():
            raise ValueError("theta entries must lie in [0, 1]")
        self.theta = t


@dataclass(frozen=True)
class FieldStats:
    mu: float
    var: float


# --- likelihood ---------------------------------------------------------

def sigma(x, beta):
    """Shifted logistic ``1 / (1 + exp(beta * (0.5 - x)))``."""
    return 0.5 * (1.0 + np.tanh(0.5 * beta * (np.asarray(x, dtype=float) - 0.5)))


def log_sigma(x, beta):
    """``log sigma(x)``, finite for all finite ``x``."""
    return -np.logaddexp(0.0, beta * (0.5 - np.asarray(x, dtype=float)))


def log_one_minus_sigma(x, beta):
    """``log(1 - sigma(x))``, finite for all finite ``x``."""
    return -np.logaddexp(0.0, -beta * (0.5 - np.asarray(x, dtype=float)))


def pair_log_likelihood(present: np.ndarray, overlap: np.ndarray, beta: float) -> float:
    """Sum of log-probabilities of the upper-triangular pairs."""
    iu = np.triu_indices(present.shape[0], 1)
    x = overlap[iu]
    p = present[iu]
    return float(np.where(p, log_sigma(x, beta), log_one_minus_sigma(x, beta)).sum())


def log_likelihood(a: AdjacencyMatrix, z: CliqueMatrix, beta: float) -> float:
    """``log p(A | Z)`` over unordered pairs, diagonal excluded."""
    if a.v != z.v:
        raise DimensionError(f"clique matrix has {z.v} rows but graph has {a.v} vertices")
    zi = z.bits.astype(np.float64)
    return pair_log_likelihood(a.bits, zi @ zi.T, beta)


# --- numba kernels ------------------------------------------------------

@numba.njit(cache=True)
def _g(present, x, beta):
    # log sigma(x) for present links, log(1 - sigma(x)) for absent ones
    t = beta * (0.5 - x)
    if not present:
        t = -t
    if t > 0:
        return -(t + math.log1p(math.exp(-t)))
    return -math.log1p(math.exp(t))


@numba.njit(cache=True)
def _g_gauss(present, mu, var, beta, gx, gw):
    if var <= 0.0:
        return _g(present, mu, beta)
    sd = math.sqrt(2.0 * var)
    acc = 0.0
    for q in range(gx.shape[0]):
        acc += gw[q] * _g(present, mu + sd * gx[q], beta)
    return acc


# A vertex whose theta_jc is below this moves the field by less than it;
# its contribution to a log-odds is bounded by 2 * beta * _NEGLIGIBLE.
_NEGLIGIBLE = 1e-10


@numba.njit(cache=True)
def _coord_logit(theta_t, adj, over, vsum, scale, k, c, beta, gaussian, gx, gw):
    """Log-odds ``log s1 - log s0`` for coordinate (k, c).

    ``theta_t`` is the transposed (C x V) posterior so a column is contiguous.
    """
    col = theta_t[c]
    v = col.shape[0]
    sc = scale[c]
    tkc = col[k]
    acc = 0.0
    for j in range(v):
        tjc = col[j]
        if j == k or tjc < _NEGLIGIBLE:
            continue
        base = over[k, j] - sc * tkc * tjc
        if base < 0.0:
            base = 0.0
        mu1 = base + sc * tjc
        pres = adj[k, j]
        if gaussian:
            p = tkc * tjc
            vb = vsum[k, j] - sc * sc * p * (1.0 - p)
            if vb < 0.0:
                vb = 0.0
            v1 = vb + sc * sc * tjc * (1.0 - tjc)
            acc += _g_gauss(pres, mu1, v1, beta, gx, gw) - _g_gauss(pres, base, vb, beta, gx, gw)
        else:
            acc += _g(pres, mu1, beta) - _g(pres, base, beta)
    return 2.0 * acc


@numba.njit(cache=True)
def _logistic(x):
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


@numba.njit(cache=True)
def _epoch(theta_t, adj, over, vsum, scale, order, beta, gaussian, gx, gw):
    """Sequential coordinate sweep in ``order``; updates caches in place."""
    ncol, v = theta_t.shape
    max_delta = 0.0
    for idx in order:
        k = idx // ncol
        c = idx % ncol
        col = theta_t[c]
        old = col[k]
        new = _logistic(_coord_logit(theta_t, adj, over, vsum, scale, k, c, beta, gaussian, gx, gw))
        d = new - old
        if d == 0.0:
            continue
        col[k] = new
        if abs(d) > max_delta:
            max_delta = abs(d)
        sc = scale[c]
        for j in range(v):
            tjc = col[j]
            if j == k or tjc == 0.0:
                continue
            over[k, j] += sc * d * tjc
            over[j, k] = over[k, j]
            if gaussian:
                po = old * tjc
                pn = new * tjc
                vsum[k, j] += sc * sc * (pn * (1.0 - pn) - po * (1.0 - po))
                vsum[j, k] = vsum[k, j]
    return max_delta


# --- python surface -----------------------------------------------------

def _quadrature(config_or_points) -> Tuple[np.ndarray, np.ndarray]:
    n = config_or_points if isinstance(config_or_points, int) else config_or_points.quadrature_points
    x, w = np.polynomial.hermite.hermgauss(n)
    return x, w / math.sqrt(math.pi)


def _caches(theta: np.ndarray, scale: np.ndarray, gaussian: bool):
    ts = theta * scale
    over = ts @ theta.T
    if gaussian:
        # sum_d scale_d^2 p(1-p), p = theta_kd theta_jd
        over2 = (theta * scale**2) @ theta.T
        sq = (theta**2 * scale**2) @ (theta**2).T
        vsum = over2 - sq
    else:
        vsum = np.zeros((1, 1))
    return np.ascontiguousarray(over), np.ascontiguousarray(vsum)


def field_stats(state: VariationalState, k: int, j: int, c: int, z_kc: int,
                scale: Optional[np.ndarray] = None) -> FieldStats:
    """Mean and variance of ``sum_d z_kd z_jd`` under ``q`` with ``z_kc`` clamped.

    The variance treats each ``z_kd z_jd`` as an independent
    Bernoulli(``theta_kd theta_jd``) term.
    """
    if k == j:
        raise ValueError("field is defined for distinct vertices")
    t = state.theta
    s = np.ones(t.shape[1]) if scale is None else np.asarray(scale, dtype=float)
    p = t[k] * t[j]
    mask = np.arange(t.shape[1]) != c
    mu = z_kc * s[c] * t[j, c] + float((s * p)[mask].sum())
    var = z_kc * s[c] ** 2 * t[j, c] * (1 - t[j, c]) + float((s**2 * p * (1 - p))[mask].sum())
    return FieldStats(mu=float(mu), var=max(float(var), 0.0))


def update_theta(state: VariationalState, a: AdjacencyMatrix, params: ModelParams,
                 k: int, c: int, mode: str = "zero_variance",
                 scale: Optional[np.ndarray] = None, quadrature_points: int = 20) -> float:
    """New value of ``theta[k, c]`` given all other coordinates (no mutation)."""
    if mode not in FIELD_MODES:
        raise ValueError(f"mode must be one of {FIELD_MODES}")
    theta = state.theta
    s = np.ones(theta.shape[1]) if scale is None else np.asarray(scale, dtype=float)
    gaussian = mode == "gaussian"
    over, vsum = _caches(theta, s, gaussian)
    gx, gw = _quadrature(quadrature_points)
    theta_t = np.ascontiguousarray(theta.T)
    logit = _coord_logit(theta_t, a.bits, over, vsum, s, k, c, float(params.beta), gaussian, gx, gw)
    return float(_logistic(logit))


def init_state(v: int, c: int, rng: np.random.Generator) -> VariationalState:
    return VariationalState(rng.uniform(0.25, 0.75, size=(v, c)), rng=rng)


def run_epoch(state: VariationalState, a: AdjacencyMatrix, params: ModelParams,
              config: SolverConfig, scale: Optional[np.ndarray] = None
              ) -> Tuple[VariationalState, float]:
    """Update every coordinate once in a random order.

    The order is drawn from ``state.rng`` (seeded from ``config.seed`` when the
    state carries none).  Returns the new state and the largest change.
    """
    rng = state.rng if state.rng is not None else np.random.default_rng(config.seed)
    theta = state.theta
    v, ncol = theta.shape
    if v != a.v:
        raise DimensionError("state and graph disagree on vertex count")
    s = np.ones(ncol) if scale is None else np.ascontiguousarray(scale, dtype=np.float64)
    gaussian = config.field_mode == "gaussian"
    over, vsum = _caches(theta, s, gaussian)
    gx, gw = _quadrature(config)
    order = rng.permutation(v * ncol)
    theta_t = np.ascontiguousarray(theta.T)
    max_delta = _epoch(theta_t, a.bits, over, vsum, s, order, float(params.beta), gaussian, gx, gw)
    new = VariationalState(theta_t.T.copy(), epoch=state.epoch + 1, converged=max_delta < config.tol, rng=rng)
    return new, float(max_delta)


def round_theta(theta: np.ndarray) -> CliqueMatrix:
    """MPM rounding: ``z = 1`` iff ``theta > 0.5``; empty columns dropped."""
    return CliqueMatrix.from_rounded(theta, 0.5)


def _run_single(a, params, config, rng):
    state = init_state(a.v, params.c, rng)
    for _ in range(config.max_epochs):
        state, delta = run_epoch(state, a, params, config)
        if delta < config.tol:
            break
    return state


def solve_fixed_c(a: AdjacencyMatrix, params: ModelParams, config: SolverConfig = SolverConfig()
                  ) -> Tuple[CliqueMatrix, VariationalState, float]:
    """Best-of-restarts mean-field decomposition into at most ``params.c`` columns.

    Returns the rounded clique matrix, the winning variational state (whose
    ``converged`` flag records whether it met ``config.tol``) and the
    log-likelihood of the rounded matrix.
    """
    best = None
    for seed in child_seeds(config.seed, config.restarts):
        state = _run_single(a, params, config, np.random.default_rng(seed))
        z = round_theta(state.theta)
        ll = log_likelihood(a, z, params.beta)
        if best is None or ll > best[2]:
            best = (z, state, ll)
    z, state, ll = best
    return z, replace(state, rng=None), ll
