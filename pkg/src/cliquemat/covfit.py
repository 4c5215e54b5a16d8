"""Zero-constrained covariance fitting through weighted clique matrices.

If ``Z`` is a clique matrix for ``G`` then any real matrix ``W`` supported on
the nonzero pattern of ``Z`` gives ``Sigma = W W^T`` with ``sigma_ij = 0``
whenever ``i`` and ``j`` are not adjacent, because no column holds both.
Fitting a Gaussian covariance with those zeros becomes unconstrained
minimisation of

    kappa(Sigma) = Tr(Sigma^-1 S) + log det Sigma

over the free entries of ``W``.  For a decomposable graph whose vertices are
in perfect elimination order the lower-triangular adjacency pattern already
parameterises every such ``Sigma``; otherwise the expanded clique matrix (all
sub-columns appended) is used as a richer, though not always complete, pattern.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from scipy import linalg, optimize

from .graph import (AdjacencyMatrix, CliqueMatrix, DimensionError, columns_are_cliques,
                    dedup_columns, incidence_matrix, is_valid_clique_matrix, reconstruct_bits)
from .rng import child_rng

DEFAULT_MAX_COLUMNS = 4096
NOT_DECOMPOSABLE = None

# the 4-cycle 0-1, 0-2, 1-3, 2-3: the smallest non-decomposable graph
CYCLE4 = AdjacencyMatrix.from_edges(4, [(0, 1), (0, 2), (1, 3), (2, 3)])


class ExpansionTooLarge(ValueError):
    """The expanded clique matrix would exceed ``max_columns``."""


class NumericalError(ValueError):
    """A matrix that must be positive (semi)definite is not."""


@dataclass(frozen=True, eq=False)
class WeightedCliqueMatrix:
    """Real ``V x C`` matrix supported on the pattern of ``mask``."""

    mask: CliqueMatrix
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=np.float64)
        if vals.shape != self.mask.bits.shape:
            raise DimensionError(f"values shape {vals.shape} != mask shape {self.mask.bits.shape}")
        if (vals[~self.mask.bits] != 0).any():
            raise ValueError("values must be zero wherever the mask is zero")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_free(cls, mask: CliqueMatrix, free: np.ndarray) -> "WeightedCliqueMatrix":
        """Fill the masked entries, in row-major order, from a flat vector."""
        vals = np.zeros(mask.bits.shape)
        vals[mask.bits] = free
        return cls(mask, vals)

    def free(self) -> np.ndarray:
        return self.values[self.mask.bits].copy()


@dataclass(frozen=True, eq=False)
class CovarianceModel:
    graph: AdjacencyMatrix
    z_star: WeightedCliqueMatrix
    ridge: float = 0.0

    def __post_init__(self):
        if self.ridge < 0:
            raise ValueError("ridge must be nonnegative")
        if not columns_are_cliques(self.graph, self.z_star.mask):
            raise ValueError("mask has a column that is not a clique of the graph")

    @property
    def sigma(self) -> np.ndarray:
        return sigma_from(self.z_star, self.ridge)


@dataclass
class FitReport:
    kappa: float
    iterations: int
    converged: bool
    grad_norm: float
    # objective after each accepted step, starting from the initial point
    kappa_history: List[float] = field(default_factory=list, repr=False)

    def __post_init__(self):
        if not self.grad_norm >= 0:
            raise ValueError("grad_norm must be nonnegative")

    def to_dict(self) -> dict:
        return {"kappa": self.kappa, "iterations": self.iterations,
                "converged": self.converged, "grad_norm": self.grad_norm}


@dataclass(frozen=True)
class FitConfig:
    """Settings for :func:`fit_covariance`.

    ``ridge=None`` selects ``1e-8 * trace(S) / V``.  ``tol`` bounds the
    Euclidean norm of the gradient over the free entries.
    """

    tol: float = 1e-6
    max_iter: int = 5000
    ridge: Optional[float] = None
    init_noise: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be positive")
        if self.ridge is not None and self.ridge < 0:
            raise ValueError("ridge must be nonnegative")


# ---------------------------------------------------------------- structure


def expand_clique_matrix(z: CliqueMatrix, max_columns: int = DEFAULT_MAX_COLUMNS) -> CliqueMatrix:
    """Append every distinct nonempty sub-column of ``z``.

    Original columns keep their order.  New columns follow sorted by
    decreasing size, then lexicographically by vertex tuple.
    """
    sets = z.column_sets()
    for s in sets:
        # all proper subsets of one column are distinct, so this is a lower bound
        if z.c + 2 ** len(s) - 2 > max_columns:
            raise ExpansionTooLarge(
                f"column of size {len(s)} alone expands past max_columns={max_columns}")
    seen = set(sets)
    new = set()
    for s in sets:
        for r in range(1, len(s)):
            for sub in itertools.combinations(s, r):
                if sub not in seen and sub not in new:
                    new.add(sub)
                    if z.c + len(new) > max_columns:
                        raise ExpansionTooLarge(
                            f"expansion exceeds max_columns={max_columns}")
    extra = sorted(new, key=lambda t: (-len(t), t))
    return CliqueMatrix.from_columns(z.v, sets + extra)


def _later_neighbours_are_cliques(bits: np.ndarray, order) -> bool:
    pos = np.empty(len(order), dtype=np.int64)
    pos[np.asarray(order)] = np.arange(len(order))
    for v in order:
        later = [u for u in np.flatnonzero(bits[v]) if pos[u] > pos[v]]
        if later and not bits[np.ix_(later, later)].all():
            return False
    return True


def perfect_elimination_order(a: AdjacencyMatrix) -> Optional[List[int]]:
    """Perfect elimination order by maximum cardinality search, or ``None``.

    In the returned order every vertex's later neighbours are pairwise
    adjacent.  ``None`` (``NOT_DECOMPOSABLE``) means the graph is not chordal.
    """
    bits = a.bits.copy()
    np.fill_diagonal(bits, False)
    v = a.v
    weight = np.zeros(v, dtype=np.int64)
    numbered = np.zeros(v, dtype=bool)
    visit = []
    for _ in range(v):
        cand = np.where(numbered, -1, weight)
        u = int(np.argmax(cand))  # ties go to the lowest index
        visit.append(u)
        numbered[u] = True
        weight[bits[u] & ~numbered] += 1
    order = visit[::-1]
    if not _later_neighbours_are_cliques(a.bits, order):
        return NOT_DECOMPOSABLE
    return order


def cholesky_pattern_clique_matrix(a: AdjacencyMatrix) -> CliqueMatrix:
    """Lower-triangular adjacency pattern as a ``V x V`` clique matrix.

    The vertices of ``a`` must already be in perfect elimination order;
    permute first with :func:`perfect_elimination_order` and
    ``AdjacencyMatrix.permuted``.
    """
    if not _later_neighbours_are_cliques(a.bits, range(a.v)):
        raise ValueError("graph is not decomposable or not in perfect elimination order")
    return CliqueMatrix(np.tril(a.bits))


# ---------------------------------------------------------------- objective


def sigma_from(z_star: WeightedCliqueMatrix, ridge: float = 0.0) -> np.ndarray:
    w = z_star.values
    sigma = w @ w.T
    if ridge:
        sigma = sigma + ridge * np.eye(w.shape[0])
    return sigma


def _cholesky(sigma: np.ndarray) -> np.ndarray:
    try:
        return linalg.cholesky(sigma, lower=True)
    except linalg.LinAlgError as exc:
        raise NumericalError("sigma is not positive definite") from exc


def _kappa_from_factor(l: np.ndarray, s: np.ndarray) -> float:
    x = linalg.solve_triangular(l, s, lower=True)
    y = linalg.solve_triangular(l, x.T, lower=True)
    return float(np.trace(y) + 2.0 * np.log(np.diag(l)).sum())


def kappa(sigma: np.ndarray, s: np.ndarray) -> float:
    """``Tr(Sigma^-1 S) + log det Sigma`` via a Cholesky factor of ``Sigma``."""
    sigma = np.asarray(sigma, dtype=np.float64)
    s = np.asarray(s, dtype=np.float64)
    if sigma.shape != s.shape:
        raise DimensionError("sigma and S differ in shape")
    return _kappa_from_factor(_cholesky(sigma), s)


def _kappa_and_grad(values: np.ndarray, maskbits: np.ndarray, s: np.ndarray, ridge: float):
    v = values.shape[0]
    # ridge may be a scalar or a per-vertex diagonal
    sigma = values @ values.T + np.diag(np.broadcast_to(ridge, (v,)))
    l = _cholesky(sigma)
    inv = linalg.cho_solve((l, True), np.eye(v))
    k = float(np.sum(inv * s) + 2.0 * np.log(np.diag(l)).sum())
    m = inv - inv @ s @ inv
    g = 2.0 * (m @ values)
    g[~maskbits] = 0.0
    return k, g


def kappa_gradient(z_star: WeightedCliqueMatrix, s: np.ndarray, ridge: float = 0.0) -> np.ndarray:
    """``d kappa / d W`` as a ``V x C`` array, zero outside the mask.

    ``2 (Sigma^-1 - Sigma^-1 S Sigma^-1) W`` with ``Sigma = W W^T + ridge I``.
    """
    return _kappa_and_grad(z_star.values, z_star.mask.bits, np.asarray(s, float), ridge)[1]


def rms_error(sigma_fit: np.ndarray, s: np.ndarray, graph: AdjacencyMatrix) -> float:
    """Root mean square of ``sigma_fit - s`` over entries with ``A_ij = 1``."""
    sigma_fit = np.asarray(sigma_fit)
    s = np.asarray(s)
    if sigma_fit.shape != s.shape or s.shape != graph.bits.shape:
        raise DimensionError("matrix shapes disagree")
    d = (sigma_fit - s)[graph.bits]
    return float(np.sqrt(np.mean(d * d)))


# ---------------------------------------------------------------- fitting


def check_sample_covariance(s: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Validate a symmetric PSD matrix with positive diagonal; return it as float."""
    s = np.asarray(s, dtype=np.float64)
    if s.ndim != 2 or s.shape[0] != s.shape[1] or s.shape[0] == 0:
        raise DimensionError(f"sample covariance must be square, got {s.shape}")
    if not np.isfinite(s).all():
        raise NumericalError("sample covariance has non-finite entries")
    if not np.allclose(s, s.T, rtol=0, atol=1e-9 * max(1.0, np.abs(s).max())):
        raise NumericalError("sample covariance is not symmetric")
    if not (np.diag(s) > 0).all():
        raise NumericalError("sample covariance needs a positive diagonal")
    lam = np.linalg.eigvalsh((s + s.T) / 2)
    if lam[0] < -tol * max(1.0, lam[-1]):
        raise NumericalError(f"sample covariance is not positive semidefinite (min eigenvalue {lam[0]:.3g})")
    return s


def initial_values(s: np.ndarray, mask: CliqueMatrix, noise: float,
                   rng: np.random.Generator) -> np.ndarray:
    """Start near ``S``: copy Cholesky columns into matching mask columns.

    Cholesky column ``j`` of ``S + 1e-6 I`` is copied (restricted to the mask)
    into the first unused mask column whose lowest vertex is ``j``.  All other
    free entries get uniform noise in ``[-noise, noise]``.
    """
    v, ncol = mask.bits.shape
    l = np.linalg.cholesky(s + 1e-6 * np.eye(v))
    vals = np.where(mask.bits, rng.uniform(-noise, noise, size=(v, ncol)), 0.0)
    lowest = mask.bits.argmax(axis=0)
    used = np.zeros(ncol, dtype=bool)
    for j in range(v):
        cand = np.flatnonzero((lowest == j) & ~used)
        if cand.size:
            c = cand[0]
            used[c] = True
            vals[mask.bits[:, c], c] = l[mask.bits[:, c], j]
    return vals


@dataclass
class _Descent:
    x: np.ndarray
    f: float
    g: np.ndarray
    iterations: int
    history: List[float]


def _lbfgs(fun, x0: np.ndarray, tol: float, max_iter: int, memory: int = 20) -> _Descent:
    """Limited-memory BFGS with Armijo backtracking.

    ``fun`` returns ``(f, grad)`` and raises NumericalError outside its domain;
    such trial points are treated as failed Armijo tests.  Every accepted step
    strictly lowers ``f``.  Stops when the gradient norm drops below ``tol``,
    after ``max_iter`` steps, or when no step along the search direction
    decreases ``f`` any more.
    """
    x = x0.copy()
    f, g = fun(x)
    history = [f]
    s_hist, y_hist = [], []
    it = 0
    while it < max_iter and np.linalg.norm(g) >= tol:
        # two-loop recursion
        q = g.copy()
        alphas = []
        for s_k, y_k in reversed(list(zip(s_hist, y_hist))):
            a_k = s_k @ q / (y_k @ s_k)
            alphas.append(a_k)
            q -= a_k * y_k
        if s_hist:
            q *= (s_hist[-1] @ y_hist[-1]) / (y_hist[-1] @ y_hist[-1])
        for (s_k, y_k), a_k in zip(zip(s_hist, y_hist), reversed(alphas)):
            q += (a_k - y_k @ q / (y_k @ s_k)) * s_k
        d = -q
        slope = g @ d
        if not slope < 0:
            s_hist, y_hist = [], []
            d = -g
            slope = -(g @ g)
        step = 1.0 if s_hist else min(1.0, 1.0 / max(np.linalg.norm(g), 1e-300))
        accepted = False
        while step > 1e-20:
            x_new = x + step * d
            try:
                f_new, g_new = fun(x_new)
            except NumericalError:
                f_new = np.inf
            if np.isfinite(f_new) and f_new <= f + 1e-4 * step * slope and f_new < f:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            if s_hist:
                # retry once along the plain gradient before giving up
                s_hist, y_hist = [], []
                continue
            break
        s_k, y_k = x_new - x, g_new - g
        if s_k @ y_k > 1e-12 * np.linalg.norm(s_k) * np.linalg.norm(y_k):
            s_hist.append(s_k)
            y_hist.append(y_k)
            if len(s_hist) > memory:
                s_hist.pop(0)
                y_hist.pop(0)
        x, f, g = x_new, f_new, g_new
        history.append(f)
        it += 1
    return _Descent(x, f, g, it, history)


NEWTON_MAX_PARAMS = 400


SADDLE_ESCAPES = 20


def _fd_hessian(grad, x: np.ndarray) -> np.ndarray:
    """Symmetrised central-difference Hessian of an analytic gradient."""
    n = x.size
    h = 1e-6 * max(1.0, float(np.abs(x).max()))
    H = np.empty((n, n))
    for i in range(n):
        e = np.zeros(n)
        e[i] = h
        H[:, i] = (grad(x + e) - grad(x - e)) / (2 * h)
    return 0.5 * (H + H.T)


def _negative_curvature_step(fun, res: "_Descent"):
    """A point below ``res.f`` along the most negative Hessian direction, or None.

    ``W W^T`` is unchanged by sign flips of a column, so stationary points with
    a column at zero are saddles rather than minima; first-order methods stop
    there.  Stepping along a negative eigenvector leaves them.
    """
    try:
        H = _fd_hessian(lambda y: fun(y)[1], res.x)
    except NumericalError:
        return None
    lam, u = np.linalg.eigh(H)
    if not lam[0] < -1e-6 * max(1.0, abs(lam[-1])):
        return None
    direction = u[:, 0]
    step = 1.0
    while step > 1e-8:
        for sign in (1.0, -1.0):
            x = res.x + sign * step * direction
            try:
                f = fun(x)[0]
            except NumericalError:
                continue
            if f < res.f - 1e-12 * max(1.0, abs(res.f)):
                return x
        step *= 0.5
    return None


def _newton_polish(fun, x0: np.ndarray, tol: float, max_iter: int) -> _Descent:
    """Trust-region Newton refinement with a finite-difference Hessian.

    The Hessian is differenced from the analytic gradient.  Trial points
    outside the domain score ``inf`` and are rejected by the trust region, so
    accepted steps still lower ``f`` strictly.
    """
    def f_only(x):
        try:
            return fun(x)[0]
        except NumericalError:
            return np.inf

    def grad(x):
        try:
            return fun(x)[1]
        except NumericalError:
            return np.zeros_like(x)

    def hess(x):
        return _fd_hessian(grad, x)

    f0, g0 = fun(x0)
    history = [f0]

    def record(xk, *_):
        history.append(f_only(xk))

    try:
        with np.errstate(invalid="ignore"):
            res = optimize.minimize(f_only, x0, jac=grad, hess=hess, method="trust-exact",
                                    callback=record, options={"gtol": tol, "maxiter": max_iter})
    except (ValueError, np.linalg.LinAlgError):
        # non-finite Hessian next to the domain boundary; keep the L-BFGS point
        return _Descent(x0, f0, g0, 0, [f0])
    x = res.x
    f, g = fun(x)
    if not f < f0:
        return _Descent(x0, f0, g0, 0, [f0])
    # drop callback entries repeating an unchanged point
    hist = [history[0]] + [b for a, b in zip(history, history[1:]) if b < a]
    return _Descent(x, f, g, int(res.nit), hist)


def fit_covariance(s: np.ndarray, graph: AdjacencyMatrix, z_mask: CliqueMatrix,
                   config: FitConfig = FitConfig()) -> Tuple[CovarianceModel, FitReport]:
    """Minimise ``kappa`` over the free entries of ``W`` with ``Sigma = W W^T``.

    The problem is solved in correlation scale: with ``D = diag(S)^(1/2)``,
    ``Sigma = D Sigma' D`` has the same zero pattern and ``kappa`` only shifts
    by ``2 log det D``.  When the initial ``W W^T`` is singular, a first
    descent runs with a small ridge added to ``Sigma``; if ``W W^T`` becomes
    positive definite the ridge is then dropped, otherwise it is kept in the
    model.  At ridge 0 the fit is L-BFGS followed, for small problems, by
    trust-region Newton refinement, and a stationary point with negative
    curvature is left along its most negative Hessian direction before the
    descent resumes.  ``kappa_history`` follows the final ridge-0 stages, so it
    describes the returned objective.
    """
    s = check_sample_covariance(s)
    if s.shape[0] != graph.v or z_mask.v != graph.v:
        raise DimensionError("graph, mask and sample covariance disagree on size")
    if not is_valid_clique_matrix(graph, z_mask):
        raise ValueError("z_mask is not a clique matrix for the graph")
    d = np.sqrt(np.diag(s))
    s_c = s / np.outer(d, d)
    shift = 2.0 * float(np.log(d).sum())
    v = graph.v
    ridge = config.ridge if config.ridge is not None else 1e-8 * np.trace(s) / v
    ridge_c = ridge / d**2  # the same isotropic ridge, seen in correlation scale
    maskbits = z_mask.bits
    rng = np.random.default_rng(config.seed)
    x0 = initial_values(s_c, z_mask, config.init_noise, rng)[maskbits]

    def objective(r):
        def fun(x):
            vals = np.zeros(maskbits.shape)
            vals[maskbits] = x
            k, g = _kappa_and_grad(vals, maskbits, s_c, r)
            return k, g[maskbits]
        return fun

    try:
        objective(0.0)(x0)
    except NumericalError:
        # W W^T starts singular: descend with the ridge first, then drop it if possible
        res = _lbfgs(objective(ridge_c), x0, config.tol, config.max_iter)
        iterations, final_ridge = res.iterations, ridge
        try:
            polished = _lbfgs(objective(0.0), res.x, config.tol, config.max_iter)
        except NumericalError:
            pass
        else:
            res, final_ridge = polished, 0.0
            iterations += polished.iterations
    else:
        res = _lbfgs(objective(0.0), x0, config.tol, config.max_iter)
        iterations, final_ridge = res.iterations, 0.0
    if final_ridge == 0.0 and 0 < res.x.size <= NEWTON_MAX_PARAMS and np.linalg.norm(res.g) >= config.tol:
        newton = _newton_polish(objective(0.0), res.x, config.tol, config.max_iter)
        if newton.iterations:
            res = newton
            iterations += newton.iterations
    if final_ridge == 0.0 and 0 < res.x.size <= NEWTON_MAX_PARAMS:
        fun = objective(0.0)
        for _ in range(SADDLE_ESCAPES):
            x_new = _negative_curvature_step(fun, res)
            if x_new is None:
                break
            nxt = _lbfgs(fun, x_new, config.tol, config.max_iter)
            if np.linalg.norm(nxt.g) >= config.tol:
                newton = _newton_polish(fun, nxt.x, config.tol, config.max_iter)
                if newton.iterations:
                    nxt = _Descent(newton.x, newton.f, newton.g, nxt.iterations + newton.iterations,
                                   nxt.history + newton.history[1:])
            res = _Descent(nxt.x, nxt.f, nxt.g, res.iterations + nxt.iterations + 1,
                           res.history + nxt.history)
            iterations += nxt.iterations + 1
    vals = np.zeros(maskbits.shape)
    vals[maskbits] = res.x
    w = WeightedCliqueMatrix(z_mask, vals * d[:, None])
    # gradient with respect to the unscaled entries W = D W'
    g = np.zeros(maskbits.shape)
    g[maskbits] = res.g
    grad_norm = float(np.linalg.norm((g / d[:, None])[maskbits]))
    model = CovarianceModel(graph, w, final_ridge)
    history = [k + shift for k in res.history]
    report = FitReport(float(res.f) + shift, iterations, grad_norm < config.tol, grad_norm, history)
    return model, report


# ---------------------------------------------------------------- pipelines


def covering_mask(a: AdjacencyMatrix, z: Optional[CliqueMatrix] = None) -> CliqueMatrix:
    """Repair ``z`` into a clique matrix for ``a``.

    Non-clique columns are dropped, uncovered edges are added as two-cliques
    and uncovered vertices as singletons; duplicates and subsumed columns
    are removed.
    """
    cols = []
    if z is not None:
        if z.v != a.v:
            raise DimensionError("clique matrix and graph disagree on vertex count")
        for s in z.column_sets():
            if a.bits[np.ix_(s, s)].all():
                cols.append(s)
    covered = reconstruct_bits(CliqueMatrix.from_columns(a.v, cols))
    for i, j in a.edges():
        if not covered[i, j]:
            cols.append((i, j))
    cols += [(i,) for i in range(a.v) if not covered[i, i] and a.bits[i].sum() == 1]
    return dedup_columns(CliqueMatrix.from_columns(a.v, cols))


def solver_mask(a: AdjacencyMatrix, c: Optional[int] = None, beta: float = 10.0,
                config=None, max_columns: int = DEFAULT_MAX_COLUMNS) -> CliqueMatrix:
    """Fitting pattern from the variational decomposition, then expanded.

    ``c`` defaults to the number of incidence-matrix columns, which always
    suffices for an exact cover.
    """
    from .meanfield import ModelParams, SolverConfig, solve_fixed_c

    if c is None:
        c = max(incidence_matrix(a).c, 1)
    config = config if config is not None else SolverConfig()
    z, _, _ = solve_fixed_c(a, ModelParams(beta=beta, c=c), config)
    return expand_clique_matrix(covering_mask(a, z), max_columns)


def cycle4_sample_covariance(rng: np.random.Generator) -> np.ndarray:
    """Sample ``S = L L^T`` with ``L`` the structured Cholesky factor of the 4-cycle.

    The nine structurally nonzero entries of ``L`` are drawn from N(0, 1) in
    row-major order; ``l_32`` is then replaced by ``-l_21 l_31 / l_22`` so that
    ``S_23 = 0``.  ``S_14 = 0`` holds because ``l_41 = 0``.
    """
    idx = [(0, 0), (1, 0), (1, 1), (2, 0), (2, 1), (2, 2), (3, 1), (3, 2), (3, 3)]
    l = np.zeros((4, 4))
    for (i, j), x in zip(idx, rng.standard_normal(len(idx))):
        l[i, j] = x
    l[2, 1] = -l[1, 0] * l[2, 0] / l[1, 1]
    s = l @ l.T
    s[0, 3] = s[3, 0] = 0.0
    s[1, 2] = s[2, 1] = 0.0
    return s


@dataclass(frozen=True)
class Replication:
    index: int
    rms_error: float
    kappa: float
    converged: bool
    sigma: np.ndarray = field(repr=False, compare=False)
    s: np.ndarray = field(repr=False, compare=False)


def replicate_cycle4(n: int, seed: int = 0, config: FitConfig = FitConfig(),
                   mask: Optional[CliqueMatrix] = None) -> List[Replication]:
    """Fit the 4-cycle experiment ``n`` times.

    Replication ``i`` draws ``S`` and the initial noise from the child stream
    ``(seed, i)``; the default mask is the 4x8 expanded clique matrix.
    """
    if n < 1:
        raise ValueError("replications must be at least 1")
    if mask is None:
        mask = expand_clique_matrix(incidence_matrix(CYCLE4))
    out = []
    for i in range(n):
        rng = child_rng(seed, i)
        s = cycle4_sample_covariance(rng)
        cfg = FitConfig(config.tol, config.max_iter, config.ridge, config.init_noise,
                        int(rng.integers(2 ** 63)))
        model, rep = fit_covariance(s, CYCLE4, mask, cfg)
        sig = model.sigma
        out.append(Replication(i, rms_error(sig, s, CYCLE4), rep.kappa, rep.converged, sig, s))
    return out
