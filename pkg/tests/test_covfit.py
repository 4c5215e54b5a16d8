import math

import numpy as np
import pytest

from cliquemat.covfit import (CYCLE4, CovarianceModel, ExpansionTooLarge, FitConfig, FitReport,
                              NumericalError, WeightedCliqueMatrix, cholesky_pattern_clique_matrix,
                              covering_mask, cycle4_sample_covariance, expand_clique_matrix,
                              fit_covariance, kappa, kappa_gradient, perfect_elimination_order,
                              replicate_cycle4, rms_error, sigma_from, solver_mask)
from cliquemat.graph import (AdjacencyMatrix, CliqueMatrix, columns_are_cliques, incidence_matrix,
                             is_valid_clique_matrix, reconstruct_bits)
from cliquemat.rng import child_rng

from oracles import (finite_difference_gradient, is_chordal_brute, kappa_dense, random_chordal_graph,
                     random_graph, random_spd, structured_cholesky_min)

CHAIN = AdjacencyMatrix.from_edges(3, [(0, 1), (1, 2)])


def random_weighted(rng, mask):
    return WeightedCliqueMatrix(mask, np.where(mask.bits, rng.standard_normal(mask.bits.shape), 0.0))


# ---------------------------------------------------------------- expansion


def test_expand_two_triangles_gives_eleven_columns(two_triangles_z):
    e = expand_clique_matrix(two_triangles_z)
    assert e.column_sets() == [(0, 1, 2), (1, 2, 3), (0, 1), (0, 2), (1, 2), (1, 3), (2, 3),
                               (0,), (1,), (2,), (3,)]


def test_expand_small_cases():
    single = CliqueMatrix.from_columns(3, [(1,)])
    assert expand_clique_matrix(single) == single
    assert expand_clique_matrix(CliqueMatrix(np.ones((2, 1), dtype=bool))).column_sets() == [(0, 1), (0,), (1,)]


def test_expand_keeps_originals_and_validity(rng):
    for _ in range(20):
        a = random_graph(rng, 7, 0.5)
        z = incidence_matrix(a)
        e = expand_clique_matrix(z)
        assert np.array_equal(e.bits[:, :z.c], z.bits)
        assert len(set(e.column_sets())) == e.c
        assert is_valid_clique_matrix(a, e)


def test_expand_cap():
    z = CliqueMatrix(np.ones((6, 1), dtype=bool))
    assert expand_clique_matrix(z, 63).c == 63
    with pytest.raises(ExpansionTooLarge):
        expand_clique_matrix(z, 62)
    big = CliqueMatrix(np.ones((13, 1), dtype=bool))
    with pytest.raises(ExpansionTooLarge):
        expand_clique_matrix(big)


def test_expand_cap_counts_shared_subcolumns():
    # two overlapping 5-cliques share their sub-columns on the common vertices
    z = CliqueMatrix.from_columns(6, [(0, 1, 2, 3, 4), (1, 2, 3, 4, 5)])
    n = expand_clique_matrix(z).c
    with pytest.raises(ExpansionTooLarge):
        expand_clique_matrix(z, n - 1)
    assert expand_clique_matrix(z, n).c == n


# ---------------------------------------------------------------- elimination orders


def test_peo_examples(two_triangles):
    order = perfect_elimination_order(two_triangles)
    assert order is not None and sorted(order) == [0, 1, 2, 3]
    assert perfect_elimination_order(CYCLE4) is None
    assert perfect_elimination_order(AdjacencyMatrix.complete(5)) is not None


def test_peo_agrees_with_brute_force_chordality(rng):
    for _ in range(150):
        a = random_graph(rng, int(rng.integers(1, 8)), float(rng.uniform(0.2, 0.8)))
        order = perfect_elimination_order(a)
        assert (order is not None) == is_chordal_brute(a.bits)
        if order is not None:
            cholesky_pattern_clique_matrix(a.permuted(order))


def test_cholesky_pattern_examples(two_triangles, two_triangles_z):
    z = cholesky_pattern_clique_matrix(two_triangles)
    assert z.column_sets() == [(0, 1, 2), (1, 2, 3), (2, 3), (3,)]
    expanded = expand_clique_matrix(two_triangles_z).column_sets()
    assert [expanded.index(s) for s in z.column_sets()] == [0, 1, 6, 10]
    assert is_valid_clique_matrix(two_triangles, z)
    assert np.array_equal(cholesky_pattern_clique_matrix(AdjacencyMatrix.identity(4)).bits, np.eye(4, dtype=bool))
    assert cholesky_pattern_clique_matrix(CHAIN).column_sets() == [(0, 1), (1, 2), (2,)]


def test_cholesky_pattern_rejects_bad_order(two_triangles):
    with pytest.raises(ValueError):
        cholesky_pattern_clique_matrix(CYCLE4)
    # vertex 1 first: its later neighbours 0, 2, 3 are not pairwise adjacent
    with pytest.raises(ValueError):
        cholesky_pattern_clique_matrix(two_triangles.permuted([1, 0, 2, 3]))


# ---------------------------------------------------------------- sigma and kappa


def test_weighted_matrix_invariant(two_triangles_z):
    with pytest.raises(ValueError):
        WeightedCliqueMatrix(two_triangles_z, np.ones((4, 2)))
    w = WeightedCliqueMatrix(two_triangles_z, two_triangles_z.bits * 2.0)
    assert np.array_equal(WeightedCliqueMatrix.from_free(two_triangles_z, w.free()).values, w.values)


def test_sigma_from_examples(two_triangles_z, rng):
    w = WeightedCliqueMatrix(two_triangles_z, two_triangles_z.bits.astype(float))
    assert sigma_from(w, 0).tolist() == [[1, 1, 1, 0], [1, 2, 2, 1], [1, 2, 2, 1], [0, 1, 1, 1]]
    zero = WeightedCliqueMatrix(two_triangles_z, np.zeros((4, 2)))
    assert np.array_equal(sigma_from(zero, 1.0), np.eye(4))
    mask = expand_clique_matrix(incidence_matrix(CYCLE4))
    sig = sigma_from(random_weighted(rng, mask))
    assert sig[0, 3] == sig[3, 0] == sig[1, 2] == sig[2, 1] == 0.0


def test_structural_zeros_bitwise(rng):
    for _ in range(100):
        a = random_graph(rng, int(rng.integers(2, 9)), 0.5)
        mask = expand_clique_matrix(incidence_matrix(a))
        sig = sigma_from(random_weighted(rng, mask), float(rng.uniform(0, 1)))
        off = ~a.bits
        assert (sig[off] == 0.0).all()


def test_kappa_examples(rng):
    assert kappa(np.eye(3), np.eye(3)) == pytest.approx(3.0, abs=1e-14)
    for _ in range(5):
        s = random_spd(rng, 4)
        assert kappa(s, s) == pytest.approx(4 + np.linalg.slogdet(s)[1], abs=1e-10)
    assert kappa(2 * np.eye(2), np.eye(2)) == pytest.approx(1 + 2 * math.log(2), abs=1e-14)
    assert kappa(2 * np.eye(2), np.eye(2)) == pytest.approx(2.3863, abs=1e-4)


def test_kappa_matches_dense(rng):
    for _ in range(10):
        sig, s = random_spd(rng, 5), random_spd(rng, 5)
        assert kappa(sig, s) == pytest.approx(kappa_dense(sig, s), rel=1e-10)


def test_kappa_rejects_indefinite():
    with pytest.raises(NumericalError):
        kappa(np.diag([1.0, -1.0]), np.eye(2))
    with pytest.raises(NumericalError):
        kappa(np.zeros((2, 2)), np.eye(2))


# ---------------------------------------------------------------- gradient


def gradient_instances(rng, n=20):
    out = []
    while len(out) < n:
        v = int(rng.integers(2, 6))
        a = random_graph(rng, v, 0.6)
        mask = expand_clique_matrix(incidence_matrix(a))
        w = random_weighted(rng, mask)
        if np.linalg.cond(sigma_from(w, 0.1)) > 1e4:
            continue
        out.append((w, random_spd(rng, v), 0.1))
    return out


def test_gradient_finite_differences(rng):
    worst = 0.0
    for w, s, ridge in gradient_instances(rng):
        g = kappa_gradient(w, s, ridge)
        fd = finite_difference_gradient(w.values, w.mask.bits, s, ridge)
        worst = max(worst, np.abs(g - fd).max() / max(np.abs(fd).max(), 1e-12))
        assert (g[~w.mask.bits] == 0).all()
    assert worst < 1e-5


def test_gradient_vanishes_at_unconstrained_optimum(rng):
    s = random_spd(rng, 4)
    mask = cholesky_pattern_clique_matrix(AdjacencyMatrix.complete(4))
    w = WeightedCliqueMatrix(mask, np.linalg.cholesky(s))
    assert np.linalg.norm(kappa_gradient(w, s, 0.0)) < 1e-8


# ---------------------------------------------------------------- fitting


def test_fit_complete_graph_recovers_s(rng):
    k4 = AdjacencyMatrix.complete(4)
    mask = cholesky_pattern_clique_matrix(k4)
    for _ in range(5):
        s = random_spd(rng, 4)
        model, rep = fit_covariance(s, k4, mask)
        assert np.abs(model.sigma - s).max() < 1e-6
        assert rep.kappa == pytest.approx(4 + np.linalg.slogdet(s)[1], abs=1e-8)
        assert model.ridge == 0.0


def test_fit_chain_matches_oracle(rng):
    mask = cholesky_pattern_clique_matrix(CHAIN)
    for _ in range(5):
        s = random_spd(rng, 3)
        model, rep = fit_covariance(s, CHAIN, mask)
        assert rep.kappa == pytest.approx(structured_cholesky_min(s, CHAIN.bits, [0, 1, 2]), abs=1e-6)
        assert model.sigma[0, 2] == 0.0 and model.sigma[2, 0] == 0.0


def test_fit_kappa_history_monotone(rng):
    mask = expand_clique_matrix(incidence_matrix(CYCLE4))
    for i in range(10):
        s = cycle4_sample_covariance(child_rng(99, i))
        _, rep = fit_covariance(s, CYCLE4, mask)
        h = np.array(rep.kappa_history)
        assert (np.diff(h) < 0).all()
        assert h[-1] <= h[0]
        assert rep.grad_norm >= 0


def test_fit_cycle4_structural_zeros(rng):
    mask = expand_clique_matrix(incidence_matrix(CYCLE4))
    assert mask.c == 8
    s = random_spd(rng, 4)
    model, _ = fit_covariance(s, CYCLE4, mask)
    sig = model.sigma
    assert sig[0, 3] == sig[3, 0] == sig[1, 2] == sig[2, 1] == 0.0


def test_fit_errors(rng, two_triangles, two_triangles_z):
    s = random_spd(rng, 4)
    with pytest.raises(ValueError):
        # misses edges 0-2 and 1-3 of the 4-cycle
        fit_covariance(s, CYCLE4, CliqueMatrix.from_columns(4, [(0, 1), (2, 3)]))
    with pytest.raises(ValueError):
        fit_covariance(s, CYCLE4, CliqueMatrix.from_columns(4, [(0, 1, 2, 3)]))
    with pytest.raises(NumericalError):
        fit_covariance(np.diag([1.0, 1.0, 1.0, -1.0]), two_triangles, two_triangles_z)
    bad = s.copy()
    bad[0, 1] += 0.5
    with pytest.raises(NumericalError):
        fit_covariance(bad, two_triangles, two_triangles_z)
    with pytest.raises(NumericalError):
        fit_covariance(np.array([[1, 2, 0, 0], [2, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1.0]]), two_triangles, two_triangles_z)


def test_fit_deterministic(rng):
    mask = expand_clique_matrix(incidence_matrix(CYCLE4))
    s = cycle4_sample_covariance(child_rng(5, 0))
    a, ra = fit_covariance(s, CYCLE4, mask, FitConfig(seed=3))
    b, rb = fit_covariance(s, CYCLE4, mask, FitConfig(seed=3))
    assert np.array_equal(a.sigma, b.sigma) and ra.kappa == rb.kappa


def test_expansion_never_worse_than_incidence():
    inc = incidence_matrix(CYCLE4)
    exp = expand_clique_matrix(inc)
    for i in range(50):
        s = cycle4_sample_covariance(child_rng(2024, i))
        _, r_inc = fit_covariance(s, CYCLE4, inc)
        _, r_exp = fit_covariance(s, CYCLE4, exp)
        assert r_exp.kappa <= r_inc.kappa + 1e-8 * max(1.0, abs(r_inc.kappa))


def test_config_and_report_validation(two_triangles_z):
    with pytest.raises(ValueError):
        FitConfig(tol=0)
    with pytest.raises(ValueError):
        FitReport(1.0, 1, False, -1.0)
    assert set(FitReport(1.0, 2, True, 0.0).to_dict()) == {"kappa", "iterations", "converged", "grad_norm"}
    w = WeightedCliqueMatrix(two_triangles_z, two_triangles_z.bits.astype(float))
    with pytest.raises(ValueError):
        CovarianceModel(CYCLE4, w)


# ---------------------------------------------------------------- rms and helpers


def test_rms_examples(rng):
    s = random_spd(rng, 4)
    k4 = AdjacencyMatrix.complete(4)
    assert rms_error(s, s, k4) == 0.0
    e = np.zeros((4, 4))
    e[0, 2] = e[2, 0] = 1.0
    assert rms_error(s + e, s, k4) == pytest.approx(math.sqrt(2 / 16))
    assert rms_error(s + e, s, k4) == pytest.approx(0.3536, abs=1e-4)
    far = np.zeros((4, 4))
    far[0, 3] = far[3, 0] = 100.0
    assert rms_error(s + far, s, CYCLE4) == 0.0


def test_cycle4_sample_is_in_the_constrained_set():
    for i in range(50):
        s = cycle4_sample_covariance(child_rng(1, i))
        assert s[0, 3] == s[3, 0] == s[1, 2] == s[2, 1] == 0.0
        assert np.allclose(s, s.T)
        assert np.linalg.eigvalsh(s)[0] > -1e-10 * np.abs(s).max()


def test_covering_mask_repairs(two_triangles):
    z = CliqueMatrix.from_columns(4, [(0, 1, 2, 3), (1, 2)])
    m = covering_mask(two_triangles, z)
    assert is_valid_clique_matrix(two_triangles, m)
    assert columns_are_cliques(two_triangles, m)
    iso = AdjacencyMatrix.from_edges(3, [(0, 1)])
    assert covering_mask(iso).column_sets() == [(0, 1), (2,)]


def test_solver_mask_is_valid(two_triangles):
    m = solver_mask(two_triangles)
    assert is_valid_clique_matrix(two_triangles, m)
    assert np.array_equal(reconstruct_bits(m), two_triangles.bits)
    assert solver_mask(CYCLE4).c == 8


def test_replicate_deterministic_and_keyed_by_index():
    a = replicate_cycle4(3, seed=7)
    b = replicate_cycle4(5, seed=7)
    assert [r.rms_error for r in a] == [r.rms_error for r in b[:3]]
    assert all(r.sigma[0, 3] == 0 and r.sigma[1, 2] == 0 for r in b)
    with pytest.raises(ValueError):
        replicate_cycle4(0)


def test_negative_curvature_step_leaves_zero_column_saddle():
    # edge column at zero, singletons at one: Sigma = I is stationary but not a minimum
    from cliquemat.covfit import _Descent, _kappa_and_grad, _lbfgs, _negative_curvature_step

    s = np.array([[1.0, 0.9], [0.9, 1.0]])
    mask = CliqueMatrix.from_columns(2, [(0, 1), (0,), (1,)])

    def fun(x):
        vals = np.zeros((2, 3))
        vals[mask.bits] = x
        k, g = _kappa_and_grad(vals, mask.bits, s, 0.0)
        return k, g[mask.bits]

    x0 = np.array([0.0, 1.0, 0.0, 1.0])
    f0, g0 = fun(x0)
    assert np.linalg.norm(g0) < 1e-12
    start = _Descent(x0, f0, g0, 0, [f0])
    assert _lbfgs(fun, x0, 1e-8, 100).f == f0
    x1 = _negative_curvature_step(fun, start)
    assert x1 is not None and fun(x1)[0] < f0
    best = _lbfgs(fun, x1, 1e-10, 1000)
    assert best.f == pytest.approx(2 + np.linalg.slogdet(s)[1], abs=1e-8)
