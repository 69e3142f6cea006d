import dataclasses
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sbmgof.errors import DegenerateBootstrapError, DegenerateClusterError, ParameterError
from sbmgof.gof import (
    bootstrap_corrected_test,
    bootstrap_extremes,
    bootstrap_result,
    edge_statistics,
    estimate_block_matrix,
    fit_null,
    gof_test,
    oracle_residual_matrix,
    plain_result,
    residual_matrix,
    tw_threshold,
)
from sbmgof.netgen import (
    AdjacencyGraph,
    BlockMatrix,
    Membership,
    balanced_membership,
    generate_sbm,
    planted_blocks,
    random_membership,
    read_edge_list,
)
from sbmgof.rng import BOOTSTRAP, SeededRng
from sbmgof.spectral import EigenExtremes
from sbmgof.tracy_widom import tw1_moments, tw1_quantile

SIX_GHAT = Membership(np.array([0, 0, 0, 1, 1, 1]), 2)


@pytest.fixture
def six(fixture_path):
    return read_edge_list(fixture_path("six_node.txt"), indexing=1)


def random_instance(seed, n_max=40, K_max=4):
    gen = np.random.default_rng(seed)
    n = int(gen.integers(6, n_max))
    K = int(gen.integers(1, K_max + 1))
    rng = SeededRng(seed)
    g = random_membership(n, K, rng.child(1))
    upper = np.triu(gen.uniform(0.05, 0.95, (K, K)))
    b = BlockMatrix(upper + np.triu(upper, 1).T)
    return generate_sbm(g, b, rng.child(2)), g


# --- block estimates and residuals -------------------------------------------


def test_six_node_block_estimates(six):
    b = estimate_block_matrix(six, SIX_GHAT).probs
    assert abs(b[0, 0] - 1 / 3) < 1e-12
    assert abs(b[0, 1] - 2 / 9) < 1e-12
    assert abs(b[1, 0] - 2 / 9) < 1e-12
    assert abs(b[1, 1] - 2 / 3) < 1e-12


def test_six_node_residual_entry(six):
    b = estimate_block_matrix(six, SIX_GHAT)
    r = residual_matrix(six, SIX_GHAT, b)
    expected = (2 / 3) / np.sqrt(5 * (1 / 3) * (2 / 3))
    assert abs(r.values[0, 1] - expected) < 1e-12
    assert abs(r.values[0, 1] - 0.6324555320336759) < 1e-12
    assert r.clamp_count == 0


def test_complete_and_empty_graph_estimates():
    g = Membership(np.array([0, 1, 0, 1, 2, 2]), 3)
    full = AdjacencyGraph(np.ones((6, 6)) - np.eye(6))
    assert np.array_equal(estimate_block_matrix(full, g).probs, np.ones((3, 3)))
    empty = AdjacencyGraph(np.zeros((6, 6)))
    assert np.array_equal(estimate_block_matrix(empty, g).probs, np.zeros((3, 3)))


def test_singleton_cluster_raises_with_index():
    g = Membership(np.array([0, 0, 1, 0]), 2)
    graph = AdjacencyGraph.from_edges(4, [(0, 1), (1, 2)])
    with pytest.raises(DegenerateClusterError) as info:
        estimate_block_matrix(graph, g)
    assert info.value.cluster == 1
    fit = fit_null(graph, 2, ghat=g)
    assert fit.degenerate_clusters == (1,)
    assert fit.bhat.probs[1, 1] == 0.5


def test_clamped_empty_graph_residual():
    n, K, eps = 7, 3, 1e-6
    g = Membership(np.array([0, 1, 2, 0, 1, 2, 0]), K)
    graph = AdjacencyGraph(np.zeros((n, n)))
    r = residual_matrix(graph, g, BlockMatrix(np.zeros((K, K))), eps)
    off = r.values[~np.eye(n, dtype=bool)]
    assert np.allclose(off, -np.sqrt(eps / ((n - 1) * (1 - eps))), rtol=1e-14, atol=0)
    assert np.all(np.diag(r.values) == 0)
    assert r.clamp_count == K * (K + 1) // 2


def test_clamp_eps_validation(six):
    b = estimate_block_matrix(six, SIX_GHAT)
    for eps in (0.0, 0.5, -1e-3):
        with pytest.raises(ParameterError):
            residual_matrix(six, SIX_GHAT, b, eps)


def test_reconstruction_identity_and_permutation_invariance():
    for seed in range(100):
        graph, g = random_instance(seed)
        b = estimate_block_matrix(graph, g) if g.sizes.min() > 1 else None
        if b is None:
            continue
        r = residual_matrix(graph, g, b)
        n = graph.n
        off = ~np.eye(n, dtype=bool)
        p = r.phat
        back = r.values * np.sqrt((n - 1) * p * (1 - p)) + p
        assert np.allclose(back[off], graph.entries[off], atol=1e-12)
        assert np.array_equal(r.values, r.values.T)
        assert np.all(np.diag(r.values) == 0)

        perm = np.random.default_rng(seed).permutation(g.K)
        g2 = g.relabeled(perm)
        b2 = estimate_block_matrix(graph, g2)
        assert b2 == b.permuted(perm)
        r2 = residual_matrix(graph, g2, b2)
        assert np.array_equal(r.values, r2.values)
        t_a = gof_test(graph, g.K, ghat=g).statistic
        t_b = gof_test(graph, g.K, ghat=g2).statistic
        assert t_a == t_b


def test_oracle_residual_moments():
    n = 10
    g = Membership(np.array([0] * 5 + [1] * 5), 2)
    b = planted_blocks(2, 0.7, 0.3)
    vals = np.array([
        oracle_residual_matrix(generate_sbm(g, b, SeededRng(s)), g, b).values[0, 6] for s in range(10_000)
    ])
    assert abs(vals.mean()) < 3 * vals.std() / 100
    # row variances sum to one by construction of the scaling
    r = oracle_residual_matrix(generate_sbm(g, b, SeededRng(0)), g, b)
    p = r.phat
    row_var = ((p * (1 - p)) / ((n - 1) * p * (1 - p)))[~np.eye(n, dtype=bool)].reshape(n, n - 1).sum(1)
    assert np.allclose(row_var, 1.0, atol=1e-12)
    with pytest.raises(ParameterError):
        oracle_residual_matrix(generate_sbm(g, b, SeededRng(0)), g, planted_blocks(2, 1.0, 0.3))


# --- statistic and decision ---------------------------------------------------


def test_statistic_definition_and_negation_symmetry():
    graph, g = random_instance(4, n_max=60)
    fit = fit_null(graph, g.K, ghat=g)
    res = plain_result(fit, 0.05)
    n = graph.n
    t1, tn = edge_statistics(fit.extremes, n)
    assert res.statistic == max(n ** (2 / 3) * (res.lambda_1 - 2), n ** (2 / 3) * (-res.lambda_n - 2))
    assert res.statistic == max(t1, tn)
    assert res.statistic == pytest.approx(n ** (2 / 3) * (fit.extremes.sigma_1 - 2), rel=0, abs=1e-12)
    assert res.reject == (res.statistic >= res.threshold)
    assert res.threshold == tw1_quantile(1 - 0.05 / 2)
    neg = EigenExtremes(-fit.extremes.lambda_n, -fit.extremes.lambda_1)
    assert edge_statistics(neg, n)[0] == pytest.approx(tn, abs=1e-12)


def test_rule_with_negative_statistic():
    graph, g = random_instance(1, n_max=30)
    fit = fit_null(graph, g.K, ghat=g)
    n = graph.n
    edge = 2 - 5 / n ** (2 / 3)
    forced = dataclasses.replace(fit, extremes=EigenExtremes(edge, -edge))
    res = plain_result(forced, 0.05)
    assert res.statistic == pytest.approx(-5, abs=1e-12)
    assert res.threshold > 0
    assert not res.reject


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), a=st.floats(1e-4, 0.5), b=st.floats(1e-4, 0.5))
def test_monotone_in_alpha(seed, a, b):
    lo, hi = sorted((a, b))
    assert tw_threshold(hi) <= tw_threshold(lo)
    graph, g = random_instance(seed, n_max=25)
    fit = fit_null(graph, g.K, ghat=g)
    if plain_result(fit, lo).reject:
        assert plain_result(fit, hi).reject


def test_alpha_validation(six):
    for alpha in (0.0, 1.0, 1.5):
        with pytest.raises(ParameterError):
            gof_test(six, 2, alpha, ghat=SIX_GHAT)


def test_result_json_is_stable(six):
    res = gof_test(six, 2, ghat=SIX_GHAT)
    doc = json.loads(json.dumps(res.to_dict()))
    assert list(doc) == [
        "n", "K0", "mode", "statistic", "lambda_1", "lambda_n", "threshold", "alpha", "reject",
        "p_value", "p_value_kind", "clamp_count", "degenerate_clusters", "cluster_sizes", "bootstrap",
    ]
    assert doc["p_value_kind"] == "Bonferroni-style upper bound"
    assert 0 <= doc["p_value"] <= 1


def test_alternative_rejected_at_permissive_level():
    g = random_membership(300, 3, SeededRng(0))
    graph = generate_sbm(g, planted_blocks(3, 0.6, 0.2), SeededRng(1))
    assert gof_test(graph, 2, alpha=1 - 1e-9, rng=SeededRng(2)).reject


# --- bootstrap ---------------------------------------------------------------


def dense_bootstrap_oracle(fit, M, rng):
    """Float64 dense reference: regenerate each replicate graph and decompose."""
    lam1, lamn = [], []
    n = fit.n
    p = fit.residual.phat
    scale = np.sqrt((n - 1) * p * (1 - p))
    for m in range(M):
        a = generate_sbm(fit.ghat, fit.bhat, rng.child(BOOTSTRAP, m)).entries
        r = (a - p) / scale
        np.fill_diagonal(r, 0)
        w = np.linalg.eigvalsh(r)
        lam1.append(w[-1])
        lamn.append(w[0])
    return np.array(lam1), np.array(lamn)


@pytest.mark.parametrize("n, within, between", [(60, 0.6, 0.2), (400, 0.6, 0.2), (400, 0.1, 0.02)])
def test_bootstrap_replicates_match_dense_oracle(n, within, between):
    # the last case is sparse enough for the sparse replicate operator
    g = balanced_membership(n, 2)
    graph = generate_sbm(g, planted_blocks(2, within, between), SeededRng(3))
    fit = fit_null(graph, 2, ghat=g)
    rng = SeededRng(8)
    fast = bootstrap_extremes(fit, 6, rng)
    slow = dense_bootstrap_oracle(fit, 6, rng)
    assert np.allclose(fast[0], slow[0], atol=2e-6, rtol=0)
    assert np.allclose(fast[1], slow[1], atol=2e-6, rtol=0)


def test_bootstrap_formula_and_zero_standardization():
    g = balanced_membership(80, 2)
    graph = generate_sbm(g, planted_blocks(2, 0.6, 0.2), SeededRng(4))
    fit = fit_null(graph, 2, ghat=g)
    rng = SeededRng(5)
    res = bootstrap_result(fit, 0.05, 20, rng)
    d = res.bootstrap
    mu, s = tw1_moments()
    c1 = mu + s * (res.lambda_1 - d.mu_1) / d.s_1
    cn = mu + s * (-(res.lambda_n - d.mu_n) / d.s_n)
    assert res.statistic == max(c1, cn)
    assert d.s_1 == pytest.approx(np.std(d.samples_1, ddof=1), rel=1e-12)
    assert res.reject == (res.statistic >= res.threshold)
    centred = dataclasses.replace(fit, extremes=EigenExtremes(d.mu_1, d.mu_n))
    res0 = bootstrap_result(centred, 0.05, 20, rng)
    assert res0.statistic == pytest.approx(mu, abs=1e-12)


def test_bootstrap_validation_and_degenerate_spread():
    g = Membership(np.array([0, 0, 1, 1]), 2)
    full = AdjacencyGraph(np.ones((4, 4)) - np.eye(4))
    with pytest.raises(ParameterError):
        bootstrap_corrected_test(full, 2, M=1, ghat=g)
    # every replicate of a clamped complete graph is the same graph
    with pytest.raises(DegenerateBootstrapError):
        bootstrap_corrected_test(full, 2, M=5, ghat=g)


def test_bootstrap_deterministic():
    g = balanced_membership(120, 2)
    graph = generate_sbm(g, planted_blocks(2, 0.6, 0.2), SeededRng(6))
    a = bootstrap_corrected_test(graph, 2, M=10, rng=SeededRng(1))
    b = bootstrap_corrected_test(graph, 2, M=10, rng=SeededRng(1))
    assert a.to_dict() == b.to_dict()
