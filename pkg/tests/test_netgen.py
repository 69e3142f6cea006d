import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sbmgof.errors import EdgeListParseError, ParameterError
from sbmgof.netgen import (
    AdjacencyGraph,
    BlockMatrix,
    DcbmParams,
    Membership,
    MmbmParams,
    balanced_membership,
    generate_dcbm,
    generate_mmbm,
    generate_sbm,
    largest_connected_component,
    planted_blocks,
    random_membership,
    read_edge_list,
    read_labels,
    sample_dirichlet_rows,
    write_edge_list,
)
from sbmgof.rng import SeededRng

BLOCKS = planted_blocks(2, 0.6, 0.2)


def assert_valid_graph(g: AdjacencyGraph):
    a = g.entries
    assert np.array_equal(a, a.T)
    assert np.all(np.diag(a) == 0)
    assert np.all((a == 0) | (a == 1))


def pair_density(g: AdjacencyGraph) -> float:
    n = g.n
    return g.n_edges / (n * (n - 1) / 2)


# --- types ------------------------------------------------------------------


def test_adjacency_rejects_bad_matrices():
    with pytest.raises(ParameterError):
        AdjacencyGraph(np.array([[0, 1], [0, 0]]))
    with pytest.raises(ParameterError):
        AdjacencyGraph(np.array([[1, 0], [0, 0]]))
    with pytest.raises(ParameterError):
        AdjacencyGraph(np.array([[0, 0.5], [0.5, 0]]))


def test_adjacency_is_immutable():
    g = AdjacencyGraph.from_edges(3, [(0, 1)])
    with pytest.raises(ValueError):
        g.entries[0, 2] = 1


def test_membership_and_block_validation():
    with pytest.raises(ParameterError):
        Membership(np.array([0, 2]), 2)
    assert not Membership(np.array([0, 0]), 2).is_proper
    with pytest.raises(ParameterError):
        BlockMatrix(np.array([[0.1, 0.2], [0.3, 0.1]]))
    with pytest.raises(ParameterError):
        BlockMatrix(np.array([[1.2]]))
    assert planted_blocks(3, 0.6, 0.2).has_distinct_rows()
    assert not BlockMatrix(np.full((2, 2), 0.3)).has_distinct_rows()


def test_membership_from_labels_sorts_tokens():
    m = Membership.from_labels(["b", "a", "b", "c"])
    assert m.K == 3
    assert m.labels.tolist() == [1, 0, 1, 2]


def test_param_validation():
    g = balanced_membership(4, 2)
    with pytest.raises(ParameterError):
        DcbmParams(g, BLOCKS, np.ones(3))
    with pytest.raises(ParameterError):
        DcbmParams(g, BLOCKS, np.array([0.5, 1.5, 0.5, 0.5]))
    with pytest.raises(ParameterError):
        MmbmParams(BLOCKS, np.array([[0.5, 0.6], [1.0, 0.0]]))
    with pytest.raises(ParameterError):
        generate_sbm(balanced_membership(4, 3), BLOCKS, SeededRng(0))


def test_random_membership_is_proper_for_tiny_n():
    for seed in range(20):
        m = random_membership(3, 3, SeededRng(seed))
        assert sorted(m.labels.tolist()) == [0, 1, 2]


# --- generators ---------------------------------------------------------------


def test_sbm_degenerate_probabilities():
    g = Membership(np.array([0, 1, 0, 1]), 2)
    full = generate_sbm(g, BlockMatrix(np.ones((2, 2))), SeededRng(1))
    assert np.array_equal(full.entries, np.ones((4, 4)) - np.eye(4))
    empty = generate_sbm(g, BlockMatrix(np.zeros((2, 2))), SeededRng(1))
    assert empty.n_edges == 0


def test_sbm_density_matches_expectation():
    n = 1000
    g = balanced_membership(n, 2)
    within = 2 * (n // 2) * (n // 2 - 1) / 2
    pairs = n * (n - 1) / 2
    w = within / pairs
    expected = 0.6 * w + 0.2 * (1 - w)
    # exact variance of the density for independent Bernoulli pairs
    se = np.sqrt((within * 0.6 * 0.4 + (pairs - within) * 0.2 * 0.8) / pairs**2 / 100)
    dens = [pair_density(generate_sbm(g, BLOCKS, SeededRng(s))) for s in range(100)]
    assert abs(np.mean(dens) - expected) < 3 * se


def test_dcbm_reductions():
    g = random_membership(60, 2, SeededRng(3))
    sbm = generate_sbm(g, BLOCKS, SeededRng(11))
    dcbm = generate_dcbm(DcbmParams(g, BLOCKS, np.ones(60)), SeededRng(11))
    assert np.array_equal(sbm.entries, dcbm.entries)
    assert generate_dcbm(DcbmParams(g, BLOCKS, np.zeros(60)), SeededRng(11)).n_edges == 0


def test_dcbm_density_matches_expectation():
    n = 1000
    g = balanced_membership(n, 2)
    w = (n // 2 - 1) / (n - 1)
    expected = 0.25 * (0.6 * w + 0.2 * (1 - w))
    dens = []
    for s in range(100):
        rng = SeededRng(s)
        psi = rng.child(1).generator.uniform(0, 1, n)
        dens.append(pair_density(generate_dcbm(DcbmParams(g, BLOCKS, psi), rng.child(2))))
    assert abs(np.mean(dens) - expected) < 3 * np.std(dens, ddof=1) / 10


def test_mmbm_reductions():
    g = random_membership(50, 2, SeededRng(5))
    sbm = generate_sbm(g, BLOCKS, SeededRng(9))
    mm = generate_mmbm(MmbmParams(BLOCKS, g.one_hot()), SeededRng(9))
    assert np.array_equal(sbm.entries, mm.entries)

    # K = 1 is Erdos-Renyi with p = B[0, 0]
    er_blocks = BlockMatrix(np.array([[0.3]]))
    er = generate_mmbm(MmbmParams(er_blocks, np.ones((50, 1))), SeededRng(4))
    er_sbm = generate_sbm(Membership(np.zeros(50, dtype=int), 1), er_blocks, SeededRng(4))
    assert np.array_equal(er.entries, er_sbm.entries)


def test_mmbm_density_matches_monte_carlo_mean():
    n = 1000
    # independent oracle: Monte Carlo mean of phi_i' B phi_j for independent rows
    oracle_gen = np.random.default_rng(2024)
    u = oracle_gen.dirichlet([0.5, 0.5], size=2_000_000)
    v = oracle_gen.dirichlet([0.5, 0.5], size=2_000_000)
    vals = np.einsum("ik,kl,il->i", u, BLOCKS.probs, v)
    oracle, oracle_se = float(vals.mean()), float(vals.std() / np.sqrt(vals.size))
    dens = []
    for s in range(100):
        rng = SeededRng(s)
        phi = sample_dirichlet_rows(n, 2, 0.5, rng.child(1))
        dens.append(pair_density(generate_mmbm(MmbmParams(BLOCKS, phi), rng.child(2))))
    se = np.hypot(np.std(dens, ddof=1) / 10, oracle_se)
    assert abs(np.mean(dens) - oracle) < 3 * se


def test_dirichlet_rows():
    assert np.array_equal(sample_dirichlet_rows(5, 1, 0.5, SeededRng(0)), np.ones((5, 1)))
    with pytest.raises(ParameterError):
        sample_dirichlet_rows(5, 2, 0.0, SeededRng(0))
    conc = sample_dirichlet_rows(1000, 2, 1e6, SeededRng(1))
    assert conc[:, 0].std() < 0.01
    assert np.allclose(conc.sum(1), 1, atol=1e-9)
    rows = sample_dirichlet_rows(100_000, 3, 0.5, SeededRng(2))
    # Dirichlet(a, a, a): each coordinate has mean 1/3 and variance (2/9) / (3a + 1)
    se = np.sqrt((2 / 9) / 2.5 / 100_000)
    assert np.all(np.abs(rows.mean(0) - 1 / 3) < 3 * se)


@settings(max_examples=30, deadline=None)
@given(n=st.integers(1, 40), K=st.integers(1, 4), seed=st.integers(0, 2**32), model=st.sampled_from(["sbm", "dcbm", "mmbm"]))
def test_generated_graphs_are_valid(n, K, seed, model):
    K = min(K, n)
    rng = SeededRng(seed)
    blocks = BlockMatrix(np.full((K, K), 0.3) + 0.4 * np.eye(K))
    g = random_membership(n, K, rng.child(1))
    if model == "sbm":
        graph = generate_sbm(g, blocks, rng.child(2))
    elif model == "dcbm":
        psi = rng.child(3).generator.uniform(size=n)
        graph = generate_dcbm(DcbmParams(g, blocks, psi), rng.child(2))
    else:
        phi = sample_dirichlet_rows(n, K, 0.5, rng.child(3))
        graph = generate_mmbm(MmbmParams(blocks, phi), rng.child(2))
    assert graph.n == n
    assert_valid_graph(graph)


def test_generation_is_deterministic():
    g = random_membership(200, 3, SeededRng(7))
    b = planted_blocks(3, 0.5, 0.1)
    a1 = generate_sbm(g, b, SeededRng(7, (1,)))
    a2 = generate_sbm(g, b, SeededRng(7, (1,)))
    a3 = generate_sbm(g, b, SeededRng(7, (2,)))
    assert a1 == a2
    assert a1 != a3


# --- edge lists ---------------------------------------------------------------


def test_edge_list_duplicates_collapse(tmp_path):
    p = tmp_path / "e.txt"
    p.write_text("0 1\n1 0\n")
    g = read_edge_list(p)
    assert g.n == 2 and g.n_edges == 1


def test_edge_list_self_loop_registers_node(tmp_path):
    p = tmp_path / "e.txt"
    p.write_text("0 1\n3 3\n")
    g = read_edge_list(p)
    assert g.n == 4 and g.n_edges == 1
    assert g.degrees()[3] == 0
    with pytest.raises(EdgeListParseError):
        read_edge_list(p, ignore_self_loops=False)


def test_edge_list_errors(tmp_path):
    p = tmp_path / "e.txt"
    p.write_text("# header\n0 1\n1 2 3\n")
    with pytest.raises(EdgeListParseError, match="line 3"):
        read_edge_list(p)
    p.write_text("0 x\n")
    with pytest.raises(EdgeListParseError, match="line 1"):
        read_edge_list(p)
    p.write_text("# nothing here\n\n")
    with pytest.raises(EdgeListParseError):
        read_edge_list(p)
    p.write_text("0 1\n")
    with pytest.raises(EdgeListParseError):
        read_edge_list(p, indexing=1)


def test_edge_list_compact_ids(tmp_path):
    p = tmp_path / "e.txt"
    p.write_text("blogA blogC\nblogC blogB\n")
    g = read_edge_list(p, compact=True)
    assert g.node_ids == ("blogA", "blogC", "blogB")
    assert g.edges().tolist() == [[0, 1], [1, 2]]


def test_six_node_fixture(fixture_path):
    g = read_edge_list(fixture_path("six_node.txt"), indexing=1)
    expected = np.zeros((6, 6))
    for i, j in [(1, 2), (1, 4), (2, 5), (4, 5), (5, 6)]:
        expected[i - 1, j - 1] = expected[j - 1, i - 1] = 1
    assert np.array_equal(g.entries, expected)
    assert read_labels(fixture_path("six_node_labels.txt")) == list("aaabbb")


@settings(max_examples=30, deadline=None)
@given(n=st.integers(1, 25), p=st.floats(0, 1), seed=st.integers(0, 2**32), indexing=st.sampled_from([0, 1]))
def test_edge_list_round_trip(tmp_path_factory, n, p, seed, indexing):
    g = generate_sbm(Membership(np.zeros(n, dtype=int), 1), BlockMatrix(np.array([[p]])), SeededRng(seed))
    path = tmp_path_factory.mktemp("rt") / "g.txt"
    write_edge_list(g, path, indexing=indexing)
    assert read_edge_list(path, indexing=indexing) == g


# --- components ---------------------------------------------------------------


def test_lcc_connected_graph_is_identity():
    g = generate_sbm(Membership(np.zeros(30, dtype=int), 1), BlockMatrix(np.array([[0.9]])), SeededRng(0))
    sub, index = largest_connected_component(g)
    assert sub == g
    assert np.array_equal(index, np.arange(30))


def test_lcc_sizes_three_and_two():
    g = AdjacencyGraph.from_edges(5, [(0, 3), (1, 2), (2, 4)])
    sub, index = largest_connected_component(g)
    assert index.tolist() == [1, 2, 4]
    assert sub.edges().tolist() == [[0, 1], [1, 2]]


def test_lcc_fixture(fixture_path):
    g = read_edge_list(fixture_path("two_components.txt"))
    sub, index = largest_connected_component(g)
    assert index.tolist() == [0, 1, 2, 3]
    expected = np.array([[0, 1, 1, 0], [1, 0, 1, 0], [1, 1, 0, 1], [0, 0, 1, 0]])
    assert np.array_equal(sub.entries, expected)


def test_lcc_ties_and_empty_graph():
    g = AdjacencyGraph.from_edges(4, [(2, 3), (0, 1)])
    assert largest_connected_component(g)[1].tolist() == [0, 1]
    empty = AdjacencyGraph(np.zeros((3, 3)))
    sub, index = largest_connected_component(empty)
    assert sub.n == 1 and index.tolist() == [0]
