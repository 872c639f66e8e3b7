import numpy as np
import pytest

from anykernel.graphs import (
    EvolvingGraph,
    GraphHistory,
    GraphSizeError,
    GroupFamily,
    UniverseElement,
    build_isomorphism_kernel,
    build_pair_groups_kernel,
    embeddedness,
    embeddedness_kernel,
    isomorphism_kernel,
    neighborhood_class,
    pair_groups_kernel,
    read_graph,
    write_graph,
)
from anykernel.kernels import KernelDomainError, gram_matrix, is_psd
from anykernel.nature import GraphEvolution

from oracles import marked_isomorphic, pair_view, random_pair, relabeled


def path_graph(n):
    return EvolvingGraph.from_edges([np.zeros(1)] * n, [(a, a + 1) for a in range(n - 1)])


def test_snapshot_hides_later_edges():
    h = GraphHistory.from_edges([np.zeros(1)] * 3, [(0, 1)])
    early = h.snapshot()
    h.add_edge(1, 2)
    assert early.neighbors(1) == [0]
    assert sorted(h.snapshot().neighbors(1)) == [0, 2]
    with pytest.raises(KernelDomainError):
        UniverseElement(0, 0, early)


def test_embeddedness_uses_closed_neighborhoods():
    g = path_graph(4)
    assert embeddedness(UniverseElement(0, 2, g)) == 1      # node 1
    assert embeddedness(UniverseElement(0, 1, g)) == 2      # nodes 0 and 1
    assert embeddedness(UniverseElement(0, 3, g)) == 0


def test_group_family_enforces_cap():
    fam = GroupFamily.one_hot(3, m=1)
    assert fam.memberships(np.array([0.0, 1.0, 0.0])).tolist() == [0, 1, 0]
    with pytest.raises(KernelDomainError):
        fam.memberships(np.array([1.0, 1.0, 0.0]))


def test_pair_groups_kernel_matches_functional_form():
    rng = np.random.default_rng(0)
    nature = GraphEvolution(levels=(3, 3), seed=1)
    groups = nature.groups()
    k = build_pair_groups_kernel(groups, 10)
    pts = []
    for t in range(30):
        pts.append((nature.features(t), float(rng.random())))
    K = gram_matrix(k, pts).entries
    for a in range(len(pts)):
        for b in range(len(pts)):
            expected = pair_groups_kernel(pts[a][0], pts[a][1], pts[b][0], pts[b][1], groups, 10)
            assert K[a, b] == expected
    assert is_psd(K)
    # every node is in exactly two groups, so the diagonal is 4
    assert np.all(np.diag(K) == 4.0)


def test_isomorphism_kernel_matches_permutation_search():
    rng = np.random.default_rng(42)
    for case in range(150):
        u, edges = random_pair(rng, n_nodes=int(rng.integers(3, 8)))
        if case % 2 == 0:
            v = relabeled(u, edges, rng)
        else:
            v, _ = random_pair(rng, n_nodes=u.graph.history.n_nodes)
        expected = marked_isomorphic(*pair_view(u), *pair_view(v))
        assert isomorphism_kernel(u, 0.5, v, 0.55, 10) == (1.0 if expected else 0.0)
        assert (neighborhood_class(u) == neighborhood_class(v)) == expected


def test_isomorphism_marks_distinguish_endpoints():
    # pendant 0 - 1 - 2: the pair (0, 2) and the pair (0, 1) are different classes
    g = path_graph(3)
    assert neighborhood_class(UniverseElement(0, 2, g)) != neighborhood_class(UniverseElement(0, 1, g))
    # swapping i and j on a path is not the same marked graph unless symmetric
    g4 = path_graph(4)
    assert neighborhood_class(UniverseElement(0, 1, g4)) != neighborhood_class(UniverseElement(1, 0, g4))


def test_isomorphism_size_cap():
    star = EvolvingGraph.from_edges([np.zeros(1)] * 12, [(0, v) for v in range(1, 12)])
    with pytest.raises(GraphSizeError):
        neighborhood_class(UniverseElement(0, 1, star), max_nodes=10)


def test_isomorphism_kernel_gram_is_psd():
    rng = np.random.default_rng(3)
    k = build_isomorphism_kernel(5, max_nodes=8)
    pts = []
    for _ in range(12):
        u, _ = random_pair(rng, n_nodes=5, density=0.5)
        pts.append((u, float(rng.random())))
    assert is_psd(gram_matrix(k, pts).entries)


def test_embeddedness_kernel_values():
    g = path_graph(4)
    assert embeddedness_kernel(UniverseElement(0, 2, g), 0.1, UniverseElement(1, 3, g), 0.15, 10) == 1.0
    assert embeddedness_kernel(UniverseElement(0, 2, g), 0.1, UniverseElement(1, 3, g), 0.35, 10) == 0.0


def test_graph_file_round_trip(tmp_path):
    nature = GraphEvolution(levels=(2, 3), seed=5)
    for t in range(200):
        x = nature.features(t)
        nature.observe(t, x, 0.5, nature.outcome(t, x, None))
    path = tmp_path / "graph.txt"
    write_graph(nature.history, path)
    back = read_graph(path)
    assert back.version == nature.history.version
    assert back.edges == nature.history.edges
    for a, b in zip(back.features, nature.history.features):
        assert np.array_equal(a, b)
    v = nature.history.version // 2
    assert back.snapshot(v).nodes() == nature.history.snapshot(v).nodes()


def test_graph_evolution_groups_have_two_memberships():
    nature = GraphEvolution(levels=(3, 3), seed=0)
    groups = nature.groups()
    assert len(groups) == 6 and groups.m == 2
    for z in nature.history.features:
        assert groups.memberships(z).sum() == 2
