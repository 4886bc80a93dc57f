import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import cycle_graph, path_graph, star_graph
from provfaas.oracles import adjacency_sets, bfs_within, induced_edge_count, random_graph
from provfaas.partitioner import (
    ClusterState,
    Fit,
    binpack_ffd,
    bits_to_ids,
    bits_to_mask,
    khop_neighborhood,
    marginal_cost,
    mask_to_bits,
    materialize_bins,
    partition_graph,
    seed_neighborhoods,
)
from provfaas.provgraph import ProvenanceGraph


def disjoint_stars(sizes):
    edges, centers, nxt = [], [], 0
    for m in sizes:
        c = nxt
        centers.append(c)
        edges += [(c, c + j) for j in range(1, m + 1)]
        nxt += m + 1
    return ProvenanceGraph.from_edges(nxt, edges), centers


def clique_with_tail():
    # K4 on {0,1,2,3} plus a pendant 4 attached to 0
    edges = [(i, j) for i in range(4) for j in range(i + 1, 4)] + [(0, 4)]
    return ProvenanceGraph.from_edges(5, edges)


def test_bitset_helpers_round_trip(rng):
    mask = rng.random(77) < 0.3
    bits = mask_to_bits(mask)
    assert np.array_equal(bits_to_mask(bits, 77), mask)
    assert bits_to_ids(bits, 77).tolist() == np.flatnonzero(mask).tolist()
    assert mask_to_bits(np.zeros(0, bool)) == 0


# -- khop_neighborhood -----------------------------------------------------------

def test_isolated_node_neighborhood():
    g = ProvenanceGraph.from_edges(3, [(0, 1)])
    nb = khop_neighborhood(g, 2, 2)
    assert nb.node_ids(3).tolist() == [2] and nb.edge_count == 0


def test_star_hub_k1():
    nb = khop_neighborhood(star_graph(5), 0, 1)
    assert (nb.n_nodes, nb.edge_count) == (6, 5)


def test_path_center_k2():
    nb = khop_neighborhood(path_graph(5), 2, 2)
    assert (nb.n_nodes, nb.edge_count) == (5, 4)


def test_neighborhood_rejects_bad_input():
    with pytest.raises(KeyError):
        khop_neighborhood(path_graph(3), 7, 1)
    with pytest.raises(ValueError):
        khop_neighborhood(path_graph(3), 0, 0)


# -- marginal cost -----------------------------------------------------------------

def test_delta_into_empty_cluster_is_edge_count():
    nb = khop_neighborhood(star_graph(4), 0, 1)
    assert marginal_cost(ClusterState(100), nb) == nb.edge_count == 4


def test_delta_zero_for_contained_ball():
    g = clique_with_tail()
    a, b = khop_neighborhood(g, 0, 1), khop_neighborhood(g, 1, 1)
    c = ClusterState(100)
    c.add(0, a)
    assert marginal_cost(c, b) == 0


def test_four_cycle_shared_edge_delta_matches_recount():
    g = cycle_graph(4)  # 0-1-2-3-0
    a, b = khop_neighborhood(g, 0, 1), khop_neighborhood(g, 1, 1)
    assert a.edge_count == b.edge_count == 2
    shared = (a.edges & b.edges).bit_count()
    assert shared == 1
    c = ClusterState(100)
    c.add(0, a)
    delta = marginal_cost(c, b)
    adj = adjacency_sets(g)
    u, ball_b = bfs_within(adj, [0], 1), bfs_within(adj, [1], 1)
    recount = induced_edge_count(g, u | ball_b) - induced_edge_count(g, u)
    assert delta == recount
    # the union also induces the cross edge 2-3, which belongs to neither ball
    assert delta == b.edge_count - shared + 1


# -- binpack_ffd -------------------------------------------------------------------

def test_disjoint_first_fit_hand_trace():
    g, centers = disjoint_stars([6, 5, 4, 3, 2])
    nbs = seed_neighborhoods(g, centers, 1)
    assert [nb.edge_count for nb in nbs] == [6, 5, 4, 3, 2]
    res = binpack_ffd(nbs, 10, strict=False, fit=Fit.FIRST_FIT)
    sizes = [[nbs[i].edge_count for i in b] for b in res.bins]
    assert sizes == [[6, 4], [5, 3, 2]]
    assert res.remain == [0, 0] and res.oversize == [False, False]


def test_single_neighborhood_one_bin():
    nb = khop_neighborhood(star_graph(3), 0, 1)
    for cap in (3, 4, 50):
        res = binpack_ffd([nb], cap)
        assert len(res) == 1 and res.remain == [cap - 3]


def test_nested_balls_share_bin_beyond_raw_sum():
    g = clique_with_tail()
    a, b = khop_neighborhood(g, 0, 1), khop_neighborhood(g, 1, 1)
    assert (a.edge_count, b.edge_count) == (7, 6)
    res = binpack_ffd([a, b], 8)
    assert res.bins == [[0, 1]] and res.clusters[0].f_k == 7


def test_strict_capacity_boundary():
    nb = khop_neighborhood(star_graph(4), 0, 1)
    assert binpack_ffd([nb], 4, strict=False).oversize == [False]
    res = binpack_ffd([nb], 4, strict=True)
    assert res.oversize == [True] and res.vertical_scale == [2]


def test_oversize_vertical_scale_hint():
    nb = khop_neighborhood(star_graph(9), 0, 1)
    res = binpack_ffd([nb], 4)
    assert res.oversize == [True] and res.vertical_scale == [3]


def test_best_fit_picks_tightest_bin():
    g, centers = disjoint_stars([5, 3, 3, 1])
    nbs = seed_neighborhoods(g, centers, 1)
    # before the 1-edge star arrives the bins have 2 and 1 edges of room
    assert binpack_ffd(nbs, 7, fit=Fit.FIRST_FIT).bins == [[0, 3], [1, 2]]
    assert binpack_ffd(nbs, 7, fit=Fit.BEST_FIT).bins == [[0], [1, 2, 3]]


def test_capacity_must_be_positive():
    with pytest.raises(ValueError):
        binpack_ffd([], 0)


@st.composite
def packing_cases(draw):
    seed = draw(st.integers(0, 10**6))
    rng = np.random.default_rng(seed)
    n = draw(st.integers(2, 80))
    g = random_graph(rng, n, avg_degree=draw(st.floats(0.5, 3.0)))
    k = draw(st.integers(1, 2))
    seeds = draw(st.lists(st.integers(0, n - 1), min_size=1, max_size=25, unique=True))
    cap = draw(st.integers(1, 60))
    strict = draw(st.booleans())
    fit = draw(st.sampled_from(list(Fit)))
    return g, k, seeds, cap, strict, fit


@settings(max_examples=80, deadline=None)
@given(packing_cases())
def test_packing_invariants(case):
    g, k, seeds, cap, strict, fit = case
    nbs = seed_neighborhoods(g, seeds, k)
    res = binpack_ffd(nbs, cap, strict=strict, fit=fit)
    placed = sorted(i for b in res.bins for i in b)
    assert placed == list(range(len(seeds)))
    assert 1 <= len(res) <= len(nbs)
    adj = adjacency_sets(g)
    for b, c in enumerate(res.clusters):
        u = set(bits_to_ids(c.nodes, g.n_nodes).tolist())
        assert c.f_k == induced_edge_count(g, u)
        if not res.oversize[b]:
            assert c.f_k < cap if strict else c.f_k <= cap
        else:
            assert len(c.members) >= 1
        for m in c.members:
            assert bfs_within(adj, [seeds[m]], k) <= u
    again = binpack_ffd(nbs, cap, strict=strict, fit=fit)
    assert again.bins == res.bins and again.remain == res.remain and again.order == res.order


# -- materialize_bins ---------------------------------------------------------------

def test_single_bin_covering_graph_is_the_graph():
    g = cycle_graph(6)
    res, bins = partition_graph(g, range(6), 1, capacity=100)
    assert len(bins) == 1
    assert bins[0].subgraph.edge_multiset() == g.edge_multiset()
    assert bins[0].seeds.tolist() == list(range(6))


def test_disjoint_bins_partition_covered_edges():
    g, centers = disjoint_stars([4, 3])
    res, bins = partition_graph(g, centers, 1, capacity=4)
    assert len(bins) == 2
    covered = [set(bits_to_ids(c.covered_edges, g.n_edges).tolist()) for c in res.clusters]
    assert not (covered[0] & covered[1])
    assert covered[0] | covered[1] == set(range(g.n_edges))
    assert sum(b.subgraph.n_edges for b in bins) == g.n_edges


def test_overlapping_bins_share_frontier_not_seeds():
    g = cycle_graph(4)
    nbs = seed_neighborhoods(g, [0, 1], 1)
    res = binpack_ffd(nbs, 2)
    bins = materialize_bins(g, res, nbs)
    assert len(bins) == 2
    nodes = [set(b.subgraph.parent_ids.tolist()) for b in bins]
    assert nodes[0] & nodes[1] == {0, 1}
    seeds = [b.seeds.tolist() for b in bins]
    assert sorted(sum(seeds, [])) == [0, 1]
    for b in bins:
        assert b.subgraph.parent_ids[b.local_seeds].tolist() == b.seeds.tolist()


def test_report_lists_every_bin():
    g, centers = disjoint_stars([6, 5, 4, 3, 2])
    res = binpack_ffd(seed_neighborhoods(g, centers, 1), 10)
    lines = res.report().splitlines()
    assert lines[0] == "bin\tseeds\tf_k\tremain\toversize"
    assert lines[1:] == ["0\t2\t10\t0\t0", "1\t3\t10\t0\t0"]
