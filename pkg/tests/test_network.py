import json

import networkx as nx
import pytest
from hypothesis import given, settings, strategies as st

from conftest import make_net
from oracles import brute_node_values, brute_paths
from honeypot_bsg.game import skill_exploits
from honeypot_bsg.network import (
    CASE_STUDY_CATALOG,
    INFEASIBLE,
    AttackGraph,
    GenerationError,
    GenerationSpec,
    Network,
    NetworkError,
    bfs_distances,
    derive_attack_graph,
    edge_cost,
    enumerate_paths,
    generate_network,
    node_value,
)

ALL = [e.id for e in CASE_STUDY_CATALOG]


def test_node_value_target_itself():
    net = make_net([(0, 1, {"phi8"})], {1: 20.0})
    assert node_value(net, 1) == 20.0


def test_node_value_one_hop():
    net = make_net([(0, 1, {"phi8"}), (1, 2, {"phi8"})], {2: 20.0})
    assert node_value(net, 1) == pytest.approx(8.0)


def test_node_value_two_targets():
    net = make_net([(0, 1, {"phi8"}), (1, 2, {"phi8"}), (1, 3, {"phi8"}), (3, 4, {"phi8"})], {2: 15.0, 4: 10.0})
    assert node_value(net, 1) == pytest.approx(0.4 * 15 + 0.16 * 10)


def test_node_value_unreachable_target_contributes_nothing():
    net = make_net([(0, 1, {"phi8"}), (2, 1, {"phi8"})], {2: 10.0})
    assert node_value(net, 1) == 0.0


def test_node_value_unknown_node():
    net = make_net([(0, 1, {"phi8"})], {1: 5.0})
    with pytest.raises(NetworkError):
        node_value(net, 42)


def test_case_study_values_match_networkx(case_net):
    ref = brute_node_values(case_net)
    for v in case_net.nodes:
        assert case_net.values[v] == pytest.approx(ref[v], abs=1e-12)


def test_case_study_shape(case_net):
    assert len(case_net.nodes) == 15
    assert len(case_net.edges) == 21
    assert case_net.entry == 0
    by_label = {case_net.label(t): v for t, v in case_net.targets.items()}
    assert by_label == {"T1": 15.0, "T2": 10.0, "T3": 20.0}
    assert [e.cost for e in case_net.catalog] == [9.0, 7.5, 2.5, 4.0, 3.0, 1.5, 5.0, 1.0]


def test_json_round_trip(case_net):
    again = Network.from_json(case_net.to_json())
    assert again.to_json() == case_net.to_json()
    assert json.loads(case_net.to_json())["alpha"] == 0.4


def test_low_skill_excludes_phi4_phi7_edge(case_net):
    low = skill_exploits(case_net.catalog, "low")
    assert low == frozenset({"phi3", "phi5", "phi6", "phi8"})
    ag = derive_attack_graph(case_net, low)
    assert not ag.has_edge(1, 5)  # {phi4, phi7}


def test_full_set_gives_every_edge(case_net):
    ag = derive_attack_graph(case_net, ALL)
    assert set(ag.edges) == {(u, v) for u, v, _ in case_net.edges}


def test_empty_set_gives_empty_graph(case_net):
    assert derive_attack_graph(case_net, set()).edges == {}


def test_edge_cost_examples():
    mid = skill_exploits(CASE_STUDY_CATALOG, "mid")
    assert edge_cost({"phi4", "phi7"}, mid, CASE_STUDY_CATALOG) == 4.0
    assert edge_cost({"phi8"}, {"phi8", "phi1"}, CASE_STUDY_CATALOG) == 1.0
    low = skill_exploits(CASE_STUDY_CATALOG, "low")
    assert edge_cost({"phi1"}, low, CASE_STUDY_CATALOG) == INFEASIBLE


def test_skill_sets():
    assert skill_exploits(CASE_STUDY_CATALOG, "high") == frozenset(ALL)
    assert skill_exploits(CASE_STUDY_CATALOG, "mid") == frozenset(ALL) - {"phi1", "phi2"}


def test_line_graph_single_path():
    ag = AttackGraph("x", {(0, 1): 1.0, (1, 2): 1.0})
    paths = enumerate_paths(ag, 0, {2}, 10)
    assert len(paths) == 1
    assert paths[0].nodes == (0, 1, 2)
    assert paths[0].total_cost == 2.0 and paths[0].hop_count == 2


def test_diamond_ordering():
    ag = AttackGraph("x", {(0, 1): 1.0, (1, 3): 1.0, (0, 2): 3.0, (2, 3): 1.0})
    paths = enumerate_paths(ag, 0, {3}, 10)
    assert [p.total_cost for p in paths] == [2.0, 4.0]


def test_ties_break_on_hops_then_nodes():
    ag = AttackGraph("x", {(0, 3): 2.0, (0, 1): 1.0, (1, 3): 1.0, (0, 2): 1.0, (2, 3): 1.0})
    paths = enumerate_paths(ag, 0, {3}, 10)
    assert [p.nodes for p in paths] == [(0, 3), (0, 1, 3), (0, 2, 3)]


def test_case_study_paths_match_exhaustive(case_net):
    for skill in ("high", "mid", "low"):
        ex = skill_exploits(case_net.catalog, skill)
        ag = derive_attack_graph(case_net, ex)
        for t in case_net.targets:
            got = [(p.total_cost, p.hop_count, p.nodes) for p in enumerate_paths(ag, 0, {t}, 1000)]
            assert got == brute_paths(case_net, ex, t)


@st.composite
def small_graphs(draw):
    n = draw(st.integers(3, 8))
    edges = {}
    for u in range(n):
        for v in range(n):
            if u != v and draw(st.booleans()):
                edges[(u, v)] = draw(st.sampled_from([0.5, 1.0, 1.5, 2.0, 3.0]))
    target = draw(st.integers(1, n - 1))
    return n, edges, target


def _exhaustive(n, edges, target):
    g = nx.DiGraph()
    g.add_nodes_from(range(n))
    for (u, v), w in edges.items():
        g.add_edge(u, v, w=w)
    out = []
    for p in nx.all_simple_paths(g, 0, target):
        out.append((sum(g[u][v]["w"] for u, v in zip(p, p[1:])), len(p) - 1, tuple(p)))
    return sorted(out)


@settings(max_examples=150, deadline=None)
@given(small_graphs(), st.integers(1, 6))
def test_enumerate_matches_exhaustive_prefix(graph, k):
    n, edges, target = graph
    ref = _exhaustive(n, edges, target)
    got = [(p.total_cost, p.hop_count, p.nodes) for p in enumerate_paths(AttackGraph("x", edges), 0, {target}, k)]
    assert got == ref[:k]
    for _, _, nodes in got:
        assert len(set(nodes)) == len(nodes)


@settings(max_examples=100, deadline=None)
@given(small_graphs())
def test_enumerate_all_when_k_large(graph):
    n, edges, target = graph
    ref = _exhaustive(n, edges, target)
    got = [(p.total_cost, p.hop_count, p.nodes) for p in enumerate_paths(AttackGraph("x", edges), 0, {target}, 10_000)]
    assert got == ref


@settings(max_examples=60, deadline=None)
@given(st.sets(st.sampled_from(ALL)), st.sets(st.sampled_from(ALL)))
def test_attack_graph_monotone(a, b):
    from honeypot_bsg.network import case_study_network

    net = case_study_network()
    small, big = a, a | b
    g1, g2 = derive_attack_graph(net, small), derive_attack_graph(net, big)
    assert set(g1.edges) <= set(g2.edges)
    for e, c in g1.edges.items():
        assert c >= g2.edges[e]


@settings(max_examples=60, deadline=None)
@given(st.floats(0.05, 0.9), st.floats(0.01, 0.09))
def test_node_value_monotone_in_alpha(alpha, bump):
    from honeypot_bsg.network import case_study_network

    net = case_study_network()
    lo, hi = net.with_alpha(alpha), net.with_alpha(min(alpha + bump, 0.99))
    for v in net.nodes:
        if v in net.targets:
            assert lo.values[v] >= net.targets[v]
            continue
        assert hi.values[v] >= lo.values[v] - 1e-12


def test_generate_default_n100():
    net = generate_network(100, 7)
    assert len(net.edges) >= 300
    assert len(net.targets) == 3
    dist = bfs_distances(net.successors, net.entry)
    assert all(dist[t] >= 6 for t in net.targets)


def test_generate_case_study_mode(case_net):
    net = generate_network(15, 0, GenerationSpec(mode="case-study"))
    assert net.to_json() == case_net.to_json()


def test_generate_deterministic():
    assert generate_network(60, 11).to_json() == generate_network(60, 11).to_json()
    assert generate_network(60, 11).to_json() != generate_network(60, 12).to_json()


def test_generate_too_small():
    with pytest.raises(GenerationError):
        generate_network(5, 0)


def test_generate_unsatisfiable_reports():
    with pytest.raises(GenerationError, match="attempts"):
        generate_network(20, 0, GenerationSpec(edge_factor=19.5, max_attempts=3))


@pytest.mark.parametrize("seed", range(100))
def test_generate_constraints_hold(seed):
    spec = GenerationSpec()
    net = generate_network(40, seed, spec)
    assert len(net.edges) >= spec.edge_factor * 40
    assert all(spec.min_exploits <= len(ex) <= spec.max_exploits for _, _, ex in net.edges)
    dist = bfs_distances(net.successors, net.entry)
    assert all(dist.get(t, -1) >= spec.min_depth for t in net.targets)


def test_network_validation():
    with pytest.raises(NetworkError, match="alpha"):
        make_net([(0, 1, {"phi8"})], {1: 5.0}, alpha=1.2)
    with pytest.raises(NetworkError, match="empty exploit"):
        make_net([(0, 1, set())], {1: 5.0})
    with pytest.raises(NetworkError, match="outside the catalog"):
        make_net([(0, 1, {"zzz"})], {1: 5.0})
