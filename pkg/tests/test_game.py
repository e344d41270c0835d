import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import make_net
from honeypot_bsg.game import (
    ABSTAIN,
    AttackerType,
    ConfigurationError,
    PayoffTensor,
    assemble_tensor,
    attacker_reward,
    build_payoff_tensor,
    candidate_pool,
    defender_pure_strategies,
    defender_reward,
    expected_utilities,
    path_block,
    skill_exploits,
)
from honeypot_bsg.network import AttackPath, derive_attack_graph, enumerate_paths

ALL = frozenset(f"phi{i}" for i in range(1, 9))


@pytest.fixture
def line():
    # 0 -> 1 -> 2(T, 20) plus an off-path node 3
    net = make_net([(0, 1, {"phi3"}), (1, 2, {"phi5"}), (0, 3, {"phi8"})], {2: 20.0})
    path = AttackPath((0, 1, 2), (2.5, 3.0))
    return net, path


def test_strategy_counts():
    assert defender_pure_strategies([5, 6, 7], 1) == [(), (5,), (6,), (7,)]
    assert defender_pure_strategies([5, 6, 7], 0) == [()]
    assert len(defender_pure_strategies([5, 6, 7], 3)) == 8


def test_strategy_cap():
    with pytest.raises(ConfigurationError, match="smaller candidate pool"):
        defender_pure_strategies(range(1, 40), 5, cap=1000)


def test_defender_reward_examples(line):
    net, path = line
    assert net.values[1] == pytest.approx(8.0)
    assert defender_reward({1}, [path], net, 3.0) == pytest.approx(5.0)
    assert defender_reward(set(), [path], net, 3.0) == pytest.approx(-28.0)
    assert defender_reward({3}, [path], net, 3.0) == pytest.approx(-31.0)


def test_collision_single_charge(line):
    net, path = line
    # two attackers caught at the same node: V credited twice, C_h charged once
    assert defender_reward({1}, [path, path], net, 3.0) == pytest.approx(2 * 8.0 - 3.0)


def test_attacker_reward_examples(line):
    net, path = line
    att = AttackerType("a", ALL, 2)
    assert attacker_reward(att, set(), path, net) == pytest.approx(20.0 - 5.5)
    assert attacker_reward(att, {2}, path, net) == pytest.approx(-5.5)
    assert attacker_reward(att, {1}, path, net) == pytest.approx(-2.5)
    assert attacker_reward(att, {3}, path, net) == pytest.approx(14.5)
    assert attacker_reward(att, {1}, ABSTAIN, net) == 0.0


def test_attacker_reward_six_to_twenty():
    net = make_net([(0, 1, {"phi5"}), (1, 2, {"phi5"})], {2: 20.0})
    assert attacker_reward(AttackerType("a", ALL, 2), set(), AttackPath((0, 1, 2), (3.0, 3.0)), net) == pytest.approx(14.0)


def test_entry_not_a_candidate(line):
    net, path = line
    with pytest.raises(ConfigurationError):
        defender_reward({0}, [path], net, 3.0)


def test_tensor_shape_and_values(line):
    net, path = line
    other = AttackPath((0, 3), (1.0,))
    strategies = [(), (1,), (3,)]
    t = build_payoff_tensor(strategies, [[path, ABSTAIN], [path, other]], net, 3.0)
    assert t.cells.shape == (3, 2, 2, 3)
    assert t.n_cells == 12
    for d, s in enumerate(strategies):
        for a, pa in enumerate([path, ABSTAIN]):
            for b, pb in enumerate([path, other]):
                assert t.cells[d, a, b, 0] == pytest.approx(defender_reward(s, [pa, pb], net, 3.0))


def test_single_cell(line):
    net, path = line
    t = build_payoff_tensor([()], [[path]], net, 3.0)
    assert t.n_cells == 1


def test_permute_attackers(line):
    net, path = line
    other = AttackPath((0, 3), (1.0,))
    strategies = [(), (1,), (3,)]
    t = build_payoff_tensor(strategies, [[path, ABSTAIN], [other, path]], net, 3.0)
    swapped = build_payoff_tensor(strategies, [[other, path], [path, ABSTAIN]], net, 3.0)
    p = t.permute_attackers([1, 0])
    assert np.array_equal(p.cells, swapped.cells)


def test_tensor_cap(line):
    net, path = line
    with pytest.raises(ConfigurationError, match="cells"):
        build_payoff_tensor([(), (1,)], [[path] * 10, [path] * 10], net, 3.0, max_cells=100)


def test_tensor_csv(tmp_path, line):
    net, path = line
    t = build_payoff_tensor([(), (1,)], [[path]], net, 3.0)
    t.to_csv(tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0].split(",")[:2] == ["defender_index", "a1"]
    assert len(lines) == 3


def test_expected_utilities_examples():
    a = np.full((1, 1, 2), 4.0)
    b = np.full((1, 1, 2), 10.0)
    assert expected_utilities(np.stack([a, b]), [0.5, 0.5])[0, 0, 0] == pytest.approx(7.0)
    assert expected_utilities(np.stack([a * 0, b * 0.8]), [0.25, 0.75])[0, 0, 0] == pytest.approx(6.0)
    assert np.array_equal(expected_utilities(np.stack([a, b]), [1.0, 0.0]), a)
    with pytest.raises(ValueError):
        expected_utilities(np.stack([a, b]), [1.0])


@settings(max_examples=100, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1), st.integers(0, 1000))
def test_expected_utilities_linear(p, q, lam, seed):
    rng = np.random.default_rng(seed)
    slices = rng.uniform(-5, 5, size=(2, 3, 2, 2))
    b1, b2 = np.array([p, 1 - p]), np.array([q, 1 - q])
    mix = lam * b1 + (1 - lam) * b2
    lhs = expected_utilities(slices, mix)
    rhs = lam * expected_utilities(slices, b1) + (1 - lam) * expected_utilities(slices, b2)
    assert np.allclose(lhs, rhs, atol=1e-9)


def _case_paths(net, skill, target, k=10):
    ex = skill_exploits(net.catalog, skill)
    return enumerate_paths(derive_attack_graph(net, ex), net.entry, {target}, k), AttackerType(skill, ex, target, skill)


def test_empty_defense_nonpositive_and_offpath_cost(case_net):
    paths, _ = _case_paths(case_net, "high", 14)
    for p in paths:
        base = defender_reward((), [p], case_net, 3.0)
        assert base <= 0
        off = next(v for v in case_net.nodes if v not in p.nodes and v != case_net.entry)
        assert defender_reward((off,), [p], case_net, 3.0) == pytest.approx(base - 3.0)


def test_success_reward_decreasing_in_cost(case_net):
    paths, typ = _case_paths(case_net, "mid", 14)
    rewards = [attacker_reward(typ, (), p, case_net) for p in paths]
    costs = [p.total_cost for p in paths]
    for (c1, r1), (c2, r2) in zip(zip(costs, rewards), zip(costs[1:], rewards[1:])):
        if c2 > c1:
            assert r2 < r1


def test_path_block_matches_reference(case_net):
    """Vectorised block against the scalar reward functions."""
    types = [AttackerType(s, skill_exploits(case_net.catalog, s), 14, s) for s in ("high", "mid", "low")]
    paths, _ = _case_paths(case_net, "high", 14)
    pool = candidate_pool(case_net, paths, 8)
    strategies = defender_pure_strategies(pool, 2)
    blk = path_block(strategies, paths, case_net, types)
    for d, s in enumerate(strategies):
        for p, path in enumerate(paths):
            assert blk.defender[d, p] == pytest.approx(defender_reward(s, [path], case_net, 0.0))
            for t, typ in enumerate(types):
                if blk.feasible[t, p]:
                    assert blk.attacker[t, d, p] == pytest.approx(attacker_reward(typ, s, path, case_net))
                else:
                    assert blk.attacker[t, d, p] == 0.0


def test_assembled_average_matches_expected_utilities(case_net):
    types = [AttackerType(s, skill_exploits(case_net.catalog, s), 14, s) for s in ("high", "low")]
    paths = _case_paths(case_net, "low", 14)[0]  # walkable by both
    strategies = defender_pure_strategies(candidate_pool(case_net, paths, 6), 1)
    blk = path_block(strategies, paths, case_net, types)
    avg = assemble_tensor(strategies, [paths], 3.0, [blk], [np.array([0.3, 0.7])])
    slices = [build_payoff_tensor(strategies, [paths], case_net, 3.0, [t]) for t in types]
    ref = expected_utilities(slices, [0.3, 0.7])
    assert np.allclose(avg.cells, ref.cells, atol=1e-12)


def test_tensor_deterministic(case_net):
    paths, typ = _case_paths(case_net, "high", 14)
    strategies = defender_pure_strategies(candidate_pool(case_net, paths, 6), 2)
    a = build_payoff_tensor(strategies, [paths, paths[:3]], case_net, 3.0, [typ, typ])
    b = build_payoff_tensor(strategies, [paths, paths[:3]], case_net, 3.0, [typ, typ])
    assert a.cells.tobytes() == b.cells.tobytes()


def test_payoff_tensor_rejects_nan():
    with pytest.raises(ValueError):
        PayoffTensor([()], [[ABSTAIN]], np.array([[[np.nan, 0.0]]]))
