import json
import logging

import numpy as np
import pytest

from conftest import make_net
from honeypot_bsg.game import defender_reward
from honeypot_bsg.network import AttackPath
from honeypot_bsg.rng import PLACEMENT_STREAM, stream
from honeypot_bsg.sim import (
    AttackerSpec,
    ScenarioConfig,
    build_context,
    greedy_placement,
    initial_state,
    random_placement,
    resolve_path,
    run_round,
    run_simulation,
)
from honeypot_bsg.game import ConfigurationError


def test_resolve_path():
    p = AttackPath((0, 1, 2, 3), (1.0, 1.0, 1.0))
    assert resolve_path(p, {2}) == ("intercepted", 2)
    assert resolve_path(p, {1, 2}) == ("intercepted", 1)
    assert resolve_path(p, {7}) == ("reached-target", 3)
    assert resolve_path(p, {0}) == ("reached-target", 3)  # entry never traps


def test_greedy():
    net = make_net([(0, 1, {"phi8"}), (0, 2, {"phi8"}), (0, 3, {"phi8"})], {1: 9.0, 2: 7.0, 3: 5.0})
    assert greedy_placement(net, [1, 2, 3], 2) == (1, 2)
    assert greedy_placement(net, [1, 2, 3], 0) == ()
    tie = make_net([(0, 1, {"phi8"}), (0, 2, {"phi8"})], {1: 5.0, 2: 5.0})
    assert greedy_placement(tie, [2, 1], 1) == (1,)


def test_random_placement(caplog):
    rng1, rng2 = stream(3, PLACEMENT_STREAM), stream(3, PLACEMENT_STREAM)
    assert random_placement(range(10), 3, rng1) == random_placement(range(10), 3, rng2)
    assert random_placement([4, 5, 6], 3, rng1) == (4, 5, 6)
    with caplog.at_level(logging.WARNING):
        assert random_placement([4, 5], 5, rng1) == (4, 5)
    assert "exceeds" in caplog.text


def test_random_placement_marginals():
    rng = stream(11, PLACEMENT_STREAM)
    cands, B, N = list(range(8)), 3, 100_000
    counts = np.zeros(8)
    for _ in range(N):
        counts[list(random_placement(cands, B, rng))] += 1
    assert np.abs(counts / N - B / len(cands)).max() <= 0.01


def forced_config(**kw):
    net = make_net([(0, 1, {"phi8"})], {1: 25.0})
    base = dict(budget=1, honeypot_cost=3.0, type_space="known", initial_defense="policy", max_rounds=3)
    base.update(kw)
    return ScenarioConfig(net, (AttackerSpec("high", 1),), **base)


def test_forced_path_round():
    cfg = forced_config()
    ctx = build_context(cfg)
    _, rec = run_round(initial_state(ctx), ctx)
    assert rec.outcomes[0]["outcome"] == "intercepted"
    assert rec.defender_realized == pytest.approx(25.0 - 3.0)
    assert rec.defender_equilibrium == pytest.approx(22.0)


def test_terminal_state_is_an_error():
    cfg = forced_config(attacker_mode="terminal")
    ctx = build_context(cfg)
    state, _ = run_round(initial_state(ctx), ctx)
    assert not any(state.active)
    with pytest.raises(RuntimeError, match="no active attacker"):
        run_round(state, ctx)
    res = run_simulation(cfg)
    assert len(res.rounds) == 1 and res.termination == "all-attackers-terminal"


def test_max_rounds_one(case_net):
    cfg = ScenarioConfig(case_net, (AttackerSpec("high", 14),), max_rounds=1)
    assert len(run_simulation(cfg).rounds) == 1


def test_random_policy_reproducible(case_net):
    cfg = ScenarioConfig(case_net, (AttackerSpec("high", 14), AttackerSpec("low", 12)), policy="random", seed=5)
    a = [r.placement for r in run_simulation(cfg).rounds]
    b = [r.placement for r in run_simulation(cfg).rounds]
    assert a == b


def two_cut_config(**kw):
    # every entry-to-target path crosses node 3 or node 4
    edges = [
        (0, 1, {"phi8"}), (0, 2, {"phi6"}), (1, 3, {"phi8"}), (2, 3, {"phi3"}), (1, 4, {"phi5"}),
        (2, 4, {"phi8"}), (3, 5, {"phi8"}), (4, 5, {"phi6"}), (3, 6, {"phi3"}), (4, 6, {"phi8"}),
    ]
    net = make_net(edges, {5: 20.0, 6: 15.0})
    base = dict(budget=2, honeypot_cost=1.0, max_rounds=5)
    base.update(kw)
    return ScenarioConfig(net, (AttackerSpec("high", 5), AttackerSpec("low", 6)), **base)


def test_two_cut_success_drops_to_zero():
    res = run_simulation(two_cut_config())
    assert res.success_rates[0] == 1.0  # undefended opening round
    assert all(r == 0.0 for r in res.success_rates[1:])


def test_round_invariants(case_net):
    cfg = ScenarioConfig(case_net, (AttackerSpec("high", 14), AttackerSpec("mid", 12)), policy="stackelberg", seed=3)
    ctx = build_context(cfg)
    for rec in run_simulation(cfg, ctx).rounds:
        assert 0.0 <= rec.success_rate <= 1.0
        assert all(v >= 0 for v in rec.timings.values())
        assert rec.timings["payoff_build"] + rec.timings["solve"] <= rec.timings["total"]
        paths = [AttackPath(tuple(o["path"]), (0.0,) * max(len(o["path"]) - 1, 0)) for o in rec.outcomes]
        assert rec.defender_realized == pytest.approx(defender_reward(rec.placement, paths, case_net, 3.0), abs=1e-9)
        for o in rec.outcomes:
            if o["outcome"] == "intercepted":
                assert o["node"] in rec.placement
                first = next(v for v in o["path"][1:] if v in rec.placement)
                assert first == o["node"]
            elif o["outcome"] == "reached-target":
                assert not set(o["path"][1:]) & set(rec.placement)


def test_terminal_mode_no_repeat_success(case_net):
    cfg = ScenarioConfig(case_net, (AttackerSpec("high", 14), AttackerSpec("low", 12)), attacker_mode="terminal")
    res = run_simulation(cfg)
    seen = set()
    for rec in res.rounds:
        for o in rec.outcomes:
            if o["attacker"] in seen:
                assert o["outcome"] == "inactive"
            elif o["outcome"] in ("intercepted", "reached-target"):
                seen.add(o["attacker"])


def test_byte_identical(case_net):
    cfg = ScenarioConfig(case_net, (AttackerSpec("high", 14), AttackerSpec("mid", 12)), seed=9)
    dump = lambda r: json.dumps([x.to_dict() for x in r.rounds], sort_keys=True)  # noqa: E731
    assert dump(run_simulation(cfg)) == dump(run_simulation(cfg))


def test_greedy_and_random_baselines_run(case_net):
    for pol in ("greedy", "random"):
        cfg = ScenarioConfig(case_net, (AttackerSpec("high", 14),), policy=pol, initial_defense="policy")
        res = run_simulation(cfg)
        assert len(res.rounds) == cfg.max_rounds
        assert all(len(r.placement) == 2 for r in res.rounds)


def test_config_validation(case_net):
    with pytest.raises(ConfigurationError):
        ScenarioConfig(case_net, ())
    with pytest.raises(ConfigurationError):
        ScenarioConfig(case_net, (AttackerSpec("high", 3),))
    with pytest.raises(ConfigurationError):
        ScenarioConfig(case_net, (AttackerSpec("high", 14),), max_rounds=0)
