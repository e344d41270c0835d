import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from honeypot_bsg.belief import (
    EDGE,
    HONEYPOT,
    NO_ACTIVITY,
    BeliefState,
    Observation,
    TypeContext,
    bayes_update,
    likelihood,
    posterior,
)
from honeypot_bsg.game import AttackerType, skill_exploits
from honeypot_bsg.network import derive_attack_graph, enumerate_paths


def contexts(net, target=14):
    out = []
    for s in ("high", "mid", "low"):
        ex = skill_exploits(net.catalog, s)
        g = derive_attack_graph(net, ex, owner=s)
        out.append(TypeContext(AttackerType(s, ex, target, s), g, enumerate_paths(g, net.entry, {target}, 10)))
    return out


def test_likelihood_rules(case_net):
    high, mid, low = contexts(case_net)
    # 0 -> 3 needs phi1, which low-skill attackers lack
    obs = Observation(0, EDGE, 1, edge=(0, 3))
    assert likelihood(obs, low) == 0.0
    first = high.paths[0].edges()[0]
    assert likelihood(Observation(0, EDGE, 1, edge=first), high) == 1.0
    off = next(e for e in high.graph.edges if e not in high.optimal_edges)
    assert likelihood(Observation(0, EDGE, 1, edge=off), high, 0.5) == 0.5
    assert likelihood(Observation(0, NO_ACTIVITY, 1), low) == 1.0


def test_honeypot_likelihood(case_net):
    high, _, low = contexts(case_net)
    assert likelihood(Observation(0, HONEYPOT, 1, node=9), high) == 1.0
    assert likelihood(Observation(0, HONEYPOT, 1, node=3), low) == 0.0


def test_posterior_examples():
    assert np.allclose(posterior([0.5, 0.5], [1, 0])[0], [1, 0])
    assert np.allclose(posterior([0.5, 0.5], [0.8, 0.2])[0], [0.8, 0.2])
    assert np.allclose(posterior([0.9, 0.1], [0.5, 0.5])[0], [0.9, 0.1])


def test_zero_mass_keeps_prior_and_flags(case_net):
    ctx = contexts(case_net)
    b = BeliefState(((0.0, 0.0, 1.0),))
    # an edge only high/mid can use, seen from an attacker believed to be low
    out = bayes_update(b, Observation(0, EDGE, 1, edge=(0, 3)), ctx)
    assert out.per_attacker[0] == (0.0, 0.0, 1.0)
    assert out.flags == (True,)


def test_only_observed_attacker_changes(case_net):
    ctx = contexts(case_net)
    b = BeliefState.uniform(2, 3)
    out = bayes_update(b, Observation(1, EDGE, 1, edge=(0, 3)), {0: ctx, 1: ctx})
    assert out.per_attacker[0] == b.per_attacker[0]
    assert out.per_attacker[1][2] == 0.0


def test_invalid_belief():
    with pytest.raises(ValueError):
        BeliefState(((0.5, 0.6),))


def test_observation_validation():
    with pytest.raises(ValueError):
        Observation(0, EDGE, 0)
    with pytest.raises(ValueError):
        Observation(0, "sneeze", 0)


probs = st.lists(st.floats(0.0, 1.0), min_size=2, max_size=6)


@settings(max_examples=300, deadline=None)
@given(probs.filter(lambda v: sum(v) > 1e-3), st.data())
def test_normalised_and_absorbing(raw, data):
    prior = np.array(raw) / sum(raw)
    seq = data.draw(st.lists(st.lists(st.floats(0.0, 1.0), min_size=len(raw), max_size=len(raw)), min_size=1, max_size=6))
    cur = prior
    dead = prior == 0
    for lik in seq:
        nxt, degenerate = posterior(cur, lik)
        if degenerate:
            assert np.array_equal(nxt, cur)
        else:
            assert abs(nxt.sum() - 1.0) <= 1e-9
            dead |= np.array(lik) == 0
        assert (nxt[dead] == 0).all()
        cur = nxt


@settings(max_examples=200, deadline=None)
@given(probs.filter(lambda v: sum(v) > 1e-3), st.floats(0.01, 1.0))
def test_flat_evidence_is_uninformative(raw, c):
    prior = np.array(raw) / sum(raw)
    out, _ = posterior(prior, [c] * len(raw))
    assert np.allclose(out, prior, atol=1e-12, rtol=0)


@settings(max_examples=200, deadline=None)
@given(probs.filter(lambda v: sum(v) > 1e-3), st.data())
def test_sequential_equals_batch(raw, data):
    prior = np.array(raw) / sum(raw)
    n = len(raw)
    l1 = np.array(data.draw(st.lists(st.floats(0.05, 1.0), min_size=n, max_size=n)))
    l2 = np.array(data.draw(st.lists(st.floats(0.05, 1.0), min_size=n, max_size=n)))
    seq = posterior(posterior(prior, l1)[0], l2)[0]
    batch = posterior(prior, l1 * l2)[0]
    assert np.allclose(seq, batch, atol=1e-9, rtol=0)


def test_true_type_mass_non_decreasing_on_optimal_path(case_net):
    ctx = contexts(case_net)
    for true in range(3):
        b = BeliefState.uniform(1, 3)
        last = b.per_attacker[0][true]
        for e in ctx[true].paths[0].edges():
            b = bayes_update(b, Observation(0, EDGE, 1, edge=e), ctx)
            assert b.per_attacker[0][true] >= last - 1e-12
            last = b.per_attacker[0][true]
