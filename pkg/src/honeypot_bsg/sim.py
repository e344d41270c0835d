"""Round-by-round simulation: observe, update beliefs, solve, place, resolve."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .belief import EDGE, HONEYPOT, NO_ACTIVITY, BeliefState, Observation, TypeContext, bayes_update
from .equilibrium import EquilibriumSolution, solve_stackelberg
from .lp import SolverError
from .game import (
    ABSTAIN,
    SKILLS,
    AttackerType,
    ConfigurationError,
    PathBlock,
    assemble_tensor,
    attacker_reward,
    candidate_pool,
    defender_pure_strategies,
    defender_reward,
    first_hit,
    is_abstain,
    path_block,
    path_costs,
    skill_exploits,
)
from .network import AttackPath, Network, derive_attack_graph, enumerate_paths
from .rng import PLACEMENT_STREAM, stream

logger = logging.getLogger(__name__)

POLICIES = ("stackelberg", "greedy", "random")
TYPE_SPACES = ("skill", "known", "skill-target")
ATTACKER_MODES = ("persistent", "terminal")


@dataclass(frozen=True)
class AttackerSpec:
    skill: str
    target: int


@dataclass(frozen=True)
class ScenarioConfig:
    network: Network
    attackers: tuple[AttackerSpec, ...]
    budget: int = 2
    honeypot_cost: float = 3.0
    k_paths: int = 10
    max_rounds: int = 5
    policy: str = "stackelberg"
    seed: int = 0
    type_space: str = "skill"
    prior: tuple[tuple[float, ...], ...] | None = None
    attacker_mode: str = "persistent"
    initial_defense: str = "none"
    off_path_likelihood: float = 0.5
    max_candidates: int = 16
    max_strategies: int = 20_000
    threads: int = 1

    def __post_init__(self):
        if not self.attackers:
            raise ConfigurationError("attacker roster is empty")
        if self.budget < 0:
            raise ConfigurationError("budget must be >= 0")
        if not (self.honeypot_cost >= 0 and math.isfinite(self.honeypot_cost)):
            raise ConfigurationError("honeypot_cost must be finite and >= 0")
        if self.k_paths < 1:
            raise ConfigurationError("k_paths must be >= 1")
        if self.max_rounds < 1:
            raise ConfigurationError("max_rounds must be >= 1")
        if self.policy not in POLICIES:
            raise ConfigurationError(f"policy must be one of {POLICIES}")
        if self.type_space not in TYPE_SPACES:
            raise ConfigurationError(f"type_space must be one of {TYPE_SPACES}")
        if self.attacker_mode not in ATTACKER_MODES:
            raise ConfigurationError(f"attacker_mode must be one of {ATTACKER_MODES}")
        if self.initial_defense not in ("none", "policy"):
            raise ConfigurationError("initial_defense must be 'none' or 'policy'")
        if not (0.0 <= self.off_path_likelihood <= 1.0):
            raise ConfigurationError("off_path_likelihood must lie in [0, 1]")
        for a in self.attackers:
            if a.skill not in SKILLS:
                raise ConfigurationError(f"unknown skill {a.skill!r}")
            if a.target not in self.network.targets:
                raise ConfigurationError(f"attacker target {a.target} is not a network target")


# -- static context -----------------------------------------------------------


def type_space(config: ScenarioConfig, i: int) -> tuple[list[AttackerType], int]:
    """Candidate types for attacker ``i`` and the index of its true type."""
    net = config.network
    spec = config.attackers[i]
    if config.type_space == "known":
        combos = [(spec.skill, spec.target)]
    elif config.type_space == "skill":
        combos = [(s, spec.target) for s in SKILLS]
    else:
        targets = sorted({a.target for a in config.attackers})
        combos = [(s, t) for s in SKILLS for t in targets]
    types = []
    for s, t in combos:
        tid = s if config.type_space != "skill-target" else f"{s}@{net.label(t)}"
        types.append(AttackerType(tid, skill_exploits(net.catalog, s), t, s))
    true = combos.index((spec.skill, spec.target))
    return types, true


@dataclass
class AttackerContext:
    types: list[AttackerType]
    true_type: int
    contexts: list[TypeContext]
    union: list[AttackPath]  # every path of every type, first-appearance order
    type_paths: list[list[int]]  # per type, indices into ``union``
    block: PathBlock | None = None

    @property
    def own_paths(self) -> list[int]:
        return self.type_paths[self.true_type]


@dataclass
class GameContext:
    config: ScenarioConfig
    attackers: list[AttackerContext]
    pool: list[int]
    strategies: list[tuple[int, ...]]
    strategy_index: dict[tuple[int, ...], int]


def build_context(config: ScenarioConfig, include_blocks: bool = True) -> GameContext:
    net = config.network
    att_ctx = []
    all_paths = []
    for i in range(len(config.attackers)):
        types, true = type_space(config, i)
        contexts, union, type_paths = [], [], []
        seen: dict[tuple[int, ...], int] = {}
        for typ in types:
            graph = derive_attack_graph(net, typ.exploits, owner=typ.id)
            paths = enumerate_paths(graph, net.entry, {typ.target}, config.k_paths)
            contexts.append(TypeContext(typ, graph, paths))
            idx = []
            for p in paths:
                if p.nodes not in seen:
                    seen[p.nodes] = len(union)
                    union.append(p)
                idx.append(seen[p.nodes])
            type_paths.append(idx)
        all_paths.extend(union)
        att_ctx.append(AttackerContext(types, true, contexts, union, type_paths))
    pool = candidate_pool(net, all_paths, config.max_candidates, config.budget, config.max_strategies)
    strategies = defender_pure_strategies(pool, config.budget, cap=max(config.max_strategies, 1))
    ctx = GameContext(config, att_ctx, pool, strategies, {s: k for k, s in enumerate(strategies)})
    if include_blocks:
        for a in att_ctx:
            a.block = path_block(strategies, a.union, net, a.types) if a.union else None
    return ctx


def averaged_game(ctx: GameContext, beliefs: BeliefState, active: Sequence[bool] | None = None):
    """Type-averaged payoff tensor under the current posterior.

    Each attacker's actions are the paths of its types with positive posterior
    mass; an attacker without any such path (or inactive) gets ``ABSTAIN``.
    Returns (tensor, per-attacker lists of union indices, ``None`` for abstain).
    """
    blocks, actions, columns = [], [], []
    weights = []
    n_d = len(ctx.strategies)
    for i, a in enumerate(ctx.attackers):
        w = beliefs.vector(i)
        cols = []
        if active is None or active[i]:
            live = [t for t in range(len(a.types)) if w[t] > 0]
            cols = sorted({p for t in live for p in a.type_paths[t]})
        if not cols or a.block is None:
            blocks.append(PathBlock(np.zeros((n_d, 1)), np.zeros((1, n_d, 1)), np.zeros((1, 1), dtype=bool)))
            weights.append(np.ones(1))
            actions.append([ABSTAIN])
            columns.append([None])
            continue
        blk = a.block
        blocks.append(PathBlock(blk.defender[:, cols], blk.attacker[:, :, cols], blk.feasible[:, cols]))
        weights.append(w)
        actions.append([a.union[c] for c in cols])
        columns.append(cols)
    tensor = assemble_tensor(ctx.strategies, actions, ctx.config.honeypot_cost, blocks, weights)
    return tensor, columns


# -- commitments and attacker responses ------------------------------------------


@dataclass
class Commitment:
    """The defender's announced placement distribution.

    Either an explicit list of (probability, strategy index) or, for the
    random baseline, a uniform draw of ``budget`` nodes from ``pool``.
    """

    support: list[tuple[float, int]] = field(default_factory=list)
    uniform_pool: list[int] | None = None
    budget: int = 0

    @property
    def is_uniform(self) -> bool:
        return self.uniform_pool is not None

    def expected_honeypots(self, strategies) -> float:
        if self.is_uniform:
            return float(min(self.budget, len(self.uniform_pool)))
        return float(sum(p * len(strategies[k]) for p, k in self.support))


def _hit_distribution(path: AttackPath, pool: Sequence[int], budget: int) -> tuple[list[tuple[int, float]], float]:
    """For a uniform ``budget``-subset of ``pool``: P(first hit at path index j), and P(no hit)."""
    n = len(pool)
    pool_set = set(pool)
    total = math.comb(n, budget)
    out = []
    k = 0
    for j, v in enumerate(path.nodes[1:], start=1):
        if v in pool_set:
            k += 1
            out.append((j, math.comb(n - k, budget - 1) / total if budget >= 1 else 0.0))
    none = math.comb(n - k, budget) / total
    return out, none


def _path_terms(path: AttackPath, typ: AttackerType, net: Network):
    """Defender share and attacker reward if first caught at each index, and if never caught."""
    values = net.values
    costs = path_costs(path, typ.exploits, net)
    cum = np.cumsum(costs)
    loss = 0.0
    dshare, areward = {}, {}
    for j, v in enumerate(path.nodes[1:], start=1):
        dshare[j] = values[v] - loss
        areward[j] = -float(cum[j - 1])
        loss += values[v]
    return dshare, areward, -loss, values[path.nodes[-1]] - math.fsum(costs)


def expected_path_terms(ctx: GameContext, i: int, col: int, commitment: Commitment) -> tuple[float, float]:
    """(expected defender share, expected attacker reward) of attacker ``i`` walking union path ``col``.

    The attacker reward uses the attacker's true type.
    """
    a = ctx.attackers[i]
    if commitment.is_uniform:
        path = a.union[col]
        dshare, areward, dnone, anone = _path_terms(path, a.types[a.true_type], ctx.config.network)
        dist, none = _hit_distribution(path, commitment.uniform_pool, commitment.budget)
        ed = sum(q * dshare[j] for j, q in dist) + none * dnone
        ea = sum(q * areward[j] for j, q in dist) + none * anone
        return float(ed), float(ea)
    probs = np.array([p for p, _ in commitment.support])
    rows = [k for _, k in commitment.support]
    ed = float(probs @ a.block.defender[rows, col])
    ea = float(probs @ a.block.attacker[a.true_type, rows, col])
    return ed, ea


def attacker_response(ctx: GameContext, i: int, commitment: Commitment) -> int | None:
    """Union index of attacker ``i``'s best path against ``commitment``.

    Maximises the attacker's own expected reward over its true type's paths;
    ties go to the defender's advantage, then to the cheaper path. ``None``
    when the attacker has no feasible path.
    """
    best, best_key = None, None
    for rank, col in enumerate(ctx.attackers[i].own_paths):
        ed, ea = expected_path_terms(ctx, i, col, commitment)
        key = (ea, ed, -rank)
        if best_key is None or key[0] > best_key[0] + 1e-9 or (abs(key[0] - best_key[0]) <= 1e-9 and key[1:] > best_key[1:]):
            best, best_key = col, key
    return best


# -- baselines -------------------------------------------------------------------


def greedy_placement(net: Network, candidates: Sequence[int], budget: int) -> tuple[int, ...]:
    """The ``budget`` most valuable candidates, ties to the smaller id."""
    if budget < 0:
        raise ConfigurationError("budget must be >= 0")
    ranked = sorted(candidates, key=lambda v: (-net.values[v], v))
    return tuple(sorted(ranked[:budget]))


def random_placement(candidates: Sequence[int], budget: int, rng: np.random.Generator) -> tuple[int, ...]:
    """Uniform ``budget``-subset of ``candidates``."""
    cands = sorted(candidates)
    if budget > len(cands):
        logger.warning("budget %d exceeds %d candidates; placing on all of them", budget, len(cands))
        budget = len(cands)
    if budget <= 0:
        return ()
    pick = rng.choice(len(cands), size=budget, replace=False)
    return tuple(sorted(cands[int(j)] for j in pick))


def resolve_path(path: AttackPath, placement) -> tuple[str, int | None]:
    """("intercepted", node) at the first honeypot after the entry, else ("reached-target", target)."""
    if is_abstain(path):
        return "abstained", None
    hit = first_hit(path, set(placement))
    if hit is not None:
        return "intercepted", path.nodes[hit]
    return "reached-target", path.nodes[-1]


# -- round loop ------------------------------------------------------------------


@dataclass
class RoundRecord:
    round: int
    observations: list[dict]
    beliefs: list[dict]
    policy: str
    commitment: dict
    placement: list[int]
    outcomes: list[dict]
    defender_expected: float
    defender_realized: float
    defender_equilibrium: float | None
    attacker_realized: list[float]
    active: int
    successes: int
    success_rate: float
    timings: dict = field(default_factory=dict)

    def to_dict(self, with_timings: bool = False) -> dict:
        out = {
            "round": self.round,
            "policy": self.policy,
            "observations": self.observations,
            "beliefs": self.beliefs,
            "commitment": self.commitment,
            "placement": self.placement,
            "outcomes": self.outcomes,
            "defender_expected": self.defender_expected,
            "defender_realized": self.defender_realized,
            "defender_equilibrium": self.defender_equilibrium,
            "attacker_realized": self.attacker_realized,
            "active": self.active,
            "successes": self.successes,
            "success_rate": self.success_rate,
        }
        if with_timings:
            out["timings"] = self.timings
        return out


@dataclass
class SimState:
    round: int
    beliefs: BeliefState
    active: list[bool]
    pending: list[Observation]
    rng: np.random.Generator
    cumulative_realized: float = 0.0
    cumulative_expected: float = 0.0


@dataclass
class SimulationResult:
    rounds: list[RoundRecord]
    cumulative_defender_utility: float
    cumulative_expected_utility: float
    success_rates: list[float]
    termination: str

    def summary(self) -> dict:
        return {
            "rounds": len(self.rounds),
            "cumulative_defender_utility": self.cumulative_defender_utility,
            "cumulative_expected_utility": self.cumulative_expected_utility,
            "success_rates": self.success_rates,
            "termination": self.termination,
        }


def initial_state(ctx: GameContext) -> SimState:
    cfg = ctx.config
    n = len(cfg.attackers)
    if cfg.prior is not None:
        beliefs = BeliefState(tuple(tuple(float(p) for p in v) for v in cfg.prior))
        for i, a in enumerate(ctx.attackers):
            if len(beliefs.per_attacker[i]) != len(a.types):
                raise ConfigurationError(f"prior for attacker {i} has {len(beliefs.per_attacker[i])} entries, expected {len(a.types)}")
    else:
        beliefs = BeliefState(tuple(tuple([1.0 / len(a.types)] * len(a.types)) for a in ctx.attackers))
    pending = [Observation(i, NO_ACTIVITY, 0) for i in range(n)]
    return SimState(0, beliefs, [True] * n, pending, stream(cfg.seed, PLACEMENT_STREAM))


def _belief_dump(beliefs: BeliefState, rnd: int) -> list[dict]:
    return [
        {"round": rnd, "attacker": i, "posterior": list(vec), "flagged": bool(beliefs.flags[i])}
        for i, vec in enumerate(beliefs.per_attacker)
    ]


def run_round(state: SimState, ctx: GameContext) -> tuple[SimState, RoundRecord]:
    """One pass of observe, update, build, solve, place, resolve."""
    cfg = ctx.config
    net = cfg.network
    if not any(state.active):
        raise RuntimeError(f"round {state.round}: no active attacker left")
    t0 = time.perf_counter()
    rnd = state.round

    beliefs = state.beliefs
    contexts = {i: a.contexts for i, a in enumerate(ctx.attackers)}
    for obs in state.pending:
        beliefs = bayes_update(beliefs, obs, contexts, cfg.off_path_likelihood)

    build_time = solve_time = 0.0
    equilibrium: EquilibriumSolution | None = None
    undefended = rnd == 0 and cfg.initial_defense == "none"
    if undefended or cfg.budget == 0:
        commitment = Commitment([(1.0, ctx.strategy_index[()])])
        placement: tuple[int, ...] = ()
    elif cfg.policy == "stackelberg":
        tb = time.perf_counter()
        tensor, _ = averaged_game(ctx, beliefs, state.active)
        ts = time.perf_counter()
        try:
            equilibrium = solve_stackelberg(tensor, threads=cfg.threads)
        except SolverError as exc:
            raise SolverError(f"round {rnd}: {exc}") from exc
        te = time.perf_counter()
        build_time, solve_time = ts - tb, te - ts
        commitment = Commitment([(p, k) for k, p in equilibrium.support()])
        probs = np.array([p for p, _ in commitment.support])
        cdf = np.cumsum(probs / probs.sum())
        pick = int(np.searchsorted(cdf, state.rng.random(), side="right"))
        placement = ctx.strategies[commitment.support[min(pick, len(cdf) - 1)][1]]
    elif cfg.policy == "greedy":
        placement = greedy_placement(net, ctx.pool, cfg.budget)
        commitment = Commitment([(1.0, ctx.strategy_index[placement])])
    else:
        commitment = Commitment(uniform_pool=list(ctx.pool), budget=min(cfg.budget, len(ctx.pool)))
        placement = random_placement(ctx.pool, cfg.budget, state.rng)

    outcomes, new_obs, chosen_paths = [], [], []
    expected = -cfg.honeypot_cost * commitment.expected_honeypots(ctx.strategies)
    attacker_realized = []
    active_now = sum(state.active)
    successes = 0
    next_active = list(state.active)
    for i, a in enumerate(ctx.attackers):
        if not state.active[i]:
            outcomes.append({"attacker": i, "outcome": "inactive", "node": None, "path": []})
            chosen_paths.append(ABSTAIN)
            attacker_realized.append(0.0)
            continue
        col = attacker_response(ctx, i, commitment)
        path = ABSTAIN if col is None else a.union[col]
        chosen_paths.append(path)
        if col is not None:
            ed, _ = expected_path_terms(ctx, i, col, commitment)
            expected += ed
        outcome, node = resolve_path(path, placement)
        outcomes.append({"attacker": i, "outcome": outcome, "node": node, "path": list(path.nodes)})
        if outcome == "abstained":
            attacker_realized.append(0.0)
            next_active[i] = False
            continue
        attacker_realized.append(attacker_reward(a.types[a.true_type], placement, path, net))
        stop = path.nodes.index(node)
        for u, v in zip(path.nodes[:stop], path.nodes[1 : stop + 1]):
            new_obs.append(Observation(i, EDGE, rnd + 1, edge=(u, v)))
        if outcome == "intercepted":
            new_obs.append(Observation(i, HONEYPOT, rnd + 1, node=node))
        else:
            successes += 1
        if cfg.attacker_mode == "terminal":
            next_active[i] = False
    realized = defender_reward(placement, chosen_paths, net, cfg.honeypot_cost)
    for i in range(len(ctx.attackers)):
        if state.active[i] and not any(o.attacker == i for o in new_obs):
            new_obs.append(Observation(i, NO_ACTIVITY, rnd + 1))

    commit_doc = {"expected_honeypots": commitment.expected_honeypots(ctx.strategies)}
    if commitment.is_uniform:
        commit_doc["uniform"] = {"pool": list(commitment.uniform_pool), "budget": commitment.budget}
    else:
        commit_doc["support"] = [{"nodes": list(ctx.strategies[k]), "prob": p} for p, k in commitment.support]
    total_time = time.perf_counter() - t0
    record = RoundRecord(
        round=rnd,
        observations=[o.to_dict() for o in state.pending],
        beliefs=_belief_dump(beliefs, rnd),
        policy="none" if undefended else cfg.policy,
        commitment=commit_doc,
        placement=list(placement),
        outcomes=outcomes,
        defender_expected=float(expected),
        defender_realized=float(realized),
        defender_equilibrium=None if equilibrium is None else equilibrium.defender_utility,
        attacker_realized=[float(v) for v in attacker_realized],
        active=active_now,
        successes=successes,
        success_rate=successes / active_now,
        timings={"payoff_build": build_time, "solve": solve_time, "total": total_time},
    )
    new_state = replace(
        state,
        round=rnd + 1,
        beliefs=beliefs,
        active=next_active,
        pending=new_obs,
        cumulative_realized=state.cumulative_realized + realized,
        cumulative_expected=state.cumulative_expected + expected,
    )
    return new_state, record


def run_simulation(config: ScenarioConfig, ctx: GameContext | None = None) -> SimulationResult:
    """Play rounds until every attacker is terminal or ``max_rounds`` is reached."""
    ctx = ctx or build_context(config)
    state = initial_state(ctx)
    records = []
    termination = "max-rounds"
    while state.round < config.max_rounds:
        if not any(state.active):
            termination = "all-attackers-terminal"
            break
        state, rec = run_round(state, ctx)
        records.append(rec)
    return SimulationResult(
        records,
        state.cumulative_realized,
        state.cumulative_expected,
        [r.success_rate for r in records],
        termination,
    )
