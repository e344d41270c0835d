"""Attacker types, defender strategies, rewards and the payoff tensor."""

from __future__ import annotations

import csv
import itertools
import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import kernels
from .network import INFEASIBLE, AttackPath, Network, edge_cost

SKILLS = ("high", "mid", "low")
# number of cheapest catalog exploits available to each skill; high gets all
_SKILL_WIDTH = {"low": 4, "mid": 6}


class ConfigurationError(ValueError):
    """A game instance is too large or otherwise misconfigured."""


def skill_exploits(catalog, skill: str) -> frozenset[str]:
    """Exploit set for a skill label: low = 4 cheapest, mid = 6 cheapest, high = all.

    On the eight-exploit case-study catalog this reproduces the published
    sets (low {phi3, phi5, phi6, phi8}, mid adds phi4 and phi7).
    """
    if skill not in SKILLS:
        raise ConfigurationError(f"unknown skill {skill!r}; expected one of {SKILLS}")
    ranked = sorted(catalog, key=lambda e: (e.cost, e.id))
    if skill == "high":
        return frozenset(e.id for e in ranked)
    return frozenset(e.id for e in ranked[: _SKILL_WIDTH[skill]])


@dataclass(frozen=True)
class AttackerType:
    id: str
    exploits: frozenset[str]
    target: int
    skill: str = "custom"


# an attacker with no feasible path plays this: zero reward, no defender effect
ABSTAIN = AttackPath((), ())


def is_abstain(path: AttackPath) -> bool:
    return len(path.nodes) == 0


def defender_pure_strategies(candidates: Iterable[int], budget: int, cap: int = 200_000) -> list[tuple[int, ...]]:
    """All subsets of ``candidates`` with at most ``budget`` nodes, by size then lexicographic."""
    if budget < 0:
        raise ConfigurationError("budget must be >= 0")
    cands = sorted(set(candidates))
    top = min(budget, len(cands))
    count = sum(math.comb(len(cands), k) for k in range(top + 1))
    if count > cap:
        raise ConfigurationError(
            f"{len(cands)} candidates with budget {budget} give {count} pure strategies (cap {cap}); "
            "use a smaller candidate pool"
        )
    out: list[tuple[int, ...]] = []
    for k in range(top + 1):
        out.extend(itertools.combinations(cands, k))
    return out


def strategy_count(n_candidates: int, budget: int) -> int:
    return sum(math.comb(n_candidates, k) for k in range(min(budget, n_candidates) + 1))


def candidate_pool(
    net: Network, paths: Iterable[AttackPath], max_candidates: int | None = None, budget: int | None = None, max_strategies: int | None = None
) -> list[int]:
    """Nodes on any of ``paths`` (entry excluded), trimmed to the most useful.

    Nodes are ranked by how many paths cross them, then by node value, then id.
    The pool is cut to ``max_candidates`` and further until the strategy count
    for ``budget`` fits ``max_strategies``. Returned sorted by id.
    """
    freq: Counter = Counter()
    for p in paths:
        for v in set(p.nodes[1:]):
            if v != net.entry:
                freq[v] += 1
    ranked = sorted(freq, key=lambda v: (-freq[v], -net.values[v], v))
    size = len(ranked) if max_candidates is None else min(len(ranked), max_candidates)
    if budget is not None and max_strategies is not None:
        while size > 0 and strategy_count(size, budget) > max_strategies:
            size -= 1
    return sorted(ranked[:size])


# -- rewards -----------------------------------------------------------------


def first_hit(path: AttackPath, placement) -> int | None:
    """Index into ``path.nodes`` of the first honeypot (entry never counts)."""
    for j, v in enumerate(path.nodes[1:], start=1):
        if v in placement:
            return j
    return None


def defender_reward(d, profile: Sequence[AttackPath], net: Network, honeypot_cost: float) -> float:
    """Defender reward for one pure placement against one path per attacker.

    Walking each path from the entry, the first honeypot node earns ``V(v)``
    and ends that path; every non-entry node passed before it costs ``V(v)``.
    Each placed honeypot costs ``honeypot_cost`` exactly once, so an attacker
    caught at ``v`` nets ``V(v) - C_h`` and an untouched honeypot nets ``-C_h``.
    """
    d = set(d)
    if net.entry in d:
        raise ConfigurationError("the entry node cannot hold a honeypot")
    values = net.values
    total = -honeypot_cost * len(d)
    for path in profile:
        if is_abstain(path):
            continue
        for v in path.nodes[1:]:
            if v in d:
                total += values[v]
                break
            total -= values[v]
    return total


def path_costs(path: AttackPath, exploits, net: Network) -> tuple[float, ...]:
    return tuple(edge_cost(net.edge_map[e], exploits, net.costs) for e in path.edges())


def attacker_reward(attacker: AttackerType, d, path: AttackPath, net: Network) -> float:
    """Capture: minus the exploit cost spent up to the honeypot. Success: ``V(target)`` minus path cost."""
    if is_abstain(path):
        return 0.0
    if len(path.nodes) < 2:
        raise ConfigurationError("degenerate zero-length path")
    costs = path_costs(path, attacker.exploits, net)
    if any(c == INFEASIBLE for c in costs):
        raise ConfigurationError(f"path {path.nodes} is infeasible for attacker type {attacker.id}")
    hit = first_hit(path, set(d))
    if hit is not None:
        return -math.fsum(costs[:hit])
    return net.values[path.nodes[-1]] - math.fsum(costs)


# -- payoff tensor -------------------------------------------------------------


@dataclass
class PayoffTensor:
    """Dense payoff grid.

    ``cells`` has shape ``(|D|, |A_1|, ..., |A_m|, m + 1)``; the last axis holds
    ``(R_d, R_a1, ..., R_am)``.
    """

    strategies: list[tuple[int, ...]]
    actions: list[list[AttackPath]]
    cells: np.ndarray

    def __post_init__(self):
        expected = (len(self.strategies), *(len(a) for a in self.actions), len(self.actions) + 1)
        if self.cells.shape != expected:
            raise ValueError(f"cells shape {self.cells.shape} != {expected}")
        if not np.isfinite(self.cells).all():
            raise ValueError("payoff cells must be finite")

    @property
    def n_attackers(self) -> int:
        return len(self.actions)

    @property
    def profile_shape(self) -> tuple[int, ...]:
        return tuple(len(a) for a in self.actions)

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.cells.shape[:-1]))

    def to_csv(self, path) -> None:
        m = self.n_attackers
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["defender_index", *(f"a{i + 1}" for i in range(m)), "R_d", *(f"R_a{i + 1}" for i in range(m))])
            for idx in np.ndindex(*self.cells.shape[:-1]):
                w.writerow([*idx, *(repr(float(v)) for v in self.cells[idx])])

    def permute_attackers(self, order: Sequence[int]) -> "PayoffTensor":
        order = list(order)
        axes = [0, *(1 + i for i in order), self.cells.ndim - 1]
        cells = np.transpose(self.cells, axes)[..., [0, *(1 + i for i in order)]]
        return PayoffTensor(self.strategies, [self.actions[i] for i in order], np.ascontiguousarray(cells))


@dataclass
class PathBlock:
    """Per-strategy, per-path reward components for one attacker's action list.

    ``defender`` is the attacker's share of the defender reward (no deployment
    cost). ``attacker[t]`` holds the attacker reward if the attacker is of type
    ``types[t]``; ``feasible[t, p]`` says whether type t can walk path p at all.
    """

    defender: np.ndarray  # (|D|, |A|)
    attacker: np.ndarray  # (n_types, |D|, |A|)
    feasible: np.ndarray  # (n_types, |A|)


def _strategy_members(strategies: Sequence[tuple[int, ...]], cand_index: Mapping[int, int]) -> np.ndarray:
    width = max((len(s) for s in strategies), default=0)
    members = np.full((len(strategies), width), -1, dtype=np.int32)
    for i, s in enumerate(strategies):
        for j, v in enumerate(s):
            members[i, j] = cand_index[v]
    return members


def path_block(
    strategies: Sequence[tuple[int, ...]],
    paths: Sequence[AttackPath],
    net: Network,
    types: Sequence[AttackerType | None],
) -> PathBlock:
    """Evaluate every (strategy, path) pair for one attacker, once per candidate type.

    A ``None`` type uses the edge costs recorded on each path.
    """
    cand = sorted({v for s in strategies for v in s})
    cand_index = {v: i for i, v in enumerate(cand)}
    if net.entry in cand_index:
        raise ConfigurationError("the entry node cannot hold a honeypot")
    members = _strategy_members(strategies, cand_index)
    n_d, n_p = len(strategies), len(paths)
    lmax = max((len(p.nodes) - 1 for p in paths), default=0)
    cidx = np.full((n_p, max(lmax, 1)), -1, dtype=np.int32)
    plen = np.zeros(n_p, dtype=np.int32)
    values = net.values
    vals = np.zeros((n_p, max(lmax, 1)))
    for p, path in enumerate(paths):
        if is_abstain(path):
            continue
        hop_nodes = path.nodes[1:]
        plen[p] = len(hop_nodes)
        for j, v in enumerate(hop_nodes):
            cidx[p, j] = cand_index.get(v, -1)
            vals[p, j] = values[v]
    hits = kernels.first_hits(members, cidx, plen, len(cand))

    # loss accumulated before position j, and total loss for an unhindered walk
    loss_before = np.concatenate([np.zeros((n_p, 1)), np.cumsum(vals, axis=1)[:, :-1]], axis=1)
    full_loss = vals.sum(axis=1)
    hit = hits >= 0
    safe = np.where(hit, hits, 0)
    rows = np.arange(n_p)[None, :]
    gain = vals[rows, safe] - loss_before[rows, safe]
    defender = np.where(hit, gain, -full_loss[None, :])

    n_t = len(types)
    attacker = np.zeros((n_t, n_d, n_p))
    feasible = np.zeros((n_t, n_p), dtype=bool)
    for t, typ in enumerate(types):
        cum = np.zeros((n_p, max(lmax, 1)))
        success = np.zeros(n_p)
        for p, path in enumerate(paths):
            if is_abstain(path):
                continue
            costs = path.edge_costs if typ is None else path_costs(path, typ.exploits, net)
            if any(c == INFEASIBLE for c in costs):
                continue
            feasible[t, p] = True
            cs = np.cumsum(costs)
            cum[p, : len(cs)] = cs
            success[p] = values[path.nodes[-1]] - math.fsum(costs)
        r = np.where(hit, -cum[rows, safe], success[None, :])
        attacker[t] = np.where(feasible[t][None, :], r, 0.0)
    return PathBlock(defender, attacker, feasible)


def build_payoff_tensor(
    strategies: Sequence[tuple[int, ...]],
    action_lists: Sequence[Sequence[AttackPath]],
    net: Network,
    honeypot_cost: float,
    attacker_types: Sequence[AttackerType] | None = None,
    max_cells: int = 50_000_000,
) -> PayoffTensor:
    """Full payoff tensor for fixed attacker types.

    With ``attacker_types`` given, each attacker's rewards use that type's
    exploit costs and a path the type cannot walk behaves like abstaining
    (zero for both sides). Without them, the cost recorded on each path is used.
    """
    if any(len(a) == 0 for a in action_lists):
        raise ConfigurationError("every attacker needs at least one action (use ABSTAIN)")
    shape = (len(strategies), *(len(a) for a in action_lists))
    n_cells = int(np.prod(shape))
    if n_cells * (len(action_lists) + 1) > max_cells:
        raise ConfigurationError(f"payoff tensor would have {n_cells} cells, above the cap of {max_cells} values")
    blocks = []
    for i, paths in enumerate(action_lists):
        typ = attacker_types[i] if attacker_types is not None else None
        blocks.append(path_block(strategies, paths, net, [typ]))
    return assemble_tensor(strategies, action_lists, honeypot_cost, blocks)


def assemble_tensor(strategies, action_lists, honeypot_cost: float, blocks: Sequence[PathBlock], weights=None) -> PayoffTensor:
    """Combine per-attacker blocks into the dense tensor.

    ``weights[i]`` is a probability vector over the types in ``blocks[i]``;
    a path contributes to the defender only with the mass of types able to
    walk it. Defaults to the single type in each block.
    """
    m = len(blocks)
    n_d = len(strategies)
    sizes = [len(a) for a in action_lists]
    cells = np.empty((n_d, *sizes, m + 1))
    deploy = -honeypot_cost * np.array([len(s) for s in strategies], dtype=np.float64)
    rd = deploy.reshape((n_d,) + (1,) * m).copy()
    for i, blk in enumerate(blocks):
        w = np.ones(blk.attacker.shape[0]) if weights is None else np.asarray(weights[i], dtype=np.float64)
        mass = w @ blk.feasible  # (|A_i|,)
        dshare = blk.defender * mass[None, :]
        ashare = np.tensordot(w, blk.attacker, axes=(0, 0))
        shape = [n_d] + [1] * m
        shape[1 + i] = sizes[i]
        rd = rd + dshare.reshape(shape)
        cells[..., 1 + i] = np.broadcast_to(ashare.reshape(shape), cells.shape[:-1])
    cells[..., 0] = np.broadcast_to(rd, cells.shape[:-1])
    return PayoffTensor(list(strategies), [list(a) for a in action_lists], cells)


def expected_utilities(slices: Sequence[PayoffTensor] | np.ndarray, belief) -> PayoffTensor | np.ndarray:
    """Belief-weighted average of per-type payoff slices, cell by cell.

    ``slices`` share strategy and action indexing; ``belief`` has one entry per slice.
    """
    belief = np.asarray(belief, dtype=np.float64)
    if isinstance(slices, np.ndarray):
        arr = slices
        template = None
    else:
        arr = np.stack([s.cells for s in slices])
        template = slices[0]
    if belief.ndim != 1 or belief.size != arr.shape[0]:
        raise ValueError(f"belief has {belief.size} entries but there are {arr.shape[0]} type slices")
    if (belief < 0).any() or abs(belief.sum() - 1.0) > 1e-9:
        raise ValueError("belief must be a probability vector")
    avg = np.tensordot(belief, arr, axes=(0, 0))
    if template is None:
        return avg
    return PayoffTensor(template.strategies, template.actions, avg)
