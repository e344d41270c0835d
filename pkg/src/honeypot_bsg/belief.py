"""Posterior over attacker types, revised by Bayes' rule from observed moves."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .game import AttackerType
from .network import AttackGraph, AttackPath

EDGE = "edge-traversed"
HONEYPOT = "honeypot-triggered"
NO_ACTIVITY = "no-activity"
KINDS = (EDGE, HONEYPOT, NO_ACTIVITY)

DEFAULT_OFF_PATH = 0.5


@dataclass(frozen=True)
class Observation:
    attacker: int
    kind: str
    round: int
    edge: tuple[int, int] | None = None
    node: int | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown observation kind {self.kind!r}")
        if self.kind == EDGE and self.edge is None:
            raise ValueError("edge observation needs an edge")
        if self.kind == HONEYPOT and self.node is None:
            raise ValueError("honeypot observation needs a node")

    def to_dict(self) -> dict:
        out = {"attacker": self.attacker, "kind": self.kind, "round": self.round}
        if self.edge is not None:
            out["edge"] = list(self.edge)
        if self.node is not None:
            out["node"] = self.node
        return out


@dataclass(frozen=True)
class TypeContext:
    """What the likelihood needs to know about one type."""

    type: AttackerType
    graph: AttackGraph
    paths: Sequence[AttackPath]  # cheapest first

    @property
    def optimal_edges(self) -> frozenset[tuple[int, int]]:
        return frozenset(self.paths[0].edges()) if self.paths else frozenset()

    @property
    def reachable(self) -> frozenset[int]:
        return frozenset(v for p in self.paths for v in p.nodes) | frozenset(v for _, v in self.graph.edges)


def likelihood(obs: Observation, ctx: TypeContext, off_path: float = DEFAULT_OFF_PATH) -> float:
    """Probability of ``obs`` if the attacker is of type ``ctx.type``.

    An edge the type cannot exploit scores 0, an edge of its cheapest path 1,
    any other usable edge ``off_path``. A honeypot trigger scores 1 when the
    type could have entered that node and 0 otherwise. No activity is uninformative.
    """
    if obs.kind == NO_ACTIVITY:
        return 1.0
    if obs.kind == EDGE:
        if not ctx.graph.has_edge(*obs.edge):
            return 0.0
        return 1.0 if obs.edge in ctx.optimal_edges else off_path
    return 1.0 if obs.node in ctx.reachable else 0.0


@dataclass(frozen=True)
class BeliefState:
    """One probability vector over the type space per attacker."""

    per_attacker: tuple[tuple[float, ...], ...]
    flags: tuple[bool, ...] = field(default=())

    def __post_init__(self):
        for vec in self.per_attacker:
            arr = np.asarray(vec)
            if (arr < 0).any() or abs(arr.sum() - 1.0) > 1e-9:
                raise ValueError(f"belief vector {vec} is not a distribution")
        if not self.flags:
            object.__setattr__(self, "flags", (False,) * len(self.per_attacker))

    @classmethod
    def uniform(cls, n_attackers: int, n_types: int) -> "BeliefState":
        return cls(tuple((1.0 / n_types,) * n_types for _ in range(n_attackers)))

    def vector(self, attacker: int) -> np.ndarray:
        return np.asarray(self.per_attacker[attacker], dtype=np.float64)


def posterior(prior, likelihoods) -> tuple[np.ndarray, bool]:
    """Bayes' rule on one vector. Returns (posterior, degenerate).

    Zero total evidence mass keeps the prior and reports ``degenerate``.
    """
    prior = np.asarray(prior, dtype=np.float64)
    joint = prior * np.asarray(likelihoods, dtype=np.float64)
    total = joint.sum()
    if not total > 0:
        return prior.copy(), True
    return joint / total, False


def bayes_update(
    belief: BeliefState,
    obs: Observation,
    contexts: Sequence[TypeContext] | Mapping[int, Sequence[TypeContext]],
    off_path: float = DEFAULT_OFF_PATH,
) -> BeliefState:
    """Revise the observed attacker's vector; the others are untouched.

    ``contexts`` lists one :class:`TypeContext` per type, or maps an attacker
    index to its own list when attackers have different type spaces.
    """
    i = obs.attacker
    ctxs = contexts[i] if isinstance(contexts, Mapping) else contexts
    prior = belief.vector(i)
    if len(ctxs) != prior.size:
        raise ValueError("type context count does not match the belief vector")
    lik = [likelihood(obs, c, off_path) for c in ctxs]
    post, degenerate = posterior(prior, lik)
    vectors = list(belief.per_attacker)
    flags = list(belief.flags)
    vectors[i] = tuple(float(p) for p in post)
    flags[i] = degenerate
    return BeliefState(tuple(vectors), tuple(flags))
