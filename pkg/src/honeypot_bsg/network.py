"""Attack network: topology, exploit catalog, node valuation, attack graphs, paths."""

from __future__ import annotations

import heapq
import json
import math
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from typing import Iterable, Mapping, Sequence

import numpy as np

from .rng import stream, NETWORK_STREAM

INFEASIBLE = math.inf


class NetworkError(ValueError):
    """Invalid network definition or unknown node."""


class GenerationError(RuntimeError):
    """Synthetic network constraints could not be met."""


@dataclass(frozen=True)
class Exploit:
    id: str
    cost: float

    def __post_init__(self):
        if not (self.cost >= 0 and math.isfinite(self.cost)):
            raise NetworkError(f"exploit {self.id!r}: cost must be finite and >= 0, got {self.cost}")


CASE_STUDY_CATALOG = (
    Exploit("phi1", 9.0),
    Exploit("phi2", 7.5),
    Exploit("phi3", 2.5),
    Exploit("phi4", 4.0),
    Exploit("phi5", 3.0),
    Exploit("phi6", 1.5),
    Exploit("phi7", 5.0),
    Exploit("phi8", 1.0),
)

# Ten exploits for synthetic networks. Costs are distinct multiples of 0.5 so
# path sums are exact in binary floating point.
DEFAULT_CATALOG = CASE_STUDY_CATALOG + (Exploit("phi9", 6.0), Exploit("phi10", 8.5))


@dataclass(frozen=True)
class Network:
    nodes: tuple[int, ...]
    edges: tuple[tuple[int, int, frozenset[str]], ...]
    entry: int
    targets: Mapping[int, float]
    alpha: float
    catalog: tuple[Exploit, ...]
    labels: Mapping[int, str] = field(default_factory=dict)

    def __post_init__(self):
        node_set = set(self.nodes)
        if len(node_set) != len(self.nodes):
            raise NetworkError("duplicate node ids")
        ids = [e.id for e in self.catalog]
        if len(set(ids)) != len(ids):
            raise NetworkError("duplicate exploit ids in catalog")
        if not (0.0 < self.alpha < 1.0):
            raise NetworkError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.entry not in node_set:
            raise NetworkError(f"entry node {self.entry} not in nodes")
        for t, value in self.targets.items():
            if t not in node_set:
                raise NetworkError(f"target {t} not in nodes")
            if not (value >= 0 and math.isfinite(value)):
                raise NetworkError(f"target {t}: value must be finite and >= 0")
        known = set(ids)
        seen = set()
        for u, v, exploits in self.edges:
            if u not in node_set or v not in node_set:
                raise NetworkError(f"edge ({u}, {v}) references unknown node")
            if u == v:
                raise NetworkError(f"self-loop at node {u}")
            if (u, v) in seen:
                raise NetworkError(f"duplicate edge ({u}, {v})")
            seen.add((u, v))
            if not exploits:
                raise NetworkError(f"edge ({u}, {v}) has an empty exploit set")
            unknown = set(exploits) - known
            if unknown:
                raise NetworkError(f"edge ({u}, {v}) uses exploits outside the catalog: {sorted(unknown)}")

    @cached_property
    def costs(self) -> dict[str, float]:
        return {e.id: e.cost for e in self.catalog}

    @cached_property
    def exploit_order(self) -> dict[str, int]:
        return {e.id: i for i, e in enumerate(self.catalog)}

    @cached_property
    def edge_map(self) -> dict[tuple[int, int], frozenset[str]]:
        return {(u, v): ex for u, v, ex in self.edges}

    @cached_property
    def successors(self) -> dict[int, list[int]]:
        adj: dict[int, list[int]] = {v: [] for v in self.nodes}
        for u, v, _ in self.edges:
            adj[u].append(v)
        for v in adj:
            adj[v].sort()
        return adj

    @cached_property
    def predecessors(self) -> dict[int, list[int]]:
        adj: dict[int, list[int]] = {v: [] for v in self.nodes}
        for u, v, _ in self.edges:
            adj[v].append(u)
        for v in adj:
            adj[v].sort()
        return adj

    @cached_property
    def index(self) -> dict[int, int]:
        return {v: i for i, v in enumerate(self.nodes)}

    def resolve_node(self, ref) -> int:
        """Accept a node id or a label such as ``"T3"``."""
        if isinstance(ref, str):
            for node, label in self.labels.items():
                if label == ref:
                    return node
            try:
                ref = int(ref)
            except ValueError:
                raise NetworkError(f"unknown node label {ref!r}") from None
        if ref not in self.index:
            raise NetworkError(f"unknown node id {ref!r}")
        return int(ref)

    def label(self, node: int) -> str:
        return self.labels.get(node, str(node))

    def with_alpha(self, alpha: float) -> "Network":
        return Network(self.nodes, self.edges, self.entry, dict(self.targets), alpha, self.catalog, dict(self.labels))

    @cached_property
    def values(self) -> dict[int, float]:
        """Node valuation for every node (see :func:`node_value`)."""
        total = {v: 0.0 for v in self.nodes}
        for t in sorted(self.targets):
            dist = bfs_distances(self.predecessors, t)
            worth = self.targets[t]
            for v, d in dist.items():
                total[v] += self.alpha ** d * worth
        return total

    # -- serialization -------------------------------------------------

    def to_dict(self) -> dict:
        doc = {
            "nodes": list(self.nodes),
            "edges": [
                {"from": u, "to": v, "exploits": sorted(ex, key=self.exploit_order.__getitem__)}
                for u, v, ex in self.edges
            ],
            "entry": self.entry,
            "targets": [{"node": t, "value": float(val)} for t, val in self.targets.items()],
            "alpha": float(self.alpha),
            "catalog": [{"id": e.id, "cost": float(e.cost)} for e in self.catalog],
        }
        if self.labels:
            doc["labels"] = {str(k): v for k, v in self.labels.items()}
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, doc: Mapping) -> "Network":
        try:
            catalog = tuple(Exploit(str(c["id"]), float(c["cost"])) for c in doc["catalog"])
            edges = tuple(
                (int(e["from"]), int(e["to"]), frozenset(str(x) for x in e["exploits"])) for e in doc["edges"]
            )
            targets = {int(t["node"]): float(t["value"]) for t in doc["targets"]}
            labels = {int(k): str(v) for k, v in doc.get("labels", {}).items()}
            return cls(
                nodes=tuple(int(v) for v in doc["nodes"]),
                edges=edges,
                entry=int(doc["entry"]),
                targets=targets,
                alpha=float(doc["alpha"]),
                catalog=catalog,
                labels=labels,
            )
        except KeyError as exc:
            raise NetworkError(f"network document missing field {exc.args[0]!r}") from None
        except (TypeError, ValueError) as exc:
            if isinstance(exc, NetworkError):
                raise
            raise NetworkError(f"malformed network document: {exc}") from None

    @classmethod
    def from_json(cls, text: str) -> "Network":
        return cls.from_dict(json.loads(text))


def load_network(path) -> Network:
    with open(path, encoding="utf-8") as fh:
        return Network.from_json(fh.read())


def case_study_network() -> Network:
    """The bundled 15-node, 21-edge reconstruction used by the case study."""
    text = resources.files("honeypot_bsg.data").joinpath("case_study_network.json").read_text(encoding="utf-8")
    return Network.from_json(text)


def bfs_distances(adjacency: Mapping[int, Sequence[int]], source: int) -> dict[int, int]:
    dist = {source: 0}
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for w in adjacency[u]:
            if w not in dist:
                dist[w] = dist[u] + 1
                queue.append(w)
    return dist


def node_value(net: Network, v: int) -> float:
    """Discounted target worth of node ``v``.

    Sum over targets of ``alpha ** hops(v -> T) * Value(T)`` using directed hop
    distance on the full graph. Targets unreachable from ``v`` contribute 0.
    """
    if v not in net.index:
        raise NetworkError(f"unknown node id {v!r}")
    return net.values[v]


# -- attack graphs -------------------------------------------------------


def edge_cost(edge_exploits: Iterable[str], attacker_exploits: Iterable[str], catalog) -> float:
    """Cheapest usable exploit on an edge, or ``INFEASIBLE`` (inf) if none is usable."""
    costs = catalog if isinstance(catalog, Mapping) else {e.id: e.cost for e in catalog}
    usable = set(edge_exploits) & set(attacker_exploits)
    if not usable:
        return INFEASIBLE
    return min(costs[e] for e in usable)


@dataclass(frozen=True)
class AttackGraph:
    owner: str | None
    edges: Mapping[tuple[int, int], float]

    @cached_property
    def successors(self) -> dict[int, list[tuple[int, float]]]:
        adj: dict[int, list[tuple[int, float]]] = {}
        for (u, v), c in self.edges.items():
            adj.setdefault(u, []).append((v, c))
        for u in adj:
            adj[u].sort()
        return adj

    @cached_property
    def predecessors(self) -> dict[int, list[tuple[int, float]]]:
        adj: dict[int, list[tuple[int, float]]] = {}
        for (u, v), c in self.edges.items():
            adj.setdefault(v, []).append((u, c))
        return adj

    def has_edge(self, u: int, v: int) -> bool:
        return (u, v) in self.edges


def derive_attack_graph(net: Network, exploit_set: Iterable[str], owner: str | None = None) -> AttackGraph:
    exploit_set = frozenset(exploit_set)
    unknown = exploit_set - set(net.costs)
    if unknown:
        raise NetworkError(f"exploits outside the catalog: {sorted(unknown)}")
    edges = {}
    for u, v, ex in net.edges:
        c = edge_cost(ex, exploit_set, net.costs)
        if c != INFEASIBLE:
            edges[(u, v)] = c
    return AttackGraph(owner, edges)


@dataclass(frozen=True)
class AttackPath:
    nodes: tuple[int, ...]
    edge_costs: tuple[float, ...]

    @property
    def total_cost(self) -> float:
        return math.fsum(self.edge_costs)

    @property
    def hop_count(self) -> int:
        return len(self.nodes) - 1

    @property
    def target(self) -> int:
        return self.nodes[-1]

    def edges(self) -> list[tuple[int, int]]:
        return list(zip(self.nodes[:-1], self.nodes[1:]))

    def sort_key(self):
        return (self.total_cost, self.hop_count, self.nodes)


def _reverse_dijkstra(ag: AttackGraph, targets) -> dict[int, float]:
    dist = {t: 0.0 for t in targets}
    heap = [(0.0, t) for t in sorted(targets)]
    heapq.heapify(heap)
    while heap:
        d, v = heapq.heappop(heap)
        if d > dist.get(v, math.inf):
            continue
        for u, c in ag.predecessors.get(v, ()):
            nd = d + c
            if nd < dist.get(u, math.inf):
                dist[u] = nd
                heapq.heappush(heap, (nd, u))
    return dist


def _reverse_hops(ag: AttackGraph, targets) -> dict[int, int]:
    dist = {t: 0 for t in targets}
    queue = deque(sorted(targets))
    while queue:
        v = queue.popleft()
        for u, _ in ag.predecessors.get(v, ()):
            if u not in dist:
                dist[u] = dist[v] + 1
                queue.append(u)
    return dist


def enumerate_paths(ag: AttackGraph, entry: int, targets, k: int = 10, max_expansions: int = 2_000_000) -> list[AttackPath]:
    """The ``k`` cheapest simple entry-to-target paths of an attack graph.

    Ordered by (total cost, hop count, node sequence). Best-first search whose
    priority is a lower bound on every completion, so complete paths pop in
    exactly that order.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    targets = set(targets)
    if entry in targets:
        raise NetworkError("entry node cannot be a target")
    h_cost = _reverse_dijkstra(ag, targets)
    h_hops = _reverse_hops(ag, targets)
    if entry not in h_cost:
        return []

    def bound(c: float) -> float:
        # shave rounding so the heuristic never overestimates
        return max(0.0, c - 1e-9 * (1.0 + c))

    out: list[AttackPath] = []
    heap = [(bound(h_cost[entry]), h_hops[entry], (entry,), 0.0, ())]
    pops = 0
    while heap and len(out) < k:
        _, _, nodes, g, costs = heapq.heappop(heap)
        pops += 1
        if pops > max_expansions:
            raise RuntimeError(f"path enumeration exceeded {max_expansions} expansions")
        last = nodes[-1]
        if last in targets and len(nodes) > 1:
            out.append(AttackPath(nodes, costs))
            if len(out) == k:
                break
        on_path = set(nodes)
        for w, c in ag.successors.get(last, ()):
            if w in on_path or w not in h_cost:
                continue
            ng = g + c
            heapq.heappush(
                heap,
                (bound(ng + h_cost[w]) if w not in targets else ng, len(nodes) + h_hops[w], nodes + (w,), ng, costs + (c,)),
            )
    return out


# -- synthetic networks ----------------------------------------------------


@dataclass(frozen=True)
class GenerationSpec:
    edge_factor: float = 3.0
    n_targets: int = 3
    target_values: tuple[float, ...] = (10.0, 15.0, 20.0)
    min_depth: int = 6
    min_exploits: int = 1
    max_exploits: int = 4
    alpha: float = 0.4
    catalog: tuple[Exploit, ...] = DEFAULT_CATALOG
    extra_layers: int = 2
    max_attempts: int = 50
    mode: str = "random"  # or "case-study"


def _try_generate(n: int, spec: GenerationSpec, rng: np.random.Generator) -> Network | None:
    depth = spec.min_depth
    n_layers = depth + spec.extra_layers
    if n - 1 < n_layers:
        n_layers = max(depth, n - 1)
    # every layer gets one node, the rest are scattered uniformly
    counts = np.ones(n_layers, dtype=np.int64)
    extra = n - 1 - n_layers
    if extra < 0:
        return None
    if extra:
        counts += rng.multinomial(extra, np.full(n_layers, 1.0 / n_layers))
    layer = np.zeros(n, dtype=np.int64)
    start = 1
    members: list[list[int]] = [[0]]
    for ell, cnt in enumerate(counts, start=1):
        ids = list(range(start, start + int(cnt)))
        layer[ids] = ell
        members.append(ids)
        start += int(cnt)

    edge_set: set[tuple[int, int]] = set()
    ordered: list[tuple[int, int]] = []
    for ell in range(1, n_layers + 1):
        prev = members[ell - 1]
        for v in members[ell]:
            u = prev[int(rng.integers(len(prev)))]
            edge_set.add((u, v))
            ordered.append((u, v))
    want = int(math.ceil(spec.edge_factor * n))
    # forward edges may only advance one layer, which pins BFS depth to the layer index
    budget = 200 * want
    while len(ordered) < want and budget > 0:
        budget -= 1
        u = int(rng.integers(n))
        v = int(rng.integers(n))
        if u == v or layer[v] > layer[u] + 1 or (u, v) in edge_set:
            continue
        edge_set.add((u, v))
        ordered.append((u, v))
    if len(ordered) < want:
        return None

    deep = [v for v in range(n) if layer[v] >= depth]
    if len(deep) < spec.n_targets:
        return None
    chosen = rng.choice(np.array(deep), size=spec.n_targets, replace=False)
    values = list(spec.target_values)
    if len(values) < spec.n_targets:
        values += [values[-1]] * (spec.n_targets - len(values))
    targets = {int(t): float(values[i]) for i, t in enumerate(chosen)}

    ids = [e.id for e in spec.catalog]
    hi = min(spec.max_exploits, len(ids))
    edges = []
    for u, v in ordered:
        m = int(rng.integers(spec.min_exploits, hi + 1))
        pick = rng.choice(len(ids), size=m, replace=False)
        edges.append((u, v, frozenset(ids[i] for i in sorted(pick))))
    labels = {int(t): f"T{i + 1}" for i, t in enumerate(chosen)}
    net = Network(tuple(range(n)), tuple(edges), 0, targets, spec.alpha, spec.catalog, labels)
    dist = bfs_distances(net.successors, 0)
    if any(dist.get(t, -1) < depth for t in targets):
        return None
    return net


def generate_network(n: int, seed: int, spec: GenerationSpec | None = None) -> Network:
    """Deterministic layered random network with ``>= edge_factor * n`` edges."""
    spec = spec or GenerationSpec()
    if spec.mode == "case-study":
        net = case_study_network()
        if n != len(net.nodes):
            raise GenerationError(f"case-study mode fixes n={len(net.nodes)}, got {n}")
        return net.with_alpha(spec.alpha) if spec.alpha != net.alpha else net
    if spec.mode != "random":
        raise GenerationError(f"unknown generation mode {spec.mode!r}")
    if n < spec.min_depth + 2:
        raise GenerationError(f"n={n} too small for target depth {spec.min_depth} (need n >= {spec.min_depth + 2})")
    if not (1 <= spec.min_exploits <= spec.max_exploits):
        raise GenerationError("exploit count bounds must satisfy 1 <= min <= max")
    rng = stream(seed, NETWORK_STREAM)
    for _ in range(spec.max_attempts):
        net = _try_generate(n, spec, rng)
        if net is not None:
            return net
    raise GenerationError(
        f"could not build a network with n={n}, >= {spec.edge_factor}n edges and {spec.n_targets} targets "
        f"at depth >= {spec.min_depth} after {spec.max_attempts} attempts"
    )
