"""Parameter sweeps, baseline comparison and timing runs, emitted as CSV tables."""

from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .config import ConfigError, parse_scenario
from .equilibrium import SolveTimeout, solve_stackelberg
from .sim import build_context, averaged_game, initial_state, run_simulation

KINDS = ("case-study", "alpha-sweep", "cost-sweep", "baseline-compare", "scalability")
SAME_TARGET = "same"
DIFFERENT_TARGET = "different"


@dataclass
class ExperimentSpec:
    kind: str
    scenario: dict
    grid: dict[str, list]
    replications: int = 1
    seed: int = 0
    timeout: float = 300.0
    base_dir: Path | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError("kind", f"must be one of {list(KINDS)}, got {self.kind!r}")
        if self.replications < 1:
            raise ConfigError("replications", "must be >= 1")
        if self.seed < 0:
            raise ConfigError("seed", "must be >= 0")
        for k, v in self.grid.items():
            if not isinstance(v, list) or not v:
                raise ConfigError(f"grid.{k}", "must be a non-empty list")
        if not self.timeout > 0:
            raise ConfigError("timeout", "must be positive")

    @classmethod
    def from_dict(cls, doc: Mapping, base_dir=None) -> "ExperimentSpec":
        if not isinstance(doc, Mapping):
            raise ConfigError("", "experiment document must be a JSON object")
        unknown = set(doc) - {"kind", "scenario", "grid", "replications", "seed", "timeout", "name"}
        if unknown:
            raise ConfigError(sorted(unknown)[0], "unknown key")
        for key in ("kind", "scenario", "grid"):
            if key not in doc:
                raise ConfigError(key, "required")
        if not isinstance(doc["grid"], Mapping):
            raise ConfigError("grid", "must be an object of lists")
        for key in ("replications", "seed"):
            v = doc.get(key, 1 if key == "replications" else 0)
            if isinstance(v, bool) or not isinstance(v, int):
                raise ConfigError(key, f"expected an integer, got {v!r}")
        return cls(
            doc["kind"],
            dict(doc["scenario"]),
            {k: list(v) if isinstance(v, list) else v for k, v in doc["grid"].items()},
            doc.get("replications", 1),
            doc.get("seed", 0),
            float(doc.get("timeout", 300.0)),
            Path(base_dir) if base_dir is not None else None,
        )

    def build(self, **overrides):
        """Scenario config from the base document with top-level keys replaced."""
        return self.scenario_from(self.scenario, **overrides)

    def scenario_from(self, doc: Mapping, **overrides):
        doc = dict(doc)
        doc.update(overrides)
        return parse_scenario(doc, base=self.base_dir)


@dataclass
class ResultTable:
    """Rows of ``(parameters..., metric, value, seed)`` in a fixed column order."""

    params: list[str]
    rows: list[tuple] = field(default_factory=list)

    @property
    def columns(self) -> list[str]:
        return [*self.params, "metric", "value", "seed"]

    def add(self, params: Sequence, metric: str, value: float, seed) -> None:
        if len(params) != len(self.params):
            raise ValueError("parameter count mismatch")
        value = float(value)
        if not math.isfinite(value):
            raise ValueError(f"metric {metric} is not finite: {value}")
        self.rows.append((*params, metric, value, seed))

    def sorted_rows(self) -> list[tuple]:
        def key(row):
            *p, metric, _, seed = row
            return (tuple(_sort_key(v) for v in p), metric, _sort_key(seed))

        return sorted(self.rows, key=key)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for row in self.sorted_rows():
            w.writerow([_fmt(v) for v in row])
        return buf.getvalue()

    def write(self, path) -> None:
        Path(path).write_text(self.to_csv())

    def select(self, metric: str, seed="mean", **params) -> list[tuple]:
        out = []
        for row in self.sorted_rows():
            *p, m, v, s = row
            if m != metric or s != seed:
                continue
            named = dict(zip(self.params, p))
            if all(named[k] == val for k, val in params.items()):
                out.append((named, v))
        return out

    def add_means(self) -> None:
        """Append a ``seed="mean"`` row per (parameters, metric)."""
        groups: dict[tuple, list[float]] = {}
        for *p, m, v, s in self.rows:
            if s == "mean":
                continue
            groups.setdefault((*p, m), []).append(v)
        for (*p, m), vals in groups.items():
            self.rows.append((*p, m, math.fsum(vals) / len(vals), "mean"))


def _sort_key(v):
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return (0, float(v), "")
    return (1, 0.0, str(v))


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _pairing_label(pair) -> str:
    return "-".join(pair)


def _pair_kind(pair) -> str:
    return SAME_TARGET if pair[0] == pair[1] else DIFFERENT_TARGET


def _with_targets(scenario: dict, pair) -> list[dict]:
    roster = scenario.get("attackers", [])
    if len(roster) != len(pair):
        raise ConfigError("grid.pairing", f"pairing {pair} does not match the {len(roster)}-attacker roster")
    return [{**a, "target": t} for a, t in zip(roster, pair)]


def one_shot(cfg, deadline: float | None = None) -> dict:
    """Equilibrium at the prior belief: no observations, one solve."""
    t0 = time.perf_counter()
    ctx = build_context(cfg)
    state = initial_state(ctx)
    tensor, _ = averaged_game(ctx, state.beliefs)
    t1 = time.perf_counter()
    sol = solve_stackelberg(tensor, threads=cfg.threads, deadline=deadline)
    t2 = time.perf_counter()
    return {
        "solution": sol,
        "context": ctx,
        "defender_utility": sol.defender_utility,
        "expected_honeypots": sol.expected_honeypots(ctx.strategies),
        "phase1": t1 - t0,
        "phase2": t2 - t1,
        "n_strategies": len(ctx.strategies),
        "n_profiles": int(np.prod(tensor.profile_shape)),
        "lps_solved": sol.lps_solved,
    }


def _map(fn: Callable, jobs: list, threads: int) -> list:
    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, jobs))
    return [fn(j) for j in jobs]


def run_sweep(spec: ExperimentSpec, param: str, threads: int = 1) -> ResultTable:
    """Alpha or cost sweep: one equilibrium per (value, pairing, replication)."""
    values = spec.grid.get(param)
    if values is None:
        raise ConfigError(f"grid.{param}", "required")
    pairs = spec.grid.get("pairing") or [[a.get("target") for a in spec.scenario.get("attackers", [])]]
    for v in values:
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"grid.{param}", f"expected numbers, got {v!r}")
        if param == "alpha" and not (0.0 < v < 1.0):
            raise ConfigError("grid.alpha", f"must lie in the open interval (0, 1), got {v}")
        if param == "honeypot_cost" and v < 0:
            raise ConfigError("grid.honeypot_cost", f"must be >= 0, got {v}")
    table = ResultTable([param, "pairing", "pairing_kind"])
    jobs = [(v, tuple(p), r) for v in values for p in pairs for r in range(spec.replications)]

    def work(job):
        v, pair, r = job
        seed = spec.seed + r
        cfg = spec.build(**{param: v, "attackers": _with_targets(spec.scenario, pair), "seed": seed})
        return job, one_shot(cfg)

    for (v, pair, r), res in _map(work, jobs, threads):
        key = (v, _pairing_label(pair), _pair_kind(pair))
        table.add(key, "defender_utility", res["defender_utility"], spec.seed + r)
        table.add(key, "expected_honeypots", res["expected_honeypots"], spec.seed + r)
    table.add_means()
    if param == "honeypot_cost":
        _add_cost_diagnostics(table, values)
    return table


def _add_cost_diagnostics(table: ResultTable, costs) -> None:
    """Same-minus-different target gap per cost, and per-pairing monotonicity flags."""
    means = table.select("defender_utility")
    by_cost: dict[float, dict[str, list[float]]] = {}
    by_pair: dict[str, list[tuple[float, float]]] = {}
    for named, v in means:
        by_cost.setdefault(named["honeypot_cost"], {}).setdefault(named["pairing_kind"], []).append(v)
        by_pair.setdefault(named["pairing"], []).append((named["honeypot_cost"], v))
    for c, kinds in by_cost.items():
        if SAME_TARGET in kinds and DIFFERENT_TARGET in kinds:
            gap = np.mean(kinds[SAME_TARGET]) - np.mean(kinds[DIFFERENT_TARGET])
            table.rows.append((c, "all", "all", "gap_same_minus_different", float(gap), "mean"))
    for pair, pts in by_pair.items():
        pts.sort()
        ok = all(b[1] <= a[1] + 1e-9 for a, b in zip(pts, pts[1:]))
        kind = SAME_TARGET if len(set(pair.split("-"))) == 1 else DIFFERENT_TARGET
        table.rows.append((min(costs), pair, kind, "non_increasing", 1.0 if ok else 0.0, "mean"))


def run_baseline_compare(spec: ExperimentSpec, threads: int = 1) -> ResultTable:
    """Per (policy, budget, round): defender utility over replications on shared networks."""
    budgets = spec.grid.get("budget", [0, 1, 2, 3, 4, 5])
    policies = spec.grid.get("policy", ["stackelberg", "greedy", "random"])
    table = ResultTable(["policy", "budget", "round"])
    jobs = [(b, r) for b in budgets for r in range(spec.replications)]

    def work(job):
        b, r = job
        seed = spec.seed + r
        base = spec.build(budget=b, seed=seed)
        ctx = build_context(base)
        out = {}
        for pol in policies:
            cfg = replace(base, policy=pol)
            ctx.config = cfg
            out[pol] = run_simulation(cfg, ctx)
        return job, out

    for (b, r), out in _map(work, jobs, threads):
        for pol, res in out.items():
            for rec in res.rounds:
                key = (pol, b, rec.round)
                table.add(key, "defender_expected", rec.defender_expected, spec.seed + r)
                table.add(key, "defender_realized", rec.defender_realized, spec.seed + r)
                table.add(key, "success_rate", rec.success_rate, spec.seed + r)
    table.add_means()
    return table


@dataclass
class TimingRow:
    n: int
    seed: int
    edges: int
    phase1: float
    phase2: float
    total: float
    timed_out: bool
    lps_solved: int = 0  # depends on pruning order, so varies with --threads


def run_scalability(spec: ExperimentSpec, threads: int = 1) -> tuple[ResultTable, list[TimingRow]]:
    """One defended round per (size, replication).

    Deterministic quantities go in the table. Wall-clock times and the LP
    count are returned separately because they differ between runs.
    """
    sizes = spec.grid.get("n")
    if not sizes:
        raise ConfigError("grid.n", "required")
    table = ResultTable(["n"])
    timings = []
    for n in sizes:
        for r in range(spec.replications):
            seed = spec.seed + r
            t0 = time.perf_counter()
            scenario = dict(spec.scenario)
            scenario.setdefault("network", {"generate": {"n": n}})
            if "generate" in scenario["network"]:
                scenario["network"] = {"generate": {**scenario["network"]["generate"], "n": n}}
            cfg = spec.scenario_from(scenario, seed=seed, threads=threads)
            try:
                res = one_shot(cfg, deadline=t0 + spec.timeout)
            except SolveTimeout:
                timings.append(TimingRow(n, seed, len(cfg.network.edges), math.nan, math.nan, time.perf_counter() - t0, True))
                table.add((n,), "edges", len(cfg.network.edges), seed)
                continue
            total = time.perf_counter() - t0
            timings.append(TimingRow(n, seed, len(cfg.network.edges), res["phase1"], res["phase2"], total, total > spec.timeout, res["lps_solved"]))
            table.add((n,), "edges", len(cfg.network.edges), seed)
            table.add((n,), "defender_utility", res["defender_utility"], seed)
            table.add((n,), "strategies", res["n_strategies"], seed)
            table.add((n,), "profiles", res["n_profiles"], seed)
    return table, timings


def timing_csv(rows: list[TimingRow]) -> str:
    """Per-run times plus per-size medians."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "seed", "edges", "phase1_s", "phase2_s", "total_s", "timed_out", "lps_solved"])
    for t in rows:
        w.writerow([t.n, t.seed, t.edges, repr(t.phase1), repr(t.phase2), repr(t.total), int(t.timed_out), t.lps_solved])
    for n in sorted({t.n for t in rows}):
        ok = [t for t in rows if t.n == n and not t.timed_out]
        if ok:
            med = [float(np.median([getattr(t, f) for t in ok])) for f in ("phase1", "phase2", "total")]
            w.writerow([n, "median", ok[0].edges, *map(repr, med), 0, ""])
        else:
            w.writerow([n, "median", "", "", "", "", 1, ""])
    return buf.getvalue()


def phase_medians(rows: list[TimingRow]) -> dict[int, tuple[float, float, float]]:
    out = {}
    for n in sorted({t.n for t in rows}):
        ok = [t for t in rows if t.n == n and not t.timed_out]
        if ok:
            out[n] = tuple(float(np.median([getattr(t, f) for t in ok])) for f in ("phase1", "phase2", "total"))
    return out
