"""Multi-follower strong Stackelberg equilibrium.

The big-M MILP (one binary ``z`` per joint attacker profile, exactly one set)
is solved by fixing each profile in turn: with ``z`` fixed the MILP is an LP
over the defender mixed strategy, and the best feasible profile wins.
"""

from __future__ import annotations

import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .game import PayoffTensor
from .lp import EQ, LE, LinearProgram, SolverError, solve_lp

TIE_TOL = 1e-9
# a deviation row whose every coefficient exceeds this cannot be satisfied on the simplex
_CLEARLY_INFEASIBLE = 1e-7


class SolveTimeout(RuntimeError):
    pass


@dataclass(frozen=True)
class BigM:
    beta: float

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")

    @classmethod
    def for_tensor(cls, tensor: PayoffTensor) -> "BigM":
        """``2 * (max cell - min cell) + 1``."""
        return cls(2.0 * cell_spread(tensor) + 1.0)


def cell_spread(tensor: PayoffTensor) -> float:
    return float(tensor.cells.max() - tensor.cells.min())


@dataclass
class EquilibriumSolution:
    mixed: np.ndarray  # probability per defender pure strategy
    profile: tuple[int, ...]
    defender_utility: float
    attacker_utilities: tuple[float, ...]
    lps_solved: int = 0
    profiles_pruned: int = 0

    def support(self, tol: float = 1e-12) -> list[tuple[int, float]]:
        return [(int(i), float(self.mixed[i])) for i in np.nonzero(self.mixed > tol)[0]]

    def expected_honeypots(self, strategies) -> float:
        sizes = np.array([len(s) for s in strategies], dtype=np.float64)
        return float(self.mixed @ sizes)


def _profile_lp(tensor: PayoffTensor, profile: tuple[int, ...]) -> tuple[LinearProgram, bool]:
    """LP over the defender mix with ``profile`` forced to be a joint best response.

    Second value is False when some deviation row is hopeless on the simplex.
    """
    cells = tensor.cells
    n_d = cells.shape[0]
    c = cells[(slice(None), *profile, 0)]
    rows = []
    hopeless = False
    for i in range(tensor.n_attackers):
        idx = [slice(None), *profile, 1 + i]
        idx[1 + i] = slice(None)
        own = cells[tuple(idx)]  # (n_d, |A_i|)
        gain = own - own[:, [profile[i]]]
        for a in range(own.shape[1]):
            if a == profile[i]:
                continue
            g = gain[:, a]
            if g.min() > _CLEARLY_INFEASIBLE:
                hopeless = True
            rows.append(g)
    A = np.vstack([np.ones((1, n_d)), *(r[None, :] for r in rows)]) if rows else np.ones((1, n_d))
    rel = [EQ] + [LE] * len(rows)
    b = np.zeros(len(rel))
    b[0] = 1.0
    return LinearProgram(c, A, rel, b), not hopeless


def solve_stackelberg(
    tensor: PayoffTensor,
    beta: BigM | None = None,
    threads: int = 1,
    deadline: float | None = None,
    dump_dir=None,
) -> EquilibriumSolution:
    """Defender-optimal commitment with a joint best response by all attackers.

    For every joint profile, maximise the defender's expected reward subject to
    each attacker having no profitable unilateral deviation. The best feasible
    profile wins; ties within 1e-9 go to the lexicographically smallest profile.
    Profiles whose best conceivable payoff cannot beat the incumbent are skipped,
    which never changes the answer. ``beta`` only validates the instance here.
    """
    if tensor.cells.shape[0] == 0:
        raise ValueError("tensor has no defender strategies")
    if beta is not None and beta.beta <= cell_spread(tensor):
        raise ValueError(f"beta={beta.beta} does not exceed the cell spread {cell_spread(tensor)}")
    shape = tensor.profile_shape
    n_prof = int(np.prod(shape)) if shape else 1
    rd = tensor.cells[..., 0].reshape(tensor.cells.shape[0], n_prof)
    upper = rd.max(axis=0)
    order = sorted(range(n_prof), key=lambda k: (-upper[k], k))

    lock = threading.Lock()
    state = {"lower": -np.inf, "solved": 0, "pruned": 0}
    results: dict[int, tuple[float, np.ndarray]] = {}
    dump_dir = Path(dump_dir) if dump_dir is not None else None
    if dump_dir is not None:
        dump_dir.mkdir(parents=True, exist_ok=True)

    def work(k: int):
        if deadline is not None and time.perf_counter() > deadline:
            raise SolveTimeout("equilibrium solve exceeded its time budget")
        with lock:
            if upper[k] < state["lower"] - TIE_TOL:
                state["pruned"] += 1
                return
        profile = tuple(int(v) for v in np.unravel_index(k, shape)) if shape else ()
        lp, plausible = _profile_lp(tensor, profile)
        if not plausible:
            with lock:
                state["pruned"] += 1
            return
        if dump_dir is not None:
            with open(dump_dir / f"profile_{'_'.join(map(str, profile)) or 'none'}.txt", "w") as fh:
                fh.write(lp.to_text())
                res = solve_lp(lp, dump=fh)
        else:
            res = solve_lp(lp)
        with lock:
            state["solved"] += 1
            if res.optimal:
                results[k] = (res.objective, res.x)
                if res.objective > state["lower"]:
                    state["lower"] = res.objective

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(work, order))
    else:
        for k in order:
            work(k)

    if not results:
        raise SolverError("no joint attacker profile admits a best-response-consistent defender strategy")
    best = max(v for v, _ in results.values())
    k = min(k for k, (v, _) in results.items() if v >= best - TIE_TOL)
    value, x = results[k]
    x = np.clip(x, 0.0, None)
    x = x / x.sum()
    profile = tuple(int(v) for v in np.unravel_index(k, shape)) if shape else ()
    return _solution(tensor, x, profile, state["solved"], state["pruned"])


def _solution(tensor, x, profile, solved=0, pruned=0) -> EquilibriumSolution:
    cell = tensor.cells[(slice(None), *profile)]  # (n_d, m+1)
    util = x @ cell
    return EquilibriumSolution(x, profile, float(util[0]), tuple(float(u) for u in util[1:]), solved, pruned)


# -- explicit big-M MILP -----------------------------------------------------


def solve_big_m_branching(tensor: PayoffTensor, beta: BigM | None = None) -> EquilibriumSolution:
    """Solve the full big-M MILP by enumerating every one-hot ``z``.

    Each branch keeps all the big-M rows (utility bounds and best-response
    rows for every profile) and solves the resulting LP in ``(x, U_d)``.
    Exponential in the number of profiles; meant for cross-checking.
    """
    beta = beta or BigM.for_tensor(tensor)
    cells = tensor.cells
    n_d = cells.shape[0]
    shape = tensor.profile_shape
    n_prof = int(np.prod(shape)) if shape else 1
    profiles = list(np.ndindex(*shape)) if shape else [()]
    m = tensor.n_attackers
    B = beta.beta

    # static row blocks: defender bound rows and attacker best-response rows
    bound_rows = []  # U - sum x R_d(P) <= beta (1 - z_P)
    br_rows = []  # sum x (R_i(P') - R_i(P)) <= beta (1 - z_P)
    br_owner = []
    for k, P in enumerate(profiles):
        row = np.zeros(n_d + 1)
        row[:n_d] = -cells[(slice(None), *P, 0)]
        row[n_d] = 1.0
        bound_rows.append(row)
        for i in range(m):
            for a in range(shape[i]):
                if a == P[i]:
                    continue
                Q = list(P)
                Q[i] = a
                row = np.zeros(n_d + 1)
                row[:n_d] = cells[(slice(None), *Q, 1 + i)] - cells[(slice(None), *P, 1 + i)]
                br_rows.append(row)
                br_owner.append(k)
    simplex_row = np.concatenate([np.ones(n_d), [0.0]])
    A = np.vstack([simplex_row[None, :], *bound_rows, *br_rows]) if br_rows else np.vstack([simplex_row[None, :], *bound_rows])
    rel = [EQ] + [LE] * (A.shape[0] - 1)
    c = np.zeros(n_d + 1)
    c[n_d] = 1.0
    nonneg = np.ones(n_d + 1, dtype=bool)
    nonneg[n_d] = False
    owners = np.array(list(range(n_prof)) + br_owner)

    best_val, best_k, best_x = -np.inf, None, None
    for k in range(n_prof):
        z = (owners == k).astype(np.float64)
        b = np.concatenate([[1.0], B * (1.0 - z)])
        res = solve_lp(LinearProgram(c, A, rel, b, nonneg))
        if res.status == "unbounded":
            raise SolverError("big-M branch unbounded; beta too small or tensor malformed")
        if res.optimal and res.objective > best_val + TIE_TOL:
            best_val, best_k, best_x = res.objective, k, res.x[:n_d]
    if best_k is None:
        raise SolverError("every big-M branch is infeasible")
    x = np.clip(best_x, 0.0, None)
    x = x / x.sum()
    return _solution(tensor, x, tuple(int(v) for v in profiles[best_k]))


# -- verifier ------------------------------------------------------------------


@dataclass
class BigMReport:
    passed: bool
    beta_sufficient: bool
    required_beta: float
    violations: list[dict] = field(default_factory=list)

    def best_response_violations(self) -> list[dict]:
        return [v for v in self.violations if v["kind"] == "best-response"]

    def beta_violations(self) -> list[dict]:
        return [v for v in self.violations if v["kind"] == "beta"]


def verify_big_m(sol: EquilibriumSolution, tensor: PayoffTensor, beta: BigM, tol: float = 1e-6) -> BigMReport:
    """Check every big-M inequality with ``z`` set on the chosen profile.

    Violations in the chosen profile's rows are best-response (or utility)
    failures. Violations in other profiles' rows mean ``beta`` is too small to
    switch those rows off and are reported separately.
    """
    cells = tensor.cells
    shape = tensor.profile_shape
    x = np.asarray(sol.mixed, dtype=np.float64)
    eu = np.tensordot(x, cells, axes=(0, 0))  # (*shape, m+1)
    B = beta.beta
    chosen = tuple(sol.profile)
    violations = []
    need = 0.0

    # defender utility rows: U <= EU_d(P) + B (1 - z_P)
    ud = sol.defender_utility
    for P in np.ndindex(*shape) if shape else [()]:
        slack = 0.0 if P == chosen else B
        gap = ud - eu[(*P, 0)]
        if P != chosen:
            need = max(need, gap)
        if gap > slack + tol:
            violations.append(
                {"kind": "utility" if P == chosen else "beta", "profile": P, "attacker": None, "deviation": None, "amount": float(gap - slack)}
            )

    for i in range(tensor.n_attackers):
        own = eu[..., 1 + i]
        best_dev = own.max(axis=i, keepdims=True)
        arg_dev = own.argmax(axis=i)
        gap_all = np.broadcast_to(best_dev, own.shape) - own
        for P in np.ndindex(*shape):
            gap = float(gap_all[P])
            if P != chosen:
                need = max(need, gap)
                if gap > B + tol:
                    violations.append({"kind": "beta", "profile": P, "attacker": i, "deviation": None, "amount": gap - B})
            elif gap > tol:
                dev_idx = tuple(np.delete(np.array(P), i))
                violations.append(
                    {
                        "kind": "best-response",
                        "profile": P,
                        "attacker": i,
                        "deviation": int(arg_dev[dev_idx]),
                        "amount": gap,
                    }
                )
    beta_ok = not any(v["kind"] == "beta" for v in violations)
    return BigMReport(not violations, beta_ok, float(need), violations)
