"""Dense two-phase primal simplex with Bland's rule."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels

LE, EQ, GE = "<=", "=", ">="


class SolverError(RuntimeError):
    """Simplex broke down (iteration limit, non-finite tableau, bad input)."""


@dataclass
class LinearProgram:
    """maximize ``c @ x`` subject to ``A[i] @ x (rel[i]) b[i]``.

    ``nonneg[j]`` False marks a free variable; it is split internally.
    """

    c: np.ndarray
    A: np.ndarray
    relations: Sequence[str]
    b: np.ndarray
    nonneg: np.ndarray | None = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=np.float64).ravel()
        self.A = np.asarray(self.A, dtype=np.float64).reshape(-1, self.c.size)
        self.b = np.asarray(self.b, dtype=np.float64).ravel()
        self.relations = tuple(self.relations)
        if self.nonneg is None:
            self.nonneg = np.ones(self.c.size, dtype=bool)
        self.nonneg = np.asarray(self.nonneg, dtype=bool).ravel()
        m, n = self.A.shape
        if self.b.size != m or len(self.relations) != m or self.nonneg.size != n:
            raise ValueError("inconsistent LP dimensions")
        if any(r not in (LE, EQ, GE) for r in self.relations):
            raise ValueError(f"unknown relation in {self.relations}")
        if not (np.isfinite(self.c).all() and np.isfinite(self.A).all() and np.isfinite(self.b).all()):
            raise ValueError("LP coefficients must be finite")

    def to_text(self) -> str:
        """Plain-text dump, one constraint per line."""

        def fmt(row):
            return " ".join(f"{v:+.12g}*x{j}" for j, v in enumerate(row) if v != 0.0) or "0"

        lines = [f"maximize {fmt(self.c)}", "subject to"]
        for row, rel, rhs in zip(self.A, self.relations, self.b):
            lines.append(f"  {fmt(row)} {rel} {rhs:.12g}")
        free = [f"x{j}" for j in np.nonzero(~self.nonneg)[0]]
        lines.append("bounds: " + ("free " + " ".join(free) if free else "all x >= 0"))
        return "\n".join(lines) + "\n"


@dataclass
class LPResult:
    status: str  # "optimal" | "infeasible" | "unbounded"
    x: np.ndarray | None = None
    objective: float | None = None
    iterations: int = 0
    diagnostics: dict = field(default_factory=dict)

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


def _tableau_text(T, basis) -> str:
    rows = [" ".join(f"{v:.6g}" for v in row) for row in T]
    return "basis " + " ".join(map(str, basis)) + "\n" + "\n".join(rows) + "\n"


def solve_lp(lp: LinearProgram, tol: float = 1e-9, max_iter: int = 50_000, dump=None) -> LPResult:
    """Solve ``lp`` to an optimal vertex, or report infeasible / unbounded.

    Deterministic: Bland's smallest-index rule for both entering and leaving
    variables, so identical inputs always give bit-identical results.
    """
    n_orig = lp.c.size
    # split free variables into x+ - x-
    free = np.nonzero(~lp.nonneg)[0]
    A = lp.A
    c = lp.c
    if free.size:
        A = np.hstack([A, -A[:, free]])
        c = np.concatenate([c, -c[free]])
    m, n = A.shape
    b = lp.b.copy()
    rel = list(lp.relations)
    A = A.copy()
    for i in range(m):
        if b[i] < 0:
            A[i] *= -1.0
            b[i] = -b[i]
            rel[i] = {LE: GE, GE: LE, EQ: EQ}[rel[i]]

    n_slack = sum(r != EQ for r in rel)
    n_art = sum(r != LE for r in rel)
    width = n + n_slack + n_art
    T = np.zeros((m + 1, width + 1))
    T[:m, :n] = A
    T[:m, -1] = b
    basis = np.empty(m, dtype=np.int64)
    s = n
    a = n + n_slack
    art_rows = []
    for i, r in enumerate(rel):
        if r == LE:
            T[i, s] = 1.0
            basis[i] = s
            s += 1
        elif r == GE:
            T[i, s] = -1.0
            s += 1
            T[i, a] = 1.0
            basis[i] = a
            art_rows.append(i)
            a += 1
        else:
            T[i, a] = 1.0
            basis[i] = a
            art_rows.append(i)
            a += 1

    iterations = 0
    if n_art:
        # phase 1: maximize -sum(artificials)
        T[m, :] = 0.0
        for i in art_rows:
            T[m, :] -= T[i, :]
        T[m, n + n_slack : width] = 0.0
        status, it = kernels.simplex_iterate(T, basis, width, tol, max_iter)
        iterations += it
        if status == kernels.ITERATION_LIMIT:
            raise SolverError(f"phase 1 hit the iteration limit ({max_iter}); rows={m} cols={width}")
        if not np.isfinite(T).all():
            raise SolverError(_diagnose(T))
        infeas = -T[m, -1]
        if infeas > tol * max(1.0, float(np.abs(b).max(initial=0.0))) * 10:
            return LPResult("infeasible", iterations=iterations, diagnostics={"phase1_residual": float(infeas)})
        # pivot remaining artificials out of the basis
        keep = np.ones(m, dtype=bool)
        for i in range(m):
            if basis[i] >= n + n_slack:
                row = T[i, : n + n_slack]
                cand = np.nonzero(np.abs(row) > tol)[0]
                if cand.size == 0:
                    keep[i] = False  # redundant constraint
                    continue
                j = int(cand[0])
                T[i] /= T[i, j]
                for k in range(m + 1):
                    if k != i and T[k, j] != 0.0:
                        T[k] -= T[k, j] * T[i]
                basis[i] = j
        if not keep.all():
            T = np.vstack([T[:m][keep], T[m:]])
            basis = basis[keep]
            m = int(keep.sum())
        # drop artificial columns
        T = np.ascontiguousarray(np.hstack([T[:, : n + n_slack], T[:, -1:]]))
        width = n + n_slack

    # phase 2
    T[m, :] = 0.0
    T[m, :n] = -c
    for i in range(m):
        j = basis[i]
        if T[m, j] != 0.0:
            T[m] -= T[m, j] * T[i]
    if dump is not None:
        dump.write("# initial phase-2 tableau\n" + _tableau_text(T, basis))
    status, it = kernels.simplex_iterate(T, basis, width, tol, max_iter)
    iterations += it
    if status == kernels.ITERATION_LIMIT:
        raise SolverError(f"phase 2 hit the iteration limit ({max_iter}); rows={m} cols={width}")
    if not np.isfinite(T).all():
        raise SolverError(_diagnose(T))
    if status == kernels.UNBOUNDED:
        return LPResult("unbounded", iterations=iterations)
    if dump is not None:
        dump.write("# final tableau\n" + _tableau_text(T, basis))
    x = np.zeros(width)
    x[basis] = T[:m, -1]
    x = np.where(np.abs(x) < tol * 1e-3, 0.0, x)
    xs = x[:n]
    if free.size:
        xs = xs[:n_orig].copy()
        xs[free] -= x[n_orig : n_orig + free.size]
    else:
        xs = xs[:n_orig]
    obj = float(lp.c @ xs)
    return LPResult("optimal", xs, obj, iterations)


def _diagnose(T) -> str:
    finite = T[np.isfinite(T)]
    big = float(np.abs(finite).max(initial=0.0))
    nz = np.abs(finite[finite != 0.0])
    small = float(nz.min(initial=np.inf)) if nz.size else 0.0
    return f"non-finite tableau entries; |max|={big:.3e} |min nonzero|={small:.3e} ratio={big / small if small else np.inf:.3e}"
