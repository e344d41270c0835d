"""Hot loops: honeypot first-hit scan and the simplex pivot loop.

Each kernel has a numba version and a numpy version with identical results.
``USE_NUMBA`` picks one at import; see :mod:`honeypot_bsg._jit`.
"""

import numpy as np

from ._jit import HAVE_NUMBA, njit

USE_NUMBA = HAVE_NUMBA

# simplex status codes
OPTIMAL = 0
UNBOUNDED = 1
ITERATION_LIMIT = 2


# -- first hit -------------------------------------------------------------


@njit(cache=True, nogil=True)
def _first_hits_jit(members, path_cidx, path_len, n_cand):
    n_d = members.shape[0]
    n_p = path_cidx.shape[0]
    out = np.full((n_d, n_p), -1, dtype=np.int32)
    mark = np.zeros(n_cand + 1, dtype=np.bool_)
    for d in range(n_d):
        for b in range(members.shape[1]):
            c = members[d, b]
            if c >= 0:
                mark[c] = True
        for p in range(n_p):
            for j in range(path_len[p]):
                c = path_cidx[p, j]
                if c >= 0 and mark[c]:
                    out[d, p] = j
                    break
        for b in range(members.shape[1]):
            c = members[d, b]
            if c >= 0:
                mark[c] = False
    return out


def _first_hits_np(members, path_cidx, path_len, n_cand):
    n_d = members.shape[0]
    n_p = path_cidx.shape[0]
    member = np.zeros((n_d, n_cand + 1), dtype=bool)
    rows = np.repeat(np.arange(n_d), members.shape[1])
    cols = members.ravel()
    keep = cols >= 0
    member[rows[keep], cols[keep]] = True
    out = np.full((n_d, n_p), -1, dtype=np.int32)
    for p in range(n_p):
        length = int(path_len[p])
        if length == 0:
            continue
        idx = path_cidx[p, :length].copy()
        idx[idx < 0] = n_cand  # sentinel column, always False
        hit = member[:, idx]
        any_hit = hit.any(axis=1)
        first = hit.argmax(axis=1)
        out[any_hit, p] = first[any_hit]
    return out


def first_hits(members, path_cidx, path_len, n_cand):
    """Position of the first honeypot on each path under each defender strategy.

    ``members``: (n_strategies, B) candidate indices, padded with -1.
    ``path_cidx``: (n_paths, L) candidate index of each non-entry path node
    (-1 if that node is not a candidate). Returns (n_strategies, n_paths)
    positions, -1 where the path is never hit.
    """
    members = np.ascontiguousarray(members, dtype=np.int32)
    path_cidx = np.ascontiguousarray(path_cidx, dtype=np.int32)
    path_len = np.ascontiguousarray(path_len, dtype=np.int32)
    if members.shape[1] == 0 or path_cidx.shape[0] == 0:
        return np.full((members.shape[0], path_cidx.shape[0]), -1, dtype=np.int32)
    if USE_NUMBA:
        return _first_hits_jit(members, path_cidx, path_len, int(n_cand))
    return _first_hits_np(members, path_cidx, path_len, int(n_cand))


# -- simplex ---------------------------------------------------------------
#
# Tableau layout: rows 0..m-1 are constraints, row m is the objective row
# holding reduced costs of a maximisation (entering candidates are negative
# entries). Last column is the right-hand side. ``basis[i]`` is the column
# basic in row i. Only columns < n_active may enter. Bland's rule throughout.


@njit(cache=True, nogil=True)
def _simplex_jit(T, basis, n_active, tol, max_iter):
    m = T.shape[0] - 1
    rhs = T.shape[1] - 1
    it = 0
    while True:
        enter = -1
        for j in range(n_active):
            if T[m, j] < -tol:
                enter = j
                break
        if enter < 0:
            return OPTIMAL, it
        if it >= max_iter:
            return ITERATION_LIMIT, it
        leave = -1
        best = 0.0
        for i in range(m):
            a = T[i, enter]
            if a > tol:
                ratio = T[i, rhs] / a
                if leave < 0 or ratio < best - tol:
                    best = ratio
                    leave = i
                elif ratio <= best + tol and basis[i] < basis[leave]:
                    leave = i
        if leave < 0:
            return UNBOUNDED, it
        piv = T[leave, enter]
        for j in range(T.shape[1]):
            T[leave, j] /= piv
        for i in range(m + 1):
            if i != leave:
                f = T[i, enter]
                if f != 0.0:
                    for j in range(T.shape[1]):
                        T[i, j] -= f * T[leave, j]
        # snap round-off below zero so degenerate rows keep Bland's guarantee
        for i in range(m):
            if -tol < T[i, rhs] < 0.0:
                T[i, rhs] = 0.0
        basis[leave] = enter
        it += 1


def _simplex_np(T, basis, n_active, tol, max_iter):
    m = T.shape[0] - 1
    it = 0
    while True:
        neg = np.nonzero(T[m, :n_active] < -tol)[0]
        if neg.size == 0:
            return OPTIMAL, it
        if it >= max_iter:
            return ITERATION_LIMIT, it
        enter = int(neg[0])
        col = T[:m, enter]
        leave = -1
        best = 0.0
        for i in np.nonzero(col > tol)[0]:
            ratio = T[i, -1] / col[i]
            if leave < 0 or ratio < best - tol:
                best = ratio
                leave = int(i)
            elif ratio <= best + tol and basis[i] < basis[leave]:
                leave = int(i)
        if leave < 0:
            return UNBOUNDED, it
        T[leave] /= T[leave, enter]
        f = T[:, enter].copy()
        f[leave] = 0.0
        nz = np.nonzero(f)[0]
        T[nz] -= np.outer(f[nz], T[leave])
        drift = (T[:m, -1] < 0.0) & (T[:m, -1] > -tol)
        T[:m, -1][drift] = 0.0
        basis[leave] = enter
        it += 1


def simplex_iterate(T, basis, n_active, tol=1e-9, max_iter=50_000):
    """Run Bland-rule primal simplex in place. Returns (status, iterations)."""
    if USE_NUMBA:
        status, it = _simplex_jit(T, basis, int(n_active), float(tol), int(max_iter))
    else:
        status, it = _simplex_np(T, basis, int(n_active), float(tol), int(max_iter))
    return int(status), int(it)
