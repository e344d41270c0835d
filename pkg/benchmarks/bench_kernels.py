"""Compare the numba kernels with the pure-numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat N] [--end-to-end]

Kernel timings call both implementations in one process. ``--end-to-end``
also times a full case-study simulation in two subprocesses, one with
HONEYPOT_BSG_NO_NUMBA=1.
"""

import argparse
import os
import subprocess
import sys
import tempfile
import time

import numpy as np

from honeypot_bsg import kernels
from honeypot_bsg._jit import HAVE_NUMBA
from honeypot_bsg.equilibrium import _profile_lp
from honeypot_bsg.config import bundled, load_scenario
from honeypot_bsg.sim import averaged_game, build_context, initial_state


def best_of(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def first_hit_inputs(seed=0, n_d=5000, n_p=200, n_cand=40, budget=4, length=12):
    rng = np.random.default_rng(seed)
    members = np.stack([rng.choice(n_cand, size=budget, replace=False) for _ in range(n_d)]).astype(np.int32)
    cidx = rng.integers(-1, n_cand, size=(n_p, length)).astype(np.int32)
    plen = rng.integers(1, length + 1, size=n_p).astype(np.int32)
    return members, cidx, plen, n_cand


def tableau_inputs():
    """Phase-2 style tableaux from the profile LPs of a generated instance."""
    cfg = load_scenario(bundled("scenarios", "scenario5_high_high_t3_t1"))
    ctx = build_context(cfg)
    tensor, _ = averaged_game(ctx, initial_state(ctx).beliefs)
    out = []
    for k in range(min(20, int(np.prod(tensor.profile_shape)))):
        profile = tuple(int(v) for v in np.unravel_index(k, tensor.profile_shape))
        lp, _ = _profile_lp(tensor, profile)
        # deviation rows <= 1 plus sum(x) <= 1: slacks give a feasible starting basis
        A = lp.A[1:]
        m, n = A.shape
        T = np.zeros((m + 2, n + m + 2))
        T[:m, :n] = A
        T[:m, n : n + m] = np.eye(m)
        T[:m, -1] = 1.0
        T[m, :n] = 1.0
        T[m, n + m] = 1.0
        T[m, -1] = 1.0
        T[m + 1, :n] = -lp.c
        basis = np.arange(n, n + m + 1, dtype=np.int64)
        out.append((T[: m + 2], basis, n + m + 1))
    return out


def run_kernels(repeat):
    rows = []
    args = first_hit_inputs()
    ref = kernels._first_hits_np(*args)
    if HAVE_NUMBA:
        kernels._first_hits_jit(*args)  # compile
        assert (kernels._first_hits_jit(*args) == ref).all()
        rows.append(("first_hits", best_of(lambda: kernels._first_hits_jit(*args), repeat), best_of(lambda: kernels._first_hits_np(*args), repeat)))
    tabs = tableau_inputs()

    def simplex(fn):
        for T, basis, n_active in tabs:
            fn(T.copy(), basis.copy(), n_active, 1e-9, 50_000)

    if HAVE_NUMBA:
        simplex(kernels._simplex_jit)
        rows.append(("simplex", best_of(lambda: simplex(kernels._simplex_jit), repeat), best_of(lambda: simplex(kernels._simplex_np), repeat)))
    return rows


def run_end_to_end():
    out = {}
    for label, flag in (("numba", "0"), ("numpy", "1")):
        env = dict(os.environ, HONEYPOT_BSG_NO_NUMBA=flag)
        with tempfile.TemporaryDirectory() as d:
            t = time.perf_counter()
            subprocess.run(
                [sys.executable, "-m", "honeypot_bsg", "simulate", "--config", "scenario5_high_high_t3_t1", "--out", d],
                env=env,
                check=True,
                capture_output=True,
            )
            out[label] = time.perf_counter() - t
    return out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--end-to-end", action="store_true")
    args = ap.parse_args()
    if not HAVE_NUMBA:
        print("numba unavailable or disabled; nothing to compare")
    for name, t_jit, t_np in run_kernels(args.repeat):
        print(f"{name:12s} numba {t_jit * 1e3:9.3f} ms   numpy {t_np * 1e3:9.3f} ms   speedup {t_np / t_jit:6.1f}x")
    if args.end_to_end:
        res = run_end_to_end()
        print(f"simulate     numba {res['numba']:9.3f} s    numpy {res['numpy']:9.3f} s  (wall, includes startup)")


if __name__ == "__main__":
    main()
