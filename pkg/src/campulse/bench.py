"""Scan benchmarks: wall time and peak allocation across sequence lengths.

``sequential`` and ``parallel`` run the recurrence kernels; ``kernel`` runs
the direct causal convolution, whose O(L^2) growth is the reason the scan
form exists. Each timing uses prebuilt inputs, a warmup call, and the
minimum over repeats; the memory pass wraps build+run in tracemalloc.
"""

import time
import tracemalloc

import numpy as np

from . import kernels
from .backend import ACTIVE

MODES = ("sequential", "parallel", "kernel")


def _lti_draw(state_size, rng):
    abar = rng.uniform(0.1, 0.95, size=state_size)
    bbar = rng.standard_normal(state_size)
    c = rng.standard_normal(state_size)
    return abar, bbar, c, 0.5


def _inputs(mode, length, state_size, rng):
    if mode == "kernel":
        absv = rng.uniform(0.1, 0.95)
        kern = absv ** np.arange(length, dtype=np.float64)
        x = rng.standard_normal(length)
        return kern, x
    abar, bbar, c, d = _lti_draw(state_size, rng)
    x = rng.standard_normal(length)
    if mode == "sequential":
        # streamed form: state lives in registers, only x/y touch memory
        return abar, bbar, c, d, x
    # parallel works on the materialized per-timestep elements
    a = np.ascontiguousarray(np.broadcast_to(abar, (length, state_size)))
    bx = bbar[None, :] * x[:, None]
    return a, bx


def _runner(mode, table, chunk):
    if mode == "sequential":
        return lambda abar, bbar, c, d, x: table["scan_lti"](abar, bbar, c, d, x)
    if mode == "parallel":
        return lambda a, bx: table["scan_chunked"](a, bx, chunk)
    if mode == "kernel":
        return lambda k, x: table["causal_conv_naive"](k, x)
    raise ValueError(f"unknown mode {mode!r}")


def bench_scan(
    lengths,
    modes=("sequential", "parallel"),
    backends=None,
    state_size=16,
    chunk=64,
    repeats=3,
    seed=0,
):
    """Rows of (backend, mode, L, wall_time_ns, peak_bytes)."""
    backends = list(backends) if backends else [ACTIVE]
    rows = []
    for backend in backends:
        table = kernels.by_backend(backend)
        for mode in modes:
            run = _runner(mode, table, chunk)
            for length in lengths:
                rng = np.random.default_rng(seed)
                args = _inputs(mode, length, state_size, rng)
                run(*args)  # warmup / JIT
                best = None
                for _ in range(repeats):
                    t0 = time.perf_counter_ns()
                    run(*args)
                    dt = time.perf_counter_ns() - t0
                    best = dt if best is None else min(best, dt)
                tracemalloc.start()
                run(*_inputs(mode, length, state_size, np.random.default_rng(seed)))
                _, peak = tracemalloc.get_traced_memory()
                tracemalloc.stop()
                rows.append(
                    {
                        "backend": backend,
                        "mode": mode,
                        "L": length,
                        "wall_time_ns": best,
                        "peak_bytes": peak,
                    }
                )
    return rows


def loglog_slope(lengths, times_ns):
    """Least-squares slope of log(time) against log(L)."""
    return float(np.polyfit(np.log(lengths), np.log(times_ns), 1)[0])


def check_equivalence(length=4096, state_size=16, chunk=64, seed=0):
    """The timed routes must agree: streamed LTI readout vs tree scan."""
    rng = np.random.default_rng(seed)
    abar, bbar, c, d = _lti_draw(state_size, rng)
    x = rng.standard_normal(length)
    y_seq = kernels.scan_lti(abar, bbar, c, d, x)
    a = np.ascontiguousarray(np.broadcast_to(abar, (length, state_size)))
    h = kernels.scan_chunked(a, bbar[None, :] * x[:, None], chunk)
    y_par = h @ c + d * x
    return float(np.abs(y_seq - y_par).max())
