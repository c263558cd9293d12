"""Hot recurrence kernels.

Everything here operates on plain ndarrays shaped (L, M): L timesteps of M
independent scalar recurrences h[t] = a[t] * h[t-1] + b[t], h[-1] = 0.
Each kernel has a numba ``@njit`` build and a pure-numpy build;
:mod:`campulse.backend` decides which one the public names point at.

The chunked scan realizes the associative operator
(a2, b2) o (a1, b1) = (a2*a1, a2*b1 + b2) as a Blelloch up-sweep /
down-sweep tree over per-chunk aggregates. Reduction order is fixed, so
results do not depend on how work is scheduled.
"""

import numpy as np

from .backend import HAVE_NUMBA


# ---------------------------------------------------------------------------
# pure-numpy builds
# ---------------------------------------------------------------------------

def scan_fwd_numpy(a, b):
    """Inclusive recurrence: h[t] = a[t]*h[t-1] + b[t]."""
    L, M = a.shape
    h = np.empty_like(b)
    prev = np.zeros(M, dtype=b.dtype)
    for t in range(L):
        prev = a[t] * prev + b[t]
        h[t] = prev
    return h


def scan_rev_numpy(a, g):
    """Adjoint accumulation: r[t] = g[t] + a[t+1]*r[t+1], r[L-1] = g[L-1]."""
    L, M = a.shape
    r = np.empty_like(g)
    nxt = np.zeros(M, dtype=g.dtype)
    for t in range(L - 1, -1, -1):
        if t == L - 1:
            nxt = g[t].copy()
        else:
            nxt = g[t] + a[t + 1] * nxt
        r[t] = nxt
    return r


def scan_chunked_numpy(a, b, chunk):
    """Two-pass tree scan over per-chunk aggregates; equals scan_fwd."""
    L, M = a.shape
    n_chunks = (L + chunk - 1) // chunk

    # pass 1: fold each chunk into its aggregate (A_c, B_c)
    agg_a = np.ones((n_chunks, M), dtype=a.dtype)
    agg_b = np.zeros((n_chunks, M), dtype=b.dtype)
    for c in range(n_chunks):
        aa = np.ones(M, dtype=a.dtype)
        bb = np.zeros(M, dtype=b.dtype)
        for t in range(c * chunk, min(L, (c + 1) * chunk)):
            bb = a[t] * bb + b[t]
            aa = a[t] * aa
        agg_a[c] = aa
        agg_b[c] = bb

    # pass 2: Blelloch exclusive scan of the aggregates (identity = (1, 0))
    p = 1
    while p < n_chunks:
        p *= 2
    ta = np.ones((p, M), dtype=a.dtype)
    tb = np.zeros((p, M), dtype=b.dtype)
    ta[:n_chunks] = agg_a
    tb[:n_chunks] = agg_b
    d = 1
    while d < p:  # up-sweep
        for i in range(2 * d - 1, p, 2 * d):
            l = i - d
            tb[i] = ta[i] * tb[l] + tb[i]
            ta[i] = ta[i] * ta[l]
        d *= 2
    ta[p - 1] = 1.0
    tb[p - 1] = 0.0
    d = p // 2
    while d >= 1:  # down-sweep
        for i in range(2 * d - 1, p, 2 * d):
            l = i - d
            tmp_a = ta[l].copy()
            tmp_b = tb[l].copy()
            ta[l] = ta[i]
            tb[l] = tb[i]
            tb[i] = tmp_a * tb[i] + tmp_b
            ta[i] = tmp_a * ta[i]
        d //= 2

    # pass 3: replay each chunk from its exclusive prefix (h[-1] = 0)
    h = np.empty_like(b)
    for c in range(n_chunks):
        prev = tb[c].copy()
        for t in range(c * chunk, min(L, (c + 1) * chunk)):
            prev = a[t] * prev + b[t]
            h[t] = prev
    return h


def causal_conv_naive_numpy(kern, x):
    """Direct causal convolution y[t] = sum_tau kern[tau]*x[t-tau]."""
    L = x.shape[0]
    K = kern.shape[0]
    y = np.empty_like(x)
    for t in range(L):
        k = min(t + 1, K)
        y[t] = kern[:k] @ x[t::-1][:k]
    return y


def scan_lti_numpy(abar, bbar, c, d, x):
    """Streamed LTI readout: y[t] = c·h[t] + d*x[t] with h in working memory.

    Only x is read and y written per step, so cost per element is flat in L;
    this is the form the linear-time benchmark measures.
    """
    L = x.shape[0]
    y = np.empty_like(x)
    h = np.zeros_like(abar)
    for t in range(L):
        h = abar * h + bbar * x[t]
        y[t] = c @ h + d * x[t]
    return y


# ---------------------------------------------------------------------------
# numba builds (same algorithms, explicit loops)
# ---------------------------------------------------------------------------

if HAVE_NUMBA:
    from numba import njit

    @njit(cache=True)
    def scan_fwd_numba(a, b):
        L, M = a.shape
        h = np.empty_like(b)
        prev = np.zeros(M, dtype=b.dtype)
        for t in range(L):
            for m in range(M):
                prev[m] = a[t, m] * prev[m] + b[t, m]
                h[t, m] = prev[m]
        return h

    @njit(cache=True)
    def scan_rev_numba(a, g):
        L, M = a.shape
        r = np.empty_like(g)
        for m in range(M):
            r[L - 1, m] = g[L - 1, m]
        for t in range(L - 2, -1, -1):
            for m in range(M):
                r[t, m] = g[t, m] + a[t + 1, m] * r[t + 1, m]
        return r

    @njit(cache=True)
    def scan_chunked_numba(a, b, chunk):
        L, M = a.shape
        n_chunks = (L + chunk - 1) // chunk

        agg_a = np.ones((n_chunks, M), dtype=a.dtype)
        agg_b = np.zeros((n_chunks, M), dtype=b.dtype)
        for c in range(n_chunks):
            hi = min(L, (c + 1) * chunk)
            for t in range(c * chunk, hi):
                for m in range(M):
                    agg_b[c, m] = a[t, m] * agg_b[c, m] + b[t, m]
                    agg_a[c, m] = a[t, m] * agg_a[c, m]

        p = 1
        while p < n_chunks:
            p *= 2
        ta = np.ones((p, M), dtype=a.dtype)
        tb = np.zeros((p, M), dtype=b.dtype)
        ta[:n_chunks] = agg_a
        tb[:n_chunks] = agg_b
        d = 1
        while d < p:
            for i in range(2 * d - 1, p, 2 * d):
                l = i - d
                for m in range(M):
                    tb[i, m] = ta[i, m] * tb[l, m] + tb[i, m]
                    ta[i, m] = ta[i, m] * ta[l, m]
            d *= 2
        for m in range(M):
            ta[p - 1, m] = 1.0
            tb[p - 1, m] = 0.0
        d = p // 2
        while d >= 1:
            for i in range(2 * d - 1, p, 2 * d):
                l = i - d
                for m in range(M):
                    tmp_a = ta[l, m]
                    tmp_b = tb[l, m]
                    ta[l, m] = ta[i, m]
                    tb[l, m] = tb[i, m]
                    tb[i, m] = tmp_a * tb[i, m] + tmp_b
                    ta[i, m] = tmp_a * ta[i, m]
            d //= 2

        h = np.empty_like(b)
        prev = np.empty(M, dtype=b.dtype)
        for c in range(n_chunks):
            for m in range(M):
                prev[m] = tb[c, m]
            hi = min(L, (c + 1) * chunk)
            for t in range(c * chunk, hi):
                for m in range(M):
                    prev[m] = a[t, m] * prev[m] + b[t, m]
                    h[t, m] = prev[m]
        return h

    @njit(cache=True)
    def causal_conv_naive_numba(kern, x):
        L = x.shape[0]
        K = kern.shape[0]
        y = np.zeros_like(x)
        for t in range(L):
            k = min(t + 1, K)
            acc = 0.0
            for tau in range(k):
                acc += kern[tau] * x[t - tau]
            y[t] = acc
        return y

    @njit(cache=True)
    def scan_lti_numba(abar, bbar, c, d, x):
        L = x.shape[0]
        N = abar.shape[0]
        y = np.empty_like(x)
        h = np.zeros(N, dtype=x.dtype)
        for t in range(L):
            xt = x[t]
            acc = 0.0
            for n in range(N):
                h[n] = abar[n] * h[n] + bbar[n] * xt
                acc += c[n] * h[n]
            y[t] = acc + d * xt
        return y

    scan_fwd = scan_fwd_numba
    scan_rev = scan_rev_numba
    scan_chunked = scan_chunked_numba
    causal_conv_naive = causal_conv_naive_numba
    scan_lti = scan_lti_numba
else:
    scan_fwd = scan_fwd_numpy
    scan_rev = scan_rev_numpy
    scan_chunked = scan_chunked_numpy
    causal_conv_naive = causal_conv_naive_numpy
    scan_lti = scan_lti_numpy


def by_backend(name):
    """Resolve a kernel by explicit backend name ('numba' or 'numpy')."""
    table = {
        "numpy": {
            "scan_fwd": scan_fwd_numpy,
            "scan_rev": scan_rev_numpy,
            "scan_chunked": scan_chunked_numpy,
            "causal_conv_naive": causal_conv_naive_numpy,
            "scan_lti": scan_lti_numpy,
        }
    }
    if HAVE_NUMBA:
        table["numba"] = {
            "scan_fwd": scan_fwd_numba,
            "scan_rev": scan_rev_numba,
            "scan_chunked": scan_chunked_numba,
            "causal_conv_naive": causal_conv_naive_numba,
            "scan_lti": scan_lti_numba,
        }
    if name not in table:
        raise KeyError(f"backend {name!r} not available")
    return table[name]


def warmup():
    """Trigger JIT specialization so timed runs exclude compilation."""
    for dt in (np.float64, np.float32):
        a = np.full((4, 3), 0.5, dtype=dt)
        b = np.ones((4, 3), dtype=dt)
        scan_fwd(a, b)
        scan_rev(a, b)
        scan_chunked(a, b, 2)
        causal_conv_naive(np.ones(4, dtype=dt), np.ones(4, dtype=dt))
        scan_lti(a[0], b[0], b[0], 0.5, np.ones(4, dtype=dt))
