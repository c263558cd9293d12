"""State-space sequence engine.

One "channel" here is a scalar input stream driving N decaying hidden
states: continuous dynamics h' = A h + B x, y = C h, discretized by
zero-order hold with step Δ. Both the time-invariant form (with its
equivalent convolution kernel) and the input-dependent selective form
(per-timestep Δ_t, B_t, C_t) run through the same recurrence kernels as
the network's fused scan op, so there is a single hot path to trust.

All functions are pure; hidden state starts at zero for every call, which
is also how sub-sequence slicing in the network resets state.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels

ZOH_SERIES_EPS = 1e-12


class SsmError(ValueError):
    pass


@dataclass
class SsmParams:
    """Continuous-time parameters of one channel, diagonal evolution.

    a_diag must be strictly negative so every mode decays.
    """

    a_diag: np.ndarray  # (N,)
    b: np.ndarray  # (N,)
    c: np.ndarray  # (N,)
    d: float | None = None

    def __post_init__(self):
        self.a_diag = np.asarray(self.a_diag, dtype=np.float64)
        self.b = np.asarray(self.b, dtype=np.float64)
        self.c = np.asarray(self.c, dtype=np.float64)
        if not (self.a_diag.ndim == 1 and self.a_diag.shape == self.b.shape == self.c.shape):
            raise SsmError("a_diag, b, c must share shape (N,)")
        if np.any(self.a_diag >= 0):
            raise SsmError("evolution diagonal must be negative (decaying states)")


@dataclass
class DiscreteSsm:
    """Zero-order-hold discretization; (N,) when LTI, (L, N) when selective."""

    abar: np.ndarray
    bbar: np.ndarray

    @property
    def selective(self):
        return self.abar.ndim == 2


@dataclass
class SsmState:
    """Hidden vector carried across timesteps inside one sub-sequence."""

    h: np.ndarray

    @classmethod
    def zeros(cls, n, dtype=np.float64):
        return cls(np.zeros(n, dtype=dtype))


def discretize_zoh(params, delta, b_t=None):
    """Discretize per diagonal entry: abar = exp(ΔA), bbar = (exp(ΔA)-1)/A * B.

    ``delta`` is a positive scalar (LTI) or a positive (L,) array
    (selective). ``b_t`` (L, N) optionally replaces the constant input
    projection for the selective case. Entries with |ΔA| < 1e-12 use the
    series limit bbar = ΔB, which removes the 0/0 at Δ→0.
    """
    delta = np.asarray(delta, dtype=np.float64)
    if np.any(delta <= 0):
        raise SsmError("Δ must be positive")
    a = params.a_diag
    if delta.ndim == 0:
        s = delta * a  # (N,)
        delta_b = delta
        b = params.b if b_t is None else np.asarray(b_t, dtype=np.float64)
    elif delta.ndim == 1:
        s = delta[:, None] * a[None, :]  # (L, N)
        delta_b = delta[:, None]
        b = params.b[None, :] if b_t is None else np.asarray(b_t, dtype=np.float64)
    else:
        raise SsmError(f"Δ must be scalar or (L,), got shape {delta.shape}")
    abar = np.exp(s)
    # a < 0 strictly, so the division is safe; the series branch only
    # handles Δ small enough that expm1(s)/a would round to 0·Δ terms
    ratio = np.where(np.abs(s) < ZOH_SERIES_EPS, delta_b, np.expm1(s) / a)
    bbar = ratio * b
    return DiscreteSsm(abar=abar, bbar=bbar)


def _finite_or_raise(h, what):
    ok = np.isfinite(h).all(axis=tuple(range(1, h.ndim)))
    if not ok.all():
        t = int(np.argmin(ok))
        raise SsmError(f"{what}: non-finite state at timestep {t}")


def _prepare(disc, c, x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise SsmError(f"input sequence must be 1-D, got {x.shape}")
    length = x.shape[0]
    abar = disc.abar if disc.selective else np.broadcast_to(disc.abar, (length,) + disc.abar.shape)
    bbar = disc.bbar if disc.bbar.ndim == 2 else np.broadcast_to(disc.bbar, abar.shape)
    if abar.shape[0] != length or bbar.shape != abar.shape:
        raise SsmError("discretized parameter length does not match input")
    c = np.asarray(c, dtype=np.float64)
    bx = np.ascontiguousarray(bbar * x[:, None])
    return np.ascontiguousarray(abar), bx, c, x, length


def scan_sequential(disc, c, x, d=None):
    """Exact recurrence h_t = abar h_{t-1} + bbar x_t, y_t = c·h_t (+ d x_t)."""
    abar, bx, c, x, length = _prepare(disc, c, x)
    h = kernels.scan_fwd(abar, bx)
    _finite_or_raise(h, "scan_sequential")
    y = (h * (c[None, :] if c.ndim == 1 else c)).sum(axis=1)
    if d is not None:
        y = y + d * x
    return y


def scan_parallel(disc, c, x, d=None, chunk=64):
    """Tree-scan evaluation of the same recurrence; matches scan_sequential."""
    if np.asarray(x).shape[0] == 0:
        raise SsmError("scan_parallel: empty input")
    abar, bx, c, x, length = _prepare(disc, c, x)
    h = kernels.scan_chunked(abar, bx, int(chunk))
    _finite_or_raise(h, "scan_parallel")
    y = (h * (c[None, :] if c.ndim == 1 else c)).sum(axis=1)
    if d is not None:
        y = y + d * x
    return y


def ssm_kernel(disc, c, length):
    """Impulse-response kernel (c·bbar, c·abar·bbar, ..., c·abar^{L-1}·bbar)."""
    if disc.selective:
        raise SsmError("convolution kernel form requires time-invariant parameters")
    c = np.asarray(c, dtype=np.float64)
    powers = disc.abar[None, :] ** np.arange(length)[:, None]
    return powers @ (c * disc.bbar)


def apply_kernel(kern, x):
    """Causal convolution y = x * kern (direct O(L·K) evaluation)."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    kern = np.ascontiguousarray(kern, dtype=np.float64)
    return kernels.causal_conv_naive(kern, x)


@dataclass
class SelectiveProjections:
    """Input-dependent parameter maps for a D-channel feature sequence."""

    w_dt: np.ndarray  # (D, D)
    b_dt: np.ndarray  # (D,)
    w_b: np.ndarray  # (D, N)
    w_c: np.ndarray  # (D, N)


def selective_params(x, proj):
    """Per-timestep (Δ_t, B_t, C_t) from features x (L, D).

    Δ_t = softplus(x W_dt + b_dt) stays positive for any input; B_t and
    C_t are plain linear readouts shared across time.
    """
    x = np.asarray(x, dtype=np.float64)
    delta = np.logaddexp(0.0, x @ proj.w_dt + proj.b_dt)
    return delta, x @ proj.w_b, x @ proj.w_c


def softplus_inv(y):
    """Bias value that makes softplus(bias) == y."""
    return float(np.log(np.expm1(y)))


def combine(second, first):
    """Associative scan operator: apply ``first`` then ``second``."""
    a2, b2 = second
    a1, b1 = first
    return a2 * a1, a2 * b1 + b2
