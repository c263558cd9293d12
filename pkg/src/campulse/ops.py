"""Differentiable operations.

Exactly the op set the network and its losses need: dense linear algebra,
the conv/pool/norm stack of the frame stem, the time-axis FFT pair with the
complex channel mixer between them, structural ops (slice/concat/reshape/
explicit expansion), and the fused linear recurrence that backs the
selective scan.

Shape discipline: elementwise ops require identical shapes or a 0-d
operand; there is no silent broadcasting. Expansion is explicit through
``expand_dim``. The time axis is axis 1 in (batch, time, ...) layouts.
"""

import numpy as np
from scipy.special import expit

from . import kernels
from .autodiff import AutodiffError, Tensor, record


def as_tensor(x, dtype=None):
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=dtype))


def _cast_constant_scalar(s, ref):
    """0-d constants adopt the array operand's dtype so f32 graphs stay f32."""
    if s.ndim == 0 and ref.ndim != 0 and s.dtype != ref.dtype and s.node is None \
            and not s.requires_grad:
        return Tensor(s.data.astype(ref.dtype))
    return s


def _match(op, x, y):
    """Coerce operands and enforce same-shape-or-scalar."""
    x, y = as_tensor(x), as_tensor(y)
    if x.shape != y.shape and x.ndim != 0 and y.ndim != 0:
        raise AutodiffError(f"{op}: shape mismatch {x.shape} vs {y.shape}")
    x = _cast_constant_scalar(x, y)
    y = _cast_constant_scalar(y, x)
    return x, y


def _unscalar(g, operand):
    """Reduce a cotangent back to a 0-d operand's shape."""
    if operand.ndim == 0 and np.ndim(g) != 0:
        return np.sum(g)
    return g


# ---------------------------------------------------------------------------
# elementwise
# ---------------------------------------------------------------------------

def add(x, y):
    x, y = _match("add", x, y)
    out = x.data + y.data
    return record("add", (x, y), out, lambda g: (_unscalar(g, x), _unscalar(g, y)))


def sub(x, y):
    x, y = _match("sub", x, y)
    out = x.data - y.data
    return record("sub", (x, y), out, lambda g: (_unscalar(g, x), _unscalar(-g, y)))


def mul(x, y):
    x, y = _match("mul", x, y)
    out = x.data * y.data
    return record(
        "mul",
        (x, y),
        out,
        lambda g: (_unscalar(g * y.data, x), _unscalar(g * x.data, y)),
    )


def div(x, y):
    x, y = _match("div", x, y)
    out = x.data / y.data
    return record(
        "div",
        (x, y),
        out,
        lambda g: (
            _unscalar(g / y.data, x),
            _unscalar(-g * x.data / (y.data * y.data), y),
        ),
    )


def neg(x):
    x = as_tensor(x)
    return record("neg", (x,), -x.data, lambda g: (-g,))


def exp(x):
    x = as_tensor(x)
    out = np.exp(x.data)
    return record("exp", (x,), out, lambda g: (g * out,))


def log(x):
    x = as_tensor(x)
    out = np.log(x.data)
    return record("log", (x,), out, lambda g: (g / x.data,))


def sqrt(x):
    x = as_tensor(x)
    out = np.sqrt(x.data)
    return record("sqrt", (x,), out, lambda g: (g * 0.5 / out,))


def relu(x):
    x = as_tensor(x)
    out = np.maximum(x.data, 0)
    return record("relu", (x,), out, lambda g: (g * (x.data > 0),))


def sigmoid(x):
    x = as_tensor(x)
    out = expit(x.data)
    return record("sigmoid", (x,), out, lambda g: (g * out * (1.0 - out),))


def silu(x):
    x = as_tensor(x)
    s = expit(x.data)
    out = x.data * s
    return record("silu", (x,), out, lambda g: (g * (s + x.data * s * (1.0 - s)),))


def softplus(x):
    x = as_tensor(x)
    out = np.logaddexp(0.0, x.data)
    return record("softplus", (x,), out, lambda g: (g * expit(x.data),))


def _phi(s):
    """(exp(s)-1)/s with the removable singularity filled in."""
    flat = np.asarray(s).reshape(-1)
    out = np.ones_like(flat)
    nz = flat != 0
    out[nz] = np.expm1(flat[nz]) / flat[nz]
    return out.reshape(np.shape(s))


def _phi_prime(s):
    """d/ds of (exp(s)-1)/s; series below |s|=1e-3 avoids cancellation."""
    flat = np.asarray(s).reshape(-1)
    out = np.empty_like(flat)
    small = np.abs(flat) < 1e-3
    ss = flat[small]
    out[small] = 0.5 + ss / 3.0 + ss * ss / 8.0 + ss * ss * ss / 30.0
    sb = flat[~small]
    out[~small] = (np.exp(sb) * (sb - 1.0) + 1.0) / (sb * sb)
    return out.reshape(np.shape(s))


def expm1_over(x):
    """phi(x) = (exp(x)-1)/x, the zero-order-hold input factor."""
    x = as_tensor(x)
    out = _phi(x.data)
    return record("expm1_over", (x,), out, lambda g: (g * _phi_prime(x.data),))


# ---------------------------------------------------------------------------
# linear algebra
# ---------------------------------------------------------------------------

def matmul(x, w):
    """x (..., n, k) @ w (k, m); w must be 2-D."""
    x, w = as_tensor(x), as_tensor(w)
    if w.ndim != 2 or x.ndim < 2 or x.shape[-1] != w.shape[0]:
        raise AutodiffError(f"matmul: bad shapes {x.shape} @ {w.shape}")
    out = x.data @ w.data

    def vjp(g):
        gx = g @ w.data.T
        k = x.shape[-1]
        gw = x.data.reshape(-1, k).T @ g.reshape(-1, w.shape[1])
        return gx, gw

    return record("matmul", (x, w), out, vjp)


def bias_add(x, b):
    """Add a (C,) bias along the last axis."""
    x, b = as_tensor(x), as_tensor(b)
    if b.shape != (x.shape[-1],):
        raise AutodiffError(f"bias_add: bias {b.shape} vs input {x.shape}")
    out = x.data + b.data
    lead = tuple(range(x.ndim - 1))
    return record("bias_add", (x, b), out, lambda g: (g, g.sum(axis=lead)))


def linear(x, w, b=None):
    y = matmul(x, w)
    return y if b is None else bias_add(y, b)


# ---------------------------------------------------------------------------
# structural
# ---------------------------------------------------------------------------

def reshape(x, shape):
    x = as_tensor(x)
    out = x.data.reshape(shape)
    return record("reshape", (x,), out, lambda g: (g.reshape(x.shape),))


def transpose(x, axes):
    x = as_tensor(x)
    inverse = tuple(np.argsort(axes))
    out = np.transpose(x.data, axes)
    return record("transpose", (x,), out, lambda g: (np.transpose(g, inverse),))


def slice_time(x, start, stop, axis=1):
    x = as_tensor(x)
    idx = [slice(None)] * x.ndim
    idx[axis] = slice(start, stop)
    idx = tuple(idx)
    out = x.data[idx]

    def vjp(g):
        gx = np.zeros_like(x.data)
        gx[idx] = g
        return (gx,)

    return record("slice_time", (x,), out, vjp)


def concat_time(parts, axis=1):
    parts = [as_tensor(p) for p in parts]
    out = np.concatenate([p.data for p in parts], axis=axis)
    sizes = [p.shape[axis] for p in parts]
    bounds = np.cumsum([0] + sizes)

    def vjp(g):
        outs = []
        for i in range(len(parts)):
            idx = [slice(None)] * g.ndim
            idx[axis] = slice(bounds[i], bounds[i + 1])
            outs.append(g[tuple(idx)])
        return tuple(outs)

    return record("concat_time", parts, out, vjp)


def expand_dim(x, axis, size):
    """Insert a new axis of the given size by tiling (explicit broadcast)."""
    x = as_tensor(x)
    out = np.repeat(np.expand_dims(x.data, axis), size, axis=axis)
    return record("expand_dim", (x,), out, lambda g: (g.sum(axis=axis),))


def sum_axis(x, axis, keepdims=False):
    x = as_tensor(x)
    out = x.data.sum(axis=axis, keepdims=keepdims)

    def vjp(g):
        if not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape),)

    return record("sum_axis", (x,), out, vjp)


def sum_all(x):
    x = as_tensor(x)
    out = np.asarray(x.data.sum())
    return record("sum_all", (x,), out, lambda g: (np.broadcast_to(g, x.shape),))


def mean_all(x):
    x = as_tensor(x)
    out = np.asarray(x.data.mean())
    n = x.size
    return record("mean_all", (x,), out, lambda g: (np.broadcast_to(g / n, x.shape),))


# ---------------------------------------------------------------------------
# conv / pool / norm stack
# ---------------------------------------------------------------------------

def conv2d(x, w, b=None, stride=1, pad=0):
    """x (N, Cin, H, W) * w (Cout, Cin, kh, kw); per-tap matmul formulation."""
    x, w = as_tensor(x), as_tensor(w)
    n, cin, h, wd = x.shape
    cout, cin2, kh, kw = w.shape
    if cin != cin2:
        raise AutodiffError(f"conv2d: {cin} input channels vs kernel {cin2}")
    ho = (h + 2 * pad - kh) // stride + 1
    wo = (wd + 2 * pad - kw) // stride + 1
    if ho <= 0 or wo <= 0:
        raise AutodiffError(f"conv2d: empty output for input {x.shape}")
    xp = np.pad(x.data, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    y = np.zeros((n, cout, ho, wo), dtype=x.dtype)
    for i in range(kh):
        for j in range(kw):
            xs = xp[:, :, i : i + stride * ho : stride, j : j + stride * wo : stride]
            y += np.tensordot(w.data[:, :, i, j], xs, axes=([1], [1])).transpose(
                1, 0, 2, 3
            )

    parents = [x, w]
    if b is not None:
        b = as_tensor(b)
        if b.shape != (cout,):
            raise AutodiffError(f"conv2d: bias {b.shape} vs {cout} filters")
        y += b.data[None, :, None, None]
        parents.append(b)

    def vjp(g):
        gw = np.zeros_like(w.data)
        gxp = np.zeros_like(xp)
        for i in range(kh):
            for j in range(kw):
                sl = (
                    slice(None),
                    slice(None),
                    slice(i, i + stride * ho, stride),
                    slice(j, j + stride * wo, stride),
                )
                xs = xp[sl]
                gw[:, :, i, j] = np.tensordot(g, xs, axes=([0, 2, 3], [0, 2, 3]))
                gxp[sl] += np.tensordot(
                    w.data[:, :, i, j], g, axes=([0], [1])
                ).transpose(1, 0, 2, 3)
        gx = gxp[:, :, pad : pad + h, pad : pad + wd] if pad else gxp
        if b is not None:
            return gx, gw, g.sum(axis=(0, 2, 3))
        return gx, gw

    return record("conv2d", parents, y, vjp)


def maxpool2d(x, k=2):
    """Non-overlapping k x k max pooling; H and W must divide by k."""
    x = as_tensor(x)
    n, c, h, w = x.shape
    if h % k or w % k:
        raise AutodiffError(f"maxpool2d: {h}x{w} not divisible by {k}")
    ho, wo = h // k, w // k
    win = (
        x.data.reshape(n, c, ho, k, wo, k)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(n, c, ho, wo, k * k)
    )
    idx = win.argmax(axis=-1)
    out = np.take_along_axis(win, idx[..., None], axis=-1)[..., 0]

    def vjp(g):
        gwin = np.zeros_like(win)
        np.put_along_axis(gwin, idx[..., None], g[..., None], axis=-1)
        gx = (
            gwin.reshape(n, c, ho, wo, k, k)
            .transpose(0, 1, 2, 4, 3, 5)
            .reshape(n, c, h, w)
        )
        return (gx,)

    return record("maxpool2d", (x,), out, vjp)


def global_avgpool_spatial(x):
    """(N, C, H, W) -> (N, C) mean over the spatial grid."""
    x = as_tensor(x)
    n, c, h, w = x.shape
    out = x.data.mean(axis=(2, 3))

    def vjp(g):
        return (np.broadcast_to(g[:, :, None, None] / (h * w), x.shape),)

    return record("global_avgpool_spatial", (x,), out, vjp)


def l1_norm_spatial(x):
    """(N, C, H, W) -> (N, C) sum of absolute values over the grid."""
    x = as_tensor(x)
    out = np.abs(x.data).sum(axis=(2, 3))

    def vjp(g):
        return (np.sign(x.data) * g[:, :, None, None],)

    return record("l1_norm", (x,), out, vjp)


class BnState:
    """Running statistics for one batchnorm2d layer (not differentiated)."""

    def __init__(self, channels, dtype=np.float64):
        self.mean = np.zeros(channels, dtype=dtype)
        self.var = np.ones(channels, dtype=dtype)

    def copy(self):
        s = BnState(len(self.mean), dtype=self.mean.dtype)
        s.mean = self.mean.copy()
        s.var = self.var.copy()
        return s


def batchnorm2d(x, gamma, beta, state, train, momentum=0.1, eps=1e-5):
    """Per-channel normalization over (batch, space); frames act as batch.

    Train mode normalizes with batch statistics and updates ``state`` with
    the usual exponential moving average; eval mode is the affine map
    defined by the stored running statistics.
    """
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    n, c, h, w = x.shape
    if gamma.shape != (c,) or beta.shape != (c,):
        raise AutodiffError("batchnorm2d: gamma/beta must be (C,)")
    axes = (0, 2, 3)
    m = n * h * w
    if train:
        if n < 2:
            raise AutodiffError("batchnorm2d: train mode needs batch >= 2")
        mu = x.data.mean(axis=axes)
        var = x.data.var(axis=axes)
        unbiased = var * m / max(m - 1, 1)
        state.mean = (1 - momentum) * state.mean + momentum * mu.astype(
            state.mean.dtype
        )
        state.var = (1 - momentum) * state.var + momentum * unbiased.astype(
            state.var.dtype
        )
    else:
        mu = state.mean.astype(x.dtype)
        var = state.var.astype(x.dtype)
    ivar = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu[None, :, None, None]) * ivar[None, :, None, None]
    out = gamma.data[None, :, None, None] * xhat + beta.data[None, :, None, None]

    def vjp(g):
        ggamma = (g * xhat).sum(axis=axes)
        gbeta = g.sum(axis=axes)
        gxhat = g * gamma.data[None, :, None, None]
        if train:
            # statistics depend on x: standard batchnorm backward
            s1 = gxhat.sum(axis=axes)
            s2 = (gxhat * xhat).sum(axis=axes)
            gx = (
                gxhat - (s1[None, :, None, None] + xhat * s2[None, :, None, None]) / m
            ) * ivar[None, :, None, None]
        else:
            gx = gxhat * ivar[None, :, None, None]
        return gx, ggamma, gbeta

    return record("batchnorm2d", (x, gamma, beta), out, vjp)


def layernorm_channels(x, gamma, beta, eps=1e-5):
    """Normalize over the trailing channel axis of (..., C)."""
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    c = x.shape[-1]
    if gamma.shape != (c,) or beta.shape != (c,):
        raise AutodiffError("layernorm_channels: gamma/beta must be (C,)")
    mu = x.data.mean(axis=-1, keepdims=True)
    var = x.data.var(axis=-1, keepdims=True)
    ivar = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * ivar
    out = gamma.data * xhat + beta.data

    def vjp(g):
        lead = tuple(range(x.ndim - 1))
        ggamma = (g * xhat).sum(axis=lead)
        gbeta = g.sum(axis=lead)
        gxhat = g * gamma.data
        s1 = gxhat.mean(axis=-1, keepdims=True)
        s2 = (gxhat * xhat).mean(axis=-1, keepdims=True)
        gx = (gxhat - s1 - xhat * s2) * ivar
        return gx, ggamma, gbeta

    return record("layernorm_channels", (x, gamma, beta), out, vjp)


def depthwise_conv1d(x, w, b=None, causal=True):
    """Per-channel 1-D convolution along time: x (B, L, D), w (K, D).

    Causal form left-pads with zeros so y[t] sees x[t-K+1 .. t] only.
    """
    x, w = as_tensor(x), as_tensor(w)
    bsz, length, d = x.shape
    k, d2 = w.shape
    if d != d2:
        raise AutodiffError(f"depthwise_conv1d: {d} channels vs kernel {d2}")
    if not causal:
        raise AutodiffError("depthwise_conv1d: only the causal form is defined")
    xp = np.pad(x.data, ((0, 0), (k - 1, 0), (0, 0)))
    y = np.zeros_like(x.data)
    for j in range(k):
        y += w.data[j] * xp[:, j : j + length, :]
    parents = [x, w]
    if b is not None:
        b = as_tensor(b)
        if b.shape != (d,):
            raise AutodiffError("depthwise_conv1d: bias must be (D,)")
        y += b.data
        parents.append(b)

    def vjp(g):
        gw = np.empty_like(w.data)
        gxp = np.zeros_like(xp)
        for j in range(k):
            gw[j] = (g * xp[:, j : j + length, :]).sum(axis=(0, 1))
            gxp[:, j : j + length, :] += w.data[j] * g
        gx = gxp[:, k - 1 :, :]
        if b is not None:
            return gx, gw, g.sum(axis=(0, 1))
        return gx, gw

    return record("depthwise_conv1d", parents, y, vjp)


# ---------------------------------------------------------------------------
# time-axis FFT pair and complex channel mixing
# ---------------------------------------------------------------------------

def _rfft_bin_weights(nfft, nbins, dtype):
    """Half-spectrum duplication weights: shared bins count twice."""
    wgt = np.full(nbins, 0.5, dtype=dtype)
    wgt[0] = 1.0
    if nfft % 2 == 0:
        wgt[-1] = 1.0
    return wgt


def rfft_time(x, nfft=None):
    """Real FFT over axis 1 of (B, T, C) -> (B, F, C, 2) with F = nfft//2+1.

    The trailing axis packs (real, imag). ``nfft`` > T zero-pads the time
    axis before the transform.
    """
    x = as_tensor(x)
    if x.ndim != 3:
        raise AutodiffError(f"rfft_time: expected (B, T, C), got {x.shape}")
    t = x.shape[1]
    n = t if nfft is None else int(nfft)
    if n < t:
        raise AutodiffError("rfft_time: nfft shorter than the signal")
    spec = np.fft.rfft(x.data, n=n, axis=1)
    out = np.stack([spec.real, spec.imag], axis=-1).astype(x.dtype)
    nbins = out.shape[1]

    def vjp(g):
        gc = g[..., 0] + 1j * g[..., 1]
        # imaginary parts of the purely-real bins have zero Jacobian rows
        gc[:, 0, :] = gc[:, 0, :].real
        if n % 2 == 0:
            gc[:, -1, :] = gc[:, -1, :].real
        wgt = _rfft_bin_weights(n, nbins, np.float64)
        gx_full = n * np.fft.irfft(gc * wgt[None, :, None], n=n, axis=1)
        return (gx_full[:, :t, :].astype(x.dtype),)

    return record("rfft_time", (x,), out, vjp)


def irfft_time(x, n):
    """Inverse of rfft_time: (B, F, C, 2) -> (B, n, C), exactly real.

    Enforces the conjugate-symmetric convention by ignoring the imaginary
    components of the DC (and even-n Nyquist) bins.
    """
    x = as_tensor(x)
    if x.ndim != 4 or x.shape[-1] != 2:
        raise AutodiffError(f"irfft_time: expected (B, F, C, 2), got {x.shape}")
    nbins = x.shape[1]
    if nbins != n // 2 + 1:
        raise AutodiffError(f"irfft_time: {nbins} bins inconsistent with n={n}")
    spec = x.data[..., 0] + 1j * x.data[..., 1]
    spec[:, 0, :] = spec[:, 0, :].real
    if n % 2 == 0:
        spec[:, -1, :] = spec[:, -1, :].real
    out = np.fft.irfft(spec, n=n, axis=1).astype(x.dtype)

    def vjp(g):
        gs = np.fft.rfft(g, n=n, axis=1)
        # doubled bins expose a 2/n sensitivity, DC/Nyquist only 1/n
        wgt = np.full(nbins, 2.0 / n)
        wgt[0] = 1.0 / n
        if n % 2 == 0:
            wgt[-1] = 1.0 / n
        gre = gs.real * wgt[None, :, None]
        gim = gs.imag * wgt[None, :, None]
        gim[:, 0, :] = 0.0
        if n % 2 == 0:
            gim[:, -1, :] = 0.0
        return (np.stack([gre, gim], axis=-1).astype(x.dtype),)

    return record("irfft_time", (x,), out, vjp)


def complex_linear(h, w_re, w_im, b_re=None, b_im=None):
    """Shared-across-bins complex channel mixing on (B, F, C, 2).

    out_re = h_re W_re - h_im W_im + b_re
    out_im = h_re W_im + h_im W_re + b_im
    """
    h, w_re, w_im = as_tensor(h), as_tensor(w_re), as_tensor(w_im)
    if h.ndim != 4 or h.shape[-1] != 2:
        raise AutodiffError(f"complex_linear: expected (B, F, C, 2), got {h.shape}")
    c = h.shape[2]
    if w_re.shape != (c, c) or w_im.shape != (c, c):
        raise AutodiffError("complex_linear: weights must be (C, C)")
    hre, him = h.data[..., 0], h.data[..., 1]
    ore = hre @ w_re.data - him @ w_im.data
    oim = hre @ w_im.data + him @ w_re.data
    parents = [h, w_re, w_im]
    if b_re is not None:
        b_re, b_im = as_tensor(b_re), as_tensor(b_im)
        if b_re.shape != (c,) or b_im.shape != (c,):
            raise AutodiffError("complex_linear: biases must be (C,)")
        ore = ore + b_re.data
        oim = oim + b_im.data
        parents += [b_re, b_im]
    out = np.stack([ore, oim], axis=-1)

    def vjp(g):
        gre, gim = g[..., 0], g[..., 1]
        ghre = gre @ w_re.data.T + gim @ w_im.data.T
        ghim = -gre @ w_im.data.T + gim @ w_re.data.T
        hre2 = hre.reshape(-1, c)
        him2 = him.reshape(-1, c)
        gre2 = gre.reshape(-1, c)
        gim2 = gim.reshape(-1, c)
        gw_re = hre2.T @ gre2 + him2.T @ gim2
        gw_im = -him2.T @ gre2 + hre2.T @ gim2
        outs = [np.stack([ghre, ghim], axis=-1), gw_re, gw_im]
        if b_re is not None:
            lead = (0, 1)
            outs += [gre.sum(axis=lead), gim.sum(axis=lead)]
        return tuple(outs)

    return record("complex_linear", parents, out, vjp)


# ---------------------------------------------------------------------------
# fused linear recurrence (the selective-scan hot path)
# ---------------------------------------------------------------------------

def linear_recurrence(a, b):
    """h[t] = a[t] * h[t-1] + b[t] along axis 1, h[-1] = 0.

    Inputs share any shape (S, L, ...); the recurrence runs independently
    over every non-time coordinate. Forward and backward both go through
    the compiled scan kernels.
    """
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape or a.ndim < 2:
        raise AutodiffError(f"linear_recurrence: bad shapes {a.shape}, {b.shape}")
    shape = a.shape
    length = shape[1]

    def to_lm(arr):
        return np.ascontiguousarray(
            np.moveaxis(arr, 1, 0).reshape(length, -1)
        )

    def from_lm(arr):
        return np.moveaxis(arr.reshape((length,) + shape[:1] + shape[2:]), 0, 1)

    a_lm = to_lm(a.data)
    b_lm = to_lm(b.data)
    h_lm = kernels.scan_fwd(a_lm, b_lm)
    out = from_lm(h_lm)

    def vjp(g):
        g_lm = to_lm(g)
        gacc = kernels.scan_rev(a_lm, g_lm)
        h_prev = np.vstack([np.zeros_like(h_lm[:1]), h_lm[:-1]])
        ga = gacc * h_prev
        return from_lm(ga), from_lm(gacc)

    return record("linear_recurrence", (a, b), out, vjp)


# ---------------------------------------------------------------------------
# operator sugar + kind dispatch
# ---------------------------------------------------------------------------

Tensor.__add__ = lambda self, other: add(self, other)
Tensor.__radd__ = lambda self, other: add(other, self)
Tensor.__sub__ = lambda self, other: sub(self, other)
Tensor.__rsub__ = lambda self, other: sub(other, self)
Tensor.__mul__ = lambda self, other: mul(self, other)
Tensor.__rmul__ = lambda self, other: mul(other, self)
Tensor.__truediv__ = lambda self, other: div(self, other)
Tensor.__rtruediv__ = lambda self, other: div(other, self)
Tensor.__neg__ = lambda self: neg(self)
Tensor.__matmul__ = lambda self, other: matmul(self, other)

OP_TABLE = {
    "matmul": matmul,
    "conv2d": conv2d,
    "depthwise_conv1d": depthwise_conv1d,
    "batchnorm2d": batchnorm2d,
    "relu": relu,
    "silu": silu,
    "sigmoid": sigmoid,
    "softplus": softplus,
    "maxpool2d": maxpool2d,
    "global_avgpool_spatial": global_avgpool_spatial,
    "add": add,
    "mul": mul,
    "sub": sub,
    "div": div,
    "exp": exp,
    "log": log,
    "sqrt": sqrt,
    "expm1_over": expm1_over,
    "rfft_time": rfft_time,
    "irfft_time": irfft_time,
    "complex_linear": complex_linear,
    "layernorm_channels": layernorm_channels,
    "slice_time": slice_time,
    "concat_time": concat_time,
    "l1_norm": l1_norm_spatial,
    "bias_add": bias_add,
    "reshape": reshape,
    "transpose": transpose,
    "expand_dim": expand_dim,
    "sum_axis": sum_axis,
    "sum_all": sum_all,
    "mean_all": mean_all,
    "linear_recurrence": linear_recurrence,
}


def forward_op(kind, *inputs, **attrs):
    """Dispatch an operation by kind name (the enumerable op surface)."""
    if kind not in OP_TABLE:
        raise AutodiffError(f"unknown op kind {kind!r}")
    return OP_TABLE[kind](*inputs, **attrs)
