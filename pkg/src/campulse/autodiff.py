"""Reverse-mode autodiff over dense numpy arrays.

A :class:`Tensor` wraps an f32/f64 ndarray. Operations (defined in
:mod:`campulse.ops`) record a :class:`TapeNode` on their output whenever an
input requires gradients; :func:`backward` replays the recorded graph in
reverse topological order and returns d(loss)/d(leaf) for every
requires-grad leaf. The graph is straight-line: one forward pass, one
backward pass, then the tape is released.

Numerics contract: forward ops on finite inputs must produce finite
outputs; a NaN/Inf output raises :class:`NonFiniteError` (disable via
``FINITE_CHECKS`` for timed runs).
"""

import numpy as np

FINITE_CHECKS = True

_ALLOWED_DTYPES = (np.dtype(np.float32), np.dtype(np.float64))


class AutodiffError(Exception):
    pass


class NonFiniteError(AutodiffError):
    """A forward op produced NaN/Inf."""


class TapeNode:
    """One recorded op: parent tensors plus the vector-Jacobian closure."""

    __slots__ = ("op", "parents", "vjp")

    def __init__(self, op, parents, vjp):
        self.op = op
        self.parents = parents
        self.vjp = vjp


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "node")

    def __init__(self, data, requires_grad=False, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype not in _ALLOWED_DTYPES:
            arr = arr.astype(np.float64)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self.node = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def item(self):
        return float(self.data)

    def detach(self):
        return Tensor(self.data, requires_grad=False)

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}{flag})"

    # arithmetic dunders are attached by campulse.ops at import time


def record(op, parents, out_data, vjp):
    """Wrap a forward result; attach a tape node if any parent needs grads."""
    if FINITE_CHECKS and not np.all(np.isfinite(out_data)):
        raise NonFiniteError(f"{op}: non-finite values in output")
    out = Tensor(out_data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out.node = TapeNode(op, tuple(parents), vjp)
    return out


def _toposort(root):
    """Iterative post-order over tensors that carry tape nodes."""
    order = []
    seen = set()
    stack = [(root, False)]
    while stack:
        t, expanded = stack.pop()
        if expanded:
            order.append(t)
            continue
        if id(t) in seen or t.node is None:
            continue
        seen.add(id(t))
        stack.append((t, True))
        for p in t.node.parents:
            if p.node is not None and id(p) not in seen:
                stack.append((p, False))
    return order


def backward(loss):
    """Accumulate gradients from a scalar loss.

    Returns a dict mapping each requires-grad leaf Tensor to its gradient
    array (also stored on ``leaf.grad``). The tape is released afterwards;
    a second backward on the same graph raises.
    """
    if loss.data.ndim != 0 and loss.data.size != 1:
        raise AutodiffError(f"backward needs a scalar loss, got shape {loss.shape}")
    if loss.node is None:
        raise AutodiffError("backward on a detached graph (no tape recorded)")

    order = _toposort(loss)
    cotangents = {id(loss): np.ones_like(loss.data)}
    grads = {}
    for t in reversed(order):
        g = cotangents.pop(id(t), None)
        if g is None:
            continue
        parent_gs = t.node.vjp(g)
        for p, pg in zip(t.node.parents, parent_gs):
            if pg is None or not p.requires_grad:
                continue
            if p.node is None:  # leaf
                if p.grad is None:
                    p.grad = np.zeros_like(p.data)
                p.grad = p.grad + pg
                grads[p] = p.grad
            else:
                acc = cotangents.get(id(p))
                cotangents[id(p)] = pg if acc is None else acc + pg
    # consume the tape: every node visited exactly once, then released
    for t in order:
        t.node = None
    return grads


def zero_grads(tensors):
    for t in tensors:
        t.grad = None


def grad_check(closure, inputs, eps=1e-5, max_coords=None, rng=None, floor=1e-8):
    """Compare analytic gradients of ``closure(*inputs)`` to central differences.

    ``closure`` must map f64 tensors to a scalar Tensor. Returns the worst
    relative error |analytic - cd| / max(|analytic|, |cd|, floor) over the
    checked coordinates. ``max_coords`` caps the number of probed
    coordinates per input (all coordinates when None). ``floor`` separates
    "both sides are numerically zero" from real disagreement; raise it
    toward the FD noise scale (|loss|*1e-16/eps) when the closure has
    parameters the loss is exactly invariant to.
    """
    tensors = []
    for t in inputs:
        if not isinstance(t, Tensor):
            t = Tensor(np.asarray(t, dtype=np.float64), requires_grad=True)
        if t.dtype != np.float64:
            raise AutodiffError("grad_check requires f64 inputs")
        tensors.append(t)

    zero_grads(tensors)
    out = closure(*tensors)
    backward(out)
    analytic = [
        t.grad if t.grad is not None else np.zeros_like(t.data) for t in tensors
    ]

    # finite differences run on detached twins that share the same buffers
    fd_inputs = [Tensor(t.data) for t in tensors]

    def fd_eval():
        return float(closure(*fd_inputs).data)

    if rng is None:
        rng = np.random.default_rng(0)
    worst = 0.0
    for t, an in zip(tensors, analytic):
        flat = t.data.reshape(-1)
        an_flat = an.reshape(-1)
        idxs = np.arange(flat.size)
        if max_coords is not None and flat.size > max_coords:
            idxs = rng.choice(flat.size, size=max_coords, replace=False)
        for i in idxs:
            orig = flat[i]
            flat[i] = orig + eps
            fp = fd_eval()
            flat[i] = orig - eps
            fm = fd_eval()
            flat[i] = orig
            cd = (fp - fm) / (2.0 * eps)
            err = abs(an_flat[i] - cd) / max(abs(an_flat[i]), abs(cd), floor)
            worst = max(worst, err)
    return worst
