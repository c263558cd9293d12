"""Finite-difference verification of every op's backward rule."""

import numpy as np
import pytest

import campulse.ops as O
from campulse.autodiff import Tensor, grad_check
from op_checks import OP_CHECKS

PER_OP_TOL = 1e-5
SEEDS = range(5)

# batchnorm's mean/variance projection leaves near-zero gradient entries
# whose relative FD error is roundoff-limited; a larger step keeps the
# comparison meaningful (central differences stay well inside tolerance)
FD_EPS = {"batchnorm2d": 1e-4}


@pytest.mark.parametrize("kind", sorted(OP_CHECKS))
def test_op_gradients(kind):
    worst = 0.0
    for seed in SEEDS:
        closure, inputs = OP_CHECKS[kind](np.random.default_rng(seed))
        worst = max(worst, grad_check(closure, inputs, eps=FD_EPS.get(kind, 1e-5)))
    assert worst <= PER_OP_TOL, f"{kind}: {worst:.2e}"


def test_linear_layer_tight(rng):
    def f(x, w, b):
        return O.sum_all(O.mul(O.linear(x, w, b), O.linear(x, w, b)))

    err = grad_check(
        f,
        [rng.standard_normal((4, 4)), rng.standard_normal((4, 4)), rng.standard_normal(4)],
    )
    assert err <= 1e-7


def test_fft_complex_chain(rng):
    """Gradient through irfft(complex_linear(rfft(x))) vs central differences."""
    wr, wi = rng.standard_normal((3, 3)), rng.standard_normal((3, 3))
    br, bi = rng.standard_normal(3), rng.standard_normal(3)

    def f(x, wr, wi, br, bi):
        h = O.complex_linear(O.rfft_time(x), wr, wi, br, bi)
        y = O.irfft_time(h, n=16)
        return O.sum_all(O.mul(y, y))

    err = grad_check(f, [rng.standard_normal((2, 16, 3)), wr, wi, br, bi], eps=1e-5)
    assert err <= 1e-6


def test_batchnorm_train_mode(rng):
    from campulse.ops import BnState

    cot = rng.standard_normal((4, 3, 5, 5))

    def f(x, g, b):
        y = O.batchnorm2d(x, g, b, BnState(3), train=True)
        return O.sum_all(O.mul(y, Tensor(cot)))

    err = grad_check(
        f,
        [
            rng.standard_normal((4, 3, 5, 5)),
            rng.uniform(0.5, 1.5, 3),
            rng.standard_normal(3),
        ],
        eps=1e-5,
    )
    assert err <= 1e-5


def test_grad_check_rejects_f32():
    x = Tensor(np.ones(3, dtype=np.float32), requires_grad=True)
    with pytest.raises(Exception, match="f64"):
        grad_check(lambda t: O.sum_all(t), [x])


def test_grad_check_flags_wrong_gradient():
    """A deliberately wrong vjp must be caught."""
    from campulse.autodiff import record

    def bad_double(x):
        return record("bad_double", (x,), 2.0 * x.data, lambda g: (3.0 * g,))

    err = grad_check(lambda x: O.sum_all(bad_double(x)), [np.ones(3)])
    assert err > 0.3
