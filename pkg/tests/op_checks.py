"""Gradient-check closures for every op kind, shared between the per-op
test module and the acceptance suite.

Each entry maps an op kind to a factory: factory(rng) -> (closure, inputs)
where closure(*tensors) is a scalar Tensor. A second op downstream of the
checked one keeps cotangents non-trivial.
"""

import numpy as np

import campulse.ops as O
from campulse.autodiff import Tensor
from campulse.ops import BnState


def _sq(x):
    return O.sum_all(O.mul(x, x))


def _r(rng, *shape):
    return rng.standard_normal(shape)


def _away_from_zero(rng, *shape):
    r = rng.standard_normal(shape)
    return r + np.sign(r) * 0.2


OP_CHECKS = {
    "add": lambda rng: (lambda a, b: _sq(O.add(a, b)), [_r(rng, 3, 4), _r(rng, 3, 4)]),
    "sub": lambda rng: (lambda a, b: _sq(O.sub(a, b)), [_r(rng, 3, 4), _r(rng, 3, 4)]),
    "mul": lambda rng: (lambda a, b: _sq(O.mul(a, b)), [_r(rng, 3, 4), _r(rng, 3, 4)]),
    "div": lambda rng: (
        lambda a, b: _sq(O.div(a, b)),
        [_r(rng, 3, 4), rng.uniform(0.5, 2.0, (3, 4))],
    ),
    "exp": lambda rng: (lambda a: _sq(O.exp(a)), [_r(rng, 3, 4)]),
    "log": lambda rng: (lambda a: _sq(O.log(a)), [rng.uniform(0.5, 3.0, (3, 4))]),
    "sqrt": lambda rng: (lambda a: _sq(O.sqrt(a)), [rng.uniform(0.5, 3.0, (3, 4))]),
    "relu": lambda rng: (lambda a: _sq(O.relu(a)), [_r(rng, 3, 4) + 0.05]),
    "sigmoid": lambda rng: (lambda a: _sq(O.sigmoid(a)), [_r(rng, 3, 4)]),
    "silu": lambda rng: (lambda a: _sq(O.silu(a)), [_r(rng, 3, 4)]),
    "softplus": lambda rng: (lambda a: _sq(O.softplus(a)), [_r(rng, 3, 4)]),
    "expm1_over": lambda rng: (
        lambda a: _sq(O.expm1_over(a)),
        [np.concatenate([_r(rng, 6), [1e-6, -1e-5, 1e-2]])],
    ),
    "matmul": lambda rng: (
        lambda x, w: _sq(O.matmul(x, w)),
        [_r(rng, 2, 3, 4), _r(rng, 4, 5)],
    ),
    "bias_add": lambda rng: (
        lambda x, b: _sq(O.bias_add(x, b)),
        [_r(rng, 3, 4), _r(rng, 4)],
    ),
    "conv2d": lambda rng: (
        lambda x, w, b: _sq(O.conv2d(x, w, b, stride=2, pad=1)),
        [_r(rng, 2, 3, 6, 6), 0.5 * _r(rng, 4, 3, 3, 3), _r(rng, 4)],
    ),
    "depthwise_conv1d": lambda rng: (
        lambda x, w, b: _sq(O.depthwise_conv1d(x, w, b)),
        [_r(rng, 2, 9, 3), _r(rng, 4, 3), _r(rng, 3)],
    ),
    "batchnorm2d": lambda rng: (
        lambda x, g, b: _sq(
            O.mul(
                O.batchnorm2d(x, g, b, BnState(3), train=True),
                Tensor(np.linspace(0.5, 1.5, 4 * 3 * 4 * 4).reshape(4, 3, 4, 4)),
            )
        ),
        [_r(rng, 4, 3, 4, 4), rng.uniform(0.5, 1.5, 3), _r(rng, 3)],
    ),
    "layernorm_channels": lambda rng: (
        lambda x, g, b: _sq(O.exp(O.layernorm_channels(x, g, b))),
        [_r(rng, 3, 5, 6), rng.uniform(0.5, 1.5, 6), _r(rng, 6)],
    ),
    "maxpool2d": lambda rng: (
        lambda x: _sq(O.maxpool2d(x, 2)),
        [_r(rng, 2, 3, 6, 6)],
    ),
    "global_avgpool_spatial": lambda rng: (
        lambda x: _sq(O.global_avgpool_spatial(x)),
        [_r(rng, 2, 3, 4, 4)],
    ),
    "l1_norm": lambda rng: (
        lambda x: _sq(O.l1_norm_spatial(x)),
        [_away_from_zero(rng, 2, 3, 4, 4)],
    ),
    "rfft_time": lambda rng: (
        lambda x: _sq(O.rfft_time(x, nfft=20)),
        [_r(rng, 2, 12, 3)],
    ),
    "irfft_time": lambda rng: (
        lambda x: _sq(O.irfft_time(O.rfft_time(x), n=12)),
        [_r(rng, 2, 12, 3)],
    ),
    "complex_linear": lambda rng: (
        lambda x, wr, wi, br, bi: _sq(
            O.complex_linear(O.rfft_time(x), wr, wi, br, bi)
        ),
        [_r(rng, 2, 10, 3), _r(rng, 3, 3), _r(rng, 3, 3), _r(rng, 3), _r(rng, 3)],
    ),
    "slice_time": lambda rng: (
        lambda x: _sq(O.slice_time(x, 2, 7)),
        [_r(rng, 2, 9, 3)],
    ),
    "concat_time": lambda rng: (
        lambda a, b: _sq(O.concat_time([a, b])),
        [_r(rng, 2, 4, 3), _r(rng, 2, 5, 3)],
    ),
    "reshape": lambda rng: (
        lambda x: _sq(O.reshape(x, (2, 12))),
        [_r(rng, 2, 3, 4)],
    ),
    "transpose": lambda rng: (
        lambda x: _sq(O.transpose(x, (1, 0, 2))),
        [_r(rng, 2, 3, 4)],
    ),
    "expand_dim": lambda rng: (
        lambda x: _sq(O.expand_dim(x, 1, 5)),
        [_r(rng, 2, 3)],
    ),
    "sum_axis": lambda rng: (
        lambda x: _sq(O.sum_axis(x, 1)),
        [_r(rng, 2, 3, 4)],
    ),
    "sum_all": lambda rng: (
        lambda x: O.mul(O.sum_all(x), O.sum_all(x)),
        [_r(rng, 3, 4)],
    ),
    "mean_all": lambda rng: (
        lambda x: O.mul(O.mean_all(x), O.mean_all(x)),
        [_r(rng, 3, 4)],
    ),
    "linear_recurrence": lambda rng: (
        lambda a, b: _sq(O.linear_recurrence(a, b)),
        [rng.uniform(0.1, 0.9, (2, 7, 3, 4)), _r(rng, 2, 7, 3, 4)],
    ),
}
