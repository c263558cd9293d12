import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import campulse.ops as O
from campulse.autodiff import Tensor
from campulse.ops import BnState
from op_checks import OP_CHECKS


def test_relu_definition():
    assert np.array_equal(
        O.relu(Tensor([-1.0, 0.0, 2.0])).data, np.asarray([0.0, 0.0, 2.0])
    )


def test_matmul_identity(rng):
    x = rng.standard_normal((3, 5))
    out = O.matmul(Tensor(np.eye(3)), Tensor(x))
    assert np.allclose(out.data, x)


def test_conv2d_shape_rule(rng):
    x = Tensor(rng.standard_normal((1, 3, 128, 128)))
    w = Tensor(rng.standard_normal((6, 3, 7, 7)))
    assert O.conv2d(x, w, stride=2, pad=3).shape == (1, 6, 64, 64)


def test_every_op_kind_has_a_grad_check():
    assert set(OP_CHECKS) == set(O.OP_TABLE)


def test_forward_op_dispatch(rng):
    out = O.forward_op("relu", Tensor(np.asarray([-2.0, 3.0])))
    assert np.array_equal(out.data, [0.0, 3.0])
    with pytest.raises(Exception, match="unknown op"):
        O.forward_op("not_an_op", Tensor(np.ones(2)))


@settings(max_examples=30, deadline=None)
@given(
    cuts=st.lists(st.integers(min_value=1, max_value=11), min_size=0, max_size=4),
    seed=st.integers(min_value=0, max_value=2**16),
)
def test_concat_of_slices_restores_exactly(cuts, seed):
    x = np.random.default_rng(seed).standard_normal((2, 12, 3))
    bounds = sorted(set([0] + [c for c in cuts] + [12]))
    parts = [
        O.slice_time(Tensor(x), lo, hi) for lo, hi in zip(bounds[:-1], bounds[1:])
    ]
    assert np.array_equal(O.concat_time(parts).data, x)


@pytest.mark.parametrize("t", [8, 16, 64])
def test_fft_round_trip_even_lengths(rng, t):
    x = rng.standard_normal((2, t, 3))
    back = O.irfft_time(O.rfft_time(Tensor(x)), n=t)
    assert np.abs(back.data - x).max() <= 1e-9


def test_fft_round_trip_odd_length(rng):
    x = rng.standard_normal((1, 15, 2))
    back = O.irfft_time(O.rfft_time(Tensor(x)), n=15)
    assert np.abs(back.data - x).max() <= 1e-9


def test_complex_linear_matches_numpy_complex(rng):
    x = rng.standard_normal((2, 10, 4))
    wr, wi = rng.standard_normal((4, 4)), rng.standard_normal((4, 4))
    br, bi = rng.standard_normal(4), rng.standard_normal(4)
    spec = O.rfft_time(Tensor(x))
    out = O.complex_linear(spec, Tensor(wr), Tensor(wi), Tensor(br), Tensor(bi))
    ref = np.fft.rfft(x, axis=1) @ (wr + 1j * wi) + (br + 1j * bi)
    assert np.allclose(out.data[..., 0], ref.real)
    assert np.allclose(out.data[..., 1], ref.imag)


def test_batchnorm_eval_is_affine(rng):
    state = BnState(3)
    state.mean = rng.standard_normal(3)
    state.var = rng.uniform(0.5, 2.0, 3)
    gamma = Tensor(rng.uniform(0.5, 1.5, 3))
    beta = Tensor(rng.standard_normal(3))

    def f(x):
        return O.batchnorm2d(Tensor(x), gamma, beta, state, train=False).data

    x1 = rng.standard_normal((2, 3, 4, 4))
    x2 = rng.standard_normal((2, 3, 4, 4))
    # superposition: f(x1) + f(x2) - f(0) == f(x1 + x2)
    lhs = f(x1) + f(x2) - f(np.zeros_like(x1))
    assert np.allclose(lhs, f(x1 + x2), atol=1e-10)


def test_batchnorm_train_requires_batch(rng):
    with pytest.raises(Exception, match="batch"):
        O.batchnorm2d(
            Tensor(rng.standard_normal((1, 3, 4, 4))),
            Tensor(np.ones(3)),
            Tensor(np.zeros(3)),
            BnState(3),
            train=True,
        )


def test_batchnorm_running_stats_update(rng):
    state = BnState(3)
    x = rng.standard_normal((8, 3, 4, 4)) * 2.0 + 1.0
    O.batchnorm2d(Tensor(x), Tensor(np.ones(3)), Tensor(np.zeros(3)), state, train=True)
    assert np.allclose(state.mean, 0.1 * x.mean(axis=(0, 2, 3)))


def test_depthwise_conv1d_is_causal():
    x = np.zeros((1, 6, 1))
    x[0, 3, 0] = 1.0
    y = O.depthwise_conv1d(Tensor(x), Tensor(np.ones((2, 1))))
    assert np.array_equal(y.data.ravel(), [0, 0, 0, 1, 1, 0])


def test_maxpool_values(rng):
    x = rng.standard_normal((1, 1, 4, 4))
    y = O.maxpool2d(Tensor(x), 2)
    want = x.reshape(1, 1, 2, 2, 2, 2).max(axis=(3, 5))
    assert np.array_equal(y.data, want)


def test_expand_dim_then_sum_is_scaling(rng):
    x = rng.standard_normal((2, 3))
    y = O.sum_axis(O.expand_dim(Tensor(x), 1, 5), 1)
    assert np.allclose(y.data, 5.0 * x)


def test_f32_ops_stay_f32(rng):
    x = Tensor(rng.standard_normal((2, 8, 3)).astype(np.float32))
    y = O.irfft_time(O.rfft_time(x), n=8)
    assert y.dtype == np.float32
    assert O.silu(x).dtype == np.float32
