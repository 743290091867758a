import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from glyphgame import nn

from conftest import check_grads


def P(a):
    return nn.parameter(np.array(a, dtype=float))


def naive_matvec(W, x, b):
    out = []
    for i in range(len(W)):
        acc = 0.0
        for j in range(len(x)):
            acc += W[i][j] * x[j]
        out.append(acc + b[i])
    return np.array(out)


class TestAffine:
    def test_identity(self):
        x = np.array([1.5, -2.0, 3.0])
        y = nn.affine(x, P(np.eye(3)), P(np.zeros(3)))
        np.testing.assert_array_equal(y.data, x)

    def test_zero_map(self):
        b0 = np.array([0.3, -1.0])
        y = nn.affine(np.arange(4.0), P(np.zeros((2, 4))), P(b0))
        np.testing.assert_array_equal(y.data, b0)

    def test_matches_triple_loop(self):
        rng = np.random.default_rng(1)
        W, x, b = rng.normal(size=(3, 4)), rng.normal(size=4), rng.normal(size=3)
        y = nn.affine(x, P(W), P(b))
        np.testing.assert_allclose(y.data, naive_matvec(W, x, b), atol=1e-12, rtol=0)

    def test_batched_rows_match_single(self):
        rng = np.random.default_rng(2)
        W, b = P(rng.normal(size=(3, 4))), P(rng.normal(size=3))
        X = rng.normal(size=(5, 4))
        Y = nn.affine(X, W, b).data
        for i in range(5):
            np.testing.assert_allclose(Y[i], naive_matvec(W.data, X[i], b.data), atol=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            nn.affine(np.zeros(3), P(np.zeros((2, 4))), P(np.zeros(2)))

    def test_gradients(self):
        rng = np.random.default_rng(3)
        W, b = P(rng.normal(size=(3, 4))), P(rng.normal(size=3))
        x = P(rng.normal(size=(2, 4)))
        check_grads(lambda: nn.total(nn.square(nn.affine(x, W, b))), [W, b, x])


@pytest.mark.parametrize("op", [nn.tanh, nn.sigmoid, nn.exp])
def test_pointwise_gradients(op):
    rng = np.random.default_rng(4)
    x = P(rng.normal(size=(3, 5)))
    w = rng.normal(size=(3, 5))
    check_grads(lambda: nn.total(nn.mul(op(x), w)), [x])


def test_relu_gradient_away_from_kink():
    x = P(np.array([[-1.0, 0.5, 2.0], [0.3, -0.2, -3.0]]))
    w = np.arange(6.0).reshape(2, 3)
    check_grads(lambda: nn.total(nn.mul(nn.relu(x), w)), [x])


def test_clip_and_minimum_gradients_away_from_kinks():
    a = P(np.array([0.5, 0.95, 1.1, 1.5]))
    b = P(np.array([0.7, 0.2, 2.0, 1.0]))
    check_grads(lambda: nn.total(nn.minimum(nn.clip(a, 0.8, 1.2), b)), [a, b])


def test_concat_columns_gradients():
    rng = np.random.default_rng(5)
    a, b = P(rng.normal(size=(2, 3))), P(rng.normal(size=(2, 2)))
    w = rng.normal(size=(2, 3))

    def f():
        c = nn.concat([a, b])
        return nn.total(nn.mul(nn.columns(c, 1, 4), w))

    check_grads(f, [a, b])


def test_softmax_logprob_paths():
    rng = np.random.default_rng(6)
    z = P(rng.normal(size=(4, 5)))
    idx = np.array([0, 3, 4, 1])
    check_grads(lambda: nn.total(nn.categorical_log_prob(z, idx)), [z])
    check_grads(lambda: nn.total(nn.entropy(z)), [z])
    check_grads(lambda: nn.total(nn.square(nn.logsumexp(z))), [z])


def test_pointer_logits_gradient():
    rng = np.random.default_rng(7)
    q = P(rng.normal(size=(2, 3)))
    C = rng.normal(size=(2, 4, 3))
    check_grads(lambda: nn.total(nn.categorical_log_prob(nn.pointer_logits(q, C), np.array([1, 3]))), [q])


class TestCategorical:
    def test_uniform_log_prob(self):
        z = nn.Tensor(np.zeros(4))
        for i in range(4):
            assert float(nn.categorical_log_prob(z, i).data) == pytest.approx(math.log(0.25), abs=1e-12)
        assert math.log(0.25) == pytest.approx(-1.3863, abs=1e-4)

    def test_uniform_entropy(self):
        assert float(nn.entropy(nn.Tensor(np.zeros(4))).data) == pytest.approx(math.log(4), abs=1e-12)

    def test_dominant_logit_sampled(self):
        z = np.zeros((10_000, 5))
        z[:, 2] = 50.0
        draws = nn.categorical_sample(z, np.random.default_rng(0))
        assert np.mean(draws == 2) >= 0.999

    def test_sample_frequencies_match_softmax(self):
        z = np.array([0.0, 1.0, -1.0, 0.5])
        p = nn.softmax(z)
        draws = nn.categorical_sample(np.tile(z, (20_000, 1)), np.random.default_rng(1))
        freq = np.bincount(draws, minlength=4) / 20_000
        np.testing.assert_allclose(freq, p, atol=0.015)

    def test_greedy_tie_breaks_low(self):
        assert nn.categorical_greedy(np.zeros(6)) == 0
        assert nn.categorical_greedy(np.array([1.0, 3.0, 3.0])) == 1

    @given(arrays(float, st.integers(1, 12), elements=st.floats(-1e4, 1e4)))
    @settings(max_examples=200, deadline=None)
    def test_softmax_sums_to_one_and_lse_finite(self, z):
        assert abs(nn.softmax(z).sum() - 1.0) <= 1e-12
        assert np.isfinite(nn.logsumexp(nn.Tensor(z)).data)
        lp = nn.categorical_log_prob(nn.Tensor(z), int(np.argmax(z)))
        assert np.isfinite(lp.data) and lp.data <= 0


class TestLSTM:
    def zero_params(self, n_in, H):
        return P(np.zeros((4 * H, n_in + H))), P(np.zeros(4 * H))

    def test_zero_params_zero_cell(self):
        W, b = self.zero_params(3, 5)
        s = nn.lstm_step(np.ones(3), nn.RecurrentState.zeros(5), W, b)
        np.testing.assert_array_equal(s.c.data, 0.0)
        np.testing.assert_array_equal(s.h.data, 0.0)

    def test_zero_params_carries_half_cell(self):
        W, b = self.zero_params(3, 4)
        c0 = np.array([1.0, -2.0, 0.5, 3.0])
        state = nn.RecurrentState(nn.Tensor(np.zeros(4)), nn.Tensor(c0))
        s = nn.lstm_step(np.zeros(3), state, W, b)
        # gates are sigmoid(0) = 0.5 and the candidate is tanh(0) = 0
        np.testing.assert_allclose(s.c.data, 0.5 * c0, atol=1e-15)
        np.testing.assert_allclose(s.h.data, 0.5 * np.tanh(0.5 * c0), atol=1e-15)

    def test_zero_everything_is_fixed_point(self):
        W, b = self.zero_params(2, 3)
        s = nn.RecurrentState.zeros(3)
        for _ in range(3):
            s = nn.lstm_step(np.zeros(2), s, W, b)
        np.testing.assert_array_equal(s.h.data, 0.0)
        np.testing.assert_array_equal(s.c.data, 0.0)

    def test_gradient_of_hidden_norm(self):
        rng = np.random.default_rng(8)
        H, n = 3, 2
        W = P(rng.normal(size=(4 * H, n + H)) * 0.5)
        b = P(rng.normal(size=4 * H) * 0.5)
        x = P(rng.normal(size=(2, n)))
        h0 = P(rng.normal(size=(2, H)))
        c0 = P(rng.normal(size=(2, H)))

        def f():
            s = nn.lstm_step(x, nn.RecurrentState(h0, c0), W, b)
            s = nn.lstm_step(x, s, W, b)
            return nn.total(nn.square(s.h))

        check_grads(f, [W, b, x, h0, c0])

    def test_shape_mismatch(self):
        W, b = self.zero_params(3, 4)
        with pytest.raises(ValueError):
            nn.lstm_step(np.zeros(2), nn.RecurrentState.zeros(4), W, b)


class TestBackward:
    def test_sum_of_params_gives_ones(self):
        a, b = P(np.arange(6.0).reshape(2, 3)), P(np.ones(4))
        ga, gb = nn.backward(nn.add(nn.total(a), nn.total(b)), [a, b])
        np.testing.assert_array_equal(ga, np.ones((2, 3)))
        np.testing.assert_array_equal(gb, np.ones(4))

    def test_squared_norm_closed_form(self):
        rng = np.random.default_rng(9)
        W = P(rng.normal(size=(3, 4)))
        x = rng.normal(size=4)
        (gW,) = nn.backward(nn.total(nn.square(nn.affine(x, W, P(np.zeros(3))))), [W])
        np.testing.assert_allclose(gW, 2.0 * np.outer(W.data @ x, x), atol=1e-10, rtol=0)

    def test_unvisited_param_gets_zeros(self):
        a, unused = P(np.ones(3)), P(np.ones((2, 2)))
        ga, gu = nn.backward(nn.total(a), [a, unused])
        np.testing.assert_array_equal(gu, np.zeros((2, 2)))

    def test_shared_subexpression_accumulates(self):
        a = P(np.array([2.0]))
        y = nn.mul(a, a)
        (g,) = nn.backward(nn.total(nn.add(y, y)), [a])
        assert g[0] == pytest.approx(8.0)

    def test_non_scalar_rejected(self):
        with pytest.raises(ValueError):
            nn.backward(P(np.ones(3)))


def test_adam_minimizes_quadratic():
    params = nn.ParameterSet(w=P(np.array([3.0, -2.0])))
    opt = nn.Adam(params, lr=0.1)
    for _ in range(300):
        loss = nn.total(nn.square(params["w"]))
        opt.step(nn.backward(loss, params.values()))
    assert np.abs(params["w"].data).max() < 1e-2


def test_clip_grad_norm():
    g, norm = nn.clip_grad_norm([np.array([3.0, 4.0])], 1.0)
    assert norm == pytest.approx(5.0)
    assert np.linalg.norm(g[0]) == pytest.approx(1.0)
    g, _ = nn.clip_grad_norm([np.array([0.3, 0.4])], 1.0)
    np.testing.assert_array_equal(g[0], [0.3, 0.4])


def test_init_respects_fan_in_bound():
    a = nn.init_uniform(np.random.default_rng(0), (50, 16), 16)
    assert np.abs(a).max() <= 0.25
