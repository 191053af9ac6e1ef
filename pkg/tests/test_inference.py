import math

import numpy as np
import pytest

from narrow_dbm.core import Distribution, StateSpace, hadamard, total_variation
from narrow_dbm.errors import DimensionError, LayerIndexError
from narrow_dbm.inference import (
    ff_conditional,
    layer_marginal,
    layer_marginals,
    log_partition,
    pushforward,
    split_at_layer,
    transfer_messages,
    visible_factorization_check,
)
from narrow_dbm.model import DbmParams, FeedforwardLayer, joint_distribution_oracle

import oracles


def sigmoid(x):
    return 1.0 / (1.0 + math.exp(-x))


class TestLogPartition:
    def test_zero_params(self):
        assert log_partition(DbmParams.zeros((2, 3, 1), 3)) == pytest.approx(6 * math.log(3), abs=1e-12)

    def test_single_edge(self):
        w = -1.3
        p = DbmParams(2, (1, 1), (np.array([[w]]),), (np.zeros(1), np.zeros(1)))
        assert log_partition(p) == pytest.approx(math.log(3 + math.exp(w)), abs=1e-14)

    def test_against_oracle(self, rng):
        p = DbmParams.random((2, 2, 2), 2, rng)
        assert abs(log_partition(p) - oracles.log_partition(p)) < 1e-10

    def test_large_weights_stay_finite(self, rng):
        p = DbmParams.random((3, 3, 3), 2, rng, scale=500.0)
        msgs_up, msgs_down = transfer_messages(p)
        assert all(np.all(np.isfinite(m.log_values)) for m in msgs_up + msgs_down)
        assert np.isfinite(log_partition(p))


class TestLayerMarginal:
    def test_zero_params_uniform(self):
        m = layer_marginal(DbmParams.zeros((2, 2), 3), 1)
        np.testing.assert_allclose(m.probs, np.full(9, 1 / 9))

    def test_product_of_logistics(self):
        b = np.array([0.3, -1.1])
        p = DbmParams(2, (2, 1), (np.zeros((2, 1)),), (b, np.zeros(1)))
        p1 = [sigmoid(v) for v in b]
        ref = [(1 - p1[0]) * (1 - p1[1]), (1 - p1[0]) * p1[1], p1[0] * (1 - p1[1]), p1[0] * p1[1]]
        np.testing.assert_allclose(layer_marginal(p, 0).probs, ref, atol=1e-15)

    def test_against_oracle(self, rng):
        p = DbmParams.random((2, 3, 2), 2, rng)
        for k in range(3):
            assert np.max(np.abs(layer_marginal(p, k).probs - oracles.layer_marginal(p, k))) < 1e-10

    def test_q3_against_oracle(self, rng):
        p = DbmParams.random((2, 1, 2), 3, rng)
        for k, m in enumerate(layer_marginals(p)):
            assert np.max(np.abs(m.probs - oracles.layer_marginal(p, k))) < 1e-10

    def test_strictly_positive(self, rng):
        p = DbmParams.random((2, 2), 2, rng, scale=30.0)
        assert layer_marginal(p, 0).is_strictly_positive()

    def test_index_error(self):
        with pytest.raises(LayerIndexError):
            layer_marginal(DbmParams.zeros((2, 2)), 2)
        with pytest.raises(IndexError):
            layer_marginal(DbmParams.zeros((2, 2)), -1)


class TestSplit:
    def test_all_bias_below_and_empty_upper(self, rng):
        p = DbmParams.random((2, 2, 2), 2, rng).replace()
        w = list(p.weights)
        w[1] = np.zeros_like(w[1])
        p = p.replace(weights=w)
        lower, upper = split_at_layer(p, 1, p.biases[1])
        up = layer_marginal(upper, 0)
        np.testing.assert_allclose(up.probs, np.full(4, 0.25), atol=1e-15)
        assert total_variation(layer_marginal(lower, 1), layer_marginal(p, 1)) < 1e-12

    @pytest.mark.parametrize("how", ["half", "random"])
    def test_product_identity(self, rng, how):
        p = DbmParams.random((2, 2, 2), 2, rng)
        split = p.biases[1] / 2 if how == "half" else rng.normal(size=2) * 3
        lower, upper = split_at_layer(p, 1, split)
        prod = hadamard(layer_marginal(lower, 1), layer_marginal(upper, 0))
        assert np.max(np.abs(prod.probs - oracles.layer_marginal(p, 1))) < 1e-10

    def test_boundary(self):
        p = DbmParams.zeros((2, 2, 2))
        for k in (0, 2):
            with pytest.raises(LayerIndexError):
                split_at_layer(p, k, np.zeros(2))

    def test_split_shape(self):
        with pytest.raises(DimensionError):
            split_at_layer(DbmParams.zeros((2, 2, 2)), 1, np.zeros(3))


class TestFeedforward:
    def test_zero_layer_uniform(self):
        layer = FeedforwardLayer(2, np.zeros((3, 2)), np.zeros(3))
        np.testing.assert_allclose(ff_conditional(layer, (1, 0)).probs, np.full(8, 1 / 8))

    @pytest.mark.parametrize("n", [1, 4, 8])
    def test_near_copy(self, n):
        beta = 20.0
        layer = FeedforwardLayer(2, 2 * beta * np.eye(n), -beta * np.ones(n))
        space = StateSpace(n)
        for x in [space.states[0], space.states[-1], space.states[space.size // 3]]:
            out = ff_conditional(layer, x)
            tv = 1.0 - out[tuple(x)]
            assert tv <= n * sigmoid(-beta) + 1e-15
            assert tv < 1e-7

    def test_single_unit(self):
        layer = FeedforwardLayer(2, np.array([[0.7]]), np.array([-0.2]))
        assert ff_conditional(layer, (1,))[1] == pytest.approx(sigmoid(0.5), abs=1e-15)

    def test_pushforward(self, rng):
        n = 3
        layer = FeedforwardLayer(2, rng.normal(size=(2, n)), rng.normal(size=2))
        p_in = Distribution(StateSpace(n), rng.dirichlet(np.ones(8)))
        ref = oracles.ff_pushforward(layer.weights, layer.bias, p_in.probs, 2, n)
        np.testing.assert_allclose(pushforward(layer, p_in).probs, ref, atol=1e-14)

    def test_pushforward_point_and_copy(self, rng):
        layer = FeedforwardLayer(2, rng.normal(size=(2, 2)), rng.normal(size=2))
        x = (1, 0)
        delta = Distribution.point(StateSpace(2), x)
        np.testing.assert_allclose(pushforward(layer, delta).probs, ff_conditional(layer, x).probs, atol=1e-15)
        copy = FeedforwardLayer(2, 40 * np.eye(6), -20 * np.ones(6))
        p_in = Distribution(StateSpace(6), rng.dirichlet(np.ones(64)))
        assert total_variation(pushforward(copy, p_in), p_in) < 1e-6

    def test_q3_conditional_matches_rbm_oracle(self, rng):
        p = DbmParams.random((2, 2), 3, rng)
        layer = FeedforwardLayer.from_dbm(p, 0)
        joint = joint_distribution_oracle(p).probs.reshape(9, 9)
        space = StateSpace(2, 3)
        for h in range(9):
            cond = joint[:, h] / joint[:, h].sum()
            np.testing.assert_allclose(ff_conditional(layer, space.states[h]).probs, cond, atol=1e-12)

    def test_dimension_errors(self):
        layer = FeedforwardLayer(2, np.zeros((2, 3)), np.zeros(2))
        with pytest.raises(DimensionError):
            ff_conditional(layer, (0, 1))
        with pytest.raises(DimensionError):
            pushforward(layer, Distribution.uniform(StateSpace(2)))


class TestFactorization:
    def test_zero_model(self):
        assert visible_factorization_check(DbmParams.zeros((2, 2, 2))) == 0.0

    @pytest.mark.parametrize("widths", [(2, 2, 2), (3, 3, 3, 3)])
    def test_random(self, rng, widths):
        assert visible_factorization_check(DbmParams.random(widths, 2, rng)) <= 1e-10

    def test_q3(self, rng):
        assert visible_factorization_check(DbmParams.random((2, 2, 1), 3, rng)) <= 1e-10

    def test_needs_two_layers(self):
        with pytest.raises(DimensionError):
            visible_factorization_check(DbmParams.zeros((2, 2)))
