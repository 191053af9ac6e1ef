import math

import numpy as np
import pytest

from narrow_dbm.core import StateSpace
from narrow_dbm.errors import DimensionError, DomainError, ParseError, SizeError
from narrow_dbm.model import (
    DbmParams,
    FeedforwardLayer,
    deserialize,
    from_json,
    joint_distribution_oracle,
    negative_energy,
    oracle_log_partition,
    serialize,
    to_json,
)

import oracles


def single_edge(w, b0=0.0, b1=0.0):
    return DbmParams(2, (1, 1), (np.array([[w]]),), (np.array([b0]), np.array([b1])))


class TestParams:
    def test_shapes_validated(self):
        with pytest.raises(DimensionError):
            DbmParams(2, (2, 2), (np.zeros((2, 3)),), (np.zeros(2), np.zeros(2)))
        with pytest.raises(DimensionError):
            DbmParams(2, (2, 2), (np.zeros((2, 2)),), (np.zeros(2),))
        with pytest.raises(DimensionError):
            DbmParams(3, (2, 2), (np.zeros((2, 2)),), (np.zeros((2, 3)), np.zeros((2, 3))))

    def test_finite(self):
        with pytest.raises(DomainError):
            DbmParams(2, (1, 1), (np.array([[np.inf]]),), (np.zeros(1), np.zeros(1)))

    def test_depth_and_units(self):
        p = DbmParams.zeros((3, 2, 2))
        assert p.depth == 2 and p.total_units == 7

    def test_onehot_round_trip_is_exact(self, rng):
        p = DbmParams.random((2, 3, 2), 2, rng)
        back = DbmParams.from_onehot(2, p.widths, *p.to_onehot())
        for a, b in zip(p.weights + p.biases, back.weights + back.biases):
            assert np.array_equal(a, b)

    def test_onehot_embedding_preserves_energy_differences(self, rng):
        ws = [rng.normal(size=(2, 2, 3, 2))]
        bs = [rng.normal(size=(2, 2)), rng.normal(size=(3, 2))]
        compact = DbmParams.from_onehot(2, (2, 3), ws, bs)
        full = DbmParams(3, (2, 3), (np.zeros((2, 3, 3, 3)),), (np.zeros((2, 3)), np.zeros((3, 3))))
        # evaluate one-hot energy by hand on binary states
        def onehot_energy(x, y):
            e = sum(bs[0][i, xi] for i, xi in enumerate(x)) + sum(bs[1][j, yj] for j, yj in enumerate(y))
            return e + sum(ws[0][i, xi, j, yj] for i, xi in enumerate(x) for j, yj in enumerate(y))
        ref = onehot_energy((0, 0), (0, 0, 0))
        for x in oracles.states(2):
            for y in oracles.states(3):
                assert negative_energy(compact, (x, y)) == pytest.approx(onehot_energy(x, y) - ref, abs=1e-12)
        assert full.depth == 1


class TestEnergy:
    def test_zero_params(self):
        p = DbmParams.zeros((2, 2))
        assert negative_energy(p, ((1, 0), (1, 1))) == 0.0

    def test_single_edge(self):
        assert negative_energy(single_edge(1.7), ((1,), (1,))) == pytest.approx(1.7)
        assert negative_energy(single_edge(1.7, 0.3, -2.0), ((1,), (0,))) == pytest.approx(0.3)

    def test_shape_errors(self):
        with pytest.raises(DimensionError):
            negative_energy(single_edge(1.0), ((1,),))
        with pytest.raises(DimensionError):
            negative_energy(single_edge(1.0), ((1, 0), (1,)))

    def test_linear_in_parameters(self, rng):
        p = DbmParams.random((2, 3), 2, rng)
        x = ((1, 1), (0, 1, 1))
        w = np.array(p.weights[0])
        h = 1e-3
        w2 = w.copy()
        w2[1, 2] += h
        fd = (negative_energy(p.replace(weights=[w2]), x) - negative_energy(p, x)) / h
        assert fd == pytest.approx(x[0][1] * x[1][2], rel=1e-6)

    def test_matches_oracle(self, rng):
        p = DbmParams.random((2, 2), 3, rng)
        for x in oracles.states(2, 3):
            for y in oracles.states(2, 3):
                ref = oracles.bias_term(3, p.biases[0], x) + oracles.bias_term(3, p.biases[1], y)
                ref += oracles.energy_term(3, p.weights[0], x, y)
                assert negative_energy(p, (x, y)) == pytest.approx(ref, abs=1e-12)


class TestOracle:
    def test_zero_params_uniform(self):
        j = joint_distribution_oracle(DbmParams.zeros((2, 1), 3))
        np.testing.assert_allclose(j.probs, np.full(27, 1 / 27))

    def test_single_edge(self):
        w = 0.8
        j = joint_distribution_oracle(single_edge(w))
        ref = np.array([1, 1, 1, math.exp(w)]) / (3 + math.exp(w))
        np.testing.assert_allclose(j.probs, ref, atol=1e-15)

    def test_log_partition_against_independent_oracle(self, rng):
        for q, widths in [(2, (2, 2, 2)), (3, (2, 1))]:
            p = DbmParams.random(widths, q, rng)
            assert oracle_log_partition(p) == pytest.approx(oracles.log_partition(p), abs=1e-10)

    def test_strictly_positive(self, rng):
        p = DbmParams.random((2, 2), 2, rng, scale=20.0)
        assert np.all(joint_distribution_oracle(p).probs > 0)

    def test_size_limit(self):
        with pytest.raises(SizeError):
            joint_distribution_oracle(DbmParams.zeros((8, 8, 8)), limit=2**16)


class TestFeedforward:
    def test_fields_binary(self):
        layer = FeedforwardLayer(2, np.array([[1.0, 2.0]]), np.array([-0.5]))
        np.testing.assert_allclose(layer.fields(np.array([[1, 1]])), [[[0.0, 2.5]]])

    def test_shape_errors(self):
        with pytest.raises(DimensionError):
            FeedforwardLayer(2, np.zeros((2, 2)), np.zeros(3))
        with pytest.raises(DimensionError):
            FeedforwardLayer(2, np.zeros((2, 2)), np.zeros(2)).fields(np.array([[0, 1, 1]]))


class TestSerialization:
    @pytest.mark.parametrize("q,widths", [(2, (3, 2, 2)), (3, (2, 2))])
    def test_round_trip(self, rng, q, widths):
        p = DbmParams.random(widths, q, rng)
        back = deserialize(serialize(p))
        assert back.q == p.q and back.widths == p.widths
        for a, b in zip(p.weights + p.biases, back.weights + back.biases):
            assert np.array_equal(a, b)

    def test_bytes_stable(self, rng):
        p = DbmParams.random((2, 2), 2, rng)
        assert serialize(deserialize(serialize(p))) == serialize(p)

    def test_missing_weights(self):
        doc = to_json(DbmParams.zeros((2, 2)))
        del doc["weights"]
        with pytest.raises(ParseError) as err:
            from_json(doc)
        assert err.value.path == "weights"

    def test_q_defaults_to_two(self):
        doc = to_json(DbmParams.zeros((2, 2)))
        del doc["q"]
        assert from_json(doc).q == 2

    def test_bad_shape_names_field(self):
        doc = to_json(DbmParams.zeros((2, 2, 1)))
        doc["biases"][2] = [0.0, 0.0]
        with pytest.raises(ParseError) as err:
            from_json(doc)
        assert err.value.path == "biases[2]"

    def test_invalid_json(self):
        with pytest.raises(ParseError):
            deserialize(b"{not json")
