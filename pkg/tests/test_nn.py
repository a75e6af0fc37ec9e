import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hypersac.errors import DimensionError
from hypersac.nn import (DenseLayer, LstmCellParams, MlpNetwork, gaussian_log_prob, lstm_step,
                         mlp_forward, tanh_squash_correction)


def naive_mlp(net, x):
    """Nested-loop forward pass used as an independent oracle."""
    h = list(x)
    for k, layer in enumerate(net.layers):
        out = []
        for i in range(layer.out_dim):
            acc = layer.biases[i]
            for j in range(layer.in_dim):
                acc += layer.weights[i, j] * h[j]
            out.append(acc if k == len(net.layers) - 1 else max(acc, 0.0))
        h = out
    return np.array(h)


def naive_lstm(p, x, h, c):
    """Gate-by-gate transcription of the LSTM cell."""
    H = p.hidden_dim

    def sig(z):
        return 1.0 / (1.0 + math.exp(-z))

    def pre(gate, unit):
        wi, wh, b = p.gate(gate)
        return b[unit] + sum(wi[unit, j] * x[j] for j in range(len(x))) + \
            sum(wh[unit, j] * h[j] for j in range(H))

    h_new, c_new = np.zeros(H), np.zeros(H)
    for u in range(H):
        i = sig(pre("input", u))
        f = sig(pre("forget", u))
        o = sig(pre("output", u))
        g = math.tanh(pre("candidate", u))
        c_new[u] = f * c[u] + i * g
        h_new[u] = o * math.tanh(c_new[u])
    return h_new, c_new


def test_identity_layer():
    net = MlpNetwork([DenseLayer(np.array([[1.0]]), np.array([0.0]))])
    assert mlp_forward(net, np.array([3.5]))[0] == 3.5


def test_zero_weights_give_bias():
    net = MlpNetwork([DenseLayer(np.zeros((3, 4)), np.array([0.5, -2.0, 1.0]))])
    np.testing.assert_array_equal(mlp_forward(net, np.arange(4.0)), [0.5, -2.0, 1.0])


def test_reference_value_net_matches_loop_oracle(rng):
    net = MlpNetwork.init([8, 256, 256, 1], rng)
    x = rng.normal(size=8)
    np.testing.assert_allclose(mlp_forward(net, x), naive_mlp(net, x), rtol=0, atol=1e-10)


def test_batch_rows_match_single_calls(rng):
    net = MlpNetwork.init([4, 6, 3], rng)
    xs = rng.normal(size=(5, 4))
    batch = mlp_forward(net, xs)
    for k in range(5):
        np.testing.assert_allclose(batch[k], mlp_forward(net, xs[k]), rtol=0, atol=1e-14)


def test_forward_is_deterministic(rng):
    net = MlpNetwork.init([8, 16, 1], rng)
    x = rng.normal(size=8)
    assert mlp_forward(net, x).tobytes() == mlp_forward(net, x).tobytes()


def test_dimension_mismatch_names_layer():
    with pytest.raises(DimensionError) as info:
        MlpNetwork([DenseLayer(np.zeros((3, 2)), np.zeros(3)),
                    DenseLayer(np.zeros((1, 4)), np.zeros(1))])
    assert "layer 1" in str(info.value)
    net = MlpNetwork.init([3, 2], np.random.default_rng(0))
    with pytest.raises(DimensionError):
        mlp_forward(net, np.zeros(4))


def test_nonfinite_weights_rejected():
    with pytest.raises(ValueError):
        DenseLayer(np.array([[np.nan]]), np.zeros(1))


def test_lstm_zero_weights_closed_form():
    p = LstmCellParams.zeros(5, 8)
    h, c = lstm_step(p, np.ones(5), np.ones(8), np.ones(8))
    np.testing.assert_allclose(c, 0.5, rtol=1e-15)
    np.testing.assert_allclose(h, 0.5 * math.tanh(0.5), rtol=1e-15)
    assert abs(h[0] - 0.231059) < 1e-6


def test_lstm_saturated_forget_gate_keeps_cell():
    p = LstmCellParams.zeros(3, 4)
    p.gate("forget")[2][:] = 20.0
    p.gate("input")[2][:] = -20.0
    cell = np.array([0.3, -1.2, 2.0, 0.0])
    _, c = lstm_step(p, np.zeros(3), np.zeros(4), cell)
    np.testing.assert_allclose(c, cell, atol=1e-8)


@pytest.mark.parametrize("seed", range(5))
def test_lstm_matches_gate_oracle(seed):
    rng = np.random.default_rng(seed)
    p = LstmCellParams.init(5, 4, rng)
    x, h, c = rng.normal(size=5), rng.normal(size=4), rng.normal(size=4)
    h1, c1 = lstm_step(p, x, h, c)
    h2, c2 = naive_lstm(p, x, h, c)
    np.testing.assert_allclose(h1, h2, rtol=0, atol=1e-10)
    np.testing.assert_allclose(c1, c2, rtol=0, atol=1e-10)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 6), st.integers(1, 9), st.integers(1, 4), st.integers(0, 10**6))
def test_lstm_preserves_dimensions(input_dim, hidden_dim, batch, seed):
    rng = np.random.default_rng(seed)
    p = LstmCellParams.init(input_dim, hidden_dim, rng)
    h, c = lstm_step(p, rng.normal(size=(batch, input_dim)), rng.normal(size=(batch, hidden_dim)),
                     rng.normal(size=(batch, hidden_dim)))
    assert h.shape == c.shape == (batch, hidden_dim)


def test_lstm_rejects_bad_shapes():
    p = LstmCellParams.zeros(3, 4)
    with pytest.raises(DimensionError):
        lstm_step(p, np.zeros(2), np.zeros(4), np.zeros(4))
    with pytest.raises(DimensionError):
        lstm_step(p, np.zeros(3), np.zeros(4), np.zeros(5))


def test_gaussian_log_prob_at_mode():
    assert gaussian_log_prob([0.0], [0.0], [0.0]) == pytest.approx(-0.918939, abs=1e-6)
    assert gaussian_log_prob([0.0], [0.0], [0.0]) == pytest.approx(-0.5 * math.log(2 * math.pi),
                                                                   abs=1e-15)


def test_gaussian_log_prob_translation_invariant(rng):
    m, s, v = rng.normal(size=5), rng.normal(size=5) * 0.3, rng.normal(size=5)
    shift = 3.7
    assert gaussian_log_prob(m + shift, s, v + shift) == pytest.approx(
        gaussian_log_prob(m, s, v), abs=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_gaussian_log_prob_matches_density_product(seed):
    rng = np.random.default_rng(seed)
    m, s, v = rng.normal(size=5), rng.normal(size=5) * 0.5, rng.normal(size=5)
    density = 1.0
    for mu, ls, x in zip(m, s, v):
        sd = math.exp(ls)
        density *= math.exp(-0.5 * ((x - mu) / sd) ** 2) / (sd * math.sqrt(2 * math.pi))
    assert gaussian_log_prob(m, s, v) == pytest.approx(math.log(density), abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.floats(-3, 3), st.floats(-2, 1), st.floats(-3, 3))
def test_gaussian_log_prob_peaks_at_mean(mean, log_std, value):
    assert gaussian_log_prob([mean], [log_std], [mean]) >= gaussian_log_prob(
        [mean], [log_std], [value])


def test_log_std_is_clamped():
    assert gaussian_log_prob([0.0], [50.0], [1.0]) == gaussian_log_prob([0.0], [2.0], [1.0])


def test_squash_correction_cases(rng):
    assert tanh_squash_correction(np.zeros(1)) == pytest.approx(math.log(1 + 1e-6), abs=1e-15)
    sat = tanh_squash_correction(np.array([20.0, -20.0]))
    assert math.isfinite(sat)
    assert sat == pytest.approx(2 * math.log(1e-6), rel=1e-6)
    u = rng.normal(size=5)
    oracle = sum(math.log(1 - math.tanh(x) ** 2 + 1e-6) for x in u)
    assert tanh_squash_correction(u) == pytest.approx(oracle, abs=1e-12)
