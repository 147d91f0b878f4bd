"""LSTM cell closed forms, composition encoder, and optimizer behavior."""

import numpy as np
import pytest

from wordsync import autograd as ag
from wordsync import nn
from wordsync.autograd import ShapeError
from wordsync.optim import GradientError, OptimizerState


def lstm_oracle(x, h, c, w_x, w_h, b):
    """Straight-line duplicate of the gated update for cross-checking."""
    hs = h.size
    pre = w_x @ x + w_h @ h + b
    sig = lambda z: 1.0 / (1.0 + np.exp(-z))
    i, f = sig(pre[:hs]), sig(pre[hs:2 * hs])
    g, o = np.tanh(pre[2 * hs:3 * hs]), sig(pre[3 * hs:])
    c2 = f * c + i * g
    return o * np.tanh(c2), c2


def bilstm_oracle(seq, fwd, bwd, proj):
    h = np.zeros(fwd.hidden_size)
    c = np.zeros(fwd.hidden_size)
    for x in seq:
        h, c = lstm_oracle(x, h, c, fwd.w_x.values, fwd.w_h.values, fwd.b.values)
    hb = np.zeros(bwd.hidden_size)
    cb = np.zeros(bwd.hidden_size)
    for x in reversed(seq):
        hb, cb = lstm_oracle(x, hb, cb, bwd.w_x.values, bwd.w_h.values, bwd.b.values)
    out = np.concatenate([h, hb])
    for w, b_, act in zip(proj.weights, proj.biases, proj.activations):
        out = w.values @ out + b_.values
        if act == "tanh":
            out = np.tanh(out)
    return out


class TestLstmStep:
    def test_zero_params_zero_cell(self):
        cell = nn.RnnCellParams(3, 4)  # all zeros
        h, c = nn.lstm_step(ag.constant(np.ones(3)), ag.constant(np.zeros(4)),
                            ag.constant(np.zeros(4)), cell)
        np.testing.assert_allclose(h.values, 0.0, atol=1e-15)
        np.testing.assert_allclose(c.values, 0.0, atol=1e-15)

    def test_zero_params_closed_form(self):
        # gates sit at 0.5, candidate at 0: c' = c0/2, h' = 0.5*tanh(c0/2)
        cell = nn.RnnCellParams(3, 4)
        c0 = np.array([0.4, -1.2, 2.0, 0.0])
        h, c = nn.lstm_step(ag.constant(np.ones(3)), ag.constant(np.zeros(4)),
                            ag.constant(c0), cell)
        np.testing.assert_allclose(c.values, 0.5 * c0, atol=1e-12)
        np.testing.assert_allclose(h.values, 0.5 * np.tanh(0.5 * c0), atol=1e-12)

    def test_matches_straight_line_oracle(self):
        rng = np.random.default_rng(21)
        cell = nn.RnnCellParams(4, 5, rng)
        x, h0, c0 = rng.normal(size=4), rng.normal(size=5), rng.normal(size=5)
        h, c = nn.lstm_step(ag.constant(x), ag.constant(h0), ag.constant(c0), cell)
        eh, ec = lstm_oracle(x, h0, c0, cell.w_x.values, cell.w_h.values, cell.b.values)
        np.testing.assert_allclose(h.values, eh, atol=1e-10)
        np.testing.assert_allclose(c.values, ec, atol=1e-10)

    def test_hidden_state_bounded(self):
        rng = np.random.default_rng(2)
        cell = nn.RnnCellParams(3, 6, rng)
        h = ag.constant(np.zeros(6))
        c = ag.constant(np.zeros(6))
        for _ in range(20):
            h, c = nn.lstm_step(ag.constant(rng.normal(scale=5.0, size=3)), h, c, cell)
            assert np.all(np.abs(h.values) <= 1.0)
            assert np.all(np.isfinite(c.values))

    def test_size_mismatch(self):
        cell = nn.RnnCellParams(3, 4)
        with pytest.raises(ShapeError):
            nn.lstm_step(ag.constant(np.zeros(5)), ag.constant(np.zeros(4)),
                         ag.constant(np.zeros(4)), cell)

    def test_forget_bias_initialized(self):
        cell = nn.RnnCellParams(3, 4, np.random.default_rng(0))
        np.testing.assert_array_equal(cell.b.values[4:8], np.ones(4))
        np.testing.assert_array_equal(cell.b.values[:4], np.zeros(4))

    def test_gradients_against_finite_differences(self):
        rng = np.random.default_rng(17)
        cell = nn.RnnCellParams(3, 4, rng)
        x = ag.constant(rng.normal(size=3))
        h0 = ag.constant(rng.normal(size=4))
        c0 = ag.constant(rng.normal(size=4))

        def loss():
            h, c = nn.lstm_step(x, h0, c0, cell)
            return ag.sum_(ag.mul(h, ag.tanh(c)))

        assert ag.finite_diff_check(loss, list(cell.parameters().values()), rng=rng) < 1e-4


class TestBilstmEncode:
    def _random(self, rng, n=3):
        fwd = nn.RnnCellParams(3, 4, rng, "f")
        bwd = nn.RnnCellParams(3, 4, rng, "b")
        proj = nn.MlpParams([8, 3], ["tanh"], rng, "p")
        seq = [ag.constant(rng.normal(size=3)) for _ in range(n)]
        return fwd, bwd, proj, seq

    def test_single_element(self):
        rng = np.random.default_rng(31)
        fwd, bwd, proj, seq = self._random(rng, n=1)
        out = nn.bilstm_encode(seq, fwd, bwd, proj)
        expected = bilstm_oracle([seq[0].values], fwd, bwd, proj)
        np.testing.assert_allclose(out.values, expected, atol=1e-10)

    def test_order_sensitivity(self):
        rng = np.random.default_rng(37)
        fwd, bwd, proj, seq = self._random(rng, n=2)
        ab = nn.bilstm_encode(seq, fwd, bwd, proj).values
        ba = nn.bilstm_encode(list(reversed(seq)), fwd, bwd, proj).values
        assert not np.allclose(ab, ba)

    def test_matches_independent_reimplementation(self):
        rng = np.random.default_rng(41)
        fwd, bwd, proj, seq = self._random(rng, n=3)
        out = nn.bilstm_encode(seq, fwd, bwd, proj)
        expected = bilstm_oracle([t.values for t in seq], fwd, bwd, proj)
        np.testing.assert_allclose(out.values, expected, atol=1e-10)

    def test_empty_sequence_rejected(self):
        rng = np.random.default_rng(0)
        fwd, bwd, proj, _ = self._random(rng)
        with pytest.raises(ValueError, match="empty"):
            nn.bilstm_encode([], fwd, bwd, proj)

    def test_gradients(self):
        rng = np.random.default_rng(43)
        fwd, bwd, proj, seq = self._random(rng, n=3)
        params = (list(fwd.parameters().values()) + list(bwd.parameters().values())
                  + list(proj.parameters().values()))

        def loss():
            return ag.sum_(nn.bilstm_encode(seq, fwd, bwd, proj))

        assert ag.finite_diff_check(loss, params, rng=rng) < 1e-4


class TestOptimizer:
    def test_zero_gradient_leaves_parameters_unchanged(self):
        p = ag.parameter(np.array([1.0, 2.0]), name="p")
        opt = OptimizerState([p])
        before = p.values.copy()
        opt.step()
        np.testing.assert_array_equal(p.values, before)
        assert opt.step_count == 1

    def test_constant_positive_gradient_decreases_monotonically(self):
        p = ag.parameter(np.array([5.0]), name="p")
        opt = OptimizerState([p], learning_rate=0.01)
        values = [p.values[0]]
        for _ in range(100):
            p.grad[:] = 0.3
            opt.step()
            values.append(p.values[0])
        assert all(b < a for a, b in zip(values, values[1:]))

    def test_clipped_update_matches_manual_clip(self):
        rng = np.random.default_rng(51)
        g = rng.normal(scale=10.0, size=6)
        norm = np.sqrt((g * g).sum())
        assert norm > 5.0

        p1 = ag.parameter(np.zeros(6), name="a")
        opt1 = OptimizerState([p1], clip_norm=5.0)
        p1.grad[:] = g
        opt1.step()

        p2 = ag.parameter(np.zeros(6), name="b")
        opt2 = OptimizerState([p2], clip_norm=None)
        p2.grad[:] = g * (5.0 / norm)
        opt2.step()
        np.testing.assert_allclose(p1.values, p2.values, atol=1e-15)

    def test_nan_gradient_aborts_naming_parameter(self):
        p = ag.parameter(np.zeros(2), name="culprit")
        opt = OptimizerState([p])
        p.grad[0] = np.nan
        with pytest.raises(GradientError, match="culprit"):
            opt.step()

    def test_step_zeroes_gradients(self):
        p = ag.parameter(np.zeros(3), name="p")
        opt = OptimizerState([p])
        p.grad[:] = 1.0
        opt.step()
        np.testing.assert_array_equal(p.grad, np.zeros(3))
