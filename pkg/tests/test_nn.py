import numpy as np
import pytest

from textless.nn import (
    LSTM, Adam, Conv1d, Embedding, LayerNorm, Linear, LSTMCell, Module, NonFiniteGradient,
    clip_grad_norm, grad_check, log_softmax, softmax_xent,
)

F64 = np.float64


class XentProbe(Module):
    """softmax_xent as a module so the gradient checker can probe its input."""

    def __init__(self, target):
        self.target = target

    def forward(self, logits):
        loss, self._g = softmax_xent(logits, self.target)
        return np.array(loss)

    def backward(self, r):
        return self._g * r


def test_linear_identity_and_empty():
    lin = Linear(3, 3, np.random.default_rng(0), F64)
    lin.W.data[...] = np.eye(3)
    lin.b.data[...] = 0
    x = np.random.default_rng(1).normal(size=(4, 3))
    np.testing.assert_array_equal(lin.forward(x), x)
    lin.zero_grad()
    y = lin.forward(np.zeros((0, 3)))
    assert y.shape == (0, 3)
    lin.backward(np.zeros((0, 3)))
    assert not lin.W.grad.any() and not lin.b.grad.any()


@pytest.mark.parametrize("seed", range(3))
def test_linear_gradcheck(seed):
    rng = np.random.default_rng(seed)
    n_in, n_out = rng.integers(2, 7, size=2)
    lin = Linear(int(n_in), int(n_out), rng, F64)
    err = grad_check(lin, lambda r: r.normal(size=(3, 2, int(n_in))), seed=seed)
    assert err < 1e-6


def test_conv_identity_and_stride():
    conv = Conv1d(1, 1, 1, np.random.default_rng(0), dtype=F64)
    conv.W.data[...] = 1
    conv.b.data[...] = 0
    x = np.random.default_rng(1).normal(size=(2, 1, 9))
    np.testing.assert_array_equal(conv.forward(x), x)
    down = Conv1d(2, 3, 3, np.random.default_rng(0), stride=2, padding=1, dtype=F64)
    assert down.forward(np.zeros((1, 2, 16))).shape == (1, 3, 8)
    enc = Conv1d(2, 3, 4, np.random.default_rng(0), stride=2, padding=1, dtype=F64)
    for t in (15, 16, 33):
        assert enc.forward(np.zeros((1, 2, t))).shape[2] == t // 2


def test_conv_matches_naive_loop():
    rng = np.random.default_rng(5)
    conv = Conv1d(3, 2, 4, rng, stride=2, padding=1, dtype=F64)
    x = rng.normal(size=(2, 3, 11))
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1)))
    t_out = (11 + 2 - 4) // 2 + 1
    ref = np.zeros((2, 2, t_out))
    for b in range(2):
        for o in range(2):
            for t in range(t_out):
                ref[b, o, t] = np.sum(xp[b, :, 2 * t : 2 * t + 4] * conv.W.data[o]) + conv.b.data[o]
    np.testing.assert_allclose(conv.forward(x), ref, atol=1e-12)


@pytest.mark.parametrize("stride,padding", [(1, 0), (1, 1), (2, 1)])
def test_conv_gradcheck(stride, padding):
    conv = Conv1d(3, 4, 3, np.random.default_rng(0), stride=stride, padding=padding, dtype=F64)
    assert grad_check(conv, lambda r: r.normal(size=(2, 3, 10))) < 1e-6


def test_layernorm_gradcheck():
    ln = LayerNorm(5, F64)
    ln.gain.data[...] = np.random.default_rng(0).normal(size=5)
    assert grad_check(ln, lambda r: r.normal(size=(3, 4, 5))) < 1e-6


def test_lstm_cell_closed_forms():
    cell = LSTMCell(3, 4, np.random.default_rng(0), F64)
    for p in cell.params():
        p.data[...] = 0
    h, c = cell.forward(np.zeros((2, 3)), np.zeros((2, 4)), np.zeros((2, 4)))
    assert not h.any() and not c.any()
    # forget gate saturated open, input gate closed
    cell.b.data[4:8] = 10.0
    cell.b.data[0:4] = -10.0
    c_prev = np.random.default_rng(1).normal(size=(2, 4))
    _, c = cell.forward(np.ones((2, 3)), np.zeros((2, 4)), c_prev)
    assert np.max(np.abs(c - c_prev)) < 1e-3


def test_lstm_bptt_gradcheck():
    lstm = LSTM(3, 4, np.random.default_rng(2), F64)
    assert grad_check(lstm, lambda r: r.normal(size=(2, 5, 3))) < 1e-5


def test_lstm_matches_cell_steps():
    rng = np.random.default_rng(3)
    lstm = LSTM(3, 4, rng, F64)
    x = rng.normal(size=(2, 6, 3))
    out = lstm.forward(x)
    h = c = np.zeros((2, 4))
    for t in range(6):
        h, c, _ = lstm.cell.step(x[:, t], h, c)
        np.testing.assert_allclose(out[:, t], h, atol=1e-12)


def test_embedding():
    emb = Embedding(4, 4, np.random.default_rng(0), F64)
    emb.E.data[...] = np.eye(4)
    np.testing.assert_array_equal(emb.forward(np.array([[2, 0]])), [[[0, 0, 1, 0], [1, 0, 0, 0]]])
    emb.zero_grad()
    emb.forward(np.array([1, 1, 1, 3]))
    emb.backward(np.ones((4, 4)))
    assert emb.E.grad[1].tolist() == [3, 3, 3, 3] and emb.E.grad[3].tolist() == [1, 1, 1, 1]
    with pytest.raises(IndexError):
        emb.forward(np.array([4]))


def test_embedding_gradcheck():
    emb = Embedding(6, 3, np.random.default_rng(1), F64)
    assert grad_check(emb, lambda r: r.integers(0, 6, size=(2, 7))) < 1e-6


def test_softmax_xent_closed_forms():
    loss, _ = softmax_xent(np.zeros((3, 7)), np.array([0, 3, 6]))
    assert np.isclose(loss, np.log(7))
    logits = np.zeros((1, 4))
    logits[0, 2] = 50.0
    loss, _ = softmax_xent(logits, np.array([2]))
    assert loss < 1e-20
    z = np.random.default_rng(0).normal(size=(5, 6))
    t = np.array([0, 1, 2, 3, 4])
    _, g = softmax_xent(z.copy(), t)
    p = np.exp(log_softmax(z))
    p[np.arange(5), t] -= 1
    np.testing.assert_allclose(g, p / 5, atol=1e-14)


def test_softmax_xent_gradcheck():
    probe = XentProbe(np.array([1, 0, 3]))
    assert grad_check(probe, lambda r: r.normal(size=(3, 5))) < 1e-6


def test_adam_examples():
    lin = Linear(2, 2, np.random.default_rng(0), F64)
    before = [p.data.copy() for p in lin.params()]
    opt = Adam(lin.params())
    opt.step(0.1)
    for b, p in zip(before, lin.params()):
        np.testing.assert_array_equal(b, p.data)
    for p in lin.params():
        p.grad[...] = 0.37
    opt2 = Adam(lin.params())
    start = [p.data.copy() for p in lin.params()]
    opt2.step(1e-3)
    for s, p in zip(start, lin.params()):
        np.testing.assert_allclose(p.data - s, -1e-3, rtol=1e-6)


def test_adam_determinism_and_nonfinite():
    def run():
        lin = Linear(3, 2, np.random.default_rng(7), F64)
        opt = Adam(lin.params())
        for k in range(5):
            for p in lin.params():
                p.grad[...] = np.sin(np.arange(p.data.size).reshape(p.data.shape) + k)
            opt.step(1e-2)
        return [p.data.copy() for p in lin.params()]

    for a, b in zip(run(), run()):
        np.testing.assert_array_equal(a, b)
    lin = Linear(2, 2, np.random.default_rng(0), F64)
    lin.W.grad[0, 0] = np.nan
    with pytest.raises(NonFiniteGradient):
        Adam(lin.params()).step(1e-3)


def test_clip_grad_norm():
    lin = Linear(2, 2, np.random.default_rng(0), F64)
    for p in lin.params():
        p.grad[...] = 1.0
    norm = clip_grad_norm(lin.params(), 1.0)
    assert np.isclose(norm, np.sqrt(6))
    total = np.sqrt(sum((p.grad ** 2).sum() for p in lin.params()))
    assert np.isclose(total, 1.0)


def test_module_dtype_and_names():
    lstm = LSTM(2, 3, np.random.default_rng(0))
    assert set(lstm.named_params()) == {"cell.Wx", "cell.Wh", "cell.b"}
    lstm.to(np.float64)
    assert all(p.data.dtype == np.float64 for p in lstm.params())
    assert lstm.n_params() == 4 * 3 * 2 + 4 * 3 * 3 + 4 * 3
