import numpy as np
import pytest

from claimtagger.errors import ContractError, NumericError
from claimtagger.nn import (
    Parameter,
    Tensor,
    concat,
    embedding_lookup,
    log_softmax,
    matmul,
    narrow,
    sigmoid,
    softmax_cross_entropy,
    softmax_probs,
    stack_rows,
    tanh,
)

from oracles import finite_difference_grads, relative_error


def test_square_gradient():
    x = Parameter(np.array(3.0), "x")
    loss = x * x
    loss.backward()
    assert loss.item() == 9.0
    assert x.grad == pytest.approx(6.0)


def test_softmax_cross_entropy_gradient_identity():
    rng = np.random.default_rng(0)
    z = rng.normal(size=5)
    logits = Parameter(z.copy(), "z")
    loss = softmax_cross_entropy(logits, 2)
    loss.backward()
    expected = softmax_probs(z)
    expected[2] -= 1.0
    np.testing.assert_allclose(logits.grad, expected, atol=1e-12)


def test_two_layer_tanh_network_matches_finite_differences():
    rng = np.random.default_rng(7)
    w1 = Parameter(rng.normal(size=(4, 3)) * 0.5, "w1")
    b1 = Parameter(rng.normal(size=4) * 0.1, "b1")
    w2 = Parameter(rng.normal(size=(2, 4)) * 0.5, "w2")
    x = Tensor(rng.normal(size=3))

    def forward():
        h = tanh(matmul(w1, x) + b1)
        return softmax_cross_entropy(matmul(w2, h), 1)

    loss = forward()
    loss.backward()
    numeric = finite_difference_grads(lambda: float(forward().data),
                                      [w1.data, b1.data, w2.data])
    for p, num in zip([w1, b1, w2], numeric):
        assert relative_error(p.grad, num) < 1e-4


def test_non_scalar_backward_rejected():
    t = Parameter(np.zeros(3), "t")
    with pytest.raises(ContractError):
        (t + 1.0).backward()


def test_nan_production_raises_numeric_error():
    big = Tensor(np.array([1e308]))
    with np.errstate(over="ignore"):
        with pytest.raises(NumericError) as excinfo:
            _ = big * big  # overflows to inf
    assert "mul" in str(excinfo.value)


def test_broadcast_add_gradient_shapes():
    a = Parameter(np.ones((3, 4)), "a")
    b = Parameter(np.ones(4), "b")
    loss = (a + b).sum()
    loss.backward()
    assert a.grad.shape == (3, 4)
    assert b.grad.shape == (4,)
    np.testing.assert_allclose(b.grad, 3.0)


def test_frozen_parameter_gets_no_gradient():
    frozen = Parameter(np.ones(3), "frozen", trainable=False)
    live = Parameter(np.ones(3), "live")
    loss = (frozen * live).sum()
    loss.backward()
    assert frozen.grad is None  # None means zero by convention
    np.testing.assert_allclose(live.grad, np.ones(3))


def test_gradient_accumulates_across_shared_use():
    x = Parameter(np.array(2.0), "x")
    loss = x * x + x * 3.0
    loss.backward()
    assert x.grad == pytest.approx(2 * 2.0 + 3.0)


def test_concat_and_narrow_roundtrip_gradients():
    a = Parameter(np.arange(3.0), "a")
    b = Parameter(np.arange(4.0), "b")
    joined = concat([a, b])
    assert joined.shape == (7,)
    tail = narrow(joined, 3, 4)
    loss = (tail * tail).sum()
    loss.backward()
    assert a.grad is None or np.all(a.grad == 0)
    np.testing.assert_allclose(b.grad, 2 * np.arange(4.0))


def test_stack_rows_gradient():
    rows = [Parameter(np.full(2, float(i)), f"r{i}") for i in range(3)]
    out = stack_rows(rows)
    assert out.shape == (3, 2)
    loss = (out * out).sum()
    loss.backward()
    for i, r in enumerate(rows):
        np.testing.assert_allclose(r.grad, 2.0 * i * np.ones(2))


def test_embedding_lookup_accumulates_by_row():
    table = Parameter(np.arange(8.0).reshape(4, 2), "emb")
    out = embedding_lookup(table, [1, 1, 3])
    loss = out.sum()
    loss.backward()
    expected = np.zeros((4, 2))
    expected[1] = 2.0
    expected[3] = 1.0
    np.testing.assert_allclose(table.grad, expected)


def test_embedding_lookup_range_guard():
    table = Parameter(np.zeros((4, 2)), "emb")
    with pytest.raises(ContractError):
        embedding_lookup(table, [4])


def test_sigmoid_tanh_values():
    t = Tensor(np.array([0.0, 100.0, -100.0]))
    s = sigmoid(t)
    np.testing.assert_allclose(s.data, [0.5, 1.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(tanh(t).data, [0.0, 1.0, -1.0], atol=1e-12)


def test_log_softmax_rows_normalize():
    rng = np.random.default_rng(3)
    t = Parameter(rng.normal(size=(4, 3)), "t")
    out = log_softmax(t)
    np.testing.assert_allclose(np.exp(out.data).sum(axis=1), np.ones(4), atol=1e-12)

    def forward():
        return (log_softmax(t) * Tensor(weights)).sum()

    weights = rng.normal(size=(4, 3))
    loss = (log_softmax(t) * Tensor(weights)).sum()
    loss.backward()
    numeric = finite_difference_grads(lambda: float(forward().data), [t.data])
    assert relative_error(t.grad, numeric[0]) < 1e-4
