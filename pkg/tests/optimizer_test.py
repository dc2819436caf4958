"""Unit tests for the Adam optimizer."""

###############################################################################
# coldta - cold-start drug-target affinity regression
# Licensed under the MIT License.
###############################################################################

from __future__ import annotations

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from coldta.errors import DivergenceError, ParameterError
from coldta.optimizer import Adam, adam_step
from coldta.parameterstore import ParameterStore


def test_first_step_moves_by_lr() -> None:
    """Bias correction makes the first step exactly lr * sign(g) when eps = 0."""
    param = np.array([1.0, -2.0, 3.0])
    grad = np.array([0.5, -4.0, 1e-3])
    adam_step(param, grad, np.zeros(3), np.zeros(3), 1, lr=1e-3, eps=0.0)
    assert_allclose(param, [1.0 - 1e-3, -2.0 + 1e-3, 3.0 - 1e-3], rtol=0, atol=1e-15)


def test_two_steps_against_reference() -> None:
    """Two steps match the textbook recurrence."""
    lr, b1, b2, eps, wd = 1e-2, 0.9, 0.999, 1e-8, 0.01
    param = np.array([0.3, -0.7])
    m = np.zeros(2)
    v = np.zeros(2)
    expected = param.copy()
    em = np.zeros(2)
    ev = np.zeros(2)
    for t, grad in enumerate([np.array([0.2, -0.1]), np.array([-0.4, 0.3])], start=1):
        g = grad + wd * expected
        em = b1 * em + (1 - b1) * g
        ev = b2 * ev + (1 - b2) * g * g
        m_hat = em / (1 - b1**t)
        v_hat = ev / (1 - b2**t)
        expected = expected - lr * m_hat / (np.sqrt(v_hat) + eps)
        adam_step(
            param,
            grad,
            m,
            v,
            t,
            lr=lr,
            beta1=b1,
            beta2=b2,
            eps=eps,
            weight_decay=wd,
        )
    assert_allclose(param, expected, rtol=0, atol=1e-12)


def test_weight_decay_without_gradient() -> None:
    """Decay alone pulls parameters towards zero."""
    param = np.array([2.0, -2.0])
    adam_step(param, np.zeros(2), np.zeros(2), np.zeros(2), 1, lr=0.1, weight_decay=0.5)
    assert_allclose(param, [1.9, -1.9])


def test_bad_step_count() -> None:
    """t starts at 1."""
    with pytest.raises(ParameterError):
        adam_step(np.zeros(1), np.zeros(1), np.zeros(1), np.zeros(1), 0, lr=0.1)


def test_shape_mismatch() -> None:
    """param, grad and moments share one shape."""
    with pytest.raises(ParameterError):
        adam_step(np.zeros(2), np.zeros(3), np.zeros(2), np.zeros(2), 1, lr=0.1)


def test_padding_row_stays_zero() -> None:
    """The padding row of a table never moves."""
    store = ParameterStore()
    table = store.register("table", np.ones((4, 3)), padding_row=0)
    other = store.register("other", np.ones(2))
    table.grad = np.ones((4, 3))
    optimizer = Adam(store, 0.1, weight_decay=0.1)
    optimizer.step()
    assert_array_equal(table.values[0], 0.0)
    assert np.all(table.values[1:] < 1.0)
    # No gradient, only decay.
    assert np.all(other.values < 1.0)
    assert optimizer.t == 1


def test_non_finite_gradient() -> None:
    """Nothing is updated and the parameter is named."""
    store = ParameterStore()
    good = store.register("a/good", np.ones(2))
    bad = store.register("b/bad", np.ones(2))
    good.grad = np.ones(2)
    bad.grad = np.array([1.0, np.nan])
    optimizer = Adam(store, 0.1)
    with pytest.raises(DivergenceError) as exc:
        optimizer.step()
    assert exc.value.parameter == "b/bad"
    assert "b/bad" in str(exc.value)
    assert_array_equal(good.values, 1.0)
    assert optimizer.t == 0


def test_load_state() -> None:
    """A restored optimizer continues exactly like the original."""
    rng = np.random.default_rng(0)
    first = ParameterStore()
    second = ParameterStore()
    a = first.register("w", rng.standard_normal(5))
    b = second.register("w", a.values.copy())
    original = Adam(first, 0.01)
    for _ in range(3):
        a.grad = rng.standard_normal(5)
        original.step()
    b.values[...] = a.values
    restored = Adam(second, 0.01)
    restored.load_state(
        {k: v.copy() for k, v in original.state_arrays().items()},
        original.t,
    )
    grad = rng.standard_normal(5)
    a.grad = grad
    b.grad = grad.copy()
    original.step()
    restored.step()
    assert restored.t == 4  # noqa: PLR2004
    assert_array_equal(a.values, b.values)
