"""Unit tests for the ParameterStore class."""

###############################################################################
# coldta - cold-start drug-target affinity regression
# Licensed under the MIT License.
###############################################################################

from __future__ import annotations

import numpy as np
import pytest
from numpy.testing import assert_array_equal

from coldta.errors import ParameterError, ShapeError
from coldta.parameterstore import ParameterStore


def filled() -> ParameterStore:
    """A store with three parameters registered out of order."""
    store = ParameterStore()
    store.register("b/weight", np.ones((2, 3)))
    store.register("a/table", np.ones((4, 2)), padding_row=0)
    store.register("c/bias", np.zeros(3))
    return store


def test_register() -> None:
    """Registered tensors are named leaves that need gradients."""
    store = filled()
    weight = store["b/weight"]
    assert weight.requires_grad is True
    assert weight.is_leaf is True
    assert weight.name == "b/weight"
    assert "b/weight" in store
    assert len(store) == 3  # noqa: PLR2004


def test_duplicate_name() -> None:
    """Names are unique."""
    store = filled()
    with pytest.raises(ParameterError):
        store.register("c/bias", np.zeros(3))


def test_missing_name() -> None:
    """Unknown names are reported."""
    with pytest.raises(ParameterError):
        _ = filled()["nope"]


def test_padding_row() -> None:
    """The padding row starts at zero and is remembered."""
    store = filled()
    assert_array_equal(store["a/table"].values[0], 0.0)
    assert_array_equal(store["a/table"].values[1:], 1.0)
    assert store.padding_row("a/table") == 0
    assert store.padding_row("b/weight") is None


def test_sorted_order() -> None:
    """Iteration follows the names, not the registration order."""
    store = filled()
    assert store.names() == ["a/table", "b/weight", "c/bias"]
    assert [name for name, _ in store] == store.names()


def test_size() -> None:
    """Scalar count over every tensor."""
    assert filled().size() == 8 + 6 + 3


def test_zero_grad() -> None:
    """Gradients are dropped."""
    store = filled()
    store["c/bias"].grad = np.ones(3)
    store.zero_grad()
    assert store["c/bias"].grad is None


def test_snapshot_and_load() -> None:
    """Snapshots are copies and load writes in place."""
    store = filled()
    snapshot = store.snapshot()
    weight = store["b/weight"]
    weight.values[...] = 5.0
    assert_array_equal(snapshot["b/weight"], 1.0)
    store.load(snapshot)
    assert store["b/weight"] is weight
    assert_array_equal(weight.values, 1.0)


def test_load_mismatch() -> None:
    """Names and shapes must match exactly."""
    store = filled()
    arrays = store.snapshot()
    del arrays["c/bias"]
    with pytest.raises(ParameterError) as exc:
        store.load(arrays)
    assert "c/bias" in str(exc.value)
    arrays = store.snapshot()
    arrays["c/bias"] = np.zeros(4)
    with pytest.raises(ShapeError):
        store.load(arrays)


def test_summary_string() -> None:
    """One row per parameter plus the total."""
    lines = filled().summary_string().splitlines()
    assert len(lines) == 4  # noqa: PLR2004
    assert lines[0].startswith("a/table")
    assert lines[0].endswith("4x2")
    assert lines[-1].split() == ["total", "17"]
