"""Unit tests for context construction, cross attention and the predictor."""

###############################################################################
# coldta - cold-start drug-target affinity regression
# Licensed under the MIT License.
###############################################################################

from __future__ import annotations

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from coldta.errors import ShapeError
from coldta.fusion import (
    ContextBuilder,
    ContextMatrix,
    ContextView,
    CrossAttention,
    Predictor,
    mse_loss,
)
from coldta.layers import Dense
from coldta.parameterstore import ParameterStore
from coldta.tensor import Tensor, no_grad
from coldta.trainer import encode_for
from tests.common import MICRO, micro, micro_model, synthetic_records
from tests.gradcheck import check_gradients


def test_context_shape() -> None:
    """One non-negative d_t row per salient row."""
    rng = np.random.default_rng(0)
    builder = ContextBuilder(ParameterStore(), ContextView.INSTANCE, 6, 8, rng)
    z = Tensor(rng.standard_normal((2, 6)))
    h_t = Tensor(rng.standard_normal((2, 3, 8)))
    context = builder(z, h_t)
    assert context.values.shape == (2, 3, 8)
    assert context.view is ContextView.INSTANCE
    assert context.values.values.min() >= 0.0


def test_context_repeats_z() -> None:
    """Equal protein rows give equal context rows."""
    rng = np.random.default_rng(1)
    builder = ContextBuilder(ParameterStore(), ContextView.DISTRIBUTION, 4, 8, rng)
    row = rng.standard_normal(8)
    context = builder(Tensor(rng.standard_normal(4)), Tensor(np.stack([row, row])))
    assert_allclose(context.values.values[0], context.values.values[1])


def test_context_shape_mismatch() -> None:
    """z must carry the same leading axes as H_t."""
    rng = np.random.default_rng(0)
    builder = ContextBuilder(ParameterStore(), ContextView.INSTANCE, 6, 8, rng)
    with pytest.raises(ShapeError):
        builder(Tensor(np.zeros(6)), Tensor(np.zeros((2, 3, 8))))
    with pytest.raises(ShapeError):
        builder(Tensor(np.zeros((2, 5))), Tensor(np.zeros((2, 3, 8))))


def test_attention_rows_sum_to_one() -> None:
    """Every head's weights are a distribution over context rows."""
    rng = np.random.default_rng(2)
    store = ParameterStore()
    builder = ContextBuilder(store, ContextView.INSTANCE, 6, 8, rng)
    attention = CrossAttention(store, ContextView.INSTANCE, 8, 2, rng)
    h_t = Tensor(rng.standard_normal((2, 3, 8)))
    output, weights = attention(h_t, builder(Tensor(rng.standard_normal((2, 6))), h_t))
    assert output.shape == (2, 3, 8)
    assert len(weights) == 2
    for w in weights:
        assert w.shape == (2, 3, 3)
        assert_allclose(w.values.sum(axis=-1), 1.0)
        assert w.values.min() >= 0.0


def test_attention_needs_divisible_heads() -> None:
    """d_t is split evenly over the heads."""
    with pytest.raises(ShapeError):
        CrossAttention(
            ParameterStore(),
            ContextView.INSTANCE,
            8,
            3,
            np.random.default_rng(),
        )


def test_views_have_separate_parameters() -> None:
    """Both views build their own context and attention weights."""
    model = micro_model()
    names = model.store.names()
    for view in ("ins", "dis"):
        assert f"fusion/context_{view}/weight" in names
        assert f"fusion/attention_{view}/query/weight" in names


def test_predictor_shape() -> None:
    """One prediction per row."""
    rng = np.random.default_rng(3)
    predictor = Predictor(ParameterStore(), 16, (8, 4), 0.0, rng)
    assert predictor(Tensor(rng.standard_normal((5, 16)))).shape == (5,)


def test_forward_trace() -> None:
    """The dual-view model fuses two views with K attended rows each."""
    model = micro_model()
    batch = encode_for(model, synthetic_records()[:4])
    trace = model.forward(batch.drug_tokens, batch.target_tokens)
    assert trace.prediction.shape == (4,)
    assert [c.view for c in trace.fusion.contexts] == [
        ContextView.INSTANCE,
        ContextView.DISTRIBUTION,
    ]
    assert trace.fusion.outputs[0].shape == (4, MICRO.k, MICRO.d_t)


def test_concat_fusion() -> None:
    """The concat variant has no attention parameters."""
    model = micro_model(config=micro(fusion="concat"))
    assert not any(name.startswith("fusion/") for name in model.store.names())
    batch = encode_for(model, synthetic_records()[:4])
    trace = model.forward(batch.drug_tokens, batch.target_tokens)
    assert trace.prediction.shape == (4,)
    assert trace.fusion.attention == []


def test_wrong_number_of_views() -> None:
    """A dual-view head needs two latents."""
    model = micro_model()
    with pytest.raises(ShapeError):
        model.predict_head(
            Tensor(np.zeros((1, MICRO.d_z))),
            None,
            Tensor(np.zeros((1, MICRO.k, MICRO.d_t))),
        )


def test_mse_loss() -> None:
    """The mean of squared differences, as a one element tensor."""
    loss = mse_loss(Tensor([1.0, 2.0, 3.0]), [1.0, 2.0, 5.0])
    assert loss.shape == (1,)
    assert loss.item() == pytest.approx(4.0 / 3.0)


def test_mse_loss_mismatch() -> None:
    """Lengths must agree and be non-zero."""
    with pytest.raises(ShapeError):
        mse_loss(Tensor([1.0, 2.0]), [1.0])
    with pytest.raises(ShapeError):
        mse_loss(Tensor(np.zeros(0)), np.zeros(0))


def test_end_to_end_gradient() -> None:
    """The loss differentiates correctly through the whole model."""
    model = micro_model()
    batch = encode_for(model, synthetic_records()[:3])
    names = [
        "drug/embedding/table",
        "drug/gated2/gate/kernels",
        "drug/mu/weight",
        "drug/deconv1/kernels",
        "target/conv3/kernels",
        "fusion/context_ins/weight",
        "fusion/attention_dis/query/weight",
        "predictor/norm/gain",
        "predictor/hidden1/weight",
        "predictor/out/bias",
    ]
    params = [model.store[name] for name in names]
    error = check_gradients(lambda: model.loss(batch)[0], params, entries=8)
    assert error < 1e-3


def test_attention_matches_direct_evaluation() -> None:
    """Per-head weights and outputs agree with a plain numpy evaluation."""
    rng = np.random.default_rng(4)
    attention = CrossAttention(ParameterStore(), ContextView.INSTANCE, 8, 2, rng)
    h_t = rng.standard_normal((4, 8))
    context = rng.standard_normal((4, 8))
    output, weights = attention(
        Tensor(h_t),
        ContextMatrix(Tensor(context), ContextView.INSTANCE),
    )

    def project(x: np.ndarray, layer: Dense) -> np.ndarray:
        return x @ layer.weight.values + layer.bias.values

    q = project(h_t, attention.query)
    k = project(context, attention.key)
    v = project(context, attention.value)
    heads = []
    for head in range(2):
        cols = slice(4 * head, 4 * head + 4)
        scores = q[:, cols] @ k[:, cols].T / 2.0
        expected = np.exp(scores) / np.exp(scores).sum(axis=1, keepdims=True)
        assert_allclose(weights[head].values, expected, rtol=0.0, atol=1e-9)
        heads.append(expected @ v[:, cols])
    joined = np.concatenate(heads, axis=1)
    assert_allclose(output.values, project(joined, attention.output), atol=1e-9)


def test_single_context_row_takes_all_weight() -> None:
    """With K = 1 every weight is exactly 1."""
    rng = np.random.default_rng(5)
    attention = CrossAttention(ParameterStore(), ContextView.INSTANCE, 8, 2, rng)
    context = ContextMatrix(Tensor(rng.standard_normal((1, 8))), ContextView.INSTANCE)
    _, weights = attention(Tensor(rng.standard_normal((1, 8))), context)
    for w in weights:
        assert_array_equal(w.values, 1.0)


def test_predict_zero_inputs() -> None:
    """Zero features, zero shift and zero biases predict exactly 0."""
    model = micro_model()
    zeros = Tensor(np.zeros((1, MICRO.k, MICRO.d_t)))
    assert model.fusion.predict([zeros, zeros]).values[0] == 0.0


def test_predict_views_are_not_symmetric() -> None:
    """Swapping the instance and distribution outputs changes the estimate."""
    model = micro_model()
    rng = np.random.default_rng(6)
    o_ins = Tensor(rng.standard_normal((1, MICRO.k, MICRO.d_t)))
    o_dis = Tensor(rng.standard_normal((1, MICRO.k, MICRO.d_t)))
    with no_grad():
        forward = model.fusion.predict([o_ins, o_dis]).item()
        swapped = model.fusion.predict([o_dis, o_ins]).item()
    assert forward != swapped


def test_eval_forward_is_bitwise_repeatable() -> None:
    """Eval mode has no randomness, so repeated passes agree exactly."""
    model = micro_model()
    batch = encode_for(model, synthetic_records()[:4])
    with no_grad():
        first = model.forward(batch.drug_tokens, batch.target_tokens).prediction
        second = model.forward(batch.drug_tokens, batch.target_tokens).prediction
    assert_array_equal(first.values, second.values)
