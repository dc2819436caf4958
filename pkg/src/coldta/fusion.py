"""Context construction, cross-view attention, prediction and the loss."""

###############################################################################
# coldta - cold-start drug-target affinity regression
# Licensed under the MIT License.
###############################################################################
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING

from coldta import ops
from coldta.errors import ShapeError
from coldta.layers import Dense, LayerNorm
from coldta.tensor import Tensor, as_tensor

if TYPE_CHECKING:
    import numpy as np
    from numpy.typing import ArrayLike

    from coldta.config import TrainConfig
    from coldta.parameterstore import ParameterStore


class ContextView(Enum):
    """Which drug view a context or attention block belongs to."""

    INSTANCE = "ins"
    DISTRIBUTION = "dis"


@dataclass
class ContextMatrix:
    """A [K, d_t] joint drug/protein context tagged with its view."""

    values: Tensor
    view: ContextView


class ContextBuilder:
    """relu([1_K z^T | H_t] W + b) for one view."""

    def __init__(
        self: ContextBuilder,
        store: ParameterStore,
        view: ContextView,
        d_z: int,
        d_t: int,
        rng: np.random.Generator,
    ) -> None:
        """Register W and b of the view."""
        self.view = view
        self.d_z = d_z
        self.projection = Dense(
            store,
            f"fusion/context_{view.value}",
            d_z + d_t,
            d_t,
            rng,
        )

    def __call__(self: ContextBuilder, z: Tensor, h_t: Tensor) -> ContextMatrix:
        """Build the context of z[..., d_z] against H_t[..., K, d_t]."""
        if z.shape[-1] != self.d_z or z.shape[:-1] != h_t.shape[:-2]:
            msg = "build_context needs z[..., d_z] and H_t[..., K, d_t]"
            raise ShapeError(msg, z.shape, h_t.shape)
        rows = ops.broadcast_rows(z, h_t.shape[-2])
        joint = ops.concat([rows, h_t], axis=-1)
        return ContextMatrix(ops.relu(self.projection(joint)), self.view)


class CrossAttention:
    """Multi-head attention with queries from H_t and keys/values from C."""

    def __init__(
        self: CrossAttention,
        store: ParameterStore,
        view: ContextView,
        d_t: int,
        heads: int,
        rng: np.random.Generator,
    ) -> None:
        """Register the query, key, value and output projections of the view."""
        if d_t % heads != 0:
            msg = f"d_t={d_t} is not divisible by {heads} heads"
            raise ShapeError(msg, (d_t,))
        self.heads = heads
        self.head_dim = d_t // heads
        name = f"fusion/attention_{view.value}"
        self.query = Dense(store, f"{name}/query", d_t, d_t, rng)
        self.key = Dense(store, f"{name}/key", d_t, d_t, rng)
        self.value = Dense(store, f"{name}/value", d_t, d_t, rng)
        self.output = Dense(store, f"{name}/output", d_t, d_t, rng)

    def __call__(
        self: CrossAttention,
        h_t: Tensor,
        context: ContextMatrix,
    ) -> tuple[Tensor, list[Tensor]]:
        """Return O[..., K, d_t] and the per-head attention weights."""
        if h_t.shape != context.values.shape:
            msg = "cross attention needs H_t and C of equal shape"
            raise ShapeError(msg, h_t.shape, context.values.shape)
        q = self.query(h_t)
        k = self.key(context.values)
        v = self.value(context.values)
        scale = 1.0 / math.sqrt(self.head_dim)
        weights: list[Tensor] = []
        head_outputs: list[Tensor] = []
        for head in range(self.heads):
            start = head * self.head_dim
            q_h = ops.narrow(q, -1, start, self.head_dim)
            k_h = ops.narrow(k, -1, start, self.head_dim)
            v_h = ops.narrow(v, -1, start, self.head_dim)
            scores = ops.scale(ops.matmul(q_h, ops.transpose_last(k_h)), scale)
            attention = ops.softmax_rows(scores)
            weights.append(attention)
            head_outputs.append(ops.matmul(attention, v_h))
        return self.output(ops.concat(head_outputs, axis=-1)), weights


class Predictor:
    """LN, then an MLP with relu hidden layers and a single linear output."""

    def __init__(  # noqa: PLR0913
        self: Predictor,
        store: ParameterStore,
        in_features: int,
        hidden: tuple[int, ...],
        dropout: float,
        rng: np.random.Generator,
    ) -> None:
        """Register the normalization and the MLP."""
        self.norm = LayerNorm(store, "predictor/norm", in_features)
        self.dropout = dropout
        self.hidden: list[Dense] = []
        width = in_features
        for i, size in enumerate(hidden, start=1):
            self.hidden.append(Dense(store, f"predictor/hidden{i}", width, size, rng))
            width = size
        self.out = Dense(store, "predictor/out", width, 1, rng)

    def __call__(
        self: Predictor,
        features: Tensor,
        *,
        train: bool = False,
        rng: np.random.Generator | None = None,
    ) -> Tensor:
        """Map features[..., F] to predictions[...]."""
        x = self.norm(features)
        for layer in self.hidden:
            x = ops.dropout(ops.relu(layer(x)), self.dropout, train=train, rng=rng)
        y = self.out(x)
        return ops.reshape(y, y.shape[:-1])


@dataclass
class FusionOutput:
    """Everything the fusion head computed for one forward pass."""

    prediction: Tensor
    contexts: list[ContextMatrix] = field(default_factory=list)
    outputs: list[Tensor] = field(default_factory=list)
    attention: list[list[Tensor]] = field(default_factory=list)


class FusionHead:
    """
    Joint contexts, per-view cross attention and the affinity predictor.

    With fusion "concat" the contexts and attention are skipped and the
    predictor reads [z_ins | z_dis | mean over rows of H_t].
    """

    def __init__(
        self: FusionHead,
        store: ParameterStore,
        config: TrainConfig,
        rng: np.random.Generator,
    ) -> None:
        """Register one context builder and attention block per view."""
        self.views = [ContextView.INSTANCE]
        if config.dual_view is True:
            self.views.append(ContextView.DISTRIBUTION)
        self.attention_fusion = config.fusion == "attention"
        self.builders: dict[ContextView, ContextBuilder] = {}
        self.attention: dict[ContextView, CrossAttention] = {}
        if self.attention_fusion is True:
            for view in self.views:
                self.builders[view] = ContextBuilder(
                    store,
                    view,
                    config.d_z,
                    config.d_t,
                    rng,
                )
                self.attention[view] = CrossAttention(
                    store,
                    view,
                    config.d_t,
                    config.heads,
                    rng,
                )
            in_features = len(self.views) * config.d_t
        else:
            in_features = len(self.views) * config.d_z + config.d_t
        self.predictor = Predictor(
            store,
            in_features,
            config.mlp_hidden,
            config.dropout,
            rng,
        )

    def predict(
        self: FusionHead,
        outputs: list[Tensor],
        *,
        train: bool = False,
        rng: np.random.Generator | None = None,
    ) -> Tensor:
        """Average each view's rows, join the views and predict."""
        pooled = [ops.mean(o, axis=-2) for o in outputs]
        return self.predictor(ops.concat(pooled, axis=-1), train=train, rng=rng)

    def __call__(
        self: FusionHead,
        latents: list[Tensor],
        h_t: Tensor,
        *,
        train: bool = False,
        rng: np.random.Generator | None = None,
    ) -> FusionOutput:
        """Fuse one latent per view with the salient protein features."""
        if len(latents) != len(self.views):
            msg = f"expected {len(self.views)} latent view(s), got {len(latents)}"
            raise ShapeError(msg, *(z.shape for z in latents))
        if self.attention_fusion is False:
            joint = ops.concat([*latents, ops.mean(h_t, axis=-2)], axis=-1)
            return FusionOutput(self.predictor(joint, train=train, rng=rng))
        result = FusionOutput(prediction=Tensor(0.0))
        for view, z in zip(self.views, latents, strict=True):
            context = self.builders[view](z, h_t)
            output, weights = self.attention[view](h_t, context)
            result.contexts.append(context)
            result.outputs.append(output)
            result.attention.append(weights)
        result.prediction = self.predict(result.outputs, train=train, rng=rng)
        return result


def mse_loss(predicted: Tensor, observed: Tensor | ArrayLike) -> Tensor:
    """Return (1/N) sum (y - y_hat)^2 as a one element tensor."""
    target = as_tensor(observed)
    if predicted.shape != target.shape or predicted.values.size < 1:
        msg = "mse_loss needs two non-empty vectors of equal length"
        raise ShapeError(msg, predicted.shape, target.shape)
    return ops.mean_all(ops.square(ops.sub(predicted, target)))
