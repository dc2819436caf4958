"""The protein encoder: stacked convolutions and per-channel top-k pooling."""

###############################################################################
# coldta - cold-start drug-target affinity regression
# Licensed under the MIT License.
###############################################################################
from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

from coldta import ops
from coldta.errors import ParameterError, ShapeError
from coldta.layers import Conv1d, Embedding
from coldta.ops import Padding

if TYPE_CHECKING:
    import numpy as np
    from numpy.typing import NDArray

    from coldta.config import TrainConfig
    from coldta.parameterstore import ParameterStore
    from coldta.tensor import Tensor


@dataclass
class SalientFeatures:
    """The pooled [K, d_t] map and the H_conv row each value came from."""

    values: Tensor
    source_positions: NDArray[np.int64]


def extract_salient(h_conv: Tensor, k: int) -> SalientFeatures:
    """Keep the k largest activations of every channel of H_conv."""
    values, positions = ops.topk_per_channel(h_conv, k)
    return SalientFeatures(values, positions)


class ProteinEncoder:
    """
    Embedding, then conv(same) -> conv(same) -> conv(valid), each with relu.

    With widths [4, 8, 12] the feature map has L_t - 11 rows.
    """

    def __init__(
        self: ProteinEncoder,
        store: ParameterStore,
        config: TrainConfig,
        vocab_size: int,
        rng: np.random.Generator,
    ) -> None:
        """Register the embedding and the three convolutions."""
        if config.conv_length < 1:
            msg = (
                f"L_t={config.l_t} is too short for a final convolution of "
                f"width {config.target_widths[-1]}"
            )
            raise ParameterError(msg)
        if config.pooled_k > config.conv_length:
            msg = (
                f"top-k needs K <= L'_t, got K={config.pooled_k} and "
                f"L'_t={config.conv_length}"
            )
            raise ParameterError(msg)
        self.l_t = config.l_t
        self.k = config.pooled_k
        self.dropout = config.dropout
        self.embedding = Embedding(
            store,
            "target/embedding",
            vocab_size,
            config.d_e,
            rng,
        )
        paddings = (Padding.SAME, Padding.SAME, Padding.VALID)
        self.convs: list[Conv1d] = []
        channels = config.d_e
        for i, (width, padding) in enumerate(
            zip(config.target_widths, paddings, strict=True),
            start=1,
        ):
            shape = (width, channels, config.d_t)
            self.convs.append(Conv1d(store, f"target/conv{i}", shape, padding, rng))
            channels = config.d_t

    def conv_stack(self: ProteinEncoder, tokens: NDArray[np.int64]) -> Tensor:
        """Map target tokens[..., L_t] to H_conv[..., L'_t, d_t]."""
        if tokens.shape[-1] != self.l_t:
            msg = f"target tokens must have length L_t={self.l_t}"
            raise ShapeError(msg, tuple(tokens.shape))
        x = self.embedding(tokens)
        for conv in self.convs:
            x = ops.relu(conv(x))
        return x

    def __call__(
        self: ProteinEncoder,
        tokens: NDArray[np.int64],
        *,
        train: bool = False,
        rng: np.random.Generator | None = None,
    ) -> tuple[Tensor, SalientFeatures]:
        """Return H_conv and its pooled salient features."""
        h_conv = self.conv_stack(tokens)
        dropped = ops.dropout(h_conv, self.dropout, train=train, rng=rng)
        return h_conv, extract_salient(dropped, self.k)
