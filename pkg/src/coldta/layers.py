"""Parameterized building blocks shared by the encoders and the fusion head."""

###############################################################################
# coldta - cold-start drug-target affinity regression
# Licensed under the MIT License.
###############################################################################
from __future__ import annotations

import math
from typing import TYPE_CHECKING

import numpy as np

from coldta import ops
from coldta.ops import Padding

if TYPE_CHECKING:
    from numpy.typing import NDArray

    from coldta.parameterstore import ParameterStore
    from coldta.tensor import Tensor


def glorot_uniform(
    rng: np.random.Generator,
    shape: tuple[int, ...],
    fan_in: int,
    fan_out: int,
) -> NDArray[np.float64]:
    """Draw weights uniformly from +/- sqrt(6 / (fan_in + fan_out))."""
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


class Dense:
    """x @ W + b, registered as `<name>/weight` and `<name>/bias`."""

    def __init__(
        self: Dense,
        store: ParameterStore,
        name: str,
        n_in: int,
        n_out: int,
        rng: np.random.Generator,
    ) -> None:
        """Register the weight and bias of the projection."""
        self.weight = store.register(
            f"{name}/weight",
            glorot_uniform(rng, (n_in, n_out), n_in, n_out),
        )
        self.bias = store.register(f"{name}/bias", np.zeros(n_out))

    def __call__(self: Dense, x: Tensor) -> Tensor:
        """Project the last axis of x."""
        return ops.dense(x, self.weight, self.bias)


class Conv1d:
    """A 1D convolution with kernels [W, C_in, C_out] and one bias per filter."""

    def __init__(
        self: Conv1d,
        store: ParameterStore,
        name: str,
        shape: tuple[int, int, int],
        padding: Padding,
        rng: np.random.Generator,
    ) -> None:
        """Register the kernels; fans count every tap of a window."""
        width, c_in, c_out = shape
        self.padding = padding
        self.kernels = store.register(
            f"{name}/kernels",
            glorot_uniform(rng, shape, width * c_in, width * c_out),
        )
        self.bias = store.register(f"{name}/bias", np.zeros(c_out))

    def __call__(self: Conv1d, x: Tensor) -> Tensor:
        """Convolve x[..., L, C_in]."""
        return ops.conv1d(x, self.kernels, self.bias, self.padding)


class GatedConv1d:
    """conv_linear(X) * sigmoid(conv_gate(X)), both paths length preserving."""

    def __init__(
        self: GatedConv1d,
        store: ParameterStore,
        name: str,
        shape: tuple[int, int, int],
        rng: np.random.Generator,
    ) -> None:
        """Register the linear and the gate convolution."""
        self.linear = Conv1d(store, f"{name}/linear", shape, Padding.SAME, rng)
        self.gate = Conv1d(store, f"{name}/gate", shape, Padding.SAME, rng)

    def __call__(self: GatedConv1d, x: Tensor) -> Tensor:
        """Apply the gated convolution."""
        return ops.mul(self.linear(x), ops.sigmoid(self.gate(x)))


class ConvTranspose1d:
    """A strided transposed convolution with kernels [W, C_out, C_in]."""

    def __init__(
        self: ConvTranspose1d,
        store: ParameterStore,
        name: str,
        shape: tuple[int, int, int],
        stride: int,
        rng: np.random.Generator,
    ) -> None:
        """Register the kernels of the layer."""
        width, c_out, c_in = shape
        self.stride = stride
        self.kernels = store.register(
            f"{name}/kernels",
            glorot_uniform(rng, shape, width * c_in, width * c_out),
        )
        self.bias = store.register(f"{name}/bias", np.zeros(c_out))

    def __call__(self: ConvTranspose1d, x: Tensor) -> Tensor:
        """Expand x[..., L, C_in] to [..., (L - 1) * stride + W, C_out]."""
        return ops.conv1d_transposed(x, self.kernels, self.bias, self.stride)


class LayerNorm:
    """Layer normalization over the last axis with a learned gain and shift."""

    def __init__(self: LayerNorm, store: ParameterStore, name: str, size: int) -> None:
        """Register gain (ones) and shift (zeros)."""
        self.gain = store.register(f"{name}/gain", np.ones(size))
        self.shift = store.register(f"{name}/shift", np.zeros(size))

    def __call__(self: LayerNorm, x: Tensor) -> Tensor:
        """Normalize x."""
        return ops.layer_norm(x, self.gain, self.shift)


class Embedding:
    """A token table whose row 0 is the padding row, pinned at zero."""

    PADDING_INDEX = 0

    def __init__(
        self: Embedding,
        store: ParameterStore,
        name: str,
        vocab_size: int,
        dim: int,
        rng: np.random.Generator,
    ) -> None:
        """Register a [vocab_size + 1, dim] table, the extra row being padding."""
        rows = vocab_size + 1
        self.table = store.register(
            f"{name}/table",
            glorot_uniform(rng, (rows, dim), rows, dim),
            padding_row=self.PADDING_INDEX,
        )

    def __call__(self: Embedding, tokens: NDArray[np.int64]) -> Tensor:
        """Look up every token."""
        return ops.embedding(tokens, self.table, self.PADDING_INDEX)
