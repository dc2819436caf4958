"""The differentiable primitives every coldta layer is composed from."""

###############################################################################
# coldta - cold-start drug-target affinity regression
# Licensed under the MIT License.
###############################################################################
from __future__ import annotations

from enum import Enum
from typing import TYPE_CHECKING

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from coldta.errors import ParameterError, ShapeError
from coldta.tensor import OpEntry, Tensor, active_record, as_tensor, grad_enabled

if TYPE_CHECKING:
    from collections.abc import Callable, Sequence

    from numpy.typing import ArrayLike, NDArray

    Array = NDArray[np.float64]
    Rule = Callable[[Array], Sequence[Array | None]]

# Every primitive accepts optional leading batch axes in front of the shapes
# named in its docstring; the contract holds per batch element.


class Padding(Enum):
    """Padding modes for conv1d."""

    VALID = "valid"
    SAME = "same"


###############################################################################
# Recording.
###############################################################################


def _emit(
    name: str,
    inputs: Sequence[Tensor],
    values: Array,
    rule: Rule,
) -> Tensor:
    """Wrap an op result, recording it when any input wants a gradient."""
    out = Tensor(values)
    out.values.flags.writeable = False
    if grad_enabled() is True and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        active_record().append(OpEntry(name, tuple(inputs), out, rule))
    return out


def _sum_to_last(grad: Array, width: int) -> Array:
    """Sum a gradient over every axis but the last."""
    return grad.reshape(-1, width).sum(axis=0)


def _require_same_shape(op: str, a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape:
        msg = f"{op} needs equal shapes"
        raise ShapeError(msg, a.shape, b.shape)


###############################################################################
# Element-wise ops.
###############################################################################


def add(a: Tensor | ArrayLike, b: Tensor | ArrayLike) -> Tensor:
    """Element-wise a + b for equal shapes."""
    ta, tb = as_tensor(a), as_tensor(b)
    _require_same_shape("add", ta, tb)
    return _emit("add", (ta, tb), ta.values + tb.values, lambda g: (g, g))


def sub(a: Tensor | ArrayLike, b: Tensor | ArrayLike) -> Tensor:
    """Element-wise a - b for equal shapes."""
    ta, tb = as_tensor(a), as_tensor(b)
    _require_same_shape("sub", ta, tb)
    return _emit("sub", (ta, tb), ta.values - tb.values, lambda g: (g, -g))


def mul(a: Tensor | ArrayLike, b: Tensor | ArrayLike) -> Tensor:
    """Element-wise a * b for equal shapes."""
    ta, tb = as_tensor(a), as_tensor(b)
    _require_same_shape("mul", ta, tb)
    return _emit(
        "mul",
        (ta, tb),
        ta.values * tb.values,
        lambda g: (g * tb.values, g * ta.values),
    )


def scale(a: Tensor, factor: float) -> Tensor:
    """Multiply every element by a constant."""
    return _emit("scale", (a,), a.values * factor, lambda g: (g * factor,))


def add_scalar(a: Tensor, constant: float) -> Tensor:
    """Add a constant to every element."""
    return _emit("add_scalar", (a,), a.values + constant, lambda g: (g,))


def sigmoid(a: Tensor) -> Tensor:
    """Logistic sigmoid, evaluated without overflow for large |x|."""
    x = a.values
    # exp(-|x|) never overflows; pick the matching branch per element.
    e = np.exp(-np.abs(x))
    out = np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return _emit("sigmoid", (a,), out, lambda g: (g * out * (1.0 - out),))


def relu(a: Tensor) -> Tensor:
    """Rectified linear unit."""
    mask = a.values > 0
    return _emit("relu", (a,), np.where(mask, a.values, 0.0), lambda g: (g * mask,))


def exp(a: Tensor) -> Tensor:
    """Element-wise exponential."""
    out = np.exp(a.values)
    return _emit("exp", (a,), out, lambda g: (g * out,))


def square(a: Tensor) -> Tensor:
    """Element-wise square."""
    return _emit("square", (a,), a.values * a.values, lambda g: (2.0 * g * a.values,))


###############################################################################
# Shape ops.
###############################################################################


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    """Reinterpret the values under a new shape of equal size."""
    try:
        out = a.values.reshape(tuple(shape))
    except ValueError as err:
        msg = "reshape cannot change the number of values"
        raise ShapeError(msg, a.shape, tuple(shape)) from err
    return _emit("reshape", (a,), out.copy(), lambda g: (g.reshape(a.shape),))


def transpose_last(a: Tensor) -> Tensor:
    """Swap the last two axes."""
    if a.ndim < 2:  # noqa: PLR2004
        msg = "transpose_last needs at least two axes"
        raise ShapeError(msg, a.shape)
    out = np.swapaxes(a.values, -1, -2).copy()
    return _emit("transpose_last", (a,), out, lambda g: (np.swapaxes(g, -1, -2),))


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    """Concatenate along one axis; every other extent must agree."""
    if not tensors:
        msg = "concat needs at least one tensor"
        raise ParameterError(msg)
    try:
        out = np.concatenate([t.values for t in tensors], axis=axis)
    except ValueError as err:
        msg = f"concat along axis {axis} needs matching extents elsewhere"
        raise ShapeError(msg, *(t.shape for t in tensors)) from err
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def rule(g: Array) -> list[Array | None]:
        return list(np.split(g, bounds, axis=axis))

    return _emit("concat", tuple(tensors), out, rule)


def narrow(a: Tensor, axis: int, start: int, length: int) -> Tensor:
    """Take `length` consecutive entries of one axis starting at `start`."""
    if start < 0 or length < 1 or start + length > a.shape[axis]:
        msg = f"narrow [{start}, {start + length}) out of range on axis {axis}"
        raise ShapeError(msg, a.shape)
    index: list[slice] = [slice(None)] * a.ndim
    index[axis] = slice(start, start + length)
    where = tuple(index)

    def rule(g: Array) -> list[Array | None]:
        full = np.zeros_like(a.values)
        full[where] = g
        return [full]

    return _emit("narrow", (a,), a.values[where].copy(), rule)


def broadcast_rows(v: Tensor, rows: int) -> Tensor:
    """Repeat a vector [D] into a matrix [R x D] (1_R v^T)."""
    if rows < 1:
        msg = f"broadcast_rows needs rows >= 1, got {rows}"
        raise ParameterError(msg)
    out = np.repeat(v.values[..., np.newaxis, :], rows, axis=-2)
    return _emit("broadcast_rows", (v,), out, lambda g: (g.sum(axis=-2),))


###############################################################################
# Reductions.
###############################################################################


def sum_all(a: Tensor) -> Tensor:
    """Sum every element into a one element tensor."""
    return _emit(
        "sum_all",
        (a,),
        np.array([a.values.sum()]),
        lambda g: (np.full_like(a.values, g.reshape(-1)[0]),),
    )


def mean(a: Tensor, axis: int) -> Tensor:
    """Mean along one axis, which is removed."""
    count = a.shape[axis]

    def rule(g: Array) -> list[Array | None]:
        return [np.broadcast_to(np.expand_dims(g, axis), a.shape) / count]

    return _emit("mean", (a,), a.values.mean(axis=axis), rule)


def mean_all(a: Tensor) -> Tensor:
    """Mean of every element into a one element tensor."""
    count = a.values.size
    return _emit(
        "mean_all",
        (a,),
        np.array([a.values.mean()]),
        lambda g: (np.full_like(a.values, g.reshape(-1)[0] / count),),
    )


###############################################################################
# Linear algebra.
###############################################################################


def dense(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """Dense projection x[..., n] @ W[n, m] + b[m]."""
    n_in, n_out = weight.shape
    if x.shape[-1] != n_in:
        msg = "dense input features do not match the weight rows"
        raise ShapeError(msg, x.shape, weight.shape)
    out = x.values @ weight.values
    if bias is not None:
        if bias.shape != (n_out,):
            msg = "dense bias must match the weight columns"
            raise ShapeError(msg, bias.shape, weight.shape)
        out = out + bias.values

    def rule(g: Array) -> list[Array | None]:
        flat_x = x.values.reshape(-1, n_in)
        flat_g = g.reshape(-1, n_out)
        grads: list[Array | None] = [g @ weight.values.T, flat_x.T @ flat_g]
        if bias is not None:
            grads.append(flat_g.sum(axis=0))
        return grads

    inputs = (x, weight) if bias is None else (x, weight, bias)
    return _emit("dense", inputs, out, rule)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product a[..., p, q] @ b[..., q, r] with equal leading axes."""
    if a.shape[:-2] != b.shape[:-2] or a.shape[-1] != b.shape[-2]:
        msg = "matmul needs equal leading axes and a[..., q] == b[q, ...]"
        raise ShapeError(msg, a.shape, b.shape)
    out = a.values @ b.values

    def rule(g: Array) -> list[Array | None]:
        return [
            g @ np.swapaxes(b.values, -1, -2),
            np.swapaxes(a.values, -1, -2) @ g,
        ]

    return _emit("matmul", (a, b), out, rule)


###############################################################################
# Convolutions.
###############################################################################


def conv1d(
    x: Tensor,
    kernels: Tensor,
    bias: Tensor,
    padding: Padding = Padding.VALID,
) -> Tensor:
    """
    1D convolution (cross-correlation) of x[L, C_in] with kernels[W, C_in, C_out].

    Parameters
    ----------
    x:
        The input feature map, length along axis -2, channels along axis -1.
    kernels:
        The filter bank.
    bias:
        One bias per output channel.
    padding:
        VALID gives L - W + 1 positions. SAME zero pads W - 1 positions in
        total, with the extra one on the right when W is even, so the length
        is preserved.

    Returns
    -------
        The [L', C_out] feature map.

    """
    width, c_in, c_out = kernels.shape
    if x.ndim < 2 or x.shape[-1] != c_in:  # noqa: PLR2004
        msg = "conv1d input channels do not match the kernel channels"
        raise ShapeError(msg, x.shape, kernels.shape)
    if bias.shape != (c_out,):
        msg = "conv1d bias must have one entry per output channel"
        raise ShapeError(msg, bias.shape, kernels.shape)

    left = right = 0
    if padding == Padding.SAME:
        left = (width - 1) // 2
        right = width - 1 - left
    length = x.shape[-2]
    if width > length + left + right:
        msg = f"conv1d kernel width {width} exceeds the padded length"
        raise ShapeError(msg, x.shape, kernels.shape)

    pad_spec = [(0, 0)] * (x.ndim - 2) + [(left, right), (0, 0)]
    padded = np.pad(x.values, pad_spec)
    out_len = padded.shape[-2] - width + 1
    # windows: [..., L', C_in, W] -> columns [..., L', C_in * W]
    windows = sliding_window_view(padded, width, axis=-2)
    columns = windows.reshape((*windows.shape[:-2], c_in * width))
    kernel_matrix = kernels.values.transpose(1, 0, 2).reshape(c_in * width, c_out)
    out = columns @ kernel_matrix + bias.values

    def rule(g: Array) -> list[Array | None]:
        flat_cols = columns.reshape(-1, c_in * width)
        flat_g = g.reshape(-1, c_out)
        g_kernel = (
            (flat_cols.T @ flat_g).reshape(c_in, width, c_out).transpose(1, 0, 2)
        )
        g_cols = (g @ kernel_matrix.T).reshape((*g.shape[:-1], c_in, width))
        g_padded = np.zeros_like(padded)
        for w in range(width):
            g_padded[..., w : w + out_len, :] += g_cols[..., w]
        g_x = g_padded[..., left : left + length, :]
        return [g_x, g_kernel, _sum_to_last(g, c_out)]

    return _emit("conv1d", (x, kernels, bias), out, rule)


def conv1d_transposed(
    x: Tensor,
    kernels: Tensor,
    bias: Tensor,
    stride: int = 1,
) -> Tensor:
    """
    Transposed 1D convolution of x[L, C_in] with kernels[W, C_out, C_in].

    Input position i scatters kernels[w] @ x[i] into output position
    i * stride + w, so the output length is (L - 1) * stride + W. With
    stride 1 this is the exact adjoint of a VALID conv1d whose kernels are
    laid out as [W, C_out, C_in].
    """
    if stride < 1:
        msg = f"conv1d_transposed stride must be >= 1, got {stride}"
        raise ParameterError(msg)
    width, c_out, c_in = kernels.shape
    if x.ndim < 2 or x.shape[-1] != c_in:  # noqa: PLR2004
        msg = "conv1d_transposed input channels do not match the kernel channels"
        raise ShapeError(msg, x.shape, kernels.shape)
    if bias.shape != (c_out,):
        msg = "conv1d_transposed bias must have one entry per output channel"
        raise ShapeError(msg, bias.shape, kernels.shape)

    length = x.shape[-2]
    out_len = (length - 1) * stride + width
    span = (length - 1) * stride + 1
    out = np.zeros((*x.shape[:-2], out_len, c_out))
    for w in range(width):
        out[..., w : w + span : stride, :] += x.values @ kernels.values[w].T
    out += bias.values

    def rule(g: Array) -> list[Array | None]:
        g_x = np.zeros_like(x.values)
        g_kernel = np.zeros_like(kernels.values)
        flat_x = x.values.reshape(-1, c_in)
        for w in range(width):
            g_slice = g[..., w : w + span : stride, :]
            g_x += g_slice @ kernels.values[w]
            g_kernel[w] = g_slice.reshape(-1, c_out).T @ flat_x
        return [g_x, g_kernel, _sum_to_last(g, c_out)]

    return _emit("conv1d_transposed", (x, kernels, bias), out, rule)


###############################################################################
# Selection, normalization and lookup.
###############################################################################


def topk_per_channel(x: Tensor, k: int) -> tuple[Tensor, NDArray[np.int64]]:
    """
    Select the k largest entries of every channel of x[L, C].

    Returns
    -------
        The [k, C] values in non-increasing order per column and the [k, C]
        source row of each value. Ties go to the lower row index.

    """
    length = x.shape[-2]
    if k < 1 or k > length:
        msg = f"top-k needs 1 <= k <= L, got k={k} and L={length}"
        raise ParameterError(msg)
    # A stable sort of the negated values keeps equal entries in row order.
    order = np.argsort(-x.values, axis=-2, kind="stable")
    indices = order[..., :k, :].astype(np.int64)
    values = np.take_along_axis(x.values, indices, axis=-2)

    def rule(g: Array) -> list[Array | None]:
        g_x = np.zeros_like(x.values)
        np.put_along_axis(g_x, indices, g, axis=-2)
        return [g_x]

    return _emit("topk_per_channel", (x,), values, rule), indices


def softmax_rows(x: Tensor) -> Tensor:
    """Softmax along the last axis with per-row max subtraction."""
    shifted = x.values - x.values.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=-1, keepdims=True)

    def rule(g: Array) -> list[Array | None]:
        return [out * (g - (g * out).sum(axis=-1, keepdims=True))]

    return _emit("softmax_rows", (x,), out, rule)


def layer_norm(x: Tensor, gain: Tensor, shift: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to mean 0 and variance 1, then gain and shift."""
    size = x.shape[-1]
    if gain.shape != (size,) or shift.shape != (size,):
        msg = "layer_norm gain and shift must match the last axis"
        raise ShapeError(msg, x.shape, gain.shape, shift.shape)
    centered = x.values - x.values.mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt((centered * centered).mean(axis=-1, keepdims=True) + eps)
    normed = centered * inv_std
    out = normed * gain.values + shift.values

    def rule(g: Array) -> list[Array | None]:
        g_normed = g * gain.values
        g_x = inv_std * (
            g_normed
            - g_normed.mean(axis=-1, keepdims=True)
            - normed * (g_normed * normed).mean(axis=-1, keepdims=True)
        )
        return [g_x, _sum_to_last(g * normed, size), _sum_to_last(g, size)]

    return _emit("layer_norm", (x, gain, shift), out, rule)


def embedding(
    tokens: NDArray[np.int64],
    table: Tensor,
    padding_index: int = 0,
) -> Tensor:
    """
    Look up rows of table[V, D] for integer tokens[L].

    Positions holding padding_index produce zero rows and the padding row of
    the table never receives a gradient.
    """
    tokens = np.asarray(tokens, dtype=np.int64)
    vocab = table.shape[0]
    if tokens.size and (tokens.min() < 0 or tokens.max() >= vocab):
        msg = f"embedding token ids must lie in [0, {vocab})"
        raise ShapeError(msg, tokens.shape, table.shape)
    keep = (tokens != padding_index)[..., np.newaxis]
    out = table.values[tokens] * keep

    def rule(g: Array) -> list[Array | None]:
        g_table = np.zeros_like(table.values)
        np.add.at(g_table, tokens, g * keep)
        g_table[padding_index] = 0.0
        return [g_table]

    return _emit("embedding", (table,), out, rule)


def dropout(
    x: Tensor,
    rate: float,
    *,
    train: bool,
    rng: np.random.Generator | None = None,
) -> Tensor:
    """Inverted dropout; the identity when train is False or rate is 0."""
    if not 0.0 <= rate < 1.0:
        msg = f"dropout rate must lie in [0, 1), got {rate}"
        raise ParameterError(msg)
    if train is False or rate == 0.0:
        return x
    if rng is None:
        msg = "dropout in train mode needs a random generator"
        raise ParameterError(msg)
    mask = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return _emit("dropout", (x,), x.values * mask, lambda g: (g * mask,))
