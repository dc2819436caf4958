"""Unit tests for the protein encoder and its top-k pooling."""

###############################################################################
# coldta - cold-start drug-target affinity regression
# Licensed under the MIT License.
###############################################################################

from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np
import pytest
from numpy.testing import assert_array_equal

from coldta.errors import ParameterError, ShapeError
from coldta.parameterstore import ParameterStore
from coldta.proteinencoder import ProteinEncoder, extract_salient
from coldta.tensor import Tensor
from coldta.vocabulary import Vocabulary
from tests.common import MICRO, PROTEIN_ALPHABET, micro
from tests.gradcheck import check_gradients

if TYPE_CHECKING:
    from coldta.config import TrainConfig

SEQUENCES = ["MKTAYIAKQRQISFVKSHFSRQ", "ACDEFGHIKLMNPQRSTVWYACDEFGHIK", "MSTNPK"]


def build(config: TrainConfig = MICRO) -> tuple[ProteinEncoder, ParameterStore]:
    """A protein encoder over the standard amino acid alphabet."""
    store = ParameterStore()
    vocab = Vocabulary(PROTEIN_ALPHABET)
    encoder = ProteinEncoder(store, config, vocab.size, np.random.default_rng(0))
    return encoder, store


def tokens(length: int = MICRO.l_t) -> np.ndarray:
    """The test sequences encoded to one length."""
    vocab = Vocabulary(PROTEIN_ALPHABET)
    return np.stack([vocab.encode(s, length) for s in SEQUENCES])


def test_shapes() -> None:
    """L'_t = L_t - 11 rows before pooling, K rows after."""
    encoder, _ = build()
    h_conv, salient = encoder(tokens())
    assert h_conv.shape == (3, MICRO.l_t - 11, MICRO.d_t)
    assert salient.values.shape == (3, MICRO.k, MICRO.d_t)
    assert salient.source_positions.shape == (3, MICRO.k, MICRO.d_t)
    assert salient.source_positions.max() < MICRO.l_t - 11


def test_pooled_values_come_from_the_map() -> None:
    """Each pooled value is the H_conv entry its position names."""
    encoder, _ = build()
    h_conv, salient = encoder(tokens())
    picked = np.take_along_axis(h_conv.values, salient.source_positions, axis=-2)
    assert_array_equal(picked, salient.values.values)
    assert np.all(np.diff(salient.values.values, axis=-2) <= 0.0)


def test_feature_map_is_non_negative() -> None:
    """Every convolution is followed by relu."""
    encoder, _ = build()
    h_conv, _ = encoder(tokens())
    assert h_conv.values.min() >= 0.0


def test_wrong_length() -> None:
    """Tokens must be exactly L_t long."""
    encoder, _ = build()
    with pytest.raises(ShapeError):
        encoder(tokens(MICRO.l_t + 1))


def test_k_larger_than_map() -> None:
    """K may not exceed L'_t."""
    with pytest.raises(ParameterError):
        build(micro(k=MICRO.l_t - 10))
    encoder, _ = build(micro(k=MICRO.l_t - 11))
    assert encoder.k == MICRO.l_t - 11


def test_too_short_for_last_convolution() -> None:
    """A final window wider than the sequence leaves no rows."""
    with pytest.raises(ParameterError):
        build(micro(l_t=11, k=1))


def test_max_pooling() -> None:
    """Max pooling is top-k with K = 1."""
    encoder, _ = build(micro(pooling="max"))
    h_conv, salient = encoder(tokens())
    assert salient.values.shape == (3, 1, MICRO.d_t)
    assert_array_equal(salient.values.values[:, 0, :], h_conv.values.max(axis=-2))


def test_extract_salient_ties() -> None:
    """Equal activations are taken in row order."""
    h_conv = Tensor(np.array([[1.0, 0.0], [2.0, 0.0], [2.0, 0.0]]))
    salient = extract_salient(h_conv, 2)
    assert_array_equal(salient.source_positions, [[1, 0], [2, 1]])


def test_conv_stack_gradient() -> None:
    """Kernels and the embedding table differentiate correctly."""
    encoder, store = build()
    batch = tokens()
    params = [
        store["target/embedding/table"],
        store["target/conv1/kernels"],
        store["target/conv2/bias"],
        store["target/conv3/kernels"],
    ]
    error = check_gradients(lambda: encoder(batch)[1].values, params, entries=12)
    assert error < 1e-4


def test_extract_salient_ignores_row_order() -> None:
    """Pooled values depend only on each channel's multiset of activations."""
    rng = np.random.default_rng(3)
    h_conv = rng.standard_normal((12, 5))
    base = extract_salient(Tensor(h_conv), 4).values.values
    for _ in range(5):
        shuffled = h_conv[rng.permutation(12)]
        assert_array_equal(extract_salient(Tensor(shuffled), 4).values.values, base)


def test_extract_salient_monotone() -> None:
    """Raising a selected entry moves exactly one value, raising a loser none."""
    rng = np.random.default_rng(4)
    h_conv = rng.standard_normal((10, 3))
    k = 3
    salient = extract_salient(Tensor(h_conv), k)
    base = salient.values.values

    row, channel = int(salient.source_positions[0, 0]), 0
    raised = h_conv.copy()
    raised[row, channel] += 0.25
    after = extract_salient(Tensor(raised), k).values.values
    assert np.sum(after != base) == 1
    assert after[0, channel] == base[0, channel] + 0.25

    losers = np.setdiff1d(np.arange(10), salient.source_positions[:, channel])
    loser = int(losers[0])
    gap = base[k - 1, channel] - h_conv[loser, channel]
    nudged = h_conv.copy()
    nudged[loser, channel] += gap / 2.0
    assert_array_equal(extract_salient(Tensor(nudged), k).values.values, base)
