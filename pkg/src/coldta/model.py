"""The whole affinity model: drug encoder, protein encoder and fusion head."""

###############################################################################
# coldta - cold-start drug-target affinity regression
# Licensed under the MIT License.
###############################################################################
from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from coldta.drugencoder import DrugEncoder, DualViewLatent
from coldta.fusion import FusionHead, FusionOutput, mse_loss
from coldta.parameterstore import ParameterStore
from coldta.proteinencoder import ProteinEncoder, SalientFeatures
from coldta.tensor import Tensor, no_grad

if TYPE_CHECKING:
    from numpy.typing import NDArray

    from coldta.config import TrainConfig
    from coldta.dataio import EncodedBatch
    from coldta.helpers import RngStreams
    from coldta.vocabulary import Vocabulary


@dataclass
class ForwardTrace:
    """The intermediates of one forward pass that callers may inspect."""

    latent: DualViewLatent
    h_conv: Tensor
    salient: SalientFeatures
    fusion: FusionOutput

    @property
    def prediction(self: ForwardTrace) -> Tensor:
        """Return the predicted affinities."""
        return self.fusion.prediction


class AffinityModel:
    """
    Predicts an affinity for every (drug tokens, target tokens) row of a batch.

    All parameters live in one ParameterStore. They are drawn from the
    generator passed in, in construction order, so a seed fixes the model.
    """

    def __init__(
        self: AffinityModel,
        config: TrainConfig,
        drug_vocab: Vocabulary,
        target_vocab: Vocabulary,
        rng: np.random.Generator,
    ) -> None:
        """Build and initialize every parameter."""
        self.config = config
        self.drug_vocab = drug_vocab
        self.target_vocab = target_vocab
        self.store = ParameterStore()
        self.drug = DrugEncoder(self.store, config, drug_vocab.size, rng)
        self.target = ProteinEncoder(self.store, config, target_vocab.size, rng)
        self.fusion = FusionHead(self.store, config, rng)

    def forward(
        self: AffinityModel,
        drug_tokens: NDArray[np.int64],
        target_tokens: NDArray[np.int64],
        *,
        train: bool = False,
        streams: RngStreams | None = None,
    ) -> ForwardTrace:
        """Run the whole model over token batches [B, L_d] and [B, L_t]."""
        dropout_rng = streams.dropout if streams is not None else None
        latent = self.drug.dual_view(drug_tokens, train=train, streams=streams)
        h_conv, salient = self.target(target_tokens, train=train, rng=dropout_rng)
        fused = self.fusion(
            self._latents(latent),
            salient.values,
            train=train,
            rng=dropout_rng,
        )
        return ForwardTrace(latent, h_conv, salient, fused)

    @staticmethod
    def _latents(latent: DualViewLatent) -> list[Tensor]:
        if latent.z_dis is None:
            return [latent.z_ins]
        return [latent.z_ins, latent.z_dis]

    def predict_head(
        self: AffinityModel,
        z_ins: Tensor,
        z_dis: Tensor | None,
        h_t: Tensor,
        *,
        train: bool = False,
        rng: np.random.Generator | None = None,
    ) -> Tensor:
        """Evaluate the fusion head alone on given latents and salient features."""
        latents = [z_ins] if z_dis is None else [z_ins, z_dis]
        return self.fusion(latents, h_t, train=train, rng=rng).prediction

    def loss(
        self: AffinityModel,
        batch: EncodedBatch,
        *,
        train: bool = False,
        streams: RngStreams | None = None,
    ) -> tuple[Tensor, ForwardTrace]:
        """Return the mean squared error of a batch and its forward trace."""
        trace = self.forward(
            batch.drug_tokens,
            batch.target_tokens,
            train=train,
            streams=streams,
        )
        return mse_loss(trace.prediction, batch.affinity), trace

    def predict(
        self: AffinityModel,
        batch: EncodedBatch,
        batch_size: int = 256,
    ) -> NDArray[np.float64]:
        """Predict every row in eval mode without recording anything."""
        chunks: list[NDArray[np.float64]] = []
        with no_grad():
            for start in range(0, len(batch), batch_size):
                rows = np.arange(start, min(start + batch_size, len(batch)))
                part = batch.take(rows)
                trace = self.forward(part.drug_tokens, part.target_tokens)
                chunks.append(trace.prediction.values.copy())
        return np.concatenate(chunks)
