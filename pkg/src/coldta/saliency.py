"""Gradient weighted saliency of target residues for one prediction."""

###############################################################################
# coldta - cold-start drug-target affinity regression
# Licensed under the MIT License.
###############################################################################
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Any

import numpy as np
import pandas as pd

from coldta import ops
from coldta.checkpoint import Checkpoint, restore_model
from coldta.dataio import encode, write_frame
from coldta.helpers import coldta_logger
from coldta.tensor import backward, fresh_record

if TYPE_CHECKING:
    from numpy.typing import NDArray

    from coldta.dataio import AffinityRecord
    from coldta.model import AffinityModel

# Residue shown for rows of the map centred on padding.
PAD_RESIDUE = "-"


@dataclass
class SaliencyReport:
    """Per-row importance of the convolutional feature map of one target."""

    drug_id: str
    target_id: str
    prediction: float
    # One score in [0, 1] per H_conv row.
    scores: NDArray[np.float64]
    # The residue each row is centred on, 0-based.
    positions: NDArray[np.int64]
    residues: list[str]
    # True when no row had a positive raw score.
    flat_zero: bool = False

    def to_frame(self: SaliencyReport) -> pd.DataFrame:
        """Return one (position, residue, score) row per map row."""
        return pd.DataFrame(
            {
                "position": self.positions,
                "residue": self.residues,
                "score": self.scores,
            },
        )

    def top(self: SaliencyReport, n: int = 10) -> pd.DataFrame:
        """Return the n highest scoring rows."""
        return self.to_frame().nlargest(n, "score", keep="first")

    def meta(self: SaliencyReport) -> dict[str, Any]:
        """Return the summary written next to the table."""
        return {
            "drug_id": self.drug_id,
            "target_id": self.target_id,
            "prediction": self.prediction,
            "rows": len(self.residues),
            "flat_zero": self.flat_zero,
        }

    def write(self: SaliencyReport, path: Path) -> None:
        """Write the table, and its summary as `<path>.json`."""
        write_frame(path, self.to_frame())
        Path(f"{path}.json").write_text(
            json.dumps(self.meta(), indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )


def channel_weights(grad: NDArray[np.float64]) -> NDArray[np.float64]:
    """Average a [L', d_t] gradient over positions, one weight per channel."""
    return grad.mean(axis=0)


def residue_positions(rows: int, width: int) -> NDArray[np.int64]:
    """Map H_conv rows to the residue at the centre of each final window."""
    return np.arange(rows, dtype=np.int64) + (width - 1) // 2


def saliency(
    source: Checkpoint | AffinityModel,
    record: AffinityRecord,
) -> SaliencyReport:
    """
    Score every row of the target feature map for one (drug, target) pair.

    The prediction is differentiated with respect to H_conv in eval mode.
    Channel weights are the position-averaged gradients, the raw map is
    relu(H_conv @ weights), and the result is divided by its maximum. A map
    without any positive value stays all zero and is flagged.
    """
    logger = coldta_logger()
    model = restore_model(source) if isinstance(source, Checkpoint) else source
    config = model.config
    pair = encode(
        record,
        model.drug_vocab,
        model.target_vocab,
        config.l_d,
        config.l_t,
    )

    with fresh_record():
        trace = model.forward(
            pair.drug_tokens[np.newaxis, :],
            pair.target_tokens[np.newaxis, :],
        )
        h_conv = trace.h_conv.retain_grad()
        prediction = trace.prediction.item()
        backward(ops.sum_all(trace.prediction))
    model.store.zero_grad()

    features = h_conv.values[0]
    grad = h_conv.grad[0] if h_conv.grad is not None else np.zeros_like(features)
    raw = np.maximum(features @ channel_weights(grad), 0.0)
    peak = float(raw.max())
    flat_zero = peak <= 0.0
    if flat_zero is True:
        logger.warning(
            "Saliency of (%s, %s) is zero everywhere.",
            record.drug_id,
            record.target_id,
        )
        scores = np.zeros_like(raw)
    else:
        scores = raw / peak

    positions = residue_positions(len(scores), config.target_widths[-1])
    sequence = record.sequence[: config.l_t]
    residues = [sequence[p] if p < len(sequence) else PAD_RESIDUE for p in positions]
    return SaliencyReport(
        drug_id=record.drug_id,
        target_id=record.target_id,
        prediction=prediction,
        scores=scores,
        positions=positions,
        residues=residues,
        flat_zero=flat_zero,
    )
