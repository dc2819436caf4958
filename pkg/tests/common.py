"""Shared configurations and synthetic data for the tests."""

###############################################################################
# coldta - cold-start drug-target affinity regression
# Licensed under the MIT License.
###############################################################################

from __future__ import annotations

import dataclasses
from typing import Any

import numpy as np

from coldta.config import TrainConfig
from coldta.dataio import AffinityRecord, encode_records
from coldta.helpers import RngStreams
from coldta.model import AffinityModel
from coldta.vocabulary import Vocabulary

# A configuration small enough to differentiate numerically.
MICRO = TrainConfig(
    learning_rate=5e-4,
    batch_size=8,
    max_epochs=3,
    patience=3,
    weight_decay=0.0,
    dropout=0.0,
    lambda_=0.1,
    k=2,
    l_d=12,
    l_t=24,
    d_z=6,
    d_t=8,
    heads=2,
    mlp_hidden=(16, 8),
    seed=7,
    d_e=8,
    drug_filters=8,
)

SMILES_ALPHABET = "CNOSc1()=#"
PROTEIN_ALPHABET = "ACDEFGHIKLMNPQRSTVWY"


def micro(**changes: Any) -> TrainConfig:  # noqa: ANN401
    """Return MICRO with some fields changed, patience capped at max_epochs."""
    if "patience" not in changes:
        epochs = changes.get("max_epochs", MICRO.max_epochs)
        changes["patience"] = min(MICRO.patience, epochs)
    return dataclasses.replace(MICRO, **changes)


def synthetic_records(
    n_drugs: int = 4,
    n_targets: int = 3,
    seed: int = 0,
    density: float = 1.0,
) -> list[AffinityRecord]:
    """
    Build a random interaction grid.

    Affinities are a drug effect plus a target effect, kept within [-1, 1].
    """
    rng = np.random.default_rng(seed)
    drugs = [
        "".join(rng.choice(list(SMILES_ALPHABET), size=rng.integers(6, 16)))
        for _ in range(n_drugs)
    ]
    targets = [
        "".join(rng.choice(list(PROTEIN_ALPHABET), size=rng.integers(16, 32)))
        for _ in range(n_targets)
    ]
    drug_effect = rng.uniform(-0.5, 0.5, size=n_drugs)
    target_effect = rng.uniform(-0.5, 0.5, size=n_targets)
    records: list[AffinityRecord] = []
    for i, smiles in enumerate(drugs):
        for j, sequence in enumerate(targets):
            if density < 1.0 and rng.random() >= density:
                continue
            records.append(
                AffinityRecord(
                    drug_id=f"D{i:03d}",
                    smiles=smiles,
                    target_id=f"T{j:03d}",
                    sequence=sequence,
                    affinity=float(drug_effect[i] + target_effect[j]),
                ),
            )
    return records


def micro_model(
    records: list[AffinityRecord] | None = None,
    config: TrainConfig = MICRO,
) -> AffinityModel:
    """Build a model with vocabularies drawn from the records."""
    records = records if records is not None else synthetic_records()
    drug_vocab = Vocabulary.build(r.smiles for r in records)
    target_vocab = Vocabulary.build(r.sequence for r in records)
    init = RngStreams.from_seed(config.seed).init
    return AffinityModel(config, drug_vocab, target_vocab, init)


def reference_labels(
    records: list[AffinityRecord],
    seed: int,
    spread: float = 0.3,
) -> list[AffinityRecord]:
    """
    Relabel records with the eval predictions of a frozen random model.

    The labels are centred and scaled to the given standard deviation, so a
    model of the same architecture can fit them exactly.
    """
    config = micro(seed=seed)
    model = micro_model(records, config)
    batch = encode_records(
        records,
        model.drug_vocab,
        model.target_vocab,
        config.l_d,
        config.l_t,
    )
    raw = model.predict(batch)
    labels = spread * (raw - raw.mean()) / raw.std()
    return [
        dataclasses.replace(r, affinity=float(v))
        for r, v in zip(records, labels, strict=True)
    ]
