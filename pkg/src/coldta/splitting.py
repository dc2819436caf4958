"""The cold-start and random interaction splitting protocols."""

###############################################################################
# coldta - cold-start drug-target affinity regression
# Licensed under the MIT License.
###############################################################################
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any, NamedTuple

import numpy as np
from sortedcontainers import SortedSet

from coldta.errors import DataError, ParameterError
from coldta.helpers import RngStreams, coldta_logger

if TYPE_CHECKING:
    from collections.abc import Sequence

    from coldta.dataio import AffinityRecord

# Labels written to the split_label column of a manifest.
TRAIN_LABEL = "train"
VAL_LABEL = "val"
TEST_LABEL = "test"
UNSEEN_DRUG_LABEL = "s2_unseen_drug"
UNSEEN_TARGET_LABEL = "s3_unseen_target"
UNSEEN_PAIR_LABEL = "s4_unseen_pair"

DEFAULT_RHO = 0.2


@dataclass
class SplitBundle:
    """The five disjoint interaction subsets of a cold-start split."""

    train: list[AffinityRecord] = field(default_factory=list)
    val: list[AffinityRecord] = field(default_factory=list)
    s2_unseen_drug: list[AffinityRecord] = field(default_factory=list)
    s3_unseen_target: list[AffinityRecord] = field(default_factory=list)
    s4_unseen_pair: list[AffinityRecord] = field(default_factory=list)
    seed: int = 0
    rho: float = DEFAULT_RHO
    unseen_drugs: list[str] = field(default_factory=list)
    unseen_targets: list[str] = field(default_factory=list)
    # Non-fatal problems, e.g. a ratio too small to hold out any entity.
    warnings: list[str] = field(default_factory=list)

    def labelled(self: SplitBundle) -> list[tuple[str, list[AffinityRecord]]]:
        """Return every subset with its manifest label."""
        return [
            (TRAIN_LABEL, self.train),
            (VAL_LABEL, self.val),
            (UNSEEN_DRUG_LABEL, self.s2_unseen_drug),
            (UNSEEN_TARGET_LABEL, self.s3_unseen_target),
            (UNSEEN_PAIR_LABEL, self.s4_unseen_pair),
        ]

    def meta(self: SplitBundle) -> dict[str, Any]:
        """Return the manifest sidecar metadata."""
        return {
            "mode": "cold",
            "seed": self.seed,
            "rho": self.rho,
            "unseen_drugs": self.unseen_drugs,
            "unseen_targets": self.unseen_targets,
            "counts": {label: len(subset) for label, subset in self.labelled()},
            "warnings": self.warnings,
        }


class RandomSplit(NamedTuple):
    """The three subsets of a random split."""

    train: list[AffinityRecord]
    val: list[AffinityRecord]
    test: list[AffinityRecord]


def _check_ratio(name: str, value: float) -> None:
    if not 0.0 < value < 1.0:
        msg = f"{name} must lie in (0, 1), got {value}"
        raise ParameterError(msg)


def _draw_unseen(
    rng: np.random.Generator,
    entities: SortedSet[str],
    ratio: float,
) -> set[str]:
    """Pick floor(ratio * n) entities uniformly without replacement."""
    count = math.floor(ratio * len(entities))
    chosen = rng.choice(len(entities), size=count, replace=False)
    return {entities[int(i)] for i in chosen}


def cold_start_split(
    records: Sequence[AffinityRecord],
    rho: float = DEFAULT_RHO,
    seed: int = 0,
    *,
    rho_drug: float | None = None,
    rho_target: float | None = None,
) -> SplitBundle:
    """
    Hold out unseen drugs and targets and sort every interaction into a subset.

    floor(rho * n) of the drugs and of the targets are drawn uniformly as
    unseen. Seen drug x seen target interactions go to train. Every other
    interaction goes to val with probability 0.5, otherwise to the bucket of
    its scenario: unseen drug, unseen target, or both unseen. Interactions are
    visited sorted by (drug_id, target_id) and a single generator, seeded by
    `seed`, drives both the entity draws and the coin flips.

    Parameters
    ----------
    records:
        The interactions to split, one per (drug, target) cell.
    rho:
        The unseen ratio shared by drugs and targets.
    seed:
        The seed the split is a pure function of.
    rho_drug:
        Overrides rho for drugs.
    rho_target:
        Overrides rho for targets.

    Exceptions
    ----------
    DataError:
        records is empty.
    ParameterError:
        A ratio is outside (0, 1).

    """
    if not records:
        msg = "cannot split an empty set of records"
        raise DataError(msg)
    drug_ratio = rho if rho_drug is None else rho_drug
    target_ratio = rho if rho_target is None else rho_target
    _check_ratio("rho", rho)
    _check_ratio("rho_drug", drug_ratio)
    _check_ratio("rho_target", target_ratio)

    logger = coldta_logger()
    rng = RngStreams.from_seed(seed).split

    drugs: SortedSet[str] = SortedSet(r.drug_id for r in records)
    targets: SortedSet[str] = SortedSet(r.target_id for r in records)
    unseen_drugs = _draw_unseen(rng, drugs, drug_ratio)
    unseen_targets = _draw_unseen(rng, targets, target_ratio)

    bundle = SplitBundle(
        seed=seed,
        rho=rho,
        unseen_drugs=sorted(unseen_drugs),
        unseen_targets=sorted(unseen_targets),
    )
    if not unseen_drugs:
        bundle.warnings.append(
            f"rho {drug_ratio} of {len(drugs)} drugs holds out no drug",
        )
    if not unseen_targets:
        bundle.warnings.append(
            f"rho {target_ratio} of {len(targets)} targets holds out no target",
        )
    for warning in bundle.warnings:
        logger.warning("Cold-start split: %s.", warning)

    for record in sorted(records, key=lambda r: r.pair):
        new_drug = record.drug_id in unseen_drugs
        new_target = record.target_id in unseen_targets
        if not new_drug and not new_target:
            bundle.train.append(record)
        elif rng.random() < 0.5:  # noqa: PLR2004
            bundle.val.append(record)
        elif new_drug and new_target:
            bundle.s4_unseen_pair.append(record)
        elif new_drug:
            bundle.s2_unseen_drug.append(record)
        else:
            bundle.s3_unseen_target.append(record)

    logger.info(
        "Cold-start split: %d unseen drugs, %d unseen targets, %s.",
        len(unseen_drugs),
        len(unseen_targets),
        ", ".join(f"{label} {len(subset)}" for label, subset in bundle.labelled()),
    )
    return bundle


def split_sizes(n: int, fractions: Sequence[float]) -> list[int]:
    """
    Turn fractions into integer sizes summing to n.

    Every size starts at floor(fraction * n); the leftover units go to the
    largest fractional parts, earlier subsets first on ties. Each size is
    therefore within 1 of fraction * n.
    """
    if len(fractions) != 3:  # noqa: PLR2004
        msg = f"need (train, val, test) fractions, got {tuple(fractions)}"
        raise ParameterError(msg)
    if any(f <= 0.0 for f in fractions) or not math.isclose(
        sum(fractions),
        1.0,
        rel_tol=0.0,
        abs_tol=1e-9,
    ):
        msg = f"fractions must be positive and sum to 1, got {tuple(fractions)}"
        raise ParameterError(msg)
    exact = [f * n for f in fractions]
    sizes = [math.floor(x) for x in exact]
    order = sorted(range(len(exact)), key=lambda i: (-(exact[i] - sizes[i]), i))
    for i in order[: n - sum(sizes)]:
        sizes[i] += 1
    return sizes


def random_split(
    records: Sequence[AffinityRecord],
    fractions: Sequence[float] = (0.8, 0.1, 0.1),
    seed: int = 0,
) -> RandomSplit:
    """Shuffle the interactions and cut them into train, val and test."""
    sizes = split_sizes(len(records), fractions)
    if not records:
        msg = "cannot split an empty set of records"
        raise DataError(msg)
    order = RngStreams.from_seed(seed).split.permutation(len(records))
    shuffled = [records[int(i)] for i in order]
    first, second = sizes[0], sizes[0] + sizes[1]
    coldta_logger().info("Random split sizes: %d/%d/%d.", *sizes)
    return RandomSplit(shuffled[:first], shuffled[first:second], shuffled[second:])


def random_split_meta(
    split: RandomSplit,
    fractions: Sequence[float],
    seed: int,
) -> dict[str, Any]:
    """Return the manifest sidecar metadata of a random split."""
    return {
        "mode": "random",
        "seed": seed,
        "fractions": list(fractions),
        "counts": {
            TRAIN_LABEL: len(split.train),
            VAL_LABEL: len(split.val),
            TEST_LABEL: len(split.test),
        },
    }
