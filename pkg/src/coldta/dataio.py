"""Affinity records: ingestion, the pK_d transform, encoding and manifests."""

###############################################################################
# coldta - cold-start drug-target affinity regression
# Licensed under the MIT License.
###############################################################################
from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from enum import Enum, auto
from pathlib import Path
from typing import TYPE_CHECKING, Any, NamedTuple

import numpy as np
import pandas as pd

from coldta.errors import DataError, DomainError
from coldta.helpers import coldta_logger

if TYPE_CHECKING:
    from collections.abc import Iterable, Mapping, Sequence

    from numpy.typing import NDArray

    from coldta.vocabulary import Vocabulary

# The columns every data file must carry (after schema mapping).
REQUIRED_COLUMNS: tuple[str, ...] = (
    "drug_id",
    "smiles",
    "target_id",
    "sequence",
    "affinity",
)
SPLIT_LABEL_COLUMN = "split_label"
PREDICTION_COLUMN = "prediction"


@dataclass(frozen=True)
class AffinityRecord:
    """One observed (drug, target, affinity) cell of the affinity matrix."""

    drug_id: str
    smiles: str
    target_id: str
    sequence: str
    affinity: float
    # The 1-based data row the record came from, 0 when built in code.
    row: int = field(default=0, compare=False)

    def __post_init__(self: AffinityRecord) -> None:
        """Validate the record."""
        for name in ("drug_id", "smiles", "target_id", "sequence"):
            if not getattr(self, name):
                msg = f"{name} cannot be empty"
                raise DataError(msg, row=self.row, column=name)
        if not math.isfinite(self.affinity):
            msg = f"affinity must be finite, got {self.affinity}"
            raise DataError(msg, row=self.row, column="affinity")

    @property
    def pair(self: AffinityRecord) -> tuple[str, str]:
        """Return the (drug_id, target_id) cell key."""
        return (self.drug_id, self.target_id)


@dataclass(frozen=True)
class EncodedBatch:
    """Records encoded as fixed length index arrays, one row per record."""

    drug_tokens: NDArray[np.int64]
    target_tokens: NDArray[np.int64]
    affinity: NDArray[np.float64]

    def __len__(self: EncodedBatch) -> int:
        """Return the number of records."""
        return int(self.affinity.shape[0])

    def take(self: EncodedBatch, rows: NDArray[np.int64]) -> EncodedBatch:
        """Return the subset of rows, in the order given."""
        return EncodedBatch(
            self.drug_tokens[rows],
            self.target_tokens[rows],
            self.affinity[rows],
        )


@dataclass(frozen=True)
class EncodedPair:
    """A single encoded record."""

    drug_tokens: NDArray[np.int64]
    target_tokens: NDArray[np.int64]
    affinity: float


class LoadMode(Enum):
    """How load_dataset reacts to a bad row."""

    FAIL_FAST = auto()
    SKIP = auto()


class LoadResult(NamedTuple):
    """The records read from a file plus the errors of skipped rows."""

    records: list[AffinityRecord]
    errors: list[DataError]


def pkd_transform(kd_nanomolar: float) -> float:
    """Convert a dissociation constant in nM to pK_d = -log10(kd / 1e9)."""
    if not kd_nanomolar > 0.0:
        msg = f"K_d must be positive, got {kd_nanomolar}"
        raise DomainError(msg)
    return 9.0 - math.log10(kd_nanomolar)


def detect_separator(path: Path) -> str:
    """Return tab when the header line holds a tab, comma otherwise."""
    with path.open(mode="r", encoding="utf-8") as f:
        header = f.readline()
    return "\t" if "\t" in header else ","


# The C parser's report of a row with too many fields.
_FIELD_COUNT = re.compile(r"Expected (\d+) fields in line (\d+), saw (\d+)")


def _read_table(path: Path) -> pd.DataFrame:
    """
    Read a data file as strings, rejecting rows with surplus fields.

    Rows are numbered from 1 after the header. Missing trailing fields read
    as empty strings.
    """
    try:
        frame = pd.read_csv(
            path,
            sep=detect_separator(path),
            dtype=str,
            keep_default_na=False,
            encoding="utf-8",
        )
    except pd.errors.ParserError as err:
        found = _FIELD_COUNT.search(str(err))
        if found is None:
            msg = f"cannot parse {path}: {err}"
            raise DataError(msg) from err
        expected, line, seen = (int(v) for v in found.groups())
        msg = f"expected {expected} fields, found {seen} (file line {line})"
        raise DataError(msg, row=line - 1) from err
    # A first row longer than the header silently becomes a row index.
    if not isinstance(frame.index, pd.RangeIndex):
        msg = f"expected {len(frame.columns)} fields, found more"
        raise DataError(msg, row=1)
    return frame.fillna("")


def _parse_row(
    row: Mapping[str, str],
    row_number: int,
    transform: str | None,
) -> AffinityRecord:
    text = row["affinity"].strip()
    try:
        affinity = float(text)
    except ValueError as err:
        msg = f"affinity '{text}' is not a number"
        raise DataError(msg, row=row_number, column="affinity") from err
    if transform == "pkd":
        try:
            affinity = pkd_transform(affinity)
        except DomainError as err:
            raise DataError(err.message, row=row_number, column="affinity") from err
    return AffinityRecord(
        drug_id=row["drug_id"].strip(),
        smiles=row["smiles"].strip(),
        target_id=row["target_id"].strip(),
        sequence=row["sequence"].strip(),
        affinity=affinity,
        row=row_number,
    )


def load_dataset(  # noqa: PLR0913
    path: Path,
    *,
    schema: Mapping[str, str] | None = None,
    mode: LoadMode = LoadMode.FAIL_FAST,
    transform: str | None = None,
    split_label: str | None = None,
) -> LoadResult:
    """
    Read affinity records from a comma or tab separated file with a header.

    Parameters
    ----------
    path:
        The UTF-8 data file.
    schema:
        Maps record field names onto file column names, for files whose
        columns are named differently. Unmapped fields use their own name.
    mode:
        FAIL_FAST raises on the first bad row. SKIP logs and collects it.
    transform:
        "pkd" converts an affinity column holding K_d in nM into pK_d.
    split_label:
        When given, only rows whose split_label column matches are read.

    Returns
    -------
        The records in file order, and the errors of any skipped rows.

    Exceptions
    ----------
    DataError:
        A required column is missing or a row has more fields than the
        header (always), or a row is bad (FAIL_FAST).

    """
    logger = coldta_logger()
    columns = {name: name for name in REQUIRED_COLUMNS}
    if schema:
        columns.update(schema)
    if transform not in {None, "pkd"}:
        msg = f"unknown affinity transform '{transform}'"
        raise ValueError(msg)

    frame = _read_table(path)
    needed = list(columns.values())
    if split_label is not None:
        needed.append(SPLIT_LABEL_COLUMN)
    for column in needed:
        if column not in frame.columns:
            msg = f"missing required column '{column}' in {path}"
            raise DataError(msg, column=column)

    records: list[AffinityRecord] = []
    errors: list[DataError] = []
    for row_number, raw in enumerate(frame.to_dict("records"), start=1):
        if split_label is not None and raw[SPLIT_LABEL_COLUMN] != split_label:
            continue
        row = {name: str(raw[column]) for name, column in columns.items()}
        try:
            records.append(_parse_row(row, row_number, transform))
        except DataError as err:
            if mode == LoadMode.FAIL_FAST:
                raise
            logger.warning("Skipping a row: %s", err)
            errors.append(err)

    logger.debug("Read %d records from %s.", len(records), path)
    return LoadResult(records, errors)


def encode(
    record: AffinityRecord,
    drug_vocab: Vocabulary,
    target_vocab: Vocabulary,
    l_d: int,
    l_t: int,
) -> EncodedPair:
    """Encode one record into fixed length drug and target indices."""
    try:
        drug = drug_vocab.encode(record.smiles, l_d)
    except DataError as err:
        raise DataError(
            err.message,
            row=record.row,
            column="smiles",
            position=err.position,
        ) from err
    try:
        target = target_vocab.encode(record.sequence, l_t)
    except DataError as err:
        raise DataError(
            err.message,
            row=record.row,
            column="sequence",
            position=err.position,
        ) from err
    return EncodedPair(drug, target, record.affinity)


def encode_records(
    records: Sequence[AffinityRecord],
    drug_vocab: Vocabulary,
    target_vocab: Vocabulary,
    l_d: int,
    l_t: int,
) -> EncodedBatch:
    """
    Encode many records into stacked arrays.

    Exceptions
    ----------
    DataError:
        The records are empty, or some could not be encoded. The message
        lists every failing record.

    """
    if not records:
        msg = "no records to encode"
        raise DataError(msg)
    pairs: list[EncodedPair] = []
    failures: list[str] = []
    for record in records:
        try:
            pairs.append(encode(record, drug_vocab, target_vocab, l_d, l_t))
        except DataError as err:
            failures.append(f"({record.drug_id}, {record.target_id}) {err}")
    if failures:
        msg = f"{len(failures)} record(s) could not be encoded: " + "; ".join(failures)
        raise DataError(msg)
    return EncodedBatch(
        np.stack([p.drug_tokens for p in pairs]),
        np.stack([p.target_tokens for p in pairs]),
        np.array([p.affinity for p in pairs], dtype=np.float64),
    )


###############################################################################
# Manifests.
###############################################################################


def records_frame(
    records: Iterable[AffinityRecord],
    labels: Iterable[str] | None = None,
) -> pd.DataFrame:
    """Build the data frame of records, optionally with a split_label column."""
    frame = pd.DataFrame(
        [
            {
                "drug_id": r.drug_id,
                "smiles": r.smiles,
                "target_id": r.target_id,
                "sequence": r.sequence,
                "affinity": repr(r.affinity),
            }
            for r in records
        ],
        columns=list(REQUIRED_COLUMNS),
    )
    if labels is not None:
        frame[SPLIT_LABEL_COLUMN] = list(labels)
    return frame


def write_frame(path: Path, frame: pd.DataFrame) -> None:
    """Write a frame as TSV for .tsv paths and CSV otherwise."""
    sep = "\t" if path.suffix.lower() == ".tsv" else ","
    frame.to_csv(path, sep=sep, index=False, encoding="utf-8")


def meta_path(manifest: Path) -> Path:
    """Return the sidecar metadata path of a manifest."""
    return Path(f"{manifest}.meta.json")


def write_manifest(
    path: Path,
    labelled: Sequence[tuple[str, Sequence[AffinityRecord]]],
    meta: Mapping[str, Any],
) -> None:
    """Write every labelled subset into one manifest plus its metadata file."""
    records = [r for _, subset in labelled for r in subset]
    labels = [label for label, subset in labelled for _ in subset]
    write_frame(path, records_frame(records, labels))
    with meta_path(path).open(mode="w", encoding="utf-8") as f:
        json.dump(dict(meta), f, indent=2, sort_keys=True)
        f.write("\n")
