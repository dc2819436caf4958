"""The versioned single-file checkpoint container."""

###############################################################################
# coldta - cold-start drug-target affinity regression
# Licensed under the MIT License.
###############################################################################
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Any

import numpy as np

from coldta.config import TrainConfig, config_from_dict, config_to_dict
from coldta.errors import CheckpointError
from coldta.helpers import RngStreams, coldta_logger
from coldta.model import AffinityModel
from coldta.vocabulary import Vocabulary

if TYPE_CHECKING:
    from numpy.typing import NDArray

    from coldta.optimizer import Adam

# Layout: MAGIC | version <u4 | header length <u8 | JSON header | <f8 values.
MAGIC = b"COLDTA\x00\x01"
FORMAT_VERSION = 1
_VERSION = np.dtype("<u4")
_LENGTH = np.dtype("<u8")
_VALUE = np.dtype("<f8")

PARAM_PREFIX = "param/"
# Tensors of the best epoch, kept inside a later epoch's checkpoint.
BEST_PREFIX = "best/"


@dataclass
class Checkpoint:
    """Everything needed to predict with, or resume training of, a model."""

    config: TrainConfig
    drug_vocab: Vocabulary
    target_vocab: Vocabulary
    # Named arrays: param/*, adam_m/*, adam_v/* and, if embedded, best/*.
    tensors: dict[str, NDArray[np.float64]] = field(default_factory=dict)
    epoch: int = 0
    step: int = 0
    best_val_loss: float = math.inf
    rng_state: dict[str, Any] = field(default_factory=dict)
    # Epochs since best_val_loss last improved.
    since_best: int = 0
    # epoch, step and rng_state of the embedded best checkpoint.
    best_meta: dict[str, Any] = field(default_factory=dict)
    version: int = FORMAT_VERSION

    def parameters(self: Checkpoint) -> dict[str, NDArray[np.float64]]:
        """Return the model parameters without their prefix."""
        return {
            k.removeprefix(PARAM_PREFIX): v
            for k, v in self.tensors.items()
            if k.startswith(PARAM_PREFIX)
        }

    def best(self: Checkpoint) -> Checkpoint:
        """
        Return the checkpoint of the best validation epoch.

        That is this checkpoint itself unless a later epoch was captured with
        the best one embedded.
        """
        if not self.best_meta:
            return self
        return Checkpoint(
            config=self.config,
            drug_vocab=self.drug_vocab,
            target_vocab=self.target_vocab,
            tensors={
                k.removeprefix(BEST_PREFIX): v
                for k, v in self.tensors.items()
                if k.startswith(BEST_PREFIX)
            },
            epoch=self.best_meta["epoch"],
            step=self.best_meta["step"],
            best_val_loss=self.best_val_loss,
            rng_state=self.best_meta["rng_state"],
        )


def capture(  # noqa: PLR0913
    model: AffinityModel,
    optimizer: Adam | None,
    *,
    epoch: int,
    best_val_loss: float,
    streams: RngStreams | None = None,
    best: Checkpoint | None = None,
    since_best: int = 0,
) -> Checkpoint:
    """
    Snapshot a model, its optimizer and the random streams.

    When best is an earlier epoch's checkpoint its tensors are embedded, so
    a run resumed from this snapshot still knows its best parameters.
    """
    tensors = {f"{PARAM_PREFIX}{k}": v for k, v in model.store.snapshot().items()}
    step = 0
    if optimizer is not None:
        tensors.update({k: v.copy() for k, v in optimizer.state_arrays().items()})
        step = optimizer.t
    best_meta: dict[str, Any] = {}
    if best is not None and best.epoch != epoch:
        best = best.best()
        tensors.update({f"{BEST_PREFIX}{k}": v for k, v in best.tensors.items()})
        best_meta = {
            "epoch": best.epoch,
            "step": best.step,
            "rng_state": best.rng_state,
        }
    return Checkpoint(
        config=model.config,
        drug_vocab=model.drug_vocab,
        target_vocab=model.target_vocab,
        tensors=tensors,
        epoch=epoch,
        step=step,
        best_val_loss=best_val_loss,
        rng_state=streams.state() if streams is not None else {},
        since_best=since_best,
        best_meta=best_meta,
    )


def restore_model(checkpoint: Checkpoint) -> AffinityModel:
    """Build the model a checkpoint describes and load its parameters."""
    init = RngStreams.from_seed(checkpoint.config.seed).init
    model = AffinityModel(
        checkpoint.config,
        checkpoint.drug_vocab,
        checkpoint.target_vocab,
        init,
    )
    model.store.load(checkpoint.parameters())
    return model


def save_checkpoint(path: Path, checkpoint: Checkpoint) -> None:
    """Write the checkpoint, replacing any file at path only once complete."""
    index: list[dict[str, Any]] = []
    blobs: list[bytes] = []
    offset = 0
    for name in sorted(checkpoint.tensors):
        values = np.ascontiguousarray(checkpoint.tensors[name], dtype=_VALUE)
        index.append(
            {
                "name": name,
                "shape": list(values.shape),
                "offset": offset,
                "count": int(values.size),
            },
        )
        blobs.append(values.tobytes())
        offset += int(values.size)
    header = {
        "config": config_to_dict(checkpoint.config),
        "drug_vocab": checkpoint.drug_vocab.to_dict(),
        "target_vocab": checkpoint.target_vocab.to_dict(),
        "epoch": checkpoint.epoch,
        "step": checkpoint.step,
        "best_val_loss": checkpoint.best_val_loss,
        "rng_state": checkpoint.rng_state,
        "since_best": checkpoint.since_best,
        "best_meta": checkpoint.best_meta,
        "tensors": index,
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")

    partial = path.with_name(f"{path.name}.partial")
    with partial.open(mode="wb") as f:
        f.write(MAGIC)
        f.write(np.array(FORMAT_VERSION, dtype=_VERSION).tobytes())
        f.write(np.array(len(header_bytes), dtype=_LENGTH).tobytes())
        f.write(header_bytes)
        for blob in blobs:
            f.write(blob)
    partial.replace(path)
    coldta_logger().info("Wrote checkpoint %s (epoch %d).", path, checkpoint.epoch)


def _take(data: bytes, start: int, count: int, what: str) -> bytes:
    if start + count > len(data):
        msg = f"checkpoint truncated while reading the {what}"
        raise CheckpointError(msg)
    return data[start : start + count]


def load_checkpoint(path: Path) -> Checkpoint:
    """
    Read a checkpoint written by save_checkpoint.

    Exceptions
    ----------
    CheckpointError:
        The magic string is wrong, the version is unsupported, or the file
        is truncated or its header is malformed.

    """
    data = path.read_bytes()
    if _take(data, 0, len(MAGIC), "magic") != MAGIC:
        msg = f"{path} is not a coldta checkpoint"
        raise CheckpointError(msg)
    cursor = len(MAGIC)
    version = int(
        np.frombuffer(_take(data, cursor, _VERSION.itemsize, "version"), _VERSION)[0],
    )
    if version != FORMAT_VERSION:
        msg = f"unsupported checkpoint version {version}"
        raise CheckpointError(msg)
    cursor += _VERSION.itemsize
    length = int(
        np.frombuffer(_take(data, cursor, _LENGTH.itemsize, "header size"), _LENGTH)[0],
    )
    cursor += _LENGTH.itemsize
    try:
        header = json.loads(_take(data, cursor, length, "header").decode("utf-8"))
        config = config_from_dict(header["config"])
        entries = header["tensors"]
    except (KeyError, ValueError) as err:
        msg = f"malformed checkpoint header: {err}"
        raise CheckpointError(msg) from err
    cursor += length

    tensors: dict[str, NDArray[np.float64]] = {}
    for entry in entries:
        start = cursor + entry["offset"] * _VALUE.itemsize
        raw = _take(data, start, entry["count"] * _VALUE.itemsize, entry["name"])
        tensors[entry["name"]] = (
            np.frombuffer(raw, dtype=_VALUE).reshape(entry["shape"]).astype(np.float64)
        )
    return Checkpoint(
        config=config,
        drug_vocab=Vocabulary.from_dict(header["drug_vocab"]),
        target_vocab=Vocabulary.from_dict(header["target_vocab"]),
        tensors=tensors,
        epoch=header["epoch"],
        step=header["step"],
        best_val_loss=header["best_val_loss"],
        rng_state=header["rng_state"],
        since_best=header.get("since_best", 0),
        best_meta=header.get("best_meta", {}),
        version=version,
    )
