"""Training with early stopping, evaluation and batch prediction."""

###############################################################################
# coldta - cold-start drug-target affinity regression
# Licensed under the MIT License.
###############################################################################
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Any

import numpy as np

from coldta.checkpoint import (
    Checkpoint,
    capture,
    load_checkpoint,
    restore_model,
    save_checkpoint,
)
from coldta.config import config_text
from coldta.dataio import EncodedBatch, encode_records
from coldta.errors import DataError, DivergenceError
from coldta.helpers import RngStreams, coldta_logger, write_json_lines
from coldta.metrics import EvaluationReport, evaluate_predictions, mse
from coldta.model import AffinityModel
from coldta.optimizer import Adam
from coldta.tensor import backward
from coldta.vocabulary import UnknownPolicy, Vocabulary

if TYPE_CHECKING:
    from collections.abc import Iterable, Sequence

    from numpy.typing import NDArray

    from coldta.config import TrainConfig
    from coldta.dataio import AffinityRecord

BEST_CHECKPOINT = "best.ckpt"
LAST_CHECKPOINT = "last.ckpt"
HISTORY_FILE = "history.jsonl"
CONFIG_FILE = "config.txt"


@dataclass
class TrainResult:
    """The outcome of a training run."""

    # The parameters of the epoch with the lowest validation loss.
    checkpoint: Checkpoint
    history: list[dict[str, Any]] = field(default_factory=list)
    stopped_early: bool = False


def encode_for(
    source: Checkpoint | AffinityModel,
    records: Sequence[AffinityRecord],
) -> EncodedBatch:
    """Encode records with the vocabularies and lengths of a model."""
    config = source.config
    return encode_records(
        records,
        source.drug_vocab,
        source.target_vocab,
        config.l_d,
        config.l_t,
    )


def _vocabulary(
    token_file: str,
    texts: Iterable[str],
    policy: UnknownPolicy,
) -> Vocabulary:
    """Load the fixed token list if one is configured, else build from texts."""
    if not token_file:
        return Vocabulary.build(texts, policy)
    try:
        vocab = Vocabulary.from_token_file(Path(token_file), policy)
    except (OSError, ValueError) as err:
        msg = f"cannot read vocabulary file {token_file}: {err}"
        raise DataError(msg) from err
    coldta_logger().info("Loaded %d tokens from %s.", len(vocab), token_file)
    return vocab


class Trainer:
    """
    Minimizes the mean squared error with Adam over shuffled mini-batches.

    After every epoch the validation MSE is computed in eval mode. The
    parameters of the best epoch are kept, and training stops once `patience`
    epochs in a row fail to improve on it, or at max_epochs.
    """

    def __init__(
        self: Trainer,
        config: TrainConfig,
        out_dir: Path | None = None,
        resume: Checkpoint | None = None,
    ) -> None:
        """
        Initialize the trainer.

        Parameters
        ----------
        config:
            The run configuration. When resuming, the architecture comes
            from the checkpoint and only the loop settings are read here.
        out_dir:
            Where config.txt, history.jsonl and the checkpoints go. None
            keeps everything in memory.
        resume:
            A checkpoint to continue from.

        """
        self.config = config
        self.out_dir = out_dir
        self.resume = resume
        self.streams = RngStreams.from_seed(self.config.seed)
        self.history: list[dict[str, Any]] = []
        self._logger = coldta_logger()

    def _build(
        self: Trainer,
        train_set: Sequence[AffinityRecord],
    ) -> tuple[AffinityModel, Adam]:
        """Create (or restore) the model and its optimizer."""
        if self.resume is not None:
            model = restore_model(self.resume)
        else:
            policy = UnknownPolicy(self.config.vocab_policy)
            drug_vocab = _vocabulary(
                self.config.drug_vocab_file,
                (r.smiles for r in train_set),
                policy,
            )
            target_vocab = _vocabulary(
                self.config.target_vocab_file,
                (r.sequence for r in train_set),
                policy,
            )
            model = AffinityModel(
                self.config,
                drug_vocab,
                target_vocab,
                self.streams.init,
            )
        optimizer = Adam(
            model.store,
            self.config.learning_rate,
            weight_decay=self.config.weight_decay,
        )
        if self.resume is not None:
            optimizer.load_state(self.resume.tensors, self.resume.step)
            if self.resume.rng_state:
                self.streams.restore(self.resume.rng_state)
        return model, optimizer

    def _train_epoch(
        self: Trainer,
        model: AffinityModel,
        optimizer: Adam,
        data: EncodedBatch,
    ) -> float:
        """Run one pass over shuffled mini-batches, returning the mean loss."""
        order = self.streams.shuffle.permutation(len(data))
        total = 0.0
        for start in range(0, len(data), self.config.batch_size):
            rows = order[start : start + self.config.batch_size]
            batch = data.take(rows)
            model.store.zero_grad()
            loss, _ = model.loss(batch, train=True, streams=self.streams)
            value = loss.item()
            if not math.isfinite(value):
                msg = f"training loss became {value} at step {optimizer.t + 1}"
                raise DivergenceError(msg)
            backward(loss)
            optimizer.step()
            total += value * len(rows)
            self._logger.debug("Step %d: batch loss %.6f.", optimizer.t, value)
        return total / len(data)

    def _write(self: Trainer, name: str, checkpoint: Checkpoint) -> str:
        if self.out_dir is None:
            return ""
        path = self.out_dir / name
        save_checkpoint(path, checkpoint)
        return str(path)

    def train(
        self: Trainer,
        train_set: Sequence[AffinityRecord],
        val_set: Sequence[AffinityRecord],
    ) -> TrainResult:
        """
        Train on train_set, selecting the best epoch on val_set.

        Exceptions
        ----------
        DataError:
            Either set is empty or cannot be encoded.
        DivergenceError:
            The loss or a gradient went non-finite. checkpoint_path names the
            best checkpoint written so far, if any.

        """
        if not train_set or not val_set:
            msg = "training needs non-empty train and validation sets"
            raise DataError(msg)
        model, optimizer = self._build(train_set)
        train_data = encode_for(model, train_set)
        val_data = encode_for(model, val_set)

        if self.out_dir is not None:
            self.out_dir.mkdir(parents=True, exist_ok=True)
            (self.out_dir / CONFIG_FILE).write_text(
                config_text(self.config),
                encoding="utf-8",
            )

        best_loss = math.inf
        best: Checkpoint | None = None
        best_path = ""
        first_epoch = 1
        since_best = 0
        if self.resume is not None:
            best = self.resume.best()
            best_loss = best.best_val_loss
            since_best = self.resume.since_best
            first_epoch = self.resume.epoch + 1
            if math.isfinite(best_loss):
                best_path = self._write(BEST_CHECKPOINT, best)
        stopped_early = False
        self._logger.info(
            "Training on %d records, validating on %d, %d parameters.",
            len(train_data),
            len(val_data),
            model.store.size(),
        )
        self._logger.debug("Parameter shapes:\n%s", model.store.summary_string())

        for epoch in range(first_epoch, self.config.max_epochs + 1):
            try:
                train_loss = self._train_epoch(model, optimizer, train_data)
            except DivergenceError as err:
                err.checkpoint_path = best_path
                self._logger.error("Training diverged: %s", err)  # noqa: TRY400
                raise
            val_loss = mse(val_data.affinity, model.predict(val_data))
            improved = val_loss < best_loss
            if improved:
                best_loss = val_loss
                since_best = 0
                best = capture(
                    model,
                    optimizer,
                    epoch=epoch,
                    best_val_loss=best_loss,
                    streams=self.streams,
                )
                best_path = self._write(BEST_CHECKPOINT, best)
            else:
                since_best += 1
            self.history.append(
                {
                    "epoch": epoch,
                    "train_loss": train_loss,
                    "val_loss": val_loss,
                    "best_val_loss": best_loss,
                    "improved": improved,
                    "step": optimizer.t,
                },
            )
            self._logger.info(
                "Epoch %d: train loss %.6f, val loss %.6f%s.",
                epoch,
                train_loss,
                val_loss,
                " (best)" if improved else "",
            )
            if self.out_dir is not None:
                write_json_lines(self.out_dir / HISTORY_FILE, self.history)
                self._write(
                    LAST_CHECKPOINT,
                    capture(
                        model,
                        optimizer,
                        epoch=epoch,
                        best_val_loss=best_loss,
                        streams=self.streams,
                        best=best,
                        since_best=since_best,
                    ),
                )
            if since_best >= self.config.patience:
                stopped_early = epoch < self.config.max_epochs
                self._logger.info(
                    "Stopping after epoch %d, %d epoch(s) without improvement.",
                    epoch,
                    since_best,
                )
                break

        if best is None:
            best = capture(model, optimizer, epoch=0, best_val_loss=best_loss)
        return TrainResult(best, self.history, stopped_early)


def train(
    config: TrainConfig,
    train_set: Sequence[AffinityRecord],
    val_set: Sequence[AffinityRecord],
    out_dir: Path | None = None,
) -> TrainResult:
    """Train a fresh model, see Trainer.train."""
    return Trainer(config, out_dir).train(train_set, val_set)


def resume_training(
    checkpoint_path: Path,
    train_set: Sequence[AffinityRecord],
    val_set: Sequence[AffinityRecord],
    out_dir: Path | None = None,
) -> TrainResult:
    """Continue a run from a checkpoint written by an earlier one."""
    checkpoint = load_checkpoint(checkpoint_path)
    return Trainer(checkpoint.config, out_dir, checkpoint).train(train_set, val_set)


def predict_records(
    checkpoint: Checkpoint,
    records: Sequence[AffinityRecord],
) -> NDArray[np.float64]:
    """Predict an affinity for every record in eval mode."""
    if not records:
        msg = "no records to predict"
        raise DataError(msg)
    model = restore_model(checkpoint)
    return model.predict(encode_for(checkpoint, records), checkpoint.config.batch_size)


def evaluate(
    checkpoint: Checkpoint,
    records: Sequence[AffinityRecord],
    scenario: str = "",
) -> EvaluationReport:
    """
    Score a checkpoint on a dataset.

    Exceptions
    ----------
    DataError:
        The dataset is empty, or records could not be encoded (all listed).

    """
    if not records:
        msg = f"cannot evaluate scenario '{scenario}' on an empty dataset"
        raise DataError(msg)
    predictions = predict_records(checkpoint, records)
    observed = np.array([r.affinity for r in records], dtype=np.float64)
    report = evaluate_predictions(observed, predictions, scenario)
    coldta_logger().info(
        "Evaluated %s: n %d, MSE %.6f, CI %.6f.",
        scenario or "dataset",
        report.n,
        report.mse,
        report.ci,
    )
    return report
