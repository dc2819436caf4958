"""The driver behind the coldta command line."""

###############################################################################
# coldta - cold-start drug-target affinity regression
# Licensed under the MIT License.
###############################################################################
from __future__ import annotations

import logging
from pathlib import Path
from typing import TYPE_CHECKING, Any, NamedTuple

from coldta.checkpoint import load_checkpoint
from coldta.config import make_config, parse_overrides
from coldta.dataio import (
    PREDICTION_COLUMN,
    LoadMode,
    load_dataset,
    records_frame,
    write_frame,
    write_manifest,
)
from coldta.errors import ColdtaBaseError, DataError, ParameterError
from coldta.helpers import coldta_logger, key_value_text, print_output
from coldta.metrics import EvaluationReport, aggregate, aggregate_text
from coldta.saliency import saliency
from coldta.splitting import (
    DEFAULT_RHO,
    TEST_LABEL,
    TRAIN_LABEL,
    VAL_LABEL,
    cold_start_split,
    random_split,
    random_split_meta,
)
from coldta.trainer import BEST_CHECKPOINT, Trainer, evaluate, predict_records

if TYPE_CHECKING:
    from coldta.dataio import AffinityRecord

# Appended to an output file name for its record of the options used.
OPTIONS_SUFFIX = ".options.txt"


class Driver:
    """
    Runs one coldta subcommand from parsed command line options.

    Keeping the work here rather than in __main__ means the tests drive the
    whole command line without spawning a process.
    """

    # Exit codes.
    SUCCESS = 0
    FAILURE = 1

    class Options(NamedTuple):
        """Options container. Each subcommand reads only its own fields."""

        # One of split, train, eval, predict, saliency, aggregate.
        command: str
        # Switch the logger to DEBUG.
        log: bool = False
        # Input data file or manifest.
        data: str = ""
        # Output file (split, predict, saliency, aggregate) or directory (train).
        out: str = ""
        # Only read manifest rows with this split_label.
        label: str | None = None
        # Skip bad data rows instead of stopping at the first one.
        skip_bad_rows: bool = False
        # "pkd" when the affinity column holds K_d in nM.
        transform: str | None = None
        # split
        mode: str = "cold"
        seed: int | None = None
        rho: float = DEFAULT_RHO
        rho_drug: float | None = None
        rho_target: float | None = None
        fractions: tuple[float, ...] = (0.8, 0.1, 0.1)
        # train
        config: str = ""
        train: str = ""
        val: str = ""
        train_label: str | None = None
        val_label: str | None = None
        resume: str = ""
        overrides: tuple[str, ...] = ()
        # Fixed token list files, overriding the config.
        drug_vocab: str = ""
        target_vocab: str = ""
        # eval, predict, saliency
        checkpoint: str = ""
        scenario: str = ""
        report: str = ""
        drug_id: str = ""
        target_id: str = ""
        # aggregate
        reports: tuple[str, ...] = ()

    def __init__(self: Driver) -> None:
        """Initialize the driver."""
        self._logger = coldta_logger()

    def run(self: Driver, options: Options) -> int:
        """
        Execute the subcommand the options name.

        Returns
        -------
            The exit code for the application as a whole.

        """
        if options.log is True:
            self._logger.setLevel(logging.DEBUG)

        handlers = {
            "split": self._command_split,
            "train": self._command_train,
            "eval": self._command_eval,
            "predict": self._command_predict,
            "saliency": self._command_saliency,
            "aggregate": self._command_aggregate,
        }
        if (handler := handlers.get(options.command)) is None:
            print_output(f"Unknown command '{options.command}'.\n")
            return Driver.FAILURE
        try:
            handler(options)
        except ColdtaBaseError as err:
            print_output(f"{err}\n")
            return Driver.FAILURE
        except OSError as err:
            print_output(f"File error: {err}\n")
            return Driver.FAILURE
        return Driver.SUCCESS

    ###########################################################################
    # Private Helper Methods
    ###########################################################################

    @staticmethod
    def _load(
        options: Options,
        path: str,
        label: str | None = None,
    ) -> list[AffinityRecord]:
        """Load the records of a data file, filtered by split label."""
        if not path:
            msg = f"the {options.command} command needs a data file"
            raise DataError(msg)
        mode = LoadMode.SKIP if options.skip_bad_rows else LoadMode.FAIL_FAST
        result = load_dataset(
            Path(path),
            mode=mode,
            transform=options.transform,
            split_label=label,
        )
        if result.errors:
            print_output(f"Skipped {len(result.errors)} bad row(s) in {path}.\n")
        return result.records

    @staticmethod
    def _write_options(options: Options, output: Path) -> None:
        """Record the resolved options next to an output file."""
        values = {k: "" if v is None else v for k, v in options._asdict().items()}
        sidecar = output.with_name(f"{output.name}{OPTIONS_SUFFIX}")
        sidecar.write_text(key_value_text(values), encoding="utf-8")

    @staticmethod
    def _required(options: Options, name: str) -> str:
        value = getattr(options, name)
        if not value:
            msg = f"the {options.command} command needs --{name.replace('_', '-')}"
            raise DataError(msg)
        return value

    ###########################################################################
    # Subcommands
    ###########################################################################

    def _command_split(self: Driver, options: Options) -> None:
        """Split a dataset into a labelled manifest."""
        out = Path(self._required(options, "out"))
        records = self._load(options, options.data, options.label)
        seed = options.seed if options.seed is not None else 0
        labelled: list[tuple[str, list[AffinityRecord]]]
        meta: dict[str, Any]
        match options.mode:
            case "cold":
                bundle = cold_start_split(
                    records,
                    options.rho,
                    seed,
                    rho_drug=options.rho_drug,
                    rho_target=options.rho_target,
                )
                labelled = bundle.labelled()
                meta = bundle.meta()
                for warning in bundle.warnings:
                    print_output(f"Warning: {warning}\n")
            case "random":
                split = random_split(records, options.fractions, seed)
                labelled = [
                    (TRAIN_LABEL, split.train),
                    (VAL_LABEL, split.val),
                    (TEST_LABEL, split.test),
                ]
                meta = random_split_meta(split, options.fractions, seed)
            case _:
                msg = f"unknown split mode '{options.mode}', use cold or random"
                raise ParameterError(msg)
        write_manifest(out, labelled, meta)
        counts = ", ".join(f"{label} {len(subset)}" for label, subset in labelled)
        print_output(f"Wrote {out}: {counts}.\n")

    def _command_train(self: Driver, options: Options) -> None:
        """Train a model, or continue training one."""
        out = Path(self._required(options, "out"))
        overrides = parse_overrides(list(options.overrides))
        if options.seed is not None:
            overrides["seed"] = options.seed
        if options.drug_vocab:
            overrides["drug_vocab_file"] = options.drug_vocab
        if options.target_vocab:
            overrides["target_vocab_file"] = options.target_vocab
        config_path = Path(options.config) if options.config else None

        resume = None
        if options.resume:
            resume = load_checkpoint(Path(options.resume))
            config = (
                make_config(config_path, overrides)
                if config_path is not None or overrides
                else resume.config
            )
        else:
            config = make_config(config_path, overrides)

        train_path = self._required(options, "train")
        train_set = self._load(options, train_path, options.train_label)
        val_set = self._load(options, options.val or train_path, options.val_label)
        result = Trainer(config, out, resume).train(train_set, val_set)
        stop = "stopped early" if result.stopped_early else "ran to completion"
        print_output(
            f"Training {stop} after {len(result.history)} epoch(s). Best "
            f"validation MSE {result.checkpoint.best_val_loss:.6f} at epoch "
            f"{result.checkpoint.epoch}, saved as {out / BEST_CHECKPOINT}.\n",
        )

    def _command_eval(self: Driver, options: Options) -> None:
        """Score a checkpoint on a dataset."""
        checkpoint = load_checkpoint(Path(self._required(options, "checkpoint")))
        records = self._load(options, options.data, options.label)
        scenario = options.scenario or options.label or ""
        report = evaluate(checkpoint, records, scenario)
        if options.report:
            report.write(Path(options.report))
            self._write_options(options, Path(options.report))
        print_output(report.to_text())

    def _command_predict(self: Driver, options: Options) -> None:
        """Write the input rows with a prediction column."""
        checkpoint = load_checkpoint(Path(self._required(options, "checkpoint")))
        out = Path(self._required(options, "out"))
        records = self._load(options, options.data, options.label)
        predictions = predict_records(checkpoint, records)
        frame = records_frame(records)
        frame[PREDICTION_COLUMN] = [repr(float(p)) for p in predictions]
        write_frame(out, frame)
        self._write_options(options, out)
        print_output(f"Wrote {len(records)} prediction(s) to {out}.\n")

    def _command_saliency(self: Driver, options: Options) -> None:
        """Write the residue saliency of one (drug, target) pair."""
        checkpoint = load_checkpoint(Path(self._required(options, "checkpoint")))
        drug_id = self._required(options, "drug_id")
        target_id = self._required(options, "target_id")
        records = self._load(options, options.data, options.label)
        matches = [r for r in records if r.pair == (drug_id, target_id)]
        if not matches:
            msg = f"no record for drug '{drug_id}' and target '{target_id}'"
            raise DataError(msg)
        report = saliency(checkpoint, matches[0])
        if options.out:
            report.write(Path(options.out))
            self._write_options(options, Path(options.out))
        print_output(
            f"Prediction {report.prediction:.6f}. Most salient residues:\n"
            f"{report.top().to_string(index=False)}\n",
        )
        if report.flat_zero is True:
            print_output("The saliency map is zero everywhere.\n")

    def _command_aggregate(self: Driver, options: Options) -> None:
        """Summarize eval reports of independent runs."""
        if not options.reports:
            msg = "the aggregate command needs at least one report"
            raise DataError(msg)
        runs = [EvaluationReport.read(Path(p)) for p in options.reports]
        text = aggregate_text(aggregate(runs), runs)
        if options.out:
            Path(options.out).write_text(text, encoding="utf-8")
        print_output(text)
        self._logger.debug("Aggregated %d report(s).", len(runs))
