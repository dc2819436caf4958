"""Unit tests for the Driver class and the command line."""

###############################################################################
# coldta - cold-start drug-target affinity regression
# Licensed under the MIT License.
###############################################################################

from __future__ import annotations

import json
import logging
from typing import TYPE_CHECKING

import pandas as pd
import pytest

from coldta.__main__ import main
from coldta.checkpoint import load_checkpoint
from coldta.config import config_text
from coldta.dataio import meta_path, records_frame, write_frame
from coldta.driver import Driver
from coldta.helpers import coldta_logger
from coldta.trainer import BEST_CHECKPOINT
from tests.common import PROTEIN_ALPHABET, SMILES_ALPHABET, micro, synthetic_records

if TYPE_CHECKING:
    from pathlib import Path

    from pytest import CaptureFixture  # noqa: PT013

HEADER = "drug_id,smiles,target_id,sequence,affinity\n"


def write_data(tmp_path: Path) -> Path:
    """A 6 x 5 synthetic grid as CSV."""
    path = tmp_path / "data.csv"
    write_frame(path, records_frame(synthetic_records(6, 5, seed=4)))
    return path


def write_config(tmp_path: Path) -> Path:
    """A micro config file running two epochs."""
    path = tmp_path / "micro.txt"
    path.write_text(config_text(micro(max_epochs=2)), encoding="utf-8")
    return path


def test_initialization() -> None:
    """Test to see if the Driver initializes."""
    driver: Driver = Driver()
    assert driver is not None


def test_unknown_command(capsys: CaptureFixture[str]) -> None:
    """Only the six subcommands exist."""
    ret: int = Driver().run(Driver.Options(command="dance"))
    assert ret == Driver.FAILURE
    assert "Unknown command 'dance'." in capsys.readouterr().out


def test_log_switch() -> None:
    """--log turns on debug output."""
    logger = coldta_logger()
    try:
        Driver().run(Driver.Options(command="aggregate", log=True))
        assert logger.level == logging.DEBUG
    finally:
        logger.setLevel(logging.INFO)


def test_version(capsys: CaptureFixture[str]) -> None:
    """--version prints and exits."""
    with pytest.raises(SystemExit):
        main(["--version"])
    assert "coldta" in capsys.readouterr().out


def test_cold_split(tmp_path: Path, capsys: CaptureFixture[str]) -> None:
    """A labelled manifest and its metadata."""
    data = write_data(tmp_path)
    manifest = tmp_path / "manifest.csv"
    ret: int = main(
        ["split", "--data", str(data), "--out", str(manifest)]
        + ["--seed", "1", "--rho", "0.4"],
    )
    assert ret == Driver.SUCCESS
    frame = pd.read_csv(manifest)
    assert len(frame) == 30  # noqa: PLR2004
    assert (frame["split_label"] == "train").sum() == 12  # noqa: PLR2004
    meta = json.loads(meta_path(manifest).read_text(encoding="utf-8"))
    assert meta["seed"] == 1
    assert len(meta["unseen_drugs"]) == 2  # noqa: PLR2004
    assert f"Wrote {manifest}: train 12" in capsys.readouterr().out


def test_random_split(tmp_path: Path) -> None:
    """Train, val and test by fraction."""
    data = write_data(tmp_path)
    manifest = tmp_path / "manifest.tsv"
    ret: int = main(
        [
            "split",
            "--data",
            str(data),
            "--out",
            str(manifest),
            "--mode",
            "random",
            "--fractions",
            "0.6,0.2,0.2",
        ],
    )
    assert ret == Driver.SUCCESS
    counts = pd.read_csv(manifest, sep="\t")["split_label"].value_counts()
    assert counts.to_dict() == {"train": 18, "val": 6, "test": 6}


def test_bad_fractions(tmp_path: Path, capsys: CaptureFixture[str]) -> None:
    """Fractions that do not sum to one."""
    data = write_data(tmp_path)
    out = str(tmp_path / "m.csv")
    ret: int = main(
        ["split", "--data", str(data), "--out", out, "--mode", "random"]
        + ["--fractions", "0.5,0.5,0.5"],
    )
    assert ret == Driver.FAILURE
    assert "Parameter Error" in capsys.readouterr().out


def test_bad_rows(tmp_path: Path, capsys: CaptureFixture[str]) -> None:
    """A malformed row stops the command unless it is skipped."""
    data = tmp_path / "bad.csv"
    rows = "D1,CCO,T1,MKV,5.0\nD2,CCN,T2,MKV,abc\n"
    data.write_text(HEADER + rows, encoding="utf-8")
    out = str(tmp_path / "m.csv")
    ret: int = main(["split", "--data", str(data), "--out", out])
    assert ret == Driver.FAILURE
    expected = "Data Error: affinity 'abc' is not a number [Row 2"
    assert expected in capsys.readouterr().out
    ret = main(["split", "--data", str(data), "--out", out, "--skip-bad-rows"])
    assert ret == Driver.SUCCESS
    assert "Skipped 1 bad row(s)" in capsys.readouterr().out


def test_ragged_row(tmp_path: Path, capsys: CaptureFixture[str]) -> None:
    """A row with a surplus field fails the command with its row number."""
    data = tmp_path / "ragged.csv"
    rows = "D1,CCO,T1,MKV,5.0\nD2,CCN,T2,MKV,6.0,extra\n"
    data.write_text(HEADER + rows, encoding="utf-8")
    out = str(tmp_path / "m.csv")
    ret: int = main(["split", "--data", str(data), "--out", out, "--skip-bad-rows"])
    assert ret == Driver.FAILURE
    assert "Data Error: expected 5 fields, found 6" in capsys.readouterr().out


def test_full_workflow(tmp_path: Path, capsys: CaptureFixture[str]) -> None:
    """Split, train, evaluate, predict, explain and aggregate."""
    data = write_data(tmp_path)
    manifest = tmp_path / "manifest.csv"
    ret: int = main(
        ["split", "--data", str(data), "--out", str(manifest), "--rho", "0.4"],
    )
    assert ret == Driver.SUCCESS

    run = tmp_path / "run"
    ret = main(
        [
            "train",
            "--config",
            str(write_config(tmp_path)),
            "--train",
            str(manifest),
            "--train-label",
            "train",
            "--val",
            str(manifest),
            "--val-label",
            "val",
            "--out",
            str(run),
        ],
    )
    assert ret == Driver.SUCCESS
    assert "Best validation MSE" in capsys.readouterr().out
    best = str(run / BEST_CHECKPOINT)

    reports = []
    for label in ("train", "val"):
        report = tmp_path / f"{label}.txt"
        ret = main(
            ["eval", "--checkpoint", best, "--data", str(manifest)]
            + ["--label", label, "--scenario", "seen", "--report", str(report)],
        )
        assert ret == Driver.SUCCESS
        reports.append(str(report))
    assert "scenario = seen" in capsys.readouterr().out
    assert "label = val\n" in (tmp_path / "val.txt.options.txt").read_text(
        encoding="utf-8",
    )

    predictions = tmp_path / "predictions.tsv"
    ret = main(
        ["predict", "--checkpoint", best, "--data", str(data)]
        + ["--out", str(predictions)],
    )
    assert ret == Driver.SUCCESS
    frame = pd.read_csv(predictions, sep="\t")
    assert len(frame) == 30  # noqa: PLR2004
    assert frame["prediction"].notna().all()
    options = (tmp_path / "predictions.tsv.options.txt").read_text(encoding="utf-8")
    assert "command = predict\n" in options
    assert f"checkpoint = {best}\n" in options

    salient = tmp_path / "saliency.csv"
    ret = main(
        ["saliency", "--checkpoint", best, "--data", str(data)]
        + ["--drug-id", "D000", "--target-id", "T000", "--out", str(salient)],
    )
    assert ret == Driver.SUCCESS
    assert "Most salient residues" in capsys.readouterr().out
    assert len(pd.read_csv(salient)) == 13  # noqa: PLR2004
    assert (tmp_path / "saliency.csv.options.txt").exists()

    summary = tmp_path / "summary.txt"
    ret = main(["aggregate", "--reports", *reports, "--out", str(summary)])
    assert ret == Driver.SUCCESS
    assert "seen.runs = 2\n" in summary.read_text(encoding="utf-8")


def test_resume_from_checkpoint(tmp_path: Path, capsys: CaptureFixture[str]) -> None:
    """--resume continues a finished run for more epochs."""
    data = write_data(tmp_path)
    config = str(write_config(tmp_path))
    run = tmp_path / "run"
    first = ["train", "--config", config, "--train", str(data), "--out", str(run)]
    assert main(first) == Driver.SUCCESS
    ret: int = main(
        ["train", "--config", config, "--train", str(data), "--out", str(run)]
        + ["--resume", str(run / "last.ckpt"), "--set", "max_epochs=3"],
    )
    assert ret == Driver.SUCCESS
    assert "after 1 epoch(s)" in capsys.readouterr().out


def test_missing_checkpoint(tmp_path: Path, capsys: CaptureFixture[str]) -> None:
    """File errors are reported, not raised."""
    data = write_data(tmp_path)
    missing = str(tmp_path / "missing.ckpt")
    ret: int = main(["eval", "--checkpoint", missing, "--data", str(data)])
    assert ret == Driver.FAILURE
    assert "File error" in capsys.readouterr().out


def test_bad_override(tmp_path: Path, capsys: CaptureFixture[str]) -> None:
    """Unknown config keys fail the train command."""
    data = str(write_data(tmp_path))
    out = str(tmp_path / "run")
    ret: int = main(["train", "--train", data, "--out", out, "--set", "nope=1"])
    assert ret == Driver.FAILURE
    assert "Parameter Error" in capsys.readouterr().out


def test_saliency_unknown_pair(tmp_path: Path, capsys: CaptureFixture[str]) -> None:
    """The pair must be in the data file."""
    data = write_data(tmp_path)
    config = str(write_config(tmp_path))
    run = tmp_path / "run"
    first = ["train", "--config", config, "--train", str(data), "--out", str(run)]
    assert main(first) == Driver.SUCCESS
    ret: int = main(
        ["saliency", "--checkpoint", str(run / BEST_CHECKPOINT), "--data", str(data)]
        + ["--drug-id", "D999", "--target-id", "T000"],
    )
    assert ret == Driver.FAILURE
    assert "no record for drug 'D999'" in capsys.readouterr().out


def test_aggregate_without_reports(capsys: CaptureFixture[str]) -> None:
    """Nothing to summarize."""
    ret: int = Driver().run(Driver.Options(command="aggregate"))
    assert ret == Driver.FAILURE
    assert "at least one report" in capsys.readouterr().out


def test_vocabulary_flags(tmp_path: Path) -> None:
    """--drug-vocab and --target-vocab fix the vocabularies of a run."""
    data = write_data(tmp_path)
    drug_file = tmp_path / "smiles.txt"
    drug_file.write_text("\n".join(SMILES_ALPHABET + "BrF"), encoding="utf-8")
    target_file = tmp_path / "residues.txt"
    target_file.write_text("\n".join(PROTEIN_ALPHABET), encoding="utf-8")
    run = tmp_path / "run"
    ret: int = main(
        ["train", "--config", str(write_config(tmp_path)), "--train", str(data)]
        + ["--out", str(run), "--set", "vocab_policy=reject"]
        + ["--drug-vocab", str(drug_file), "--target-vocab", str(target_file)],
    )
    assert ret == Driver.SUCCESS
    checkpoint = load_checkpoint(run / BEST_CHECKPOINT)
    assert sorted(checkpoint.drug_vocab.tokens) == sorted(SMILES_ALPHABET + "BrF")
    assert len(checkpoint.target_vocab) == len(PROTEIN_ALPHABET)
    written = (run / "config.txt").read_text(encoding="utf-8")
    assert f"drug_vocab_file = {drug_file}\n" in written
