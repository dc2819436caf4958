"""Unit tests for the training configuration."""

###############################################################################
# coldta - cold-start drug-target affinity regression
# Licensed under the MIT License.
###############################################################################

from __future__ import annotations

from typing import TYPE_CHECKING, Any

import pytest

from coldta.config import (
    TrainConfig,
    config_from_dict,
    config_text,
    config_to_dict,
    make_config,
    parse_config_text,
    parse_overrides,
)
from coldta.errors import ParameterError
from tests.common import micro

if TYPE_CHECKING:
    from pathlib import Path


def test_defaults() -> None:
    """The full-size model."""
    config = TrainConfig()
    assert config.conv_length == 989  # noqa: PLR2004
    assert config.pooled_k == 4  # noqa: PLR2004
    assert TrainConfig(pooling="max").pooled_k == 1


def test_parse_text() -> None:
    """Comments, case, lists and booleans."""
    text = (
        "# a run\n"
        "\n"
        "lambda = 0.05\n"
        "mlp_hidden = [32, 16]\n"
        "dual_view = false\n"
        "REMAP = mlp  # flat remap\n"
        "batch_size=64\n"
    )
    assert parse_config_text(text) == {
        "lambda_": 0.05,
        "mlp_hidden": (32, 16),
        "dual_view": False,
        "remap": "mlp",
        "batch_size": 64,
    }


@pytest.mark.parametrize(
    ("text", "fragment"),
    [
        ("learning_rate 0.1\n", "line 1"),
        ("seed = 1\nnot_a_key = 2\n", "line 2"),
        ("seed = one\n", "seed"),
        ("dual_view = maybe\n", "dual_view"),
    ],
)
def test_parse_errors(text: str, fragment: str) -> None:
    """Malformed lines, unknown keys and bad values."""
    with pytest.raises(ParameterError) as exc:
        parse_config_text(text)
    assert fragment in str(exc.value)


def test_overrides() -> None:
    """Command line key=value pairs."""
    assert parse_overrides(["seed=3", "lambda=0.2"]) == {"seed": 3, "lambda_": 0.2}
    with pytest.raises(ParameterError):
        parse_overrides(["seed"])
    with pytest.raises(ParameterError):
        parse_overrides(["bogus=1"])


def test_make_config(tmp_path: Path) -> None:
    """Overrides beat the file, the file beats the defaults."""
    path = tmp_path / "run.txt"
    path.write_text("seed = 1\nk = 8\n", encoding="utf-8")
    config = make_config(path, {"seed": 9})
    assert config.seed == 9  # noqa: PLR2004
    assert config.k == 8  # noqa: PLR2004
    assert config.l_t == TrainConfig().l_t
    assert make_config() == TrainConfig()


def test_text_round_trip() -> None:
    """config_text output parses back to the same config."""
    config = micro(dual_view=False, remap="mlp", fusion="concat", dropout=0.25)
    assert TrainConfig(**parse_config_text(config_text(config))) == config
    assert "lambda = 0.1\n" in config_text(config)
    assert "dual_view = false\n" in config_text(config)


def test_dict_round_trip() -> None:
    """The checkpoint header form."""
    config = micro()
    values = config_to_dict(config)
    assert "lambda" in values
    assert values["mlp_hidden"] == [16, 8]
    assert config_from_dict(values) == config
    with pytest.raises(ParameterError):
        config_from_dict({"nope": 1})


@pytest.mark.parametrize(
    "changes",
    [
        {"batch_size": 0},
        {"learning_rate": 0.0},
        {"lambda_": 0.0},
        {"dropout": 1.0},
        {"weight_decay": -1.0},
        {"patience": 200},
        {"heads": 3},
        {"remap": "lstm"},
        {"pooling": "mean"},
        {"fusion": "sum"},
        {"vocab_policy": "ignore"},
        {"deconv_strides": (2,)},
        {"target_widths": (4, 8)},
        {"mlp_hidden": (16, 0)},
    ],
)
def test_validation(changes: dict[str, Any]) -> None:
    """Out of range values are rejected on construction."""
    with pytest.raises(ParameterError):
        TrainConfig(**changes)


def test_vocabulary_file_keys() -> None:
    """File paths are plain text, empty by default."""
    assert TrainConfig().drug_vocab_file == ""
    values = parse_config_text("drug_vocab_file = vocab/smiles.txt\n")
    assert values == {"drug_vocab_file": "vocab/smiles.txt"}
    config = micro(target_vocab_file="residues.txt")
    assert make_config(None, parse_config_text(config_text(config))) == config
