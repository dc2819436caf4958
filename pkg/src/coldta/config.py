"""The training configuration and its flat `key = value` file format."""

###############################################################################
# coldta - cold-start drug-target affinity regression
# Licensed under the MIT License.
###############################################################################
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any

from coldta.errors import ParameterError
from coldta.helpers import key_value_text

if TYPE_CHECKING:
    from collections.abc import Mapping
    from pathlib import Path

# The accepted spellings of the variant switches.
REMAP_CHOICES = ("decnn", "mlp")
POOLING_CHOICES = ("topk", "max")
FUSION_CHOICES = ("attention", "concat")
VOCAB_POLICY_CHOICES = ("unknown", "reject")


@dataclass(frozen=True)
class TrainConfig:
    """Every hyperparameter of a run. Defaults reproduce the full model."""

    learning_rate: float = 5e-4
    batch_size: int = 256
    max_epochs: int = 100
    patience: int = 20
    weight_decay: float = 1e-4
    dropout: float = 0.1
    # `lambda` in config files, the floor of the SES standard deviation.
    lambda_: float = 0.1
    k: int = 4
    l_d: int = 100
    l_t: int = 1000
    d_z: int = 96
    d_t: int = 128
    heads: int = 4
    mlp_hidden: tuple[int, ...] = (1024, 512)
    seed: int = 0

    # Encoder shapes.
    d_e: int = 128
    drug_filters: int = 128
    drug_widths: tuple[int, ...] = (4, 4, 4)
    target_widths: tuple[int, ...] = (4, 8, 12)
    deconv_width: int = 4
    deconv_strides: tuple[int, ...] = (2, 2)

    # Architecture variants.
    dual_view: bool = True
    remap: str = "decnn"
    pooling: str = "topk"
    fusion: str = "attention"

    vocab_policy: str = "unknown"
    # Fixed token lists, one character per line. Empty builds from the data.
    drug_vocab_file: str = ""
    target_vocab_file: str = ""

    def __post_init__(self: TrainConfig) -> None:
        """Validate the field values."""
        for name in (
            "batch_size",
            "max_epochs",
            "k",
            "l_d",
            "l_t",
            "d_z",
            "d_t",
            "heads",
            "d_e",
            "drug_filters",
            "deconv_width",
        ):
            if getattr(self, name) < 1:
                msg = f"{name} must be positive, got {getattr(self, name)}"
                raise ParameterError(msg)
        if self.learning_rate <= 0.0:
            msg = f"learning_rate must be positive, got {self.learning_rate}"
            raise ParameterError(msg)
        if self.lambda_ <= 0.0:
            msg = f"lambda must be positive, got {self.lambda_}"
            raise ParameterError(msg)
        if self.weight_decay < 0.0:
            msg = f"weight_decay must be >= 0, got {self.weight_decay}"
            raise ParameterError(msg)
        if not 0.0 <= self.dropout < 1.0:
            msg = f"dropout must lie in [0, 1), got {self.dropout}"
            raise ParameterError(msg)
        if not 0 <= self.patience <= self.max_epochs:
            msg = f"patience must lie in [0, max_epochs], got {self.patience}"
            raise ParameterError(msg)
        if self.d_t % self.heads != 0:
            msg = f"d_t ({self.d_t}) must be divisible by heads ({self.heads})"
            raise ParameterError(msg)
        if len(self.drug_widths) != 3 or len(self.target_widths) != 3:  # noqa: PLR2004
            msg = "drug_widths and target_widths need exactly three entries"
            raise ParameterError(msg)
        if len(self.deconv_strides) != 2:  # noqa: PLR2004
            msg = "deconv_strides needs exactly two entries (layers 2 and 3)"
            raise ParameterError(msg)
        lists = (*self.mlp_hidden, *self.drug_widths, *self.target_widths)
        if any(v < 1 for v in (*lists, *self.deconv_strides)):
            msg = "list entries must be positive"
            raise ParameterError(msg)
        self._validate_choices()

    def _validate_choices(self: TrainConfig) -> None:
        for name, choices in (
            ("remap", REMAP_CHOICES),
            ("pooling", POOLING_CHOICES),
            ("fusion", FUSION_CHOICES),
            ("vocab_policy", VOCAB_POLICY_CHOICES),
        ):
            if getattr(self, name) not in choices:
                msg = f"{name} must be one of {choices}, got '{getattr(self, name)}'"
                raise ParameterError(msg)

    @property
    def pooled_k(self: TrainConfig) -> int:
        """Return the number of rows pooling keeps per channel."""
        return 1 if self.pooling == "max" else self.k

    @property
    def conv_length(self: TrainConfig) -> int:
        """Return L'_t, the length of the protein feature map."""
        return self.l_t - self.target_widths[-1] + 1


###############################################################################
# The flat file format.
###############################################################################

# Config file spellings that differ from the field name.
_FILE_KEYS: dict[str, str] = {"lambda_": "lambda"}
_FIELD_NAMES: dict[str, str] = {v: k for k, v in _FILE_KEYS.items()}

_TRUE_WORDS = frozenset(("true", "t", "yes", "1"))
_FALSE_WORDS = frozenset(("false", "f", "no", "0"))


def _field_name(key: str) -> str | None:
    """Map a file key onto a field name, keys being case-insensitive."""
    key = key.strip().lower()
    key = _FIELD_NAMES.get(key, key)
    known = {f.name for f in dataclasses.fields(TrainConfig)}
    return key if key in known else None


def _convert(name: str, text: str) -> Any:  # noqa: ANN401
    """Turn the text of a value into the type of the field's default."""
    default = next(f.default for f in dataclasses.fields(TrainConfig) if f.name == name)
    text = text.strip()
    try:
        if isinstance(default, bool):
            lowered = text.lower()
            if lowered in _TRUE_WORDS:
                return True
            if lowered in _FALSE_WORDS:
                return False
            msg = f"'{text}' is not a boolean"
            raise ValueError(msg)
        if isinstance(default, tuple):
            inner = text.strip("[]() ")
            return tuple(int(v) for v in inner.split(",") if v.strip())
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
    except ValueError as err:
        msg = f"bad value for {name}: {err}"
        raise ParameterError(msg) from err
    return text


def parse_config_text(text: str) -> dict[str, Any]:
    """
    Parse the flat config format into field values.

    Every non-blank line that is not a `#` comment must be `key = value`.
    Text after a `#` on a value line is a comment.

    Exceptions
    ----------
    ParameterError:
        A line is malformed, a key is unknown, or a value does not convert.

    """
    values: dict[str, Any] = {}
    for line_number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            msg = f"line {line_number}: expected 'key = value', got '{raw.strip()}'"
            raise ParameterError(msg)
        name = _field_name(key)
        if name is None:
            msg = f"line {line_number}: unknown config key '{key.strip()}'"
            raise ParameterError(msg)
        values[name] = _convert(name, value)
    return values


def parse_overrides(pairs: list[str]) -> dict[str, Any]:
    """Parse command line `key=value` overrides."""
    values: dict[str, Any] = {}
    for pair in pairs:
        key, sep, value = pair.partition("=")
        name = _field_name(key) if sep else None
        if name is None:
            msg = f"bad override '{pair}', expected a known key=value"
            raise ParameterError(msg)
        values[name] = _convert(name, value)
    return values


def make_config(
    path: Path | None = None,
    overrides: Mapping[str, Any] | None = None,
) -> TrainConfig:
    """Build a config from the defaults, an optional file, then overrides."""
    values: dict[str, Any] = {}
    if path is not None:
        values.update(parse_config_text(path.read_text(encoding="utf-8")))
    if overrides:
        values.update(overrides)
    return TrainConfig(**values)


def config_to_dict(config: TrainConfig) -> dict[str, Any]:
    """Return the config keyed by file spelling, lists as lists."""
    result: dict[str, Any] = {}
    for f in dataclasses.fields(config):
        value = getattr(config, f.name)
        result[_FILE_KEYS.get(f.name, f.name)] = (
            list(value) if isinstance(value, tuple) else value
        )
    return result


def config_from_dict(values: Mapping[str, Any]) -> TrainConfig:
    """Rebuild a config from config_to_dict output."""
    fields: dict[str, Any] = {}
    for key, value in values.items():
        name = _field_name(key)
        if name is None:
            msg = f"unknown config key '{key}'"
            raise ParameterError(msg)
        fields[name] = tuple(value) if isinstance(value, list) else value
    return TrainConfig(**fields)


def config_text(config: TrainConfig) -> str:
    """Render the config in the flat file format."""
    values = config_to_dict(config)
    for key, value in values.items():
        if isinstance(value, bool):
            values[key] = str(value).lower()
    return key_value_text(values)
