"""Contains helper functions used by the different parts of coldta."""

###############################################################################
# coldta - cold-start drug-target affinity regression
# Licensed under the MIT License.
###############################################################################
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any, ClassVar

import numpy as np

if TYPE_CHECKING:
    from collections.abc import Callable, Iterable, Mapping
    from pathlib import Path

###############################################################################
# Logging
###############################################################################

logger: logging.Logger = logging.getLogger("coldta-log")
handler = logging.StreamHandler()
logger.addHandler(handler)
logger.setLevel(logging.INFO)


def coldta_logger() -> logging.Logger:
    """Return the logger for all of coldta to use."""
    return logger


###############################################################################
# Output
###############################################################################


# Note this is a private function.
def __default_output(message: str) -> None:
    """Print output from coldta."""
    print(message, end="")


# If you would like to have your own output function, change this variable.
output_function: Callable[[str], None] = __default_output


def print_output(message: str) -> None:
    """Print output from coldta."""
    output_function(message)


###############################################################################
# Random streams.
###############################################################################


@dataclass
class RngStreams:
    """
    One seeded generator per run, split into independent purpose streams.

    Splitting with a SeedSequence means turning dropout off (for example) does
    not shift the SES noise draws or the shuffle order.
    """

    split: np.random.Generator
    shuffle: np.random.Generator
    noise: np.random.Generator
    dropout: np.random.Generator
    init: np.random.Generator

    # The order matters, it fixes which child seed each purpose receives.
    PURPOSES: ClassVar[tuple[str, ...]] = (
        "split",
        "shuffle",
        "noise",
        "dropout",
        "init",
    )

    @classmethod
    def from_seed(cls: type[RngStreams], seed: int) -> RngStreams:
        """Build every purpose stream from a single seed."""
        children = np.random.SeedSequence(seed).spawn(len(cls.PURPOSES))
        gens = [np.random.Generator(np.random.PCG64(child)) for child in children]
        return cls(*gens)

    def state(self: RngStreams) -> dict[str, Any]:
        """Return the JSON friendly state of every stream."""
        return {
            name: getattr(self, name).bit_generator.state for name in self.PURPOSES
        }

    def restore(self: RngStreams, state: Mapping[str, Any]) -> None:
        """Restore the streams from a dictionary made by state()."""
        for name in self.PURPOSES:
            getattr(self, name).bit_generator.state = state[name]


###############################################################################
# Structured text output.
###############################################################################


def write_json_lines(path: Path, rows: Iterable[Mapping[str, Any]]) -> None:
    """Write one JSON object per line."""
    with path.open(mode="w", encoding="utf-8") as f:
        for row in rows:
            f.write(json.dumps(row, sort_keys=True))
            f.write("\n")


def read_json_lines(path: Path) -> list[dict[str, Any]]:
    """Read a file written by write_json_lines."""
    with path.open(mode="r", encoding="utf-8") as f:
        return [json.loads(line) for line in f if line.strip()]


def key_value_text(values: Mapping[str, Any]) -> str:
    """Build the flat `key = value` block used for configs and reports."""
    lines: list[str] = []
    for key, value in values.items():
        if isinstance(value, (list, tuple)):
            value = "[" + ", ".join(str(v) for v in value) + "]"
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"
