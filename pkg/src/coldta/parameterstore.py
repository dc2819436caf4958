"""The registry of every named, trainable tensor in a model."""

###############################################################################
# coldta - cold-start drug-target affinity regression
# Licensed under the MIT License.
###############################################################################
from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any

import numpy as np

# Note that Sorted Containers does not have any typing information in the code.
# Make sure to install the sortedcontainers-stubs package for full support.
# https://github.com/h4l/sortedcontainers-stubs
from sortedcontainers import SortedDict

from coldta.errors import ParameterError, ShapeError
from coldta.tensor import Tensor

if TYPE_CHECKING:
    from collections.abc import Generator, Mapping

    from numpy.typing import ArrayLike, NDArray


@dataclass
class ParameterStore:
    """
    The named parameters of a model, kept sorted by name.

    Sorting by name fixes the order parameters are saved, updated and
    reported in, whatever order the layers were built in. Embedding tables
    register their padding row, which stays pinned at zero.
    """

    # Pylint and Ruff doesn't like the lambda here, but mypy complains without
    # it.
    _parameters: SortedDict[str, Tensor] = field(
        default_factory=lambda: SortedDict(),  # pylint: disable=unnecessary-lambda  # noqa: PLW0108
    )
    # Parameter name -> the row index that is frozen at zero.
    _padding_rows: dict[str, int] = field(default_factory=dict)

    def register(
        self: ParameterStore,
        name: str,
        values: ArrayLike,
        padding_row: int | None = None,
    ) -> Tensor:
        """Add a new trainable tensor under a unique name."""
        if name in self._parameters:
            msg = f"parameter '{name}' is already registered"
            raise ParameterError(msg)
        tensor = Tensor(values, requires_grad=True, name=name)
        if padding_row is not None:
            tensor.values[padding_row] = 0.0
            self._padding_rows[name] = padding_row
        self._parameters[name] = tensor
        return tensor

    def __getitem__(self: ParameterStore, key: str) -> Tensor:
        """Return the parameter with the given name."""
        if key not in self._parameters:
            msg = f"no parameter named '{key}'"
            raise ParameterError(msg)
        return self._parameters[key]

    def __contains__(self: ParameterStore, key: object) -> bool:
        """Return True if a parameter has the given name."""
        return key in self._parameters

    def __len__(self: ParameterStore) -> int:
        """Return the number of parameters."""
        return len(self._parameters)

    def __iter__(self: ParameterStore) -> Generator[tuple[str, Tensor], Any, None]:
        """Enumerate the parameters as (name, tensor) in name order."""
        for key in self._parameters:
            yield key, self._parameters[key]

    def names(self: ParameterStore) -> list[str]:
        """Return the parameter names in order."""
        return list(self._parameters.keys())

    def padding_row(self: ParameterStore, name: str) -> int | None:
        """Return the frozen row of an embedding table, None for the rest."""
        return self._padding_rows.get(name)

    def size(self: ParameterStore) -> int:
        """Return the total number of scalar parameters."""
        return sum(t.values.size for t in self._parameters.values())

    def zero_grad(self: ParameterStore) -> None:
        """Drop every accumulated gradient."""
        for tensor in self._parameters.values():
            tensor.zero_grad()

    def snapshot(self: ParameterStore) -> dict[str, NDArray[np.float64]]:
        """Return a copy of every parameter's values."""
        return {k: t.values.copy() for k, t in self._parameters.items()}

    def load(self: ParameterStore, arrays: Mapping[str, NDArray[np.float64]]) -> None:
        """
        Overwrite every parameter in place from a name -> array mapping.

        The mapping must name exactly the registered parameters, each with
        the registered shape.
        """
        missing = set(self._parameters) - set(arrays)
        extra = set(arrays) - set(self._parameters)
        if missing or extra:
            msg = (
                f"parameter names differ, missing {sorted(missing)}, "
                f"unexpected {sorted(extra)}"
            )
            raise ParameterError(msg)
        for name, tensor in self._parameters.items():
            values = np.asarray(arrays[name], dtype=np.float64)
            if values.shape != tensor.shape:
                msg = f"parameter '{name}' has the wrong shape"
                raise ShapeError(msg, tensor.shape, values.shape)
            tensor.values[...] = values

    def summary_string(self: ParameterStore) -> str:
        """Build the table of parameter names and shapes."""
        return_string: str = ""
        for name, tensor in self._parameters.items():
            shape = "x".join(str(s) for s in tensor.shape)
            return_string += f"{name:<40}{shape:>16}\n"
        return_string += f"{'total':<40}{self.size():>16}\n"
        return return_string
