"""The coldta exception types."""

###############################################################################
# coldta - cold-start drug-target affinity regression
# Licensed under the MIT License.
###############################################################################
from __future__ import annotations


class ColdtaBaseError(Exception):
    """The base exception class for all coldta exceptions."""

    def __init__(self: ColdtaBaseError, message: str) -> None:
        """Initialize the base class."""
        super().__init__(message)
        self.message = message
        self.friendly_name = "!!!BASE EXCEPTION CLASS!!!"

    def _location(self: ColdtaBaseError) -> str:
        """Return the location suffix, empty when the error has none."""
        return ""

    def __str__(self: ColdtaBaseError) -> str:
        """Nicely prints the exception."""
        return f"{self.friendly_name}: {self.message}{self._location()}"


class ShapeError(ColdtaBaseError):
    """Two tensors (or a tensor and a contract) disagree on shape."""

    def __init__(
        self: ShapeError,
        message: str,
        *shapes: tuple[int, ...],
    ) -> None:
        """Initialize the shape error with the offending shapes."""
        super().__init__(message)
        self.shapes: tuple[tuple[int, ...], ...] = shapes
        self.friendly_name = "Shape Error"

    def _location(self: ShapeError) -> str:
        if not self.shapes:
            return ""
        return " [shapes: " + ", ".join(str(s) for s in self.shapes) + "]"


class ParameterError(ColdtaBaseError):
    """An argument or hyperparameter value is out of range."""

    def __init__(self: ParameterError, message: str) -> None:
        """Initialize the parameter error exception."""
        super().__init__(message)
        self.friendly_name = "Parameter Error"


class ContractError(ColdtaBaseError):
    """The autograd machinery was used outside its contract."""

    def __init__(self: ContractError, message: str) -> None:
        """Initialize the contract error exception."""
        super().__init__(message)
        self.friendly_name = "Contract Error"


class DataError(ColdtaBaseError):
    """A data row or a sequence could not be ingested or encoded."""

    def __init__(
        self: DataError,
        message: str,
        row: int = 0,
        column: str = "",
        position: int = -1,
    ) -> None:
        """
        Initialize the data error exception.

        Parameters
        ----------
        message:
            What went wrong.
        row:
            The 1-based data row (0 means the header or the file as a whole).
        column:
            The column name, if known.
        position:
            The character position inside a sequence, -1 if not applicable.

        """
        super().__init__(message)
        self.row = row
        self.column = column
        self.position = position
        self.friendly_name = "Data Error"

    def _location(self: DataError) -> str:
        parts: list[str] = []
        if self.row > 0:
            parts.append(f"Row {self.row}")
        if self.column:
            parts.append(f"Col '{self.column}'")
        if self.position >= 0:
            parts.append(f"Pos {self.position}")
        return f" [{', '.join(parts)}]" if parts else ""


class DomainError(ColdtaBaseError):
    """A mathematical quantity is undefined for the given input."""

    def __init__(self: DomainError, message: str) -> None:
        """Initialize the domain error exception."""
        super().__init__(message)
        self.friendly_name = "Domain Error"


class CheckpointError(ColdtaBaseError):
    """A checkpoint container is malformed or of an unsupported version."""

    def __init__(self: CheckpointError, message: str) -> None:
        """Initialize the checkpoint error exception."""
        super().__init__(message)
        self.friendly_name = "Checkpoint Error"


class DivergenceError(ColdtaBaseError):
    """Training produced a non-finite loss or gradient."""

    def __init__(self: DivergenceError, message: str, parameter: str = "") -> None:
        """Initialize the divergence error exception."""
        super().__init__(message)
        self.parameter = parameter
        # Where the last good checkpoint was written, empty if nowhere.
        self.checkpoint_path: str = ""
        self.friendly_name = "Divergence Error"
