"""The differentiable array and the computation record that backs it."""

###############################################################################
# coldta - cold-start drug-target affinity regression
# Licensed under the MIT License.
###############################################################################
from __future__ import annotations

from contextlib import contextmanager
from contextvars import ContextVar
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from coldta.errors import ContractError
from coldta.helpers import coldta_logger

if TYPE_CHECKING:
    from collections.abc import Callable, Generator, Sequence

    from numpy.typing import ArrayLike, NDArray


class Tensor:
    """
    A shaped float64 array that can take part in reverse-mode differentiation.

    Leaves are created directly (parameters, inputs). Every other tensor is
    the output of a primitive in coldta.ops, which appends an entry to the
    active ComputationRecord when any of its inputs requires a gradient.
    Values of op outputs are read-only.
    """

    def __init__(
        self: Tensor,
        values: ArrayLike,
        *,
        requires_grad: bool = False,
        name: str = "",
    ) -> None:
        """
        Initialize the Tensor class.

        Parameters
        ----------
        values:
            Anything numpy can turn into a float64 array.
        requires_grad:
            If True, backward() populates grad for this tensor.
        name:
            Optional name used in diagnostics (parameters always have one).

        """
        self.values: NDArray[np.float64] = np.array(values, dtype=np.float64)
        self.requires_grad: bool = requires_grad
        self.grad: NDArray[np.float64] | None = None
        self.name: str = name
        # The record that produced this tensor, None for leaves.
        self.record: ComputationRecord | None = None
        # Non-leaf tensors only keep their gradient when asked to.
        self.keeps_grad: bool = False

    @property
    def shape(self: Tensor) -> tuple[int, ...]:
        """Return the shape of the tensor."""
        return tuple(self.values.shape)

    @property
    def ndim(self: Tensor) -> int:
        """Return the number of axes."""
        return self.values.ndim

    @property
    def is_leaf(self: Tensor) -> bool:
        """Return True if no recorded op produced this tensor."""
        return self.record is None

    def item(self: Tensor) -> float:
        """Return the single value of a one element tensor."""
        return float(self.values.reshape(-1)[0])

    def retain_grad(self: Tensor) -> Tensor:
        """Keep the gradient of an intermediate tensor after backward."""
        self.keeps_grad = True
        return self

    def zero_grad(self: Tensor) -> None:
        """Drop any accumulated gradient."""
        self.grad = None

    def accumulate(self: Tensor, gradient: NDArray[np.float64]) -> None:
        """Add a gradient contribution, allocating the buffer on first use."""
        if self.grad is None:
            self.grad = np.zeros_like(self.values)
        self.grad += gradient

    def detach(self: Tensor) -> Tensor:
        """Return a leaf copy that does not take part in differentiation."""
        return Tensor(self.values.copy(), name=self.name)

    def __repr__(self: Tensor) -> str:
        """Return a string representation of the tensor instance."""
        label = f" '{self.name}'" if self.name else ""
        return f"[Tensor{label} {self.shape} grad={self.requires_grad}]"


@dataclass
class OpEntry:
    """One executed op: its inputs, its output and its local gradient rule."""

    name: str
    inputs: tuple[Tensor, ...]
    output: Tensor
    rule: Callable[[NDArray[np.float64]], Sequence[NDArray[np.float64] | None]]


class ComputationRecord:
    """
    The ordered log of executed ops for one forward pass.

    A record belongs to the thread (context) that created it. Replaying it
    backward visits every entry once in reverse order, after which it is
    consumed and its intermediate references are released.
    """

    def __init__(self: ComputationRecord) -> None:
        """Initialize the record."""
        self._entries: list[OpEntry] = []
        self._consumed: bool = False
        self._logger = coldta_logger()

    def __len__(self: ComputationRecord) -> int:
        """Return the number of recorded ops."""
        return len(self._entries)

    @property
    def consumed(self: ComputationRecord) -> bool:
        """Return True once backward has run over this record."""
        return self._consumed

    def append(self: ComputationRecord, entry: OpEntry) -> None:
        """Log an executed op."""
        if self._consumed is True:
            msg = "cannot record into a consumed computation record"
            raise ContractError(msg)
        entry.output.record = self
        self._entries.append(entry)

    def clear(self: ComputationRecord) -> None:
        """Release every intermediate reference held by the record."""
        self._entries = []

    def backward(self: ComputationRecord, loss: Tensor) -> None:
        """
        Populate grad on every grad-enabled leaf reachable from loss.

        Parameters
        ----------
        loss:
            A single element tensor produced by an op in this record.

        Exceptions
        ----------
        ContractError:
            The loss is not a scalar, was not produced by this record, or the
            record has already been replayed.

        """
        if self._consumed is True:
            msg = "computation record already consumed, re-run the forward pass"
            raise ContractError(msg)
        if loss.values.size != 1:
            msg = f"backward needs a scalar loss, got shape {loss.shape}"
            raise ContractError(msg)
        if loss.record is not self or not self._entries:
            msg = "loss was not produced by this computation record"
            raise ContractError(msg)

        self._logger.debug("Backward over %d recorded ops.", len(self._entries))

        # Gradients of non-leaf tensors, keyed by identity.
        pending: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.values)}
        for entry in reversed(self._entries):
            out_grad = pending.pop(id(entry.output), None)
            if out_grad is None:
                continue
            if entry.output.keeps_grad is True:
                entry.output.accumulate(out_grad)
            in_grads = entry.rule(out_grad)
            for tensor, grad in zip(entry.inputs, in_grads, strict=True):
                if grad is None or tensor.requires_grad is False:
                    continue
                if tensor.is_leaf is True:
                    tensor.accumulate(grad)
                elif id(tensor) in pending:
                    pending[id(tensor)] = pending[id(tensor)] + grad
                else:
                    pending[id(tensor)] = grad

        self._consumed = True
        self.clear()
        # Let the next forward pass start a fresh record.
        if _ACTIVE_RECORD.get() is self:
            _ACTIVE_RECORD.set(None)


###############################################################################
# Recording state.
###############################################################################

_ACTIVE_RECORD: ContextVar[ComputationRecord | None] = ContextVar(
    "coldta_active_record",
    default=None,
)
_GRAD_ENABLED: ContextVar[bool] = ContextVar("coldta_grad_enabled", default=True)


def active_record() -> ComputationRecord:
    """Return the record of the current context, starting one if needed."""
    if (record := _ACTIVE_RECORD.get()) is None or record.consumed is True:
        record = ComputationRecord()
        _ACTIVE_RECORD.set(record)
    return record


def grad_enabled() -> bool:
    """Return True if ops are being recorded in this context."""
    return _GRAD_ENABLED.get()


@contextmanager
def no_grad() -> Generator[None, None, None]:
    """Run the body without recording any op."""
    token = _GRAD_ENABLED.set(False)
    try:
        yield
    finally:
        _GRAD_ENABLED.reset(token)


@contextmanager
def fresh_record() -> Generator[ComputationRecord, None, None]:
    """Run the body against a brand new record, restoring the old one after."""
    record = ComputationRecord()
    token = _ACTIVE_RECORD.set(record)
    try:
        yield record
    finally:
        _ACTIVE_RECORD.reset(token)


def backward(loss: Tensor) -> None:
    """Run reverse-mode differentiation from a scalar loss."""
    if loss.record is None:
        msg = "loss was not produced by recorded ops"
        raise ContractError(msg)
    loss.record.backward(loss)


def as_tensor(value: Tensor | ArrayLike) -> Tensor:
    """Wrap a plain array as a constant tensor, pass tensors through."""
    if isinstance(value, Tensor):
        return value
    return Tensor(value)
