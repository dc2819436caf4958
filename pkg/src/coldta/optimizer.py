"""The Adam optimizer with bias correction and L2 weight decay."""

###############################################################################
# coldta - cold-start drug-target affinity regression
# Licensed under the MIT License.
###############################################################################
from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np

from coldta.errors import DivergenceError, ParameterError
from coldta.helpers import coldta_logger

if TYPE_CHECKING:
    from collections.abc import Mapping

    from numpy.typing import NDArray

    from coldta.parameterstore import ParameterStore


def adam_step(  # noqa: PLR0913
    param: NDArray[np.float64],
    grad: NDArray[np.float64],
    m: NDArray[np.float64],
    v: NDArray[np.float64],
    t: int,
    *,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
    weight_decay: float = 0.0,
) -> None:
    """
    Apply one Adam update in place to param, m and v.

    The weight decay term weight_decay * param is added to the gradient
    before the moments see it.

    Parameters
    ----------
    param:
        The parameter values.
    grad:
        The loss gradient of param.
    m:
        The first moment estimate.
    v:
        The second moment estimate.
    t:
        The 1-based step count, for bias correction.
    lr:
        The learning rate.
    beta1:
        First moment decay.
    beta2:
        Second moment decay.
    eps:
        Added to the root of the corrected second moment.
    weight_decay:
        The L2 coefficient.

    """
    if t < 1:
        msg = f"Adam step count must be >= 1, got {t}"
        raise ParameterError(msg)
    if not param.shape == grad.shape == m.shape == v.shape:
        msg = "Adam needs param, grad and moments of one shape"
        raise ParameterError(msg)
    g = grad + weight_decay * param if weight_decay else grad
    m *= beta1
    m += (1.0 - beta1) * g
    v *= beta2
    v += (1.0 - beta2) * g * g
    m_hat = m / (1.0 - beta1**t)
    v_hat = v / (1.0 - beta2**t)
    param -= lr * m_hat / (np.sqrt(v_hat) + eps)


class Adam:
    """Adam over every parameter of a store, one moment pair per parameter."""

    def __init__(  # noqa: PLR0913
        self: Adam,
        store: ParameterStore,
        lr: float,
        *,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
        weight_decay: float = 0.0,
    ) -> None:
        """Initialize zero moments for every parameter."""
        self.store = store
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self.m: dict[str, NDArray[np.float64]] = {}
        self.v: dict[str, NDArray[np.float64]] = {}
        for name, tensor in store:
            self.m[name] = np.zeros_like(tensor.values)
            self.v[name] = np.zeros_like(tensor.values)
        self._logger = coldta_logger()

    def step(self: Adam) -> None:
        """
        Update every parameter from its accumulated gradient.

        Exceptions
        ----------
        DivergenceError:
            Some gradient holds a NaN or an infinity. Nothing is updated.

        """
        for name, tensor in self.store:
            if tensor.grad is not None and not np.all(np.isfinite(tensor.grad)):
                msg = f"non-finite gradient for parameter '{name}'"
                raise DivergenceError(msg, parameter=name)

        self.t += 1
        for name, tensor in self.store:
            grad = (
                tensor.grad.copy()
                if tensor.grad is not None
                else np.zeros_like(tensor.values)
            )
            padding = self.store.padding_row(name)
            if padding is not None:
                grad[padding] = 0.0
            adam_step(
                tensor.values,
                grad,
                self.m[name],
                self.v[name],
                self.t,
                lr=self.lr,
                beta1=self.beta1,
                beta2=self.beta2,
                eps=self.eps,
                weight_decay=self.weight_decay,
            )
            if padding is not None:
                tensor.values[padding] = 0.0
        self._logger.debug("Adam step %d done.", self.t)

    def state_arrays(self: Adam) -> dict[str, NDArray[np.float64]]:
        """Return the moments keyed `adam_m/<name>` and `adam_v/<name>`."""
        arrays = {f"adam_m/{k}": v for k, v in self.m.items()}
        arrays.update({f"adam_v/{k}": v for k, v in self.v.items()})
        return arrays

    def load_state(
        self: Adam,
        arrays: Mapping[str, NDArray[np.float64]],
        t: int,
    ) -> None:
        """Restore the moments written by state_arrays and the step count."""
        for name in self.m:
            self.m[name][...] = arrays[f"adam_m/{name}"]
            self.v[name][...] = arrays[f"adam_v/{name}"]
        self.t = t
