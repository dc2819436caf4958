"""The dual-view drug encoder: SES sampling and DeCNN remapping."""

###############################################################################
# coldta - cold-start drug-target affinity regression
# Licensed under the MIT License.
###############################################################################
from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from coldta import ops
from coldta.errors import ContractError, ParameterError
from coldta.layers import ConvTranspose1d, Dense, Embedding, GatedConv1d
from coldta.tensor import Tensor

if TYPE_CHECKING:
    from collections.abc import Sequence

    from numpy.typing import NDArray

    from coldta.config import TrainConfig
    from coldta.helpers import RngStreams
    from coldta.parameterstore import ParameterStore


###############################################################################
# Stochastic encoding.
###############################################################################


def ses_sample(
    mu: Tensor,
    h_var: Tensor,
    lambda_: float,
    noise: NDArray[np.float64] | None,
    *,
    train: bool,
) -> tuple[Tensor, Tensor]:
    """
    Draw z from the lower-bounded latent distribution.

    sigma = lambda * exp(relu(h_var) / 2), so sigma >= lambda everywhere. In
    train mode z = mu + noise * sigma and the gradient reaches sigma through
    the noise path; in eval mode z is mu itself and noise is ignored.

    Returns
    -------
        The (z, sigma) pair.

    """
    if not lambda_ > 0.0:
        msg = f"lambda must be positive, got {lambda_}"
        raise ParameterError(msg)
    sigma = ops.scale(ops.exp(ops.scale(ops.relu(h_var), 0.5)), lambda_)
    if np.any(sigma.values < lambda_):
        msg = f"sigma fell below its floor {lambda_}"
        raise ContractError(msg)
    if train is False:
        return mu, sigma
    if noise is None or noise.shape != mu.shape:
        msg = "train mode sampling needs one noise value per latent entry"
        raise ParameterError(msg)
    return ops.add(mu, ops.mul(Tensor(noise), sigma)), sigma


###############################################################################
# The shared encoder.
###############################################################################


class SharedEncoder:
    """
    The encoder E used by both views.

    Three gated convolutions over an embedded sequence, a mean over the
    length axis, then two projections to mu and h_var. The instance view
    feeds it embedded tokens, the distribution view feeds it the remapped
    map, and both read the same parameters.
    """

    def __init__(
        self: SharedEncoder,
        store: ParameterStore,
        config: TrainConfig,
        vocab_size: int,
        rng: np.random.Generator,
    ) -> None:
        """Register the embedding, the gated block and both projections."""
        self.embedding = Embedding(store, "drug/embedding", vocab_size, config.d_e, rng)
        self.gated: list[GatedConv1d] = []
        channels = config.d_e
        for i, width in enumerate(config.drug_widths, start=1):
            shape = (width, channels, config.drug_filters)
            self.gated.append(GatedConv1d(store, f"drug/gated{i}", shape, rng))
            channels = config.drug_filters
        self.mu = Dense(store, "drug/mu", channels, config.d_z, rng)
        self.h_var = Dense(store, "drug/h_var", channels, config.d_z, rng)

    def gated_block(self: SharedEncoder, x: Tensor) -> Tensor:
        """Run x[..., L_d, d_e] through the three gated layers."""
        for layer in self.gated:
            x = layer(x)
        return x

    def encode(
        self: SharedEncoder,
        x: Tensor,
        *,
        dropout: float = 0.0,
        train: bool = False,
        rng: np.random.Generator | None = None,
    ) -> tuple[Tensor, Tensor]:
        """Map an embedded sequence to (mu, h_var)."""
        features = ops.dropout(self.gated_block(x), dropout, train=train, rng=rng)
        pooled = ops.mean(features, axis=-2)
        return self.mu(pooled), self.h_var(pooled)


###############################################################################
# Remapping.
###############################################################################


def plan_deconv(
    l_d: int,
    width: int,
    strides: Sequence[int],
) -> tuple[int, int]:
    """
    Solve the widths of the first and last transposed convolution.

    Layer 1 expands a length 1 map to length W1, layer 2 has the fixed width
    and stride s2, layer 3 has stride s3 and width W3. W1 is the smallest
    width for which W3 lands in [width, width + s2 * s3 - 1], which makes the
    final length exactly l_d.

    Returns
    -------
        The (W1, W3) pair.

    Exceptions
    ----------
    ParameterError:
        No widths reach l_d; the message names the smallest reachable length.

    """
    s2, s3 = strides
    span = s2 * s3
    w1 = 1
    while True:
        l2 = (w1 - 1) * s2 + width
        w3 = l_d - (l2 - 1) * s3
        if w3 < width:
            smallest = (width - 1) * s3 + width
            msg = (
                f"DeCNN cannot produce L_d={l_d} with width {width} and strides "
                f"{tuple(strides)}, the smallest reachable length is {smallest}"
            )
            raise ParameterError(msg)
        if w3 <= width + span - 1:
            return w1, w3
        w1 += 1


class DeconvRemap:
    """Three transposed convolutions expanding z[d_z] to an [L_d, d_e] map."""

    def __init__(
        self: DeconvRemap,
        store: ParameterStore,
        config: TrainConfig,
        rng: np.random.Generator,
    ) -> None:
        """Plan the widths and register the three layers."""
        w1, w3 = plan_deconv(config.l_d, config.deconv_width, config.deconv_strides)
        s2, s3 = config.deconv_strides
        d_z, d_e = config.d_z, config.d_e
        self.layers = [
            ConvTranspose1d(store, "drug/deconv1", (w1, d_e, d_z), 1, rng),
            ConvTranspose1d(
                store,
                "drug/deconv2",
                (config.deconv_width, d_e, d_e),
                s2,
                rng,
            ),
            ConvTranspose1d(store, "drug/deconv3", (w3, d_e, d_e), s3, rng),
        ]

    def __call__(self: DeconvRemap, z: Tensor) -> Tensor:
        """Expand z[..., d_z]; relu between layers, the last one is linear."""
        x = ops.reshape(z, (*z.shape[:-1], 1, z.shape[-1]))
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < len(self.layers) - 1:
                x = ops.relu(x)
        return x


class DenseRemap:
    """A single projection d_z -> L_d * d_e, the flat ablation of DeconvRemap."""

    def __init__(
        self: DenseRemap,
        store: ParameterStore,
        config: TrainConfig,
        rng: np.random.Generator,
    ) -> None:
        """Register the projection."""
        self.l_d, self.d_e = config.l_d, config.d_e
        self.projection = Dense(
            store,
            "drug/remap",
            config.d_z,
            config.l_d * config.d_e,
            rng,
        )

    def __call__(self: DenseRemap, z: Tensor) -> Tensor:
        """Project z[..., d_z] and fold it into [..., L_d, d_e]."""
        flat = self.projection(z)
        return ops.reshape(flat, (*z.shape[:-1], self.l_d, self.d_e))


###############################################################################
# Dual views.
###############################################################################


@dataclass
class DualViewLatent:
    """The latents of both views. The distribution fields are None single-view."""

    mu_ins: Tensor
    sigma_ins: Tensor
    z_ins: Tensor
    h_var_ins: Tensor
    mu_dis: Tensor | None = None
    sigma_dis: Tensor | None = None
    z_dis: Tensor | None = None
    h_var_dis: Tensor | None = None


class DrugEncoder:
    """The whole drug side: shared encoder, SES, and the remap route."""

    def __init__(
        self: DrugEncoder,
        store: ParameterStore,
        config: TrainConfig,
        vocab_size: int,
        rng: np.random.Generator,
    ) -> None:
        """Build the parameters the config asks for."""
        self.config = config
        self.shared = SharedEncoder(store, config, vocab_size, rng)
        self.remap: DeconvRemap | DenseRemap | None = None
        if config.dual_view is True:
            self.remap = (
                DeconvRemap(store, config, rng)
                if config.remap == "decnn"
                else DenseRemap(store, config, rng)
            )

    def _sample(
        self: DrugEncoder,
        x: Tensor,
        *,
        train: bool,
        streams: RngStreams | None,
    ) -> tuple[Tensor, Tensor, Tensor, Tensor]:
        """Encode x and sample it, returning (mu, sigma, z, h_var)."""
        if train is True and streams is None:
            msg = "train mode needs the random streams"
            raise ParameterError(msg)
        dropout_rng = streams.dropout if streams is not None else None
        mu, h_var = self.shared.encode(
            x,
            dropout=self.config.dropout,
            train=train,
            rng=dropout_rng,
        )
        noise = None
        if train is True and streams is not None:
            noise = streams.noise.standard_normal(mu.shape)
        z, sigma = ses_sample(mu, h_var, self.config.lambda_, noise, train=train)
        return mu, sigma, z, h_var

    def dual_view(
        self: DrugEncoder,
        tokens: NDArray[np.int64],
        *,
        train: bool = False,
        streams: RngStreams | None = None,
    ) -> DualViewLatent:
        """
        Encode drug tokens[..., L_d] into both latent views.

        The distribution view re-encodes remap(z_ins) with the same shared
        encoder and an independent noise draw.
        """
        embedded = self.shared.embedding(tokens)
        mu, sigma, z, h_var = self._sample(embedded, train=train, streams=streams)
        latent = DualViewLatent(mu_ins=mu, sigma_ins=sigma, z_ins=z, h_var_ins=h_var)
        if self.remap is not None:
            remapped = self.remap(z)
            mu, sigma, z, h_var = self._sample(remapped, train=train, streams=streams)
            latent.mu_dis, latent.sigma_dis = mu, sigma
            latent.z_dis, latent.h_var_dis = z, h_var
        return latent
