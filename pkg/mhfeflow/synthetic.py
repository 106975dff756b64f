"""Synthetic heterogeneous rock properties for desk-scale runs without external data sets."""

from __future__ import annotations

import logging
from typing import Optional

import numpy as np
from scipy.ndimage import gaussian_filter

from mhfeflow.errors import InvalidArgumentError
from mhfeflow.physics import RockField

logger = logging.getLogger(__name__)


class SyntheticFieldGenerator:
    """Correlated log-normal permeability with layered anisotropy.

    ``ln k`` is white noise smoothed by a Gaussian filter (``correlation`` in cells, stronger
    along x and y than along z), rescaled to mean ``ln k_mean`` and standard deviation
    ``log_std``. Vertical permeability is ``k / anisotropy``. Porosity follows the normalized
    field around ``phi_mean``.

    Args:
        seed: Seed for ``numpy.random.default_rng`` (default None = random).
    """

    def __init__(self, seed: Optional[int] = None) -> None:
        self.seed = seed
        self._rng = np.random.default_rng(seed)

    def generate(
        self,
        nx: int,
        ny: int,
        nz: int,
        k_mean: float = 1e-13,
        log_std: float = 2.0,
        correlation: float = 2.0,
        anisotropy: float = 10.0,
        phi_mean: float = 0.2,
        phi_std: float = 0.05,
    ) -> RockField:
        if min(nx, ny, nz) < 1:
            raise InvalidArgumentError(f"dimensions must be >= 1, got {(nx, ny, nz)}")
        if not k_mean > 0 or not log_std > 0 or anisotropy < 1:
            raise InvalidArgumentError("need k_mean > 0, log_std > 0 and anisotropy >= 1")
        if not 0 < phi_mean < 1:
            raise InvalidArgumentError(f"phi_mean must be in (0, 1), got {phi_mean}")

        noise = self._rng.standard_normal((nz, ny, nx))
        if correlation > 0:
            sigma = (0.25 * correlation, correlation, correlation)
            noise = gaussian_filter(noise, sigma=sigma, mode="reflect")
        std = noise.std()
        z = (noise - noise.mean()) / std if std > 0 else np.zeros_like(noise)
        z = z.ravel()

        k = np.exp(np.log(k_mean) + log_std * z)
        perm = np.column_stack([k, k, k / anisotropy])
        phi = np.clip(phi_mean + phi_std * z, 0.01, 0.6)
        field = RockField(perm=perm, phi=phi, dims=(nx, ny, nz))
        logger.info(
            "synthetic_field",
            extra={
                "cells": k.size,
                "decades": round(field.contrast_decades, 2),
                "anisotropy": anisotropy,
                "seed": self.seed,
            },
        )
        return field
