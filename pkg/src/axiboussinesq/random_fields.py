"""Seeded random smooth axisymmetric test fields.

Fields are analytic sums of Gaussian bumps in ``(r^2, z)``, so the same draw
can be sampled on any grid for refinement and domain-doubling comparisons.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cylgrid import EVEN, ODD, GridSpec, ScalarFieldRZ


@dataclass(frozen=True)
class BumpField:
    amp: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    center: np.ndarray
    quad: np.ndarray
    parity: str = EVEN

    def __call__(self, r, z):
        out = np.zeros(np.broadcast(r, z).shape)
        for a, al, be, c, b in zip(self.amp, self.alpha, self.beta, self.center, self.quad):
            out = out + a * (1 + b * r**2) * np.exp(-al * r**2 - be * (z - c) ** 2)
        if self.parity == ODD:
            out = out * r
        return out

    def sample(self, grid: GridSpec) -> ScalarFieldRZ:
        return ScalarFieldRZ.from_function(grid, self, self.parity)


def random_bump_field(rng: np.random.Generator, n_bumps: int = 4, parity: str = EVEN,
                      width_range=(0.7, 2.0), center_range=(-1.5, 1.5)) -> BumpField:
    """Draw a smooth field whose bumps have inverse squared widths in ``width_range``."""
    return BumpField(
        amp=rng.normal(size=n_bumps),
        alpha=rng.uniform(*width_range, size=n_bumps),
        beta=rng.uniform(*width_range, size=n_bumps),
        center=rng.uniform(*center_range, size=n_bumps),
        quad=rng.uniform(-0.5, 0.5, size=n_bumps),
        parity=parity,
    )


def random_bump_fields(seed: int, count: int, **kwargs) -> list[BumpField]:
    rng = np.random.default_rng(seed)
    return [random_bump_field(rng, **kwargs) for _ in range(count)]
