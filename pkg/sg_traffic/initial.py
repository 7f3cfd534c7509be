"""Uncertain Riemann initial data shared by the micro, kinetic and macro models.

The left density is uniform on (u1, u2), written through the reference variable as
rho_l(xi) = u1 + (u2 - u1) xi; the right density rho_r is deterministic. Freezing ``xi`` turns the
same description into the deterministic data of one Monte Carlo sample.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from numpy.typing import NDArray


@dataclass(frozen=True)
class RiemannData:
    u1: float
    u2: float
    rho_right: float
    discontinuity: float = 1.0
    fixed_xi: float | None = None

    def __post_init__(self) -> None:
        for name in ("u1", "u2", "rho_right"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name}={value} outside [0, 1]")
        if self.fixed_xi is not None and not 0.0 <= self.fixed_xi <= 1.0:
            raise ValueError(f"fixed_xi={self.fixed_xi} outside [0, 1]")

    @property
    def deterministic(self) -> bool:
        return self.u1 == self.u2 or self.fixed_xi is not None

    def freeze(self, xi: float) -> RiemannData:
        """The deterministic data obtained for one realization of the random variable."""
        return replace(self, fixed_xi=float(xi))

    def left_density(self, xi: NDArray[np.float64]) -> NDArray[np.float64]:
        reference = np.asarray(xi, dtype=float)
        if self.fixed_xi is not None:
            reference = np.full_like(reference, self.fixed_xi)
        return self.u1 + (self.u2 - self.u1) * reference

    def density(self, x: NDArray[np.float64], xi: NDArray[np.float64]) -> NDArray[np.float64]:
        """rho_0(x, xi) broadcast over ``x[..., None]`` and ``xi``; cells at x < discontinuity
        carry the left state."""
        position = np.asarray(x, dtype=float)[..., None]
        return np.where(
            position < self.discontinuity,
            self.left_density(xi),
            np.full(np.shape(xi), self.rho_right),
        )
