"""Orthonormal bases on (0, 1) for the uniform density, with their quadrature rules.

Two families are supported:

- ``haar``: the constant mode followed by the L2-normalized Haar wavelets, ordered by level
  ``j = 0..J`` and shift ``k = 0..2^j - 1`` (mode ``2^j + k``). The order must describe complete
  dyadic levels, i.e. ``K + 1`` is a power of two. Quadrature is the midpoint rule on a dyadic
  grid, exact for every product of basis functions.
- ``legendre``: shifted, normalized Legendre polynomials ``sqrt(2k+1) P_k(2 xi - 1)`` with a
  Gauss-Legendre rule of ``4 (K + 1)`` nodes.

Every built basis carries its nodes, weights and the basis matrix evaluated at the nodes, so
that projections and reconstructions are plain matrix products.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray
from scipy.special import eval_legendre, roots_legendre

from sg_traffic.utils.error import BasisError

FAMILIES: tuple[str, ...] = ("haar", "legendre")

ORTHONORMALITY_TOL = 1e-12


@dataclass(frozen=True)
class BasisSpec:
    family: str
    order: int
    quadrature: int | None = None

    @property
    def n_modes(self) -> int:
        return self.order + 1


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


def default_quadrature(spec: BasisSpec) -> int:
    if spec.family == "haar":
        # 2^(J+4) nodes with J + 1 wavelet levels, i.e. 8 nodes per finest dyadic cell.
        return 8 * spec.n_modes
    return 4 * spec.n_modes


def resolve_quadrature(spec: BasisSpec) -> int:
    """Validate a basis specification and return its quadrature resolution."""
    if spec.family not in FAMILIES:
        raise BasisError(f"unsupported basis family {spec.family!r}; expected one of {FAMILIES}")
    if spec.order < 0:
        raise BasisError(f"basis order must be nonnegative, got {spec.order}")
    if spec.family == "haar" and not _is_power_of_two(spec.n_modes):
        raise BasisError(
            "haar basis needs K+1 to be a power of two (complete dyadic levels), "
            f"got K={spec.order}"
        )
    resolution = spec.quadrature if spec.quadrature is not None else default_quadrature(spec)
    if resolution < 1:
        raise BasisError(f"quadrature resolution must be positive, got {resolution}")
    if spec.family == "haar" and resolution % spec.n_modes != 0:
        raise BasisError(
            f"haar quadrature resolution {resolution} must be a multiple of K+1={spec.n_modes}"
        )
    return resolution


def _haar_values(order: int, xi: NDArray[np.float64]) -> NDArray[np.float64]:
    n_modes = order + 1
    # Closed right end: xi = 1 belongs to the last dyadic cell.
    x = np.minimum(np.asarray(xi, dtype=float), np.nextafter(1.0, 0.0))
    values = np.zeros(x.shape + (n_modes,))
    values[..., 0] = 1.0
    for mode in range(1, n_modes):
        level = mode.bit_length() - 1
        shift = mode - (1 << level)
        scaled = (1 << level) * x - shift
        inside = (scaled >= 0.0) & (scaled < 1.0)
        sign = np.where(scaled < 0.5, 1.0, -1.0)
        values[..., mode] = np.where(inside, sign * 2.0 ** (level / 2.0), 0.0)
    return values


def _legendre_values(order: int, xi: NDArray[np.float64]) -> NDArray[np.float64]:
    x = 2.0 * np.asarray(xi, dtype=float) - 1.0
    modes = np.arange(order + 1)
    return np.sqrt(2.0 * modes + 1.0) * eval_legendre(modes, x[..., None])


@dataclass(frozen=True)
class Basis:
    """A built basis: evaluator plus quadrature on (0, 1) with density p = 1."""

    spec: BasisSpec
    nodes: NDArray[np.float64]
    weights: NDArray[np.float64]
    matrix: NDArray[np.float64] = field(repr=False)

    @property
    def n_modes(self) -> int:
        return self.spec.n_modes

    @property
    def order(self) -> int:
        return self.spec.order

    @property
    def family(self) -> str:
        return self.spec.family

    @property
    def weighted_matrix(self) -> NDArray[np.float64]:
        """Quadrature weights times the basis matrix, shape (Q, K+1)."""
        return self.weights[:, None] * self.matrix

    def evaluate_all(self, xi: NDArray[np.float64] | float) -> NDArray[np.float64]:
        """All basis functions at ``xi``; returns shape ``xi.shape + (K+1,)``."""
        x = np.asarray(xi, dtype=float)
        if self.family == "haar":
            return _haar_values(self.order, x)
        return _legendre_values(self.order, x)

    def evaluate(self, mode: int, xi: NDArray[np.float64] | float) -> NDArray[np.float64]:
        if not 0 <= mode <= self.order:
            raise ValueError(f"mode {mode} outside 0..{self.order}")
        return np.asarray(self.evaluate_all(xi)[..., mode])

    def gram(self) -> NDArray[np.float64]:
        return np.asarray(self.matrix.T @ self.weighted_matrix)


def _quadrature(family: str, resolution: int) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    if family == "haar":
        nodes = (np.arange(resolution) + 0.5) / resolution
        weights = np.full(resolution, 1.0 / resolution)
        return nodes, weights
    roots, weights = roots_legendre(resolution)
    return 0.5 * (roots + 1.0), 0.5 * weights


def build_basis(spec: BasisSpec) -> Basis:
    """Build and certify an orthonormal basis.

    Raises BasisError for an unsupported family, a non-dyadic Haar order, or when the Gram
    matrix under the basis' own quadrature misses the identity by more than 1e-12.
    """
    resolution = resolve_quadrature(spec)
    nodes, weights = _quadrature(spec.family, resolution)
    if spec.family == "haar":
        matrix = _haar_values(spec.order, nodes)
    else:
        matrix = _legendre_values(spec.order, nodes)
    basis = Basis(
        spec=BasisSpec(spec.family, spec.order, resolution),
        nodes=nodes,
        weights=weights,
        matrix=matrix,
    )
    residual = float(np.max(np.abs(basis.gram() - np.eye(spec.n_modes))))
    if residual > ORTHONORMALITY_TOL:
        raise BasisError(
            f"{spec.family} basis with K={spec.order} is not orthonormal under Q={resolution} "
            f"(residual {residual:.3e})"
        )
    return basis


def xi_values(basis: Basis, fixed_xi: float | None = None) -> NDArray[np.float64]:
    """Random-variable values at the quadrature nodes, or a frozen sample value at every node."""
    if fixed_xi is None:
        return basis.nodes
    return np.full_like(basis.nodes, float(fixed_xi))

