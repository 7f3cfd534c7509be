"""Galerkin algebra on a built basis.

Coefficient vectors carry the mode index on their last axis, so every operation here accepts
a single vector of shape (K+1,) as well as stacked vectors of shape (..., K+1) (one per cell,
vehicle or velocity slice).
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray

from sg_traffic.chaos.basis import Basis, BasisSpec, build_basis
from sg_traffic.utils.error import SingularGalerkinMatrixError

CONDITION_LIMIT = 1e12


@dataclass(frozen=True)
class TripleProductTensor:
    """The matrices M_l with (M_l)_ij = <phi_i phi_j phi_l>, stored as ``matrices[l, i, j]``."""

    basis: Basis
    matrices: NDArray[np.float64] = field(repr=False)

    @property
    def n_modes(self) -> int:
        return self.basis.n_modes


def compute_triple_tensor(basis: Basis) -> TripleProductTensor:
    phi = basis.matrix
    raw = np.einsum("q,ql,qi,qj->lij", basis.weights, phi, phi, phi)
    matrices = 0.5 * (raw + raw.transpose(0, 2, 1))
    return TripleProductTensor(basis=basis, matrices=matrices)


def build_tensor(spec: BasisSpec) -> TripleProductTensor:
    return compute_triple_tensor(build_basis(spec))


def _check_modes(vector: NDArray[np.float64], n_modes: int, name: str) -> None:
    if vector.shape[-1:] != (n_modes,):
        raise ValueError(f"{name} has {vector.shape[-1:]} modes, expected {n_modes}")


def galerkin_matrix(u: ArrayLike, tensor: TripleProductTensor) -> NDArray[np.float64]:
    """P(u) = sum_l u_l M_l, shape (..., K+1, K+1)."""
    vector = np.asarray(u, dtype=float)
    _check_modes(vector, tensor.n_modes, "u")
    return np.asarray(np.tensordot(vector, tensor.matrices, axes=([-1], [0])))


def galerkin_product(
    u: ArrayLike, z: ArrayLike, tensor: TripleProductTensor
) -> NDArray[np.float64]:
    """Galerkin product u * z = P(u) z.

    Evaluated as the average of P(u) z and P(z) u so that swapping the factors gives a
    bitwise identical result.
    """
    left = np.asarray(u, dtype=float)
    right = np.asarray(z, dtype=float)
    _check_modes(left, tensor.n_modes, "u")
    _check_modes(right, tensor.n_modes, "z")
    uz = np.einsum("...l,lkj,...j->...k", left, tensor.matrices, right)
    zu = np.einsum("...l,lkj,...j->...k", right, tensor.matrices, left)
    return np.asarray(0.5 * (uz + zu))


def galerkin_solve(
    rho: ArrayLike,
    z: ArrayLike,
    tensor: TripleProductTensor,
    condition_limit: float = CONDITION_LIMIT,
) -> NDArray[np.float64]:
    """Solve P(rho) y = z, i.e. apply P^{-1}(rho) to z without forming the inverse.

    Raises SingularGalerkinMatrixError when P(rho) is singular or its condition number exceeds
    ``condition_limit`` anywhere in the stack; this signals vacuum somewhere in the random space.
    """
    matrix = galerkin_matrix(rho, tensor)
    rhs = np.asarray(z, dtype=float)
    _check_modes(rhs, tensor.n_modes, "z")
    with np.errstate(divide="ignore", invalid="ignore"):
        condition = np.linalg.cond(matrix)
    bad = ~np.isfinite(condition) | (condition > condition_limit)
    if np.any(bad):
        where = tuple(int(i) for i in np.argwhere(np.atleast_1d(bad))[0])
        worst = np.atleast_1d(condition)[where]
        raise SingularGalerkinMatrixError(
            f"P(rho) is singular or ill-conditioned at index {where} (condition {worst:.3e})"
        )
    n_modes = tensor.n_modes
    batch = np.broadcast_shapes(matrix.shape[:-2], rhs.shape[:-1])
    matrix = np.broadcast_to(matrix, batch + (n_modes, n_modes))
    columns = np.broadcast_to(rhs, batch + (n_modes,))[..., None]
    return np.asarray(np.linalg.solve(matrix, columns)[..., 0])


def project_nodal(values: ArrayLike, basis: Basis) -> NDArray[np.float64]:
    """Project values sampled at the quadrature nodes (last axis of length Q) onto the basis."""
    return np.asarray(np.asarray(values, dtype=float) @ basis.weighted_matrix)


def reconstruct_nodal(u: ArrayLike, basis: Basis) -> NDArray[np.float64]:
    """Evaluate G_K(u) at every quadrature node; returns shape (..., Q)."""
    vector = np.asarray(u, dtype=float)
    _check_modes(vector, basis.n_modes, "u")
    return np.asarray(vector @ basis.matrix.T)


def project_function(
    f: Callable[[NDArray[np.float64]], ArrayLike], basis: Basis
) -> NDArray[np.float64]:
    """Coefficients u_k = integral of f(xi) phi_k(xi) over (0, 1), by the basis quadrature.

    ``f`` is called once with the array of quadrature nodes.
    """
    values = np.broadcast_to(np.asarray(f(basis.nodes), dtype=float), basis.nodes.shape)
    if not np.all(np.isfinite(values)):
        bad = int(np.argmax(~np.isfinite(values)))
        raise ValueError(f"f is not finite at quadrature node xi={basis.nodes[bad]!r}")
    return project_nodal(values, basis)


def reconstruct(u: ArrayLike, xi: ArrayLike, basis: Basis) -> NDArray[np.float64]:
    """G_K(u)(xi) = sum_k u_k phi_k(xi) for xi in [0, 1]."""
    vector = np.asarray(u, dtype=float)
    _check_modes(vector, basis.n_modes, "u")
    points = np.asarray(xi, dtype=float)
    if np.any((points < 0.0) | (points > 1.0)) or not np.all(np.isfinite(points)):
        raise ValueError("xi outside the support (0, 1)")
    return np.asarray(basis.evaluate_all(points) @ vector)
