"""Triple-product tensor and Galerkin algebra."""

from __future__ import annotations

import numpy as np
import pytest

from sg_traffic.chaos.basis import BasisSpec, build_basis
from sg_traffic.chaos.galerkin import (
    build_tensor,
    galerkin_matrix,
    galerkin_product,
    galerkin_solve,
    project_nodal,
    reconstruct_nodal,
)
from sg_traffic.utils.error import SingularGalerkinMatrixError


def test_constant_basis_tensor(haar0):
    assert haar0.matrices.shape == (1, 1, 1)
    assert haar0.matrices[0, 0, 0] == pytest.approx(1.0)


def test_haar_k1_tensor(haar1):
    assert haar1.matrices[0] == pytest.approx(np.eye(2))
    assert haar1.matrices[1] == pytest.approx(np.array([[0.0, 1.0], [1.0, 0.0]]))


def test_legendre_tensor_matches_fine_quadrature():
    tensor = build_tensor(BasisSpec("legendre", 2))
    fine = build_basis(BasisSpec("legendre", 2, quadrature=64))
    phi = fine.matrix
    oracle = np.einsum("q,ql,qi,qj->lij", fine.weights, phi, phi, phi)
    assert np.max(np.abs(tensor.matrices - oracle)) <= 1e-10


def test_matrix_of_deterministic_vector_is_scaled_identity(haar3):
    assert galerkin_matrix([0.4, 0.0, 0.0, 0.0], haar3) == pytest.approx(0.4 * np.eye(4))


def test_matrix_example(haar1):
    assert galerkin_matrix([1.0, 2.0], haar1) == pytest.approx(np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_matrix_is_linear(legendre3):
    rng = np.random.default_rng(3)
    u, z = rng.normal(size=(2, 4))
    assert galerkin_matrix(u + z, legendre3) == pytest.approx(
        galerkin_matrix(u, legendre3) + galerkin_matrix(z, legendre3), abs=1e-14
    )


def test_product_example(haar1):
    assert galerkin_product([1.0, 2.0], [3.0, 4.0], haar1) == pytest.approx([11.0, 10.0])


def test_product_with_unit_is_identity(legendre3):
    z = np.array([0.3, -0.2, 0.1, 0.05])
    assert galerkin_product([1.0, 0.0, 0.0, 0.0], z, legendre3) == pytest.approx(z, abs=1e-14)


def test_product_is_symmetric(haar15):
    rng = np.random.default_rng(11)
    pairs = rng.uniform(-1.0, 1.0, size=(1000, 2, 16))
    left = galerkin_product(pairs[:, 0], pairs[:, 1], haar15)
    right = galerkin_product(pairs[:, 1], pairs[:, 0], haar15)
    assert np.max(np.abs(left - right)) <= 1e-14


def test_product_is_not_associative_for_legendre(legendre3):
    rng = np.random.default_rng(5)
    gaps = []
    for _ in range(20):
        u, z = rng.uniform(-1.0, 1.0, size=(2, 4))
        squared = galerkin_product(u, u, legendre3)
        gaps.append(
            np.max(
                np.abs(
                    galerkin_product(squared, z, legendre3)
                    - galerkin_product(u, galerkin_product(u, z, legendre3), legendre3)
                )
            )
        )
    assert max(gaps) > 1e-6


def test_haar_product_is_pointwise(haar15):
    rng = np.random.default_rng(2)
    u, z = rng.uniform(-1.0, 1.0, size=(2, 16))
    basis = haar15.basis
    pointwise = project_nodal(reconstruct_nodal(u, basis) * reconstruct_nodal(z, basis), basis)
    assert galerkin_product(u, z, haar15) == pytest.approx(pointwise, abs=1e-12)


def test_product_on_stacked_vectors(haar1):
    u = np.array([[1.0, 2.0], [0.5, 0.0]])
    z = np.array([[3.0, 4.0], [2.0, 1.0]])
    assert galerkin_product(u, z, haar1) == pytest.approx(np.array([[11.0, 10.0], [1.0, 0.5]]))


def test_product_rejects_wrong_mode_count(haar1):
    with pytest.raises(ValueError, match="modes"):
        galerkin_product([1.0, 2.0, 3.0], [1.0, 2.0], haar1)


def test_solve_deterministic_density(haar3):
    z = np.array([0.2, 0.1, -0.3, 0.05])
    assert galerkin_solve([0.5, 0.0, 0.0, 0.0], z, haar3) == pytest.approx(2.0 * z)


def test_solve_two_by_two(haar1):
    assert galerkin_solve([1.0, 0.5], [1.0, 0.0], haar1) == pytest.approx([4.0 / 3.0, -2.0 / 3.0])


def test_solve_rejects_vacuum(haar3):
    with pytest.raises(SingularGalerkinMatrixError):
        galerkin_solve(np.zeros(4), np.ones(4), haar3)


def test_solve_rejects_vacuum_at_one_node(haar1):
    # rho(xi) = 0.5 + 0.5 phi_1 vanishes on the right half
    with pytest.raises(SingularGalerkinMatrixError, match="index"):
        galerkin_solve(np.array([[0.5, 0.0], [0.5, 0.5]]), np.ones((2, 2)), haar1)


def dyadic_haar(n_modes, xi):
    """Orthonormal Haar functions on [0, 1), built level by level."""
    values = np.zeros((xi.size, n_modes))
    values[:, 0] = 1.0
    for mode in range(1, n_modes):
        level = mode.bit_length() - 1
        shift = mode - 2**level
        width = 2.0**-level
        left = shift * width
        first = (xi >= left) & (xi < left + width / 2)
        second = (xi >= left + width / 2) & (xi < left + width)
        values[first, mode] = 2.0 ** (level / 2)
        values[second, mode] = -(2.0 ** (level / 2))
    return values


def test_haar_k15_tensor_matches_brute_force(haar15):
    n_points = 4096
    xi = (np.arange(n_points) + 0.5) / n_points
    phi = dyadic_haar(16, xi)
    oracle = np.einsum("q,ql,qi,qj->lij", np.full(n_points, 1.0 / n_points), phi, phi, phi)
    assert haar15.matrices.shape == (16, 16, 16)
    assert np.max(np.abs(haar15.matrices - oracle)) <= 1e-12
