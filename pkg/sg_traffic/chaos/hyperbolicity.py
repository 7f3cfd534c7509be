"""Sampled certificate for the commuting-matrix conditions that keep the Galerkin ARZ system
hyperbolic:

- A1: the matrices M_l commute pairwise;
- A2: P(u) and P(z) commute for all coefficient vectors u, z;
- A3: every P(u) is diagonalized by one constant orthogonal matrix V.

A1 is checked exhaustively. A2 and A3 quantify over all vectors, so they are checked on random
samples drawn from a seeded generator, which keeps the report reproducible.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from itertools import combinations
from logging import getLogger
from typing import Any

import numpy as np
from numpy.typing import NDArray

from sg_traffic.chaos.galerkin import TripleProductTensor, galerkin_matrix

logger = getLogger(__name__)

HYPERBOLICITY_TOL = 1e-10
DEFAULT_SAMPLES = 100
_EIGEN_GAP = 1e-2
_MAX_EIGEN_ATTEMPTS = 20


@dataclass(frozen=True)
class HyperbolicityReport:
    family: str
    order: int
    a1_max_commutator: float
    a2_max_commutator: float
    a3_diagonalization_residual: float
    tolerance: float
    passed: bool
    details: dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def _commutator_norm(a: NDArray[np.float64], b: NDArray[np.float64]) -> float:
    return float(np.linalg.norm(a @ b - b @ a, ord="fro"))


def _constant_eigenvectors(
    tensor: TripleProductTensor, rng: np.random.Generator
) -> NDArray[np.float64]:
    """Eigenvectors of P(r) for a random r whose spectrum has no near-repeated eigenvalues."""
    n_modes = tensor.n_modes
    vectors = np.eye(n_modes)
    for _ in range(_MAX_EIGEN_ATTEMPTS):
        r = rng.uniform(-1.0, 1.0, n_modes)
        eigenvalues, vectors = np.linalg.eigh(galerkin_matrix(r, tensor))
        if n_modes == 1 or float(np.min(np.diff(eigenvalues))) > _EIGEN_GAP:
            return np.asarray(vectors)
    logger.warning("no random P(r) with a simple spectrum found; using the last sample")
    return np.asarray(vectors)


def check_hyperbolicity(
    tensor: TripleProductTensor,
    n_samples: int = DEFAULT_SAMPLES,
    tolerance: float = HYPERBOLICITY_TOL,
    seed: int = 0,
) -> HyperbolicityReport:
    rng = np.random.default_rng(seed)
    matrices = tensor.matrices
    n_modes = tensor.n_modes

    a1 = max(
        (_commutator_norm(matrices[i], matrices[j]) for i, j in combinations(range(n_modes), 2)),
        default=0.0,
    )

    pairs = rng.uniform(-1.0, 1.0, size=(n_samples, 2, n_modes))
    a2 = 0.0
    for u, z in pairs:
        a2 = max(a2, _commutator_norm(galerkin_matrix(u, tensor), galerkin_matrix(z, tensor)))

    basis_vectors = _constant_eigenvectors(tensor, rng)
    a3 = 0.0
    for u in pairs[:, 0, :]:
        rotated = basis_vectors.T @ galerkin_matrix(u, tensor) @ basis_vectors
        off_diagonal = rotated - np.diag(np.diag(rotated))
        a3 = max(a3, float(np.linalg.norm(off_diagonal, ord="fro")))

    checks = {"A1": a1, "A2": a2, "A3": a3}
    details = {
        name: f"{'ok' if value <= tolerance else 'violated'}: residual {value:.3e}"
        for name, value in checks.items()
    }
    passed = all(value <= tolerance for value in checks.values())
    logger.info(
        "hyperbolicity %s K=%d: A1=%.3e A2=%.3e A3=%.3e passed=%s",
        tensor.basis.family,
        tensor.basis.order,
        a1,
        a2,
        a3,
        passed,
    )
    return HyperbolicityReport(
        family=tensor.basis.family,
        order=tensor.basis.order,
        a1_max_commutator=a1,
        a2_max_commutator=a2,
        a3_diagonalization_residual=a3,
        tolerance=tolerance,
        passed=passed,
        details=details,
    )
