"""Cross-scale convergence experiments.

- micro to macro: follow-the-leader platoons with car length 1/N against the stochastic LWR
  solution, for growing N;
- meso to macro: BGK kinetic moments against the relaxed stochastic ARZ solution, for
  shrinking relaxation times;
- convergence in K: stochastic Galerkin runs of growing order against one Monte Carlo run and
  against deterministic runs at equally spaced collocation nodes.

Every experiment is split into independent cases so that callers may run them in a pool.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import asdict, dataclass, replace
from itertools import pairwise
from logging import getLogger
from typing import Any

import numpy as np
from numpy.typing import NDArray

from sg_traffic.analysis import mean, variance
from sg_traffic.chaos.basis import Basis, BasisSpec
from sg_traffic.chaos.galerkin import (
    TripleProductTensor,
    build_tensor,
    project_nodal,
    reconstruct_nodal,
)
from sg_traffic.closures import speed_law
from sg_traffic.mc_oracle import MCRun, Problem, SGMoments, compare, sg_moments, solve_problem
from sg_traffic.models.kinetic import (
    closure_residual,
    init_equilibrium,
    kinetic_moments,
    run_kinetic,
)
from sg_traffic.models.macro import MacroField, MacroGrid, init_riemann, run_macro
from sg_traffic.models.micro import MicroParams, MicroState, init_from_density, integrate_micro
from sg_traffic.utils.config import ExperimentConfig
from sg_traffic.utils.error import GridMismatchError, NumericalError

logger = getLogger(__name__)

Array = NDArray[np.float64]


def _l1_of_l2(difference: Array, dx: float) -> float:
    """Integral over x of the L2(xi) norm, for coefficient arrays of shape (N_x, K+1)."""
    return float(np.sum(np.linalg.norm(difference, axis=-1)) * dx)


def nonincreasing(values: Sequence[float]) -> bool:
    return all(later <= earlier for earlier, later in pairwise(values))


def reference_refinement(grid: MacroGrid, car_length: float) -> int:
    """Split factor for the comparison cells so that the reference grid resolves half a car."""
    return max(1, math.ceil(2.0 * grid.dx / car_length - 1e-9))


def lwr_reference(
    config: ExperimentConfig, tensor: TripleProductTensor, refinement: int = 1
) -> MacroField:
    """Stochastic LWR solution of the configured Riemann problem at the final time, on the
    configured grid with every cell split ``refinement`` times."""
    grid = config.macro_grid()
    if refinement > 1:
        grid = replace(grid, n_cells=grid.n_cells * refinement)
    run = run_macro(grid, config.macro_model("lwr"), tensor, config.riemann())
    return run.snapshots[-1]


def coarsen(values: Array, refinement: int) -> Array:
    """Cell averages of a refined grid on the grid it was split from (cells on axis 0)."""
    cells = values.shape[0] // refinement
    return np.asarray(values.reshape(cells, refinement, *values.shape[1:]).mean(axis=1))


def platoon_cell_averages(
    state: MicroState, params: MicroParams, basis: Basis, edges: Array
) -> tuple[Array, Array]:
    """Cell averages of the piecewise-constant density L / headway between ``edges``.

    The density integrates to one car length per headway, so its primitive is the linear
    interpolant of (x_i, i L) at every quadrature node. Returns the projected averages, shape
    (cells, K+1), and the mask of cells covered by the platoon at every node.
    """
    nodal = reconstruct_nodal(state.positions, basis)
    lengths = params.car_length * np.arange(nodal.shape[0], dtype=float)
    primitive = np.stack(
        [np.interp(edges, nodal[:, node], lengths) for node in range(nodal.shape[1])], axis=-1
    )
    averages = np.diff(primitive, axis=0) / np.diff(edges)[:, None]
    covered = (edges[:-1] >= np.max(nodal[0])) & (edges[1:] <= np.min(nodal[-1]))
    return project_nodal(averages, basis), covered


@dataclass(frozen=True)
class Micro2MacroRow:
    n_vehicles: int
    car_length: float
    reference_cells: int
    n_compared: int
    l1_mean: float
    l1_variance: float

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def micro2macro_case(
    config: ExperimentConfig, tensor: TripleProductTensor, n_vehicles: int
) -> Micro2MacroRow:
    """One platoon of ``n_vehicles`` cars of length 1/N, leader at the right end of the road
    driving at the equilibrium speed of the right state, against the LWR solution.

    Both densities are compared as cell averages on the configured grid, over the cells the
    platoon covers at every quadrature node. The LWR reference runs on a grid refined to half
    a car length and is averaged back onto those cells.
    """
    basis = tensor.basis
    data = config.riemann()
    grid = config.macro_grid()
    base = config.micro_params(n_vehicles)
    leader_speed = float(speed_law(base.speed_law).value(np.array(data.rho_right)))
    params = replace(base, leader_speed=leader_speed)

    state = init_from_density(basis, params, data, leader_position=grid.b)
    final = integrate_micro(
        state, params, basis, tensor, config.model.dt, grid.t_final, config.model.order
    )[-1]
    edges = grid.a + grid.dx * np.arange(grid.n_cells + 1)
    density, covered = platoon_cell_averages(final, params, basis, edges)
    if not np.any(covered):
        raise NumericalError(
            f"the platoon of {n_vehicles} vehicles covers no cell of [{grid.a:g}, {grid.b:g}]"
        )

    refinement = reference_refinement(grid, params.car_length)
    reference = coarsen(lwr_reference(config, tensor, refinement).rho, refinement)
    mean_error = np.abs(mean(density) - mean(reference))[covered]
    variance_error = np.abs(variance(density) - variance(reference))[covered]
    row = Micro2MacroRow(
        n_vehicles=n_vehicles,
        car_length=params.car_length,
        reference_cells=grid.n_cells * refinement,
        n_compared=int(covered.sum()),
        l1_mean=float(np.sum(mean_error) * grid.dx),
        l1_variance=float(np.sum(variance_error) * grid.dx),
    )
    logger.info(
        "micro2macro N=%d: L1 mean %.3e, L1 variance %.3e (reference on %d cells)",
        n_vehicles,
        row.l1_mean,
        row.l1_variance,
        row.reference_cells,
    )
    return row


def run_micro2macro(config: ExperimentConfig, tensor: TripleProductTensor) -> list[Micro2MacroRow]:
    return [micro2macro_case(config, tensor, n) for n in config.experiment.n_list]


@dataclass(frozen=True)
class Meso2MacroRow:
    epsilon: float
    l1_rho: float
    l1_q: float
    l1_rho_lwr: float
    initial_mismatch: float
    max_um1: float
    max_um2: float
    closure_residual: float
    kinetic_steps: int
    macro_steps: int

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def meso2macro_case(
    config: ExperimentConfig,
    tensor: TripleProductTensor,
    lwr: MacroField,
    epsilon: float,
) -> Meso2MacroRow:
    """Kinetic run and relaxed ARZ run sharing the same initial moments, compared at T_f."""
    basis = tensor.basis
    data = config.riemann()
    grid = config.macro_grid()
    kinetic_grid = config.kinetic_grid(epsilon)

    initial = init_equilibrium(kinetic_grid, basis, data)
    rho0, q0 = kinetic_moments(initial, kinetic_grid)
    model = config.macro_model("arz", epsilon)
    analytic = init_riemann(grid, basis, data, model)
    mismatch = float(np.max(np.abs(analytic.values - np.stack([rho0, q0], axis=1))))

    kinetic = run_kinetic(
        kinetic_grid, tensor, data, grid.t_final, cfl=config.grid.cfl, initial=initial
    )
    macro = run_macro(
        grid, model, tensor, data, initial=MacroField(np.stack([rho0, q0], axis=1), model)
    )
    final = kinetic.snapshots[-1]
    arz = macro.snapshots[-1]
    row = Meso2MacroRow(
        epsilon=epsilon,
        l1_rho=_l1_of_l2(final.rho - arz.rho, grid.dx),
        l1_q=_l1_of_l2(final.q - arz.z, grid.dx),
        l1_rho_lwr=_l1_of_l2(final.rho - lwr.rho, grid.dx),
        initial_mismatch=mismatch,
        max_um1=kinetic.monitor.max_um1,
        max_um2=kinetic.monitor.max_um2,
        closure_residual=float(np.max(np.abs(closure_residual(final.field, kinetic_grid, tensor)))),
        kinetic_steps=kinetic.n_steps,
        macro_steps=macro.n_steps,
    )
    logger.info(
        "meso2macro eps=%.1e: L1 rho %.3e, L1 q %.3e, L1 rho vs LWR %.3e",
        epsilon,
        row.l1_rho,
        row.l1_q,
        row.l1_rho_lwr,
    )
    return row


def run_meso2macro(config: ExperimentConfig, tensor: TripleProductTensor) -> list[Meso2MacroRow]:
    lwr = lwr_reference(config, tensor)
    return [meso2macro_case(config, tensor, lwr, eps) for eps in config.experiment.eps_list]


@dataclass(frozen=True)
class KConvergenceRow:
    order: int
    max_l1_mean: float
    max_l1_variance: float
    passed: bool
    # against the collocation reference, None without one
    reference_l1_mean: float | None = None

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def reference_discrepancy(sg: SGMoments, reference: SGMoments) -> float:
    """Largest per-snapshot L1 mean error, averaged over cells or vehicles."""
    if sg.mean.shape != reference.mean.shape:
        raise GridMismatchError(f"SG moments {sg.mean.shape} vs reference {reference.mean.shape}")
    return max(
        float(np.mean(np.abs(sg.mean[index] - reference.mean[index])))
        for index in range(len(sg.times))
    )


def k_convergence_case(
    problem: Problem,
    family: str,
    order: int,
    mc: MCRun,
    atol: float,
    reference: SGMoments | None = None,
) -> KConvergenceRow:
    tensor = build_tensor(BasisSpec(family, order))
    moments = sg_moments(solve_problem(problem, tensor), problem.schedule)
    report = compare(moments, mc, atol)
    against_reference = None if reference is None else reference_discrepancy(moments, reference)
    if against_reference is not None:
        logger.info("K=%d: L1 mean error against collocation %.3e", order, against_reference)
    return KConvergenceRow(
        order, max(report.l1_mean), max(report.l1_variance), report.passed, against_reference
    )


def k_trend(rows: Sequence[KConvergenceRow]) -> bool | None:
    """Whether the collocation discrepancy does not grow with K; None without a reference."""
    errors = [row.reference_l1_mean for row in sorted(rows, key=lambda row: row.order)]
    if any(error is None for error in errors):
        return None
    return nonincreasing([error for error in errors if error is not None])
