"""Stochastic Galerkin BGK solver on a discrete velocity grid.

The unknown is the coefficient field g_hat(x, w) of the mass distribution over desired speeds
w = v + h(rho). It is stored as an array of shape (N_x, N_w, K+1), modes last, like every other
field in the package.

One time step is first-order splitting:

1. transport of every velocity slice with the local Lax-Friedrichs flux of the coupled system
   d_t g + d_x((w I - P(h_hat)) g) = 0, where h_hat is frozen from the current densities;
2. exact relaxation g <- M + (g - M) exp(-dt / eps) towards the projected equilibrium M.

The equilibrium of a deterministic density rho is a box profile of mass rho centred at
V_eq(rho) + h(rho). Near the ends of the velocity interval the box shrinks so it never leaves
the grid, and when it is narrower than one velocity cell the mass is split between the two
bracketing cells (lever rule). Both choices keep the mass exact and the mean exact up to the
velocity resolution.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass
from logging import getLogger

import numpy as np
from numpy.typing import NDArray

from sg_traffic.chaos.basis import Basis
from sg_traffic.chaos.galerkin import (
    TripleProductTensor,
    galerkin_matrix,
    galerkin_product,
    galerkin_solve,
    project_nodal,
    reconstruct_nodal,
)
from sg_traffic.closures import hesitation, project_closure, velocity_law
from sg_traffic.initial import RiemannData
from sg_traffic.utils.common import snapshot_schedule
from sg_traffic.utils.error import CFLViolationError, EquilibriumError

logger = getLogger(__name__)

Array = NDArray[np.float64]

BOUNDARIES = ("outflow", "periodic")
KINETIC_CFL_LIMIT = 0.9
DEFAULT_KINETIC_CFL = 0.45
DEFAULT_WIDTH_FRACTION = 0.2
DENSITY_SLACK = 1e-8


def default_velocity_bound(hesitation_name: str) -> float:
    """w_max = 1 + max h on [0, 1], so that no equilibrium is truncated."""
    probe = np.linspace(0.0, 1.0, 101)
    return 1.0 + float(np.max(hesitation(hesitation_name).value(probe)))


@dataclass(frozen=True)
class KineticGrid:
    a: float
    b: float
    n_cells: int
    n_velocities: int
    epsilon: float
    w_max: float | None = None
    hesitation: str = "linear"
    velocity: str = "greenshields"
    equilibrium_width: float | None = None
    boundary: str = "outflow"

    def __post_init__(self) -> None:
        if self.b <= self.a or self.n_cells < 1:
            raise ValueError(f"invalid space grid [{self.a}, {self.b}] with {self.n_cells} cells")
        if self.n_velocities < 1:
            raise ValueError(f"need at least one velocity cell, got {self.n_velocities}")
        if self.epsilon <= 0.0:
            raise ValueError(f"relaxation time must be positive, got {self.epsilon}")
        if self.w_max is not None and self.w_max <= 0.0:
            raise ValueError(f"w_max must be positive, got {self.w_max}")
        if self.equilibrium_width is not None and self.equilibrium_width < 0.0:
            raise ValueError(
                f"equilibrium width must be nonnegative, got {self.equilibrium_width}"
            )
        if self.boundary not in BOUNDARIES:
            raise ValueError(f"boundary must be one of {BOUNDARIES}, got {self.boundary!r}")
        velocity_law(self.velocity)
        probe = hesitation(self.hesitation).value(np.linspace(0.0, 1.0, 101))
        if probe[0] < 0.0 or np.any(np.diff(probe) < 0.0):
            raise ValueError(
                f"hesitation {self.hesitation!r} must be nonnegative and nondecreasing"
            )

    @property
    def velocity_bound(self) -> float:
        if self.w_max is not None:
            return self.w_max
        return default_velocity_bound(self.hesitation)

    @property
    def dx(self) -> float:
        return (self.b - self.a) / self.n_cells

    @property
    def dw(self) -> float:
        return self.velocity_bound / self.n_velocities

    @property
    def width(self) -> float:
        if self.equilibrium_width is not None:
            return self.equilibrium_width
        return DEFAULT_WIDTH_FRACTION * self.velocity_bound

    @property
    def x_centers(self) -> Array:
        return self.a + (np.arange(self.n_cells) + 0.5) * self.dx

    @property
    def w_edges(self) -> Array:
        return np.linspace(0.0, self.velocity_bound, self.n_velocities + 1)

    @property
    def w_centers(self) -> Array:
        return (np.arange(self.n_velocities) + 0.5) * self.dw


@dataclass(frozen=True)
class KineticField:
    values: Array
    time: float = 0.0

    def __post_init__(self) -> None:
        if self.values.ndim != 3:
            raise ValueError(
                f"kinetic field must have shape (N_x, N_w, K+1), got {self.values.shape}"
            )


@dataclass
class EquilibriumMonitor:
    """Running maxima of the mass (UM1) and flux (UM2) residuals over equilibrium builds."""

    builds: int = 0
    max_um1: float = 0.0
    max_um2: float = 0.0

    def record(self, um1: float, um2: float) -> None:
        self.builds += 1
        self.max_um1 = max(self.max_um1, um1)
        self.max_um2 = max(self.max_um2, um2)


def kinetic_moments(field: KineticField, grid: KineticGrid) -> tuple[Array, Array]:
    """Density and flux coefficients per cell by the velocity midpoint rule, each (N_x, K+1)."""
    rho = field.values.sum(axis=1) * grid.dw
    q = np.einsum("w,xwk->xk", grid.w_centers, field.values) * grid.dw
    return rho, q


def second_moment(field: KineticField, grid: KineticGrid) -> Array:
    return np.asarray(np.einsum("w,xwk->xk", grid.w_centers**2, field.values) * grid.dw)


def _box_weights(mean: Array, grid: KineticGrid) -> Array:
    """Cell densities (per unit w and unit mass) of the deterministic equilibrium with the given
    mean speeds; shape mean.shape + (N_w,), each row integrating to one."""
    w_max = grid.velocity_bound
    edges = grid.w_edges
    centers = grid.w_centers
    dw = grid.dw
    mean = np.clip(mean, 0.0, w_max)
    width = np.minimum(grid.width, np.minimum(2.0 * mean, 2.0 * (w_max - mean)))

    safe = np.maximum(width, dw)[..., None]
    lower = np.maximum(edges[:-1], mean[..., None] - 0.5 * safe)
    upper = np.minimum(edges[1:], mean[..., None] + 0.5 * safe)
    box = np.clip(upper - lower, 0.0, None) / (safe * dw)

    if grid.n_velocities == 1:
        lever = np.ones(mean.shape + (1,)) / dw
    else:
        position = np.clip((mean - centers[0]) / dw, 0.0, grid.n_velocities - 1.0)
        left = np.minimum(np.floor(position), grid.n_velocities - 2).astype(int)
        fraction = position - left
        cells = np.arange(grid.n_velocities)
        lever = (
            np.where(cells == left[..., None], 1.0 - fraction[..., None], 0.0)
            + np.where(cells == left[..., None] + 1, fraction[..., None], 0.0)
        ) / dw
    return np.where((width >= dw)[..., None], box, lever)


def _nodal_density(rho: Array, basis: Basis) -> Array:
    nodal = reconstruct_nodal(rho, basis)
    bad = (nodal <= 0.0) | (nodal > 1.0 + DENSITY_SLACK) | ~np.isfinite(nodal)
    if np.any(bad):
        index = tuple(int(i) for i in np.argwhere(bad)[0])
        raise EquilibriumError(
            f"density {nodal[index]:.6e} outside (0, 1] at index {index[:-1]}, "
            f"xi={basis.nodes[index[-1]]:.6f}"
        )
    return nodal


def build_equilibrium(rho: Array, grid: KineticGrid, basis: Basis) -> Array:
    """Projected equilibrium M_hat for density coefficients of shape (..., K+1).

    Returns shape (..., N_w, K+1).
    """
    nodal = _nodal_density(np.asarray(rho, dtype=float), basis)
    mean = velocity_law(grid.velocity).value(nodal) + hesitation(grid.hesitation).value(nodal)
    profile = nodal[..., None] * _box_weights(mean, grid)
    return np.asarray(np.einsum("...qw,qk->...wk", profile, basis.weighted_matrix))


def equilibrium_residuals(
    equilibrium: Array, rho: Array, grid: KineticGrid, tensor: TripleProductTensor
) -> tuple[float, float]:
    """Max-norm residuals of the mass (UM1) and desired-speed flux (UM2) conditions."""
    mass = equilibrium.sum(axis=-2) * grid.dw
    flux = np.einsum("w,...wk->...k", grid.w_centers, equilibrium) * grid.dw
    v_hat = project_closure(velocity_law(grid.velocity), rho, tensor.basis)
    h_hat = project_closure(hesitation(grid.hesitation), rho, tensor.basis)
    target = galerkin_product(v_hat, rho, tensor) + galerkin_product(h_hat, rho, tensor)
    return float(np.max(np.abs(mass - rho))), float(np.max(np.abs(flux - target)))


def closure_residual(field: KineticField, grid: KineticGrid, tensor: TripleProductTensor) -> Array:
    """Second moment minus P(q) P^{-1}(rho) q per cell, the closure the moment limit assumes."""
    rho, q = kinetic_moments(field, grid)
    closed = galerkin_product(q, galerkin_solve(rho, q, tensor), tensor)
    return np.asarray(second_moment(field, grid) - closed)


def _hesitation_state(rho: Array, grid: KineticGrid, basis: Basis) -> tuple[Array, Array]:
    """Projected hesitation per cell and its nodal values, for flux and wave speeds."""
    law = hesitation(grid.hesitation)
    h_hat = project_closure(law, rho, basis)
    return h_hat, law.value(reconstruct_nodal(rho, basis))


def _with_ghosts(values: Array, boundary: str) -> Array:
    if boundary == "periodic":
        return np.concatenate([values[-1:], values, values[:1]], axis=0)
    return np.concatenate([values[:1], values, values[-1:]], axis=0)


def transport_speed(rho: Array, grid: KineticGrid, basis: Basis) -> float:
    _, nodal_h = _hesitation_state(rho, grid, basis)
    return grid.velocity_bound + float(np.max(np.abs(nodal_h)))


def _transport(
    field: KineticField, grid: KineticGrid, tensor: TripleProductTensor, dt: float
) -> Array:
    g = field.values
    rho, _ = kinetic_moments(field, grid)
    h_hat, nodal_h = _hesitation_state(rho, grid, tensor.basis)
    w = grid.w_centers

    padded = _with_ghosts(g, grid.boundary)
    h_padded = _with_ghosts(galerkin_matrix(h_hat, tensor), grid.boundary)
    flux = w[None, :, None] * padded - np.einsum("xij,xwj->xwi", h_padded, padded)

    # eigenvalues of w I - P(h) are w - h(rho(xi)) for commuting bases
    nodal_padded = _with_ghosts(nodal_h, grid.boundary)
    speeds = np.max(np.abs(w[None, :, None] - nodal_padded[:, None, :]), axis=2)
    interface_speed = np.maximum(speeds[:-1], speeds[1:])[..., None]
    numerical = 0.5 * (flux[:-1] + flux[1:]) - 0.5 * interface_speed * (padded[1:] - padded[:-1])
    return np.asarray(g - dt / grid.dx * (numerical[1:] - numerical[:-1]))


def bgk_step(
    field: KineticField,
    grid: KineticGrid,
    tensor: TripleProductTensor,
    dt: float,
    monitor: EquilibriumMonitor | None = None,
) -> KineticField:
    basis = tensor.basis
    rho, _ = kinetic_moments(field, grid)
    bound = transport_speed(rho, grid, basis)
    courant = dt * bound / grid.dx
    if courant > KINETIC_CFL_LIMIT:
        raise CFLViolationError(
            f"kinetic Courant number {courant:.4f} exceeds {KINETIC_CFL_LIMIT} (dt={dt:.3e})"
        )

    transported = KineticField(_transport(field, grid, tensor, dt), field.time)
    rho, _ = kinetic_moments(transported, grid)
    equilibrium = build_equilibrium(rho, grid, basis)
    if monitor is not None:
        monitor.record(*equilibrium_residuals(equilibrium, rho, grid, tensor))
    decay = math.exp(-dt / grid.epsilon)
    relaxed = equilibrium + (transported.values - equilibrium) * decay
    return KineticField(relaxed, field.time + dt)


def init_equilibrium(grid: KineticGrid, basis: Basis, data: RiemannData) -> KineticField:
    """Local equilibrium of the projected Riemann density in every cell."""
    rho = project_nodal(data.density(grid.x_centers, basis.nodes), basis)
    return KineticField(build_equilibrium(rho, grid, basis))


@dataclass(frozen=True)
class KineticSnapshot:
    time: float
    field: KineticField
    rho: Array
    q: Array


@dataclass
class KineticRun:
    snapshots: list[KineticSnapshot]
    n_steps: int
    monitor: EquilibriumMonitor
    dt_history: list[float]


def run_kinetic(
    grid: KineticGrid,
    tensor: TripleProductTensor,
    data: RiemannData,
    t_final: float,
    output_times: Sequence[float] | None = None,
    cfl: float = DEFAULT_KINETIC_CFL,
    initial: KineticField | None = None,
) -> KineticRun:
    basis = tensor.basis
    if not 0.0 < cfl <= KINETIC_CFL_LIMIT:
        raise ValueError(f"kinetic CFL number must lie in (0, {KINETIC_CFL_LIMIT}], got {cfl}")
    current = initial if initial is not None else init_equilibrium(grid, basis, data)
    targets = snapshot_schedule(output_times, t_final, current.time)

    monitor = EquilibriumMonitor()
    rho0, _ = kinetic_moments(current, grid)
    monitor.record(*equilibrium_residuals(build_equilibrium(rho0, grid, basis), rho0, grid, tensor))

    logger.info(
        "kinetic run: N_x=%d N_w=%d K=%d eps=%.3e T=%.3f",
        grid.n_cells,
        grid.n_velocities,
        basis.order,
        grid.epsilon,
        t_final,
    )
    snapshots: list[KineticSnapshot] = []
    history: list[float] = []
    for target in targets:
        while current.time < target - 1e-14:
            rho, _ = kinetic_moments(current, grid)
            dt = min(cfl * grid.dx / transport_speed(rho, grid, basis), target - current.time)
            current = bgk_step(current, grid, tensor, dt, monitor)
            history.append(dt)
            logger.debug("kinetic step %d: t=%.6f dt=%.3e", len(history), current.time, dt)
        current = KineticField(current.values, target)
        rho, q = kinetic_moments(current, grid)
        snapshots.append(KineticSnapshot(target, current, rho, q))
    logger.info(
        "kinetic run done: %d steps, max UM1 %.3e, max UM2 %.3e",
        len(history),
        monitor.max_um1,
        monitor.max_um2,
    )
    return KineticRun(snapshots, len(history), monitor, history)
