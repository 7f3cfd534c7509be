"""Finite-volume stochastic Galerkin solvers for the LWR and ARZ traffic models.

A field stores its conserved coefficients as ``values[cell, variable, mode]``: one variable
(rho_hat) for LWR, two (rho_hat, z_hat) for ARZ with z = rho (v + h(rho)).

Fluxes:

- LWR: P(rho_hat) V_eq_hat(rho_hat)
- ARZ: (z_hat - P(rho_hat) h_hat,  P(z_hat) P^{-1}(rho_hat) z_hat - P(z_hat) h_hat)

The update is the conservative local Lax-Friedrichs scheme. Wave speeds are sampled from the
reconstructed deterministic states at the quadrature nodes, which bounds the spectrum of the
Galerkin system whenever the basis gives commuting Galerkin matrices.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, replace
from logging import getLogger

import numpy as np
from numpy.typing import NDArray

from sg_traffic.chaos.basis import Basis
from sg_traffic.chaos.galerkin import (
    TripleProductTensor,
    galerkin_product,
    galerkin_solve,
    project_nodal,
    reconstruct_nodal,
)
from sg_traffic.chaos.hyperbolicity import check_hyperbolicity
from sg_traffic.closures import hesitation, project_closure, velocity_law
from sg_traffic.initial import RiemannData
from sg_traffic.utils.common import snapshot_schedule
from sg_traffic.utils.error import DensityBoundsError, HyperbolicityError, NumericalError

logger = getLogger(__name__)

Array = NDArray[np.float64]
FluxFunction = Callable[[Array], Array]

MODELS = ("lwr", "arz")
BOUNDARIES = ("outflow", "periodic")
DEFAULT_CFL = 0.45
SPEED_SAFETY = 1.1
SPEED_FLOOR = 1e-6
DENSITY_TOL = 1e-8


@dataclass(frozen=True)
class MacroGrid:
    a: float
    b: float
    n_cells: int
    t_final: float
    cfl: float = DEFAULT_CFL
    boundary: str = "outflow"

    def __post_init__(self) -> None:
        if self.b <= self.a or self.n_cells < 1:
            raise ValueError(f"invalid grid [{self.a}, {self.b}] with {self.n_cells} cells")
        if not 0.0 < self.cfl <= 1.0:
            raise ValueError(f"CFL number must lie in (0, 1], got {self.cfl}")
        if self.t_final < 0.0:
            raise ValueError(f"final time must be nonnegative, got {self.t_final}")
        if self.boundary not in BOUNDARIES:
            raise ValueError(f"boundary must be one of {BOUNDARIES}, got {self.boundary!r}")

    @property
    def dx(self) -> float:
        return (self.b - self.a) / self.n_cells

    @property
    def x_centers(self) -> Array:
        return self.a + (np.arange(self.n_cells) + 0.5) * self.dx


@dataclass(frozen=True)
class MacroModel:
    kind: str = "lwr"
    velocity: str = "greenshields"
    hesitation: str = "linear"
    # ARZ relaxation time; None runs the homogeneous system.
    epsilon: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in MODELS:
            raise ValueError(f"model must be one of {MODELS}, got {self.kind!r}")
        if self.epsilon is not None and self.epsilon <= 0.0:
            raise ValueError(f"relaxation time must be positive, got {self.epsilon}")
        velocity_law(self.velocity)
        hesitation(self.hesitation)

    @property
    def n_vars(self) -> int:
        return 1 if self.kind == "lwr" else 2


@dataclass(frozen=True)
class MacroField:
    values: Array
    model: MacroModel
    time: float = 0.0

    @property
    def rho(self) -> Array:
        return self.values[:, 0, :]

    @property
    def z(self) -> Array:
        if self.model.kind != "arz":
            raise ValueError("only ARZ fields carry z")
        return self.values[:, 1, :]


def lwr_flux(rho: Array, tensor: TripleProductTensor, velocity: str = "greenshields") -> Array:
    v_hat = project_closure(velocity_law(velocity), rho, tensor.basis)
    return galerkin_product(rho, v_hat, tensor)


def arz_flux(
    rho: Array, z: Array, tensor: TripleProductTensor, hesitation_name: str = "linear"
) -> tuple[Array, Array]:
    h_hat = project_closure(hesitation(hesitation_name), rho, tensor.basis)
    flux_rho = np.asarray(z, dtype=float) - galerkin_product(rho, h_hat, tensor)
    flux_z = galerkin_product(z, galerkin_solve(rho, z, tensor) - h_hat, tensor)
    return flux_rho, flux_z


def physical_flux(values: Array, model: MacroModel, tensor: TripleProductTensor) -> Array:
    """Flux of stacked states with shape (..., n_vars, K+1)."""
    if model.kind == "lwr":
        return lwr_flux(values[..., 0, :], tensor, model.velocity)[..., None, :]
    flux_rho, flux_z = arz_flux(values[..., 0, :], values[..., 1, :], tensor, model.hesitation)
    return np.stack([flux_rho, flux_z], axis=-2)


def cell_wave_speeds(values: Array, model: MacroModel, basis: Basis) -> Array:
    """Largest characteristic speed magnitude per cell over the quadrature nodes, no safety."""
    rho = reconstruct_nodal(values[..., 0, :], basis)
    if model.kind == "lwr":
        law = velocity_law(model.velocity)
        speeds = np.abs(law.value(rho) + rho * law.derivative(rho))
    else:
        law = hesitation(model.hesitation)
        z = reconstruct_nodal(values[..., 1, :], basis)
        with np.errstate(divide="ignore", invalid="ignore"):
            v = z / rho - law.value(rho)
        speeds = np.maximum(np.abs(v), np.abs(v - rho * law.derivative(rho)))
    if not np.all(np.isfinite(speeds)):
        cell = int(np.argwhere(~np.isfinite(speeds))[0][0])
        raise NumericalError(f"non-finite wave speed in cell {cell}")
    return np.asarray(np.max(speeds, axis=-1))


def _scaled(speed: Array | float) -> Array:
    return np.maximum(SPEED_SAFETY * np.asarray(speed, dtype=float), SPEED_FLOOR)


def max_wave_speed(field: MacroField, basis: Basis) -> float:
    return float(_scaled(np.max(cell_wave_speeds(field.values, field.model, basis))))


def llf_numerical_flux(
    u_left: Array, u_right: Array, flux_fn: FluxFunction, speed: Array | float
) -> Array:
    """0.5 (f(U_L) + f(U_R)) - 0.5 lambda (U_R - U_L); ``speed`` is a scalar or one value per
    interface (leading axes of the states)."""
    left = np.asarray(u_left, dtype=float)
    right = np.asarray(u_right, dtype=float)
    lam = np.asarray(speed, dtype=float)
    if np.any(lam <= 0.0):
        raise ValueError("Lax-Friedrichs speed must be positive")
    lam = lam.reshape(lam.shape + (1,) * (left.ndim - lam.ndim))
    return np.asarray(0.5 * (flux_fn(left) + flux_fn(right)) - 0.5 * lam * (right - left))


def _with_ghosts(values: Array, boundary: str) -> Array:
    if boundary == "periodic":
        return np.concatenate([values[-1:], values, values[:1]], axis=0)
    return np.concatenate([values[:1], values, values[-1:]], axis=0)


def _equilibrium_z(rho: Array, model: MacroModel, tensor: TripleProductTensor) -> Array:
    basis = tensor.basis
    v_hat = project_closure(velocity_law(model.velocity), rho, basis)
    h_hat = project_closure(hesitation(model.hesitation), rho, basis)
    return galerkin_product(v_hat, rho, tensor) + galerkin_product(h_hat, rho, tensor)


def check_density_bounds(rho: Array, basis: Basis, time: float) -> None:
    nodal = reconstruct_nodal(rho, basis)
    bad = (nodal < -DENSITY_TOL) | (nodal > 1.0 + DENSITY_TOL) | ~np.isfinite(nodal)
    if np.any(bad):
        cell, node = (int(i) for i in np.argwhere(bad)[0])
        message = (
            f"density {nodal[cell, node]:.6e} outside [0, 1] in cell {cell} at quadrature node "
            f"{node} (xi={basis.nodes[node]:.6f}), t={time:.6f}"
        )
        logger.warning(message)
        raise DensityBoundsError(message)


def fv_step(
    field: MacroField, grid: MacroGrid, tensor: TripleProductTensor, dt: float
) -> MacroField:
    model = field.model
    basis = tensor.basis
    padded = _with_ghosts(field.values, grid.boundary)
    speeds = cell_wave_speeds(padded, model, basis)
    interface_speed = _scaled(np.maximum(speeds[:-1], speeds[1:]))

    def flux_fn(states: Array) -> Array:
        return physical_flux(states, model, tensor)

    numerical = llf_numerical_flux(padded[:-1], padded[1:], flux_fn, interface_speed)
    updated = field.values - dt / grid.dx * (numerical[1:] - numerical[:-1])

    if model.kind == "arz" and model.epsilon is not None:
        target = _equilibrium_z(updated[:, 0, :], model, tensor)
        decay = math.exp(-dt / model.epsilon)
        updated[:, 1, :] = target + (updated[:, 1, :] - target) * decay

    time = field.time + dt
    check_density_bounds(updated[:, 0, :], basis, time)
    return replace(field, values=updated, time=time)


def init_riemann(
    grid: MacroGrid, basis: Basis, data: RiemannData, model: MacroModel
) -> MacroField:
    """Riemann data projected cell by cell; ARZ fields start at the equilibrium velocity, i.e.
    z_0 is the projection of rho_0 (V_eq(rho_0) + h(rho_0))."""
    nodal_rho = data.density(grid.x_centers, basis.nodes)
    rho = project_nodal(nodal_rho, basis)
    if model.kind == "lwr":
        return MacroField(rho[:, None, :], model)
    speed = velocity_law(model.velocity).value(nodal_rho)
    nodal_z = nodal_rho * (speed + hesitation(model.hesitation).value(nodal_rho))
    return MacroField(np.stack([rho, project_nodal(nodal_z, basis)], axis=1), model)


def require_hyperbolic(tensor: TripleProductTensor) -> None:
    """Refuse ARZ runs on bases without the commuting-matrix structure."""
    basis = tensor.basis
    if basis.family != "haar" and basis.order > 0:
        raise HyperbolicityError(
            f"{basis.family} polynomials do not give commuting Galerkin matrices; "
            "use the haar basis for ARZ"
        )
    report = check_hyperbolicity(tensor)
    if not report.passed:
        raise HyperbolicityError(f"hyperbolicity certificate failed: {report.details}")


@dataclass(frozen=True)
class MacroRun:
    snapshots: list[MacroField]
    dt_history: list[float]
    speed_history: list[float]
    # max over the run of |sum_cells U dx - initial|, per variable and mode
    conservation_drift: Array

    @property
    def n_steps(self) -> int:
        return len(self.dt_history)


def _totals(field: MacroField, grid: MacroGrid) -> Array:
    return np.asarray(field.values.sum(axis=0) * grid.dx)


def run_macro(
    grid: MacroGrid,
    model: MacroModel,
    tensor: TripleProductTensor,
    data: RiemannData,
    output_times: Sequence[float] | None = None,
    initial: MacroField | None = None,
) -> MacroRun:
    basis = tensor.basis
    if model.kind == "arz":
        require_hyperbolic(tensor)
    current = initial if initial is not None else init_riemann(grid, basis, data, model)
    check_density_bounds(current.rho, basis, current.time)
    targets = snapshot_schedule(output_times, grid.t_final, current.time)

    logger.info(
        "%s run: N_x=%d K=%d (%s) T=%.3f boundary=%s",
        model.kind,
        grid.n_cells,
        basis.order,
        basis.family,
        grid.t_final,
        grid.boundary,
    )
    initial_totals = _totals(current, grid)
    drift = np.zeros_like(initial_totals)
    snapshots: list[MacroField] = []
    dt_history: list[float] = []
    speed_history: list[float] = []
    for target in targets:
        while current.time < target - 1e-14:
            speed = max_wave_speed(current, basis)
            dt = min(grid.cfl * grid.dx / speed, target - current.time)
            current = fv_step(current, grid, tensor, dt)
            dt_history.append(dt)
            speed_history.append(speed)
            drift = np.maximum(drift, np.abs(_totals(current, grid) - initial_totals))
            logger.debug(
                "step %d: t=%.6f dt=%.3e lambda=%.4f", len(dt_history), current.time, dt, speed
            )
        current = replace(current, time=target)
        snapshots.append(current)
    logger.info("%s run done: %d steps", model.kind, len(dt_history))
    return MacroRun(snapshots, dt_history, speed_history, drift)
