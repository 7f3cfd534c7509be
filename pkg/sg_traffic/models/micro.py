"""Stochastic Galerkin follow-the-leader dynamics.

Vehicles are stored in road order: row ``i`` follows row ``i + 1`` and the last row is the
leader. Positions and velocities are coefficient arrays of shape
(N, K+1).

First order:  dx_i/dt = s_hat_i,   leader dx_N/dt = s_bar e_1.
Second order: dx_i/dt = v_i,
              dv_i/dt = C P^{-1}(dx_i) P^{-1}(dx_i) (v_{i+1} - v_i) + (A / t_r) (s_hat_i - v_i),
              leader dv_N/dt = a_bar e_1,
where s_hat_i is the projection of s(L / headway_i(xi)) evaluated at the quadrature nodes.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, replace
from logging import getLogger

import numpy as np
from numpy.typing import NDArray

from sg_traffic.chaos.basis import Basis, xi_values
from sg_traffic.chaos.galerkin import (
    TripleProductTensor,
    galerkin_solve,
    project_nodal,
    reconstruct_nodal,
)
from sg_traffic.closures import project_closure, speed_law
from sg_traffic.initial import RiemannData
from sg_traffic.utils.common import snapshot_schedule
from sg_traffic.utils.error import HeadwayError, VehicleOrderingError

logger = getLogger(__name__)

Array = NDArray[np.float64]

DEFAULT_TIME_STEP = 1e-3
SPEED_INPUTS = ("density", "headway")


@dataclass(frozen=True)
class MicroParams:
    n_vehicles: int
    car_length: float
    speed_law: str = "greenshields"
    # "density": s is evaluated at L / headway; "headway": s is evaluated at the headway itself.
    speed_input: str = "density"
    leader_speed: float = 1.0
    leader_accel: float = 0.0
    relative_gain: float = 1.0
    relaxation_gain: float = 1.0
    reaction_time: float = 1.0
    perception_noise: float = 0.0
    fixed_xi: float | None = None

    def __post_init__(self) -> None:
        if self.n_vehicles < 2:
            raise ValueError(f"need at least two vehicles, got {self.n_vehicles}")
        if self.car_length <= 0.0:
            raise ValueError(f"car length must be positive, got {self.car_length}")
        if self.reaction_time <= 0.0:
            raise ValueError(f"reaction time must be positive, got {self.reaction_time}")
        if self.speed_input not in SPEED_INPUTS:
            raise ValueError(f"speed_input must be one of {SPEED_INPUTS}, got {self.speed_input!r}")
        probe = np.linspace(0.0, 1.0, 101)
        if np.any(np.diff(speed_law(self.speed_law).value(probe)) > 0.0):
            raise ValueError(f"speed law {self.speed_law!r} is not nonincreasing on [0, 1]")


@dataclass(frozen=True)
class MicroState:
    positions: Array
    velocities: Array | None = None
    time: float = 0.0

    @property
    def n_vehicles(self) -> int:
        return int(self.positions.shape[0])


def _headway_offset(params: MicroParams, basis: Basis) -> Array:
    return params.perception_noise * xi_values(basis, params.fixed_xi)


def _nodal_headways(positions: Array, params: MicroParams, basis: Basis) -> Array:
    """Headways x_{i+1}(xi) - x_i(xi) (+ perception noise) at the quadrature nodes, (N-1, Q)."""
    nodal = reconstruct_nodal(positions, basis)
    headways = nodal[1:] - nodal[:-1] + _headway_offset(params, basis)
    if np.any(headways <= 0.0):
        vehicle, node = (int(i) for i in np.argwhere(headways <= 0.0)[0])
        raise HeadwayError(
            f"nonpositive headway {headways[vehicle, node]:.3e} behind vehicle {vehicle + 1} "
            f"at xi={basis.nodes[node]:.6f}"
        )
    return headways


def _speed_input(headways: Array, params: MicroParams) -> Array:
    if params.speed_input == "headway":
        return headways
    return params.car_length / headways


def _follower_speeds(positions: Array, params: MicroParams, basis: Basis) -> Array:
    law = speed_law(params.speed_law)
    headways = _nodal_headways(positions, params, basis)
    return project_nodal(law.value(_speed_input(headways, params)), basis)


def project_headway_speed(i: int, positions: Array, params: MicroParams, basis: Basis) -> Array:
    """Projected speed s_hat_i of follower ``i`` (0 <= i < N - 1)."""
    if not 0 <= i < positions.shape[0] - 1:
        raise ValueError(f"vehicle {i} is not a follower")
    return _follower_speeds(positions[i : i + 2], params, basis)[0]


def linear_headway_speed(i: int, positions: Array, params: MicroParams, basis: Basis) -> Array:
    """s applied directly to the Galerkin headway coefficients; exact only for affine s of the
    headway (``speed_input="headway"``)."""
    law = speed_law(params.speed_law)
    if law.affine is None or params.speed_input != "headway":
        raise ValueError("the coefficient shortcut needs an affine speed law of the headway")
    headway = positions[i + 1] - positions[i] + project_nodal(
        _headway_offset(params, basis), basis
    )
    return project_closure(law, headway, basis)


def _leader_row(value: float, n_modes: int) -> Array:
    row = np.zeros(n_modes)
    row[0] = value
    return row


def micro_rhs_first_order(state: MicroState, params: MicroParams, basis: Basis) -> Array:
    rates = np.empty_like(state.positions)
    rates[:-1] = _follower_speeds(state.positions, params, basis)
    rates[-1] = _leader_row(params.leader_speed, basis.n_modes)
    return rates


def micro_rhs_second_order(
    state: MicroState, params: MicroParams, basis: Basis, tensor: TripleProductTensor
) -> tuple[Array, Array]:
    if state.velocities is None:
        raise ValueError("second-order dynamics need velocity coefficients")
    positions, velocities = state.positions, state.velocities
    speeds = _follower_speeds(positions, params, basis)
    headways = positions[1:] - positions[:-1] + project_nodal(
        _headway_offset(params, basis), basis
    )
    relative = velocities[1:] - velocities[:-1]
    scaled = galerkin_solve(headways, galerkin_solve(headways, relative, tensor), tensor)

    accelerations = np.empty_like(velocities)
    accelerations[:-1] = params.relative_gain * scaled + (
        params.relaxation_gain / params.reaction_time
    ) * (speeds - velocities[:-1])
    accelerations[-1] = _leader_row(params.leader_accel, basis.n_modes)
    return velocities.copy(), accelerations


def _check_ordering(positions: Array, time: float) -> None:
    gaps = np.diff(positions[:, 0])
    if np.any(gaps <= 0.0):
        vehicle = int(np.argmax(gaps <= 0.0))
        raise VehicleOrderingError(
            f"mean positions of vehicles {vehicle} and {vehicle + 1} crossed at t={time:.6f}"
        )


def _rk4(
    fields: tuple[Array, ...], rhs: Callable[[tuple[Array, ...]], tuple[Array, ...]], dt: float
) -> tuple[Array, ...]:
    def shifted(base: tuple[Array, ...], slope: tuple[Array, ...], h: float) -> tuple[Array, ...]:
        return tuple(b + h * s for b, s in zip(base, slope, strict=True))

    k1 = rhs(fields)
    k2 = rhs(shifted(fields, k1, 0.5 * dt))
    k3 = rhs(shifted(fields, k2, 0.5 * dt))
    k4 = rhs(shifted(fields, k3, dt))
    return tuple(
        f + dt / 6.0 * (a + 2.0 * b + 2.0 * c + d)
        for f, a, b, c, d in zip(fields, k1, k2, k3, k4, strict=True)
    )


def integrate_micro(
    state: MicroState,
    params: MicroParams,
    basis: Basis,
    tensor: TripleProductTensor | None,
    dt: float,
    t_final: float,
    order: int = 1,
    output_times: Sequence[float] | None = None,
) -> list[MicroState]:
    """Classical RK4 from ``state.time`` to ``t_final``; returns the snapshots at ``output_times``
    (default: start and end). The step is shrunk so that it divides the horizon exactly."""
    if dt <= 0.0:
        raise ValueError(f"time step must be positive, got {dt}")
    if order not in (1, 2):
        raise ValueError(f"order must be 1 or 2, got {order}")
    if order == 2 and (tensor is None or state.velocities is None):
        raise ValueError("second-order integration needs a tensor and initial velocities")

    horizon = t_final - state.time
    n_steps = max(1, math.ceil(horizon / dt - 1e-9))
    step = horizon / n_steps
    requested = [state.time] if output_times is None else output_times
    times = snapshot_schedule(requested, t_final, state.time)
    wanted = {min(n_steps, max(0, round((t - state.time) / step))) for t in times}

    def rhs(fields: tuple[Array, ...]) -> tuple[Array, ...]:
        current = MicroState(fields[0], fields[1] if order == 2 else None)
        if order == 1:
            return (micro_rhs_first_order(current, params, basis),)
        assert tensor is not None
        return micro_rhs_second_order(current, params, basis, tensor)

    fields: tuple[Array, ...] = (state.positions.copy(),)
    if order == 2:
        assert state.velocities is not None
        fields = (state.positions.copy(), state.velocities.copy())

    _check_ordering(fields[0], state.time)
    snapshots = [state] if 0 in wanted else []
    logger.info(
        "micro run: N=%d order=%d steps=%d dt=%.3e", params.n_vehicles, order, n_steps, step
    )
    for index in range(1, n_steps + 1):
        fields = _rk4(fields, rhs, step)
        time = state.time + index * step
        _check_ordering(fields[0], time)
        if index in wanted:
            velocities = fields[1] if order == 2 else None
            snapshots.append(MicroState(fields[0].copy(), velocities, time))
    return snapshots


def reconstruct_local_density(state: MicroState, params: MicroParams, basis: Basis) -> Array:
    """Stochastic local density L / headway_i(xi) projected onto the basis, shape (N-1, K+1)."""
    headways = _nodal_headways(state.positions, params, basis)
    return project_nodal(params.car_length / headways, basis)


def equilibrium_velocities(positions: Array, params: MicroParams, basis: Basis) -> Array:
    velocities = np.empty_like(positions)
    velocities[:-1] = _follower_speeds(positions, params, basis)
    velocities[-1] = _leader_row(params.leader_speed, basis.n_modes)
    return velocities


def init_platoon(
    basis: Basis,
    params: MicroParams,
    spacing: float,
    headway_noise: float = 0.0,
    origin: float = 0.0,
    order: int = 1,
) -> MicroState:
    """Platoon with initial headways spacing + headway_noise * xi, the tail car at ``origin``.

    Second-order platoons start at the projected equilibrium speeds.
    """
    xi = xi_values(basis, params.fixed_xi)
    ranks = np.arange(params.n_vehicles, dtype=float)[:, None]
    positions = project_nodal(origin + ranks * (spacing + headway_noise * xi), basis)
    velocities = equilibrium_velocities(positions, params, basis) if order == 2 else None
    return MicroState(positions, velocities)


def init_from_density(
    basis: Basis,
    params: MicroParams,
    data: RiemannData,
    leader_position: float,
    order: int = 1,
) -> MicroState:
    """Place the platoon backwards from the leader so that L / headway matches the initial
    density at every quadrature node, then project the node-wise positions."""
    xi = xi_values(basis, params.fixed_xi)
    nodal = np.empty((params.n_vehicles, xi.size))
    nodal[-1] = leader_position
    for i in range(params.n_vehicles - 2, -1, -1):
        ahead = nodal[i + 1]
        # left limit at the car ahead, one density per node
        local = np.diagonal(data.density(np.nextafter(ahead, -np.inf), xi))
        if np.any(local <= 0.0):
            raise HeadwayError("cannot place vehicles in a region of zero initial density")
        nodal[i] = ahead - params.car_length / local
    positions = project_nodal(nodal, basis)
    velocities = equilibrium_velocities(positions, params, basis) if order == 2 else None
    return MicroState(positions, velocities)


def frozen(params: MicroParams, xi: float) -> MicroParams:
    return replace(params, fixed_xi=float(xi))
