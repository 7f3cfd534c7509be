from dataclasses import replace
from typing import Any

import numpy as np

from sg_traffic.analysis import mean, variance
from sg_traffic.chaos.galerkin import build_tensor
from sg_traffic.closures import speed_law
from sg_traffic.models.micro import (
    MicroParams,
    MicroState,
    init_from_density,
    init_platoon,
    integrate_micro,
    reconstruct_local_density,
)
from sg_traffic.utils.common import RunContext
from sg_traffic.utils.config import ExperimentConfig
from sg_traffic.utils.error import ConfigError


def solve(config: ExperimentConfig) -> tuple[MicroParams, list[MicroState], list[np.ndarray]]:
    tensor = build_tensor(config.basis.spec())
    basis = tensor.basis
    order = config.model.order
    params = config.micro_params()
    if config.initial.kind == "platoon":
        state = init_platoon(
            basis, params, config.initial.spacing, config.initial.headway_noise, order=order
        )
    else:
        data = config.riemann()
        if config.model.leader_speed is None:
            law = speed_law(params.speed_law)
            params = replace(params, leader_speed=float(law.value(np.array(data.rho_right))))
        state = init_from_density(basis, params, data, config.grid.b, order)
    states = integrate_micro(
        state,
        params,
        basis,
        tensor,
        config.model.dt,
        config.grid.t_final,
        order,
        [0.0, *config.output.snapshot_times],
    )
    densities = [reconstruct_local_density(s, params, basis) for s in states]
    return params, states, densities


async def handle(context: RunContext, config: ExperimentConfig) -> dict[str, Any]:
    if config.model.type != "micro":
        raise ConfigError([f"micro runs need model.type micro, got {config.model.type!r}"])
    params, states, densities = await context.run(solve, config)
    second_order = config.model.order == 2

    if "csv" in config.output.formats:
        header = ["t", "vehicle", "mode", "x"] + (["v"] if second_order else [])
        context.collector.write_csv(
            "micro_snapshots.csv",
            header,
            (
                [
                    state.time,
                    vehicle,
                    mode,
                    state.positions[vehicle, mode],
                    *([state.velocities[vehicle, mode]] if state.velocities is not None else []),
                ]
                for state in states
                for vehicle in range(params.n_vehicles)
                for mode in range(state.positions.shape[1])
            ),
        )
        context.collector.write_csv(
            "micro_density.csv",
            ["t", "vehicle", "mean_x", "mean_rho", "var_rho"],
            (
                [state.time, vehicle, state.positions[vehicle, 0], m, v]
                for state, density in zip(states, densities, strict=True)
                for vehicle, (m, v) in enumerate(zip(mean(density), variance(density), strict=True))
            ),
        )

    final = states[-1]
    summary = {
        "n_vehicles": params.n_vehicles,
        "car_length": params.car_length,
        "order": config.model.order,
        "times": [state.time for state in states],
        "final_leader_mean": float(final.positions[-1, 0]),
        "final_tail_mean": float(final.positions[0, 0]),
        "final_max_density_variance": float(variance(densities[-1]).max()),
    }
    if "json" in config.output.formats:
        context.collector.write_json("micro_run.json", summary)
    return summary
