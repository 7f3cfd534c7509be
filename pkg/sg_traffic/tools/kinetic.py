from typing import Any

import numpy as np

from sg_traffic.chaos.galerkin import build_tensor
from sg_traffic.models.kinetic import KineticGrid, KineticRun, closure_residual, run_kinetic
from sg_traffic.utils.common import RunContext
from sg_traffic.utils.config import ExperimentConfig
from sg_traffic.utils.error import ConfigError


def solve(config: ExperimentConfig) -> tuple[KineticGrid, KineticRun, float]:
    tensor = build_tensor(config.basis.spec())
    grid = config.kinetic_grid()
    run = run_kinetic(
        grid,
        tensor,
        config.riemann(),
        config.grid.t_final,
        config.output.snapshot_times,
        cfl=config.grid.cfl,
    )
    residual = closure_residual(run.snapshots[-1].field, grid, tensor)
    return grid, run, float(np.max(np.abs(residual)))


async def handle(context: RunContext, config: ExperimentConfig) -> dict[str, Any]:
    if config.model.type != "kinetic":
        raise ConfigError([f"kinetic runs need model.type kinetic, got {config.model.type!r}"])
    grid, run, residual = await context.run(solve, config)
    centers = grid.x_centers
    velocities = grid.w_centers
    collector = context.collector

    if "csv" in config.output.formats:
        collector.write_csv(
            "kinetic_moments.csv",
            ["t", "x", "mode", "rho", "q"],
            (
                [snapshot.time, centers[cell], mode, rho[cell, mode], q[cell, mode]]
                for snapshot in run.snapshots
                for rho, q in ((snapshot.rho, snapshot.q),)
                for cell, mode in np.ndindex(rho.shape)
            ),
        )
        if config.output.full_field:
            collector.write_csv(
                "kinetic_field.csv",
                ["t", "x", "w", "mode", "g"],
                (
                    [snapshot.time, centers[cell], velocities[slot], mode, values[cell, slot, mode]]
                    for snapshot in run.snapshots
                    for values in (snapshot.field.values,)
                    for cell, slot, mode in np.ndindex(values.shape)
                ),
            )

    summary = {
        "epsilon": grid.epsilon,
        "w_max": grid.velocity_bound,
        "n_steps": run.n_steps,
        "times": [snapshot.time for snapshot in run.snapshots],
        "equilibrium_builds": run.monitor.builds,
        "max_um1_residual": run.monitor.max_um1,
        "max_um2_residual": run.monitor.max_um2,
        "final_closure_residual": residual,
    }
    if "json" in config.output.formats:
        collector.write_json("kinetic_run.json", {**summary, "dt_history": run.dt_history})
    return summary
