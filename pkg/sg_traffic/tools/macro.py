from typing import Any

from sg_traffic.analysis import mean, variance
from sg_traffic.chaos.galerkin import build_tensor
from sg_traffic.models.macro import MacroRun, run_macro
from sg_traffic.utils.common import RunContext
from sg_traffic.utils.config import ExperimentConfig
from sg_traffic.utils.error import ConfigError


def solve(config: ExperimentConfig) -> MacroRun:
    tensor = build_tensor(config.basis.spec())
    return run_macro(
        config.macro_grid(),
        config.macro_model(),
        tensor,
        config.riemann(),
        config.output.snapshot_times,
    )


async def handle(context: RunContext, config: ExperimentConfig) -> dict[str, Any]:
    if config.model.type not in ("lwr", "arz"):
        raise ConfigError([f"macro runs need model.type lwr or arz, got {config.model.type!r}"])
    run = await context.run(solve, config)
    centers = config.macro_grid().x_centers
    arz = config.model.type == "arz"

    header = ["t", "x", "mode", "rho"] + (["z"] if arz else [])
    rows = (
        [snapshot.time, centers[cell], mode, *snapshot.values[cell, :, mode]]
        for snapshot in run.snapshots
        for cell in range(centers.size)
        for mode in range(snapshot.values.shape[-1])
    )
    if "csv" in config.output.formats:
        context.collector.write_csv("macro_snapshots.csv", header, rows)

    final = run.snapshots[-1]
    summary = {
        "model": config.model.type,
        "n_steps": run.n_steps,
        "times": [snapshot.time for snapshot in run.snapshots],
        "max_conservation_drift": float(run.conservation_drift.max(initial=0.0)),
        "final_mean_mass": float(mean(final.rho).sum() * config.macro_grid().dx),
        "final_max_variance": float(variance(final.rho).max()),
    }
    if "json" in config.output.formats:
        context.collector.write_json(
            "macro_run.json",
            {
                **summary,
                "dt_history": run.dt_history,
                "lambda_history": run.speed_history,
                "conservation_drift": run.conservation_drift,
            },
        )
    return summary
