from typing import Any

from sg_traffic.analysis import FDPoint, bin_fd_points, diagram_shape, scan_one, write_fd_svg
from sg_traffic.chaos.galerkin import build_tensor
from sg_traffic.utils.common import RunContext
from sg_traffic.utils.config import ExperimentConfig
from sg_traffic.utils.error import ConfigError

POINT_COLUMNS = ["run_id", "rho_r", "x", "mean_rho", "var_rho", "mean_flux", "var_flux"]
BIN_COLUMNS = [
    "lower",
    "upper",
    "count",
    "flux_min",
    "flux_max",
    "spread",
    "detrended_spread",
    "mean_var_rho",
    "mean_var_flux",
]


def scan_case(config: ExperimentConfig, rho_r: float, run_id: int) -> list[FDPoint]:
    tensor = build_tensor(config.basis.spec())
    return scan_one(
        config.macro_grid(), config.macro_model(), tensor, config.riemann(), rho_r, run_id
    )


async def handle(context: RunContext, config: ExperimentConfig) -> dict[str, Any]:
    if config.model.type != "lwr":
        raise ConfigError([f"fd-scan runs the lwr model, got model.type {config.model.type!r}"])
    sweep = config.experiment.rho_r_list
    runs = await context.map(
        scan_case, [(config, rho_r, run_id) for run_id, rho_r in enumerate(sweep)]
    )
    points = [point for run in runs for point in run]
    bins = bin_fd_points(points, config.experiment.bin_width, config.model.velocity)

    collector = context.collector
    formats = config.output.formats
    if "csv" in formats:
        collector.write_csv(
            "fd_points.csv",
            POINT_COLUMNS,
            ([getattr(point, column) for column in POINT_COLUMNS] for point in points),
        )
        collector.write_csv(
            "fd_bins.csv",
            BIN_COLUMNS,
            ([getattr(item, column) for column in BIN_COLUMNS] for item in bins),
        )
    if "svg" in formats:
        write_fd_svg(points, collector.path("fd_scan.svg"))

    summary = {
        "n_runs": len(sweep),
        "n_points": len(points),
        "bin_width": config.experiment.bin_width,
        "snapshot": "final time only",
        "t_final": config.grid.t_final,
        "max_detrended_spread": max((item.detrended_spread for item in bins), default=0.0),
        "diagram_shape": diagram_shape(bins).to_dict(),
    }
    if "json" in formats:
        collector.write_json(
            "fd_scan.json", {**summary, "bins": [item.to_dict() for item in bins]}
        )
    return summary
