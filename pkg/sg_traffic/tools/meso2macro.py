from typing import Any

from sg_traffic.chaos.galerkin import build_tensor
from sg_traffic.experiments import Meso2MacroRow, lwr_reference, meso2macro_case, nonincreasing
from sg_traffic.utils.common import RunContext
from sg_traffic.utils.config import ExperimentConfig

ROW_COLUMNS = list(Meso2MacroRow.__dataclass_fields__)


async def handle(context: RunContext, config: ExperimentConfig) -> dict[str, Any]:
    tensor = build_tensor(config.basis.spec())
    lwr = await context.run(lwr_reference, config, tensor)
    rows = await context.map(
        meso2macro_case, [(config, tensor, lwr, eps) for eps in config.experiment.eps_list]
    )

    if "csv" in config.output.formats:
        context.collector.write_csv(
            "meso2macro.csv",
            ROW_COLUMNS,
            ([getattr(row, column) for column in ROW_COLUMNS] for row in rows),
        )
    result = {
        "t_final": config.grid.t_final,
        "n_velocities": config.grid.n_velocities,
        "rows": [row.to_dict() for row in rows],
        "max_um1_residual": max((row.max_um1 for row in rows), default=0.0),
        "max_um2_residual": max((row.max_um2 for row in rows), default=0.0),
        "l1_rho_nonincreasing": nonincreasing([row.l1_rho for row in rows]),
    }
    if "json" in config.output.formats:
        context.collector.write_json("meso2macro.json", result)
    return result
