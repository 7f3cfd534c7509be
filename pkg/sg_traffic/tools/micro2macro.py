from itertools import pairwise
from typing import Any

from sg_traffic.chaos.galerkin import build_tensor
from sg_traffic.experiments import Micro2MacroRow, micro2macro_case, nonincreasing
from sg_traffic.utils.common import RunContext
from sg_traffic.utils.config import ExperimentConfig

ROW_COLUMNS = list(Micro2MacroRow.__dataclass_fields__)


async def handle(context: RunContext, config: ExperimentConfig) -> dict[str, Any]:
    tensor = build_tensor(config.basis.spec())
    rows = await context.map(
        micro2macro_case, [(config, tensor, n) for n in config.experiment.n_list]
    )

    if "csv" in config.output.formats:
        context.collector.write_csv(
            "micro2macro.csv",
            ROW_COLUMNS,
            ([getattr(row, column) for column in ROW_COLUMNS] for row in rows),
        )
    ratios = [
        later.l1_mean / earlier.l1_mean if earlier.l1_mean > 0.0 else None
        for earlier, later in pairwise(rows)
    ]
    result = {
        "t_final": config.grid.t_final,
        "rho_r": config.initial.rho_r,
        "rows": [row.to_dict() for row in rows],
        "l1_mean_ratios": ratios,
        "l1_mean_nonincreasing": nonincreasing([row.l1_mean for row in rows]),
        "l1_variance_nonincreasing": nonincreasing([row.l1_variance for row in rows]),
    }
    if "json" in config.output.formats:
        context.collector.write_json("micro2macro.json", result)
    return result
