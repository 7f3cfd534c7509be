from typing import Any

import numpy as np

from sg_traffic.chaos.basis import build_basis
from sg_traffic.chaos.galerkin import compute_triple_tensor
from sg_traffic.chaos.hyperbolicity import check_hyperbolicity
from sg_traffic.utils.common import RunContext
from sg_traffic.utils.config import BasisSection, ExperimentConfig


def certify(section: BasisSection, seed: int) -> dict[str, Any]:
    basis = build_basis(section.spec())
    tensor = compute_triple_tensor(basis)
    report = check_hyperbolicity(tensor, seed=seed)
    gram_residual = float(np.max(np.abs(basis.gram() - np.eye(basis.n_modes))))
    return {
        "family": basis.family,
        "K": basis.order,
        "Q": int(basis.nodes.size),
        "gram_residual": gram_residual,
        "hyperbolicity": report.to_dict(),
        "matrices": tensor.matrices,
    }


async def handle(context: RunContext, config: ExperimentConfig) -> dict[str, Any]:
    seed = context.seed if context.seed is not None else config.experiment.seed
    result = await context.run(certify, config.basis, seed)
    matrices = result.pop("matrices")
    if config.output.tensor_csv:
        context.collector.write_csv(
            "tensor.csv",
            ["l", "i", "j", "value"],
            ([*index, matrices[index]] for index in np.ndindex(matrices.shape)),
        )
    context.collector.write_json("basis_check.json", result)
    return result
