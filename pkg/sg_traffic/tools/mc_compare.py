import math
from typing import Any

import numpy as np

from sg_traffic.chaos.galerkin import build_tensor
from sg_traffic.experiments import k_convergence_case, k_trend
from sg_traffic.mc_oracle import (
    MacroProblem,
    MicroProblem,
    Problem,
    collocation_moments,
    collocation_nodes,
    compare,
    draw_samples,
    estimate_moments,
    sg_moments,
    solve_problem,
    solve_sample,
)
from sg_traffic.utils.common import RunContext
from sg_traffic.utils.config import ExperimentConfig
from sg_traffic.utils.error import ConfigError

_CHUNKS_PER_WORKER = 4


def build_problem(config: ExperimentConfig) -> Problem:
    times = tuple(config.output.snapshot_times)
    if config.model.type in ("lwr", "arz"):
        return MacroProblem(config.macro_grid(), config.macro_model(), config.riemann(), times)
    if config.model.type == "micro" and config.initial.kind == "platoon":
        return MicroProblem(
            params=config.micro_params(),
            spacing=config.initial.spacing,
            headway_noise=config.initial.headway_noise,
            order=config.model.order,
            dt=config.model.dt,
            t_final=config.grid.t_final,
            output_times=(0.0, *times),
        )
    raise ConfigError(
        [
            "mc-compare needs model.type lwr or arz, or micro with initial.kind platoon; "
            f"got {config.model.type!r} with initial.kind {config.initial.kind!r}"
        ]
    )


def solve_chunk(problem: Problem, xis: list[float]) -> list[np.ndarray]:
    return [solve_sample(problem, xi) for xi in xis]


def solve_galerkin(problem: Problem, config: ExperimentConfig) -> np.ndarray:
    return solve_problem(problem, build_tensor(config.basis.spec()))


def _chunks(values: np.ndarray, count: int) -> list[list[float]]:
    size = max(1, math.ceil(values.size / count))
    return [[float(v) for v in values[i : i + size]] for i in range(0, values.size, size)]


async def handle(context: RunContext, config: ExperimentConfig) -> dict[str, Any]:
    problem = build_problem(config)
    experiment = config.experiment
    seed = context.seed if context.seed is not None else experiment.seed

    xis = draw_samples(experiment.samples, seed)
    chunks = _chunks(xis, context.workers * _CHUNKS_PER_WORKER)
    solved = await context.map(solve_chunk, [(problem, chunk) for chunk in chunks])
    mc = estimate_moments(
        [sample for chunk in solved for sample in chunk], seed, problem.tag, problem.schedule
    )

    coefficients = await context.run(solve_galerkin, problem, config)
    sg = sg_moments(coefficients, problem.schedule)
    report = compare(sg, mc, experiment.atol)

    reference = None
    if experiment.k_list:
        nodes = collocation_nodes(experiment.reference_nodes)
        node_chunks = _chunks(nodes, context.workers * _CHUNKS_PER_WORKER)
        solved_nodes = await context.map(solve_chunk, [(problem, chunk) for chunk in node_chunks])
        reference = collocation_moments(
            [sample for chunk in solved_nodes for sample in chunk], problem.schedule
        )
    convergence = await context.map(
        k_convergence_case,
        [
            (problem, config.basis.family, order, mc, experiment.atol, reference)
            for order in experiment.k_list
        ],
    )

    collector = context.collector
    if "csv" in config.output.formats:
        flat_sg_mean = sg.mean.reshape(sg.mean.shape[0], sg.mean.shape[1], -1)
        flat_sg_var = sg.variance.reshape(flat_sg_mean.shape)
        flat_mc_mean = mc.mean.reshape(flat_sg_mean.shape)
        flat_mc_var = mc.variance.reshape(flat_sg_mean.shape)
        flat_se = mc.std_error.reshape(flat_sg_mean.shape)
        collector.write_csv(
            "mc_moments.csv",
            ["t", "index", "variable", "sg_mean", "mc_mean", "mc_std_error", "sg_var", "mc_var"],
            (
                [
                    sg.times[t],
                    index,
                    variable,
                    flat_sg_mean[t, index, variable],
                    flat_mc_mean[t, index, variable],
                    flat_se[t, index, variable],
                    flat_sg_var[t, index, variable],
                    flat_mc_var[t, index, variable],
                ]
                for t, index, variable in np.ndindex(flat_sg_mean.shape)
            ),
        )
    result = {
        "model": problem.tag,
        "K": config.basis.order,
        "monte_carlo": mc.summary(),
        "comparison": report.to_dict(),
        "k_convergence": [row.to_dict() for row in convergence],
        "reference_nodes": experiment.reference_nodes if experiment.k_list else None,
        "k_convergence_nonincreasing": k_trend(convergence) if convergence else None,
    }
    if "json" in config.output.formats:
        collector.write_json("mc_report.json", result)
    return result
