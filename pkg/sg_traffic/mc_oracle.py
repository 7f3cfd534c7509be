"""Monte Carlo reference for the stochastic Galerkin solvers.

Each sample freezes the random variable and runs the K=0 path of the same solver, so the
oracle and the Galerkin run share every discretization choice except the treatment of xi.
Sample reductions use a fixed pairwise tree, so moments do not depend on how samples were
scheduled.

The same K=0 path run at equally spaced collocation nodes gives a reference without sampling
noise, for trends in K.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from logging import getLogger
from typing import Any

import numpy as np
from numpy.typing import NDArray

from sg_traffic.analysis import mean as mode_mean
from sg_traffic.analysis import variance as mode_variance
from sg_traffic.chaos.basis import BasisSpec
from sg_traffic.chaos.galerkin import TripleProductTensor, build_tensor
from sg_traffic.initial import RiemannData
from sg_traffic.models.macro import MacroGrid, MacroModel, MacroRun, run_macro
from sg_traffic.models.micro import MicroParams, MicroState, frozen, init_platoon, integrate_micro
from sg_traffic.utils.common import snapshot_schedule
from sg_traffic.utils.error import GridMismatchError, NumericalError, SampleFailureError

logger = getLogger(__name__)

Array = NDArray[np.float64]

DEFAULT_SAMPLES = 1000
DEFAULT_ATOL = 5e-3
DEFAULT_REFERENCE_NODES = 256
SE_FACTOR = 3.0


@dataclass(frozen=True)
class MacroProblem:
    grid: MacroGrid
    model: MacroModel
    data: RiemannData
    output_times: tuple[float, ...]

    @property
    def tag(self) -> str:
        return self.model.kind

    @property
    def schedule(self) -> list[float]:
        return snapshot_schedule(self.output_times, self.grid.t_final)


@dataclass(frozen=True)
class MicroProblem:
    params: MicroParams
    spacing: float
    headway_noise: float
    order: int
    dt: float
    t_final: float
    output_times: tuple[float, ...]

    @property
    def tag(self) -> str:
        return "micro"

    @property
    def schedule(self) -> list[float]:
        return snapshot_schedule(self.output_times or (0.0,), self.t_final)


Problem = MacroProblem | MicroProblem


@lru_cache(maxsize=4)
def deterministic_tensor(family: str = "haar") -> TripleProductTensor:
    return build_tensor(BasisSpec(family, 0))


def draw_samples(n_samples: int, seed: int) -> Array:
    """Reference-variable values xi_m ~ U(0, 1), i.i.d. from a seeded generator."""
    if n_samples < 2:
        raise ValueError(f"need at least two samples, got {n_samples}")
    return np.random.default_rng(seed).uniform(0.0, 1.0, n_samples)


def macro_snapshots(run: MacroRun) -> Array:
    """Coefficients of every snapshot stacked as (n_times, N_x, n_vars, K+1)."""
    return np.stack([snapshot.values for snapshot in run.snapshots])


def micro_snapshots(states: Sequence[MicroState]) -> Array:
    """Position coefficients stacked as (n_times, N, K+1)."""
    return np.stack([state.positions for state in states])


def solve_problem(problem: Problem, tensor: TripleProductTensor, xi: float | None = None) -> Array:
    """Run a problem on ``tensor``'s basis, optionally with the random variable frozen at ``xi``.

    Returns stacked snapshot coefficients (see macro_snapshots / micro_snapshots).
    """
    basis = tensor.basis
    if isinstance(problem, MacroProblem):
        data = problem.data if xi is None else problem.data.freeze(xi)
        run = run_macro(problem.grid, problem.model, tensor, data, problem.schedule)
        return macro_snapshots(run)
    params = problem.params
    if xi is not None:
        params = frozen(params, xi)
    state = init_platoon(basis, params, problem.spacing, problem.headway_noise, order=problem.order)
    states = integrate_micro(
        state,
        params,
        basis,
        tensor,
        problem.dt,
        problem.t_final,
        problem.order,
        problem.schedule,
    )
    return micro_snapshots(states)


def solve_sample(problem: Problem, xi: float) -> Array:
    """Deterministic solution for one sample, mode axis dropped."""
    try:
        return solve_problem(problem, deterministic_tensor(), xi)[..., 0]
    except NumericalError as error:
        raise SampleFailureError(xi, error) from error


def pairwise_sum(samples: Sequence[Array] | Array) -> Array:
    """Sum over the first axis by a balanced binary tree."""
    stack = [np.asarray(sample, dtype=float) for sample in samples]
    if not stack:
        raise ValueError("nothing to sum")
    while len(stack) > 1:
        paired = [stack[i] + stack[i + 1] for i in range(0, len(stack) - 1, 2)]
        if len(stack) % 2:
            paired.append(stack[-1])
        stack = paired
    return stack[0]


@dataclass(frozen=True)
class MCRun:
    n_samples: int
    seed: int
    model: str
    mean: Array
    variance: Array
    std_error: Array
    times: tuple[float, ...] = field(default_factory=tuple)

    def summary(self) -> dict[str, Any]:
        return {
            "n_samples": self.n_samples,
            "seed": self.seed,
            "model": self.model,
            "times": list(self.times),
            "max_variance": float(np.max(self.variance)),
            "max_std_error": float(np.max(self.std_error)),
        }


def estimate_moments(
    samples: Sequence[Array] | Array, seed: int, model: str, times: Sequence[float] = ()
) -> MCRun:
    """Unbiased mean and variance with the standard error of the mean."""
    count = len(samples)
    if count < 2:
        raise ValueError(f"need at least two samples, got {count}")
    sample_mean = pairwise_sum(samples) / count
    sample_variance = pairwise_sum([(s - sample_mean) ** 2 for s in samples]) / (count - 1)
    return MCRun(
        n_samples=count,
        seed=seed,
        model=model,
        mean=sample_mean,
        variance=sample_variance,
        std_error=np.sqrt(sample_variance / count),
        times=tuple(float(t) for t in times),
    )


def mc_solve(problem: Problem, n_samples: int = DEFAULT_SAMPLES, seed: int = 0) -> MCRun:
    xis = draw_samples(n_samples, seed)
    logger.info("monte carlo: %s, %d samples, seed %d", problem.tag, n_samples, seed)
    samples = [solve_sample(problem, float(xi)) for xi in xis]
    return estimate_moments(samples, seed, problem.tag, problem.schedule)


@dataclass(frozen=True)
class SGMoments:
    mean: Array
    variance: Array
    times: tuple[float, ...]


def sg_moments(coefficients: Array, times: Sequence[float]) -> SGMoments:
    return SGMoments(mode_mean(coefficients), mode_variance(coefficients), tuple(times))


def collocation_nodes(n_nodes: int) -> Array:
    """Midpoints of ``n_nodes`` equal cells of (0, 1)."""
    if n_nodes < 2:
        raise ValueError(f"need at least two collocation nodes, got {n_nodes}")
    return (np.arange(n_nodes) + 0.5) / n_nodes


def collocation_moments(samples: Sequence[Array] | Array, times: Sequence[float]) -> SGMoments:
    """Equal-weight mean and variance of deterministic solutions at the collocation nodes."""
    count = len(samples)
    if count < 2:
        raise ValueError(f"need at least two collocation samples, got {count}")
    node_mean = pairwise_sum(samples) / count
    node_variance = pairwise_sum([(s - node_mean) ** 2 for s in samples]) / count
    return SGMoments(node_mean, node_variance, tuple(float(t) for t in times))


def collocation_reference(problem: Problem, n_nodes: int = DEFAULT_REFERENCE_NODES) -> SGMoments:
    """Low-noise reference moments: the K=0 solver at every collocation node."""
    logger.info("collocation reference: %s, %d nodes", problem.tag, n_nodes)
    samples = [solve_sample(problem, float(xi)) for xi in collocation_nodes(n_nodes)]
    return collocation_moments(samples, problem.schedule)


@dataclass(frozen=True)
class ComparisonReport:
    times: list[float]
    l1_mean: list[float]
    linf_mean: list[float]
    l1_variance: list[float]
    thresholds: list[float]
    passed: bool
    per_cell_mean_error: list[list[float]] = field(repr=False)

    def to_dict(self, include_cells: bool = False) -> dict[str, Any]:
        result = asdict(self)
        if not include_cells:
            result.pop("per_cell_mean_error")
        return result


def compare(sg: SGMoments, mc: MCRun, atol: float = DEFAULT_ATOL) -> ComparisonReport:
    """Per-snapshot discrepancies; a snapshot passes when the L1 mean error (averaged over
    cells or vehicles) is within max(3 SE, atol), SE averaged the same way."""
    if sg.mean.shape != mc.mean.shape:
        raise GridMismatchError(f"SG moments {sg.mean.shape} vs MC moments {mc.mean.shape}")
    if mc.times and not np.allclose(sg.times, mc.times, rtol=0.0, atol=1e-12):
        raise GridMismatchError(f"SG snapshot times {sg.times} vs MC times {mc.times}")

    times, l1_mean, linf_mean, l1_var, thresholds, cells = [], [], [], [], [], []
    for index, time in enumerate(sg.times):
        error = np.abs(sg.mean[index] - mc.mean[index])
        threshold = max(SE_FACTOR * float(np.mean(mc.std_error[index])), atol)
        times.append(float(time))
        l1_mean.append(float(np.mean(error)))
        linf_mean.append(float(np.max(error)))
        l1_var.append(float(np.mean(np.abs(sg.variance[index] - mc.variance[index]))))
        thresholds.append(threshold)
        cells.append([float(e) for e in error.reshape(error.shape[0], -1).max(axis=1)])
    passed = all(e <= t for e, t in zip(l1_mean, thresholds, strict=True))
    logger.info("comparison: max L1 mean error %.3e, passed=%s", max(l1_mean, default=0.0), passed)
    return ComparisonReport(times, l1_mean, linf_mean, l1_var, thresholds, passed, cells)
