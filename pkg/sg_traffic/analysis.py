"""Moment post-processing and the stochastic fundamental diagram."""

from __future__ import annotations

from collections import defaultdict
from collections.abc import Iterable, Sequence
from dataclasses import asdict, dataclass
from logging import getLogger
from pathlib import Path
from typing import Any

import numpy as np
from numpy.typing import NDArray

from sg_traffic.chaos.galerkin import TripleProductTensor
from sg_traffic.closures import velocity_law
from sg_traffic.initial import RiemannData
from sg_traffic.models.macro import MacroField, MacroGrid, MacroModel, lwr_flux, run_macro

logger = getLogger(__name__)

Array = NDArray[np.float64]

DEFAULT_BIN_WIDTH = 0.02
FREE_FLOW_LIMIT = 0.3
TRANSITION_RANGE = (0.35, 0.83)
CONGESTED_LIMIT = 0.85
SPREAD_RATIO = 5.0
FREE_FLOW_SPREAD_TOL = 1e-4
VARIANCE_FLOOR = 1e-12
_EDGE_TOL = 1e-12


def mean(u: Array) -> Array:
    """Mean of the random field: the coefficient of the constant mode."""
    return np.asarray(np.asarray(u, dtype=float)[..., 0])


def variance(u: Array) -> Array:
    coefficients = np.asarray(u, dtype=float)
    return np.asarray(np.sum(coefficients[..., 1:] ** 2, axis=-1))


def fundamental_diagram(
    rho: Array, tensor: TripleProductTensor, velocity: str = "greenshields"
) -> Array:
    """Flux coefficients f = P(rho_hat) V_eq_hat of an arbitrary snapshot."""
    return lwr_flux(rho, tensor, velocity)


@dataclass(frozen=True)
class FDPoint:
    run_id: int
    rho_r: float
    cell: int
    x: float
    time: float
    mean_rho: float
    var_rho: float
    mean_flux: float
    var_flux: float

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class FDBin:
    lower: float
    upper: float
    count: int
    flux_min: float
    flux_max: float
    # max - min of the mean flux in the bin
    spread: float
    # same after subtracting the closure flux at each point's mean density
    detrended_spread: float
    mean_var_rho: float
    mean_var_flux: float

    @property
    def center(self) -> float:
        return 0.5 * (self.lower + self.upper)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def fd_points(
    field: MacroField,
    x_centers: Array,
    tensor: TripleProductTensor,
    run_id: int = 0,
    rho_r: float = float("nan"),
) -> list[FDPoint]:
    rho = field.rho
    flux = fundamental_diagram(rho, tensor, field.model.velocity)
    mean_rho, var_rho = mean(rho), variance(rho)
    mean_flux, var_flux = mean(flux), variance(flux)
    return [
        FDPoint(
            run_id=run_id,
            rho_r=float(rho_r),
            cell=cell,
            x=float(x_centers[cell]),
            time=float(field.time),
            mean_rho=float(mean_rho[cell]),
            var_rho=float(var_rho[cell]),
            mean_flux=float(mean_flux[cell]),
            var_flux=float(var_flux[cell]),
        )
        for cell in range(rho.shape[0])
    ]


def bin_fd_points(
    points: Iterable[FDPoint],
    bin_width: float = DEFAULT_BIN_WIDTH,
    velocity: str = "greenshields",
) -> list[FDBin]:
    if bin_width <= 0.0:
        raise ValueError(f"bin width must be positive, got {bin_width}")
    law = velocity_law(velocity)
    grouped: dict[int, list[FDPoint]] = defaultdict(list)
    for point in points:
        grouped[int(np.floor(point.mean_rho / bin_width))].append(point)

    bins = []
    for index in sorted(grouped):
        members = grouped[index]
        density = np.array([p.mean_rho for p in members])
        flux = np.array([p.mean_flux for p in members])
        residual = flux - density * law.value(density)
        bins.append(
            FDBin(
                lower=index * bin_width,
                upper=(index + 1) * bin_width,
                count=len(members),
                flux_min=float(flux.min()),
                flux_max=float(flux.max()),
                spread=float(flux.max() - flux.min()),
                detrended_spread=float(residual.max() - residual.min()),
                mean_var_rho=float(np.mean([p.var_rho for p in members])),
                mean_var_flux=float(np.mean([p.var_flux for p in members])),
            )
        )
    return bins


@dataclass(frozen=True)
class DiagramShape:
    """Scatter of a binned diagram, measured on the detrended spread."""

    free_flow_spread: float
    transition_spread: float
    spread_ratio: float | None
    congested_bins: int
    congested_bins_with_variance: int
    # flux variance below density variance in every congested bin with variance
    congested_flux_below_density: bool
    transition_dominates: bool
    free_flow_near_zero: bool

    @property
    def passed(self) -> bool:
        return (
            self.transition_dominates
            and self.free_flow_near_zero
            and self.congested_bins_with_variance > 0
            and self.congested_flux_below_density
        )

    def to_dict(self) -> dict[str, Any]:
        return {**asdict(self), "passed": self.passed}


def diagram_shape(bins: Sequence[FDBin]) -> DiagramShape:
    free = [item for item in bins if item.upper <= FREE_FLOW_LIMIT + _EDGE_TOL]
    low, high = TRANSITION_RANGE
    transition = [item for item in bins if item.upper > low and item.lower < high]
    congested = [item for item in bins if item.lower >= CONGESTED_LIMIT - _EDGE_TOL]
    varying = [item for item in congested if item.mean_var_rho > VARIANCE_FLOOR]

    free_spread = max((item.detrended_spread for item in free), default=0.0)
    transition_spread = max((item.detrended_spread for item in transition), default=0.0)
    shape = DiagramShape(
        free_flow_spread=free_spread,
        transition_spread=transition_spread,
        spread_ratio=transition_spread / free_spread if free_spread > 0.0 else None,
        congested_bins=len(congested),
        congested_bins_with_variance=len(varying),
        congested_flux_below_density=all(
            item.mean_var_flux < item.mean_var_rho for item in varying
        ),
        transition_dominates=transition_spread > 0.0
        and transition_spread >= SPREAD_RATIO * free_spread,
        free_flow_near_zero=free_spread <= FREE_FLOW_SPREAD_TOL,
    )
    logger.info(
        "diagram shape: free-flow spread %.3e, transition spread %.3e, passed=%s",
        free_spread,
        transition_spread,
        shape.passed,
    )
    return shape


def scan_one(
    grid: MacroGrid,
    model: MacroModel,
    tensor: TripleProductTensor,
    data: RiemannData,
    rho_r: float,
    run_id: int,
) -> list[FDPoint]:
    """Solve one right state of the sweep to the final time; points of the final snapshot."""
    run = run_macro(grid, model, tensor, RiemannData(data.u1, data.u2, rho_r, data.discontinuity))
    return fd_points(run.snapshots[-1], grid.x_centers, tensor, run_id, rho_r)


@dataclass(frozen=True)
class FDScan:
    points: list[FDPoint]
    bins: list[FDBin]
    bin_width: float
    shape: DiagramShape


def fd_scan(
    grid: MacroGrid,
    model: MacroModel,
    tensor: TripleProductTensor,
    data: RiemannData,
    rho_r_list: Sequence[float],
    bin_width: float = DEFAULT_BIN_WIDTH,
) -> FDScan:
    if model.kind != "lwr":
        raise ValueError("the fundamental-diagram scan runs the LWR model")
    points: list[FDPoint] = []
    for run_id, rho_r in enumerate(rho_r_list):
        points.extend(scan_one(grid, model, tensor, data, rho_r, run_id))
    logger.info("fundamental-diagram scan: %d runs, %d points", len(rho_r_list), len(points))
    bins = bin_fd_points(points, bin_width, model.velocity)
    return FDScan(points, bins, bin_width, diagram_shape(bins))


def write_fd_svg(points: Sequence[FDPoint], path: Path) -> Path:
    """Scatter of mean flux against mean density, for a quick look at the cloud."""
    import matplotlib

    matplotlib.use("Agg")
    from matplotlib import pyplot as plt

    # fixed salt and no date: repeated runs write identical files
    with matplotlib.rc_context({"svg.hashsalt": "sg-traffic"}):
        figure, axes = plt.subplots(figsize=(5.0, 4.0))
        axes.scatter(
            [p.mean_rho for p in points],
            [p.mean_flux for p in points],
            s=2,
            c=[p.var_rho for p in points],
            cmap="viridis",
        )
        axes.set_xlabel("mean density")
        axes.set_ylabel("mean flux")
        axes.set_xlim(0.0, 1.0)
        figure.tight_layout()
        figure.savefig(path, format="svg", metadata={"Date": None})
        plt.close(figure)
    return path
