"""Experiment configuration files.

A configuration is line oriented::

    # comment
    basis.family = haar
    basis.K = 15
    experiment.rho_r_list = 0, 0.05, 0.1

Every key belongs to one section (basis, model, grid, initial, output, experiment). Parsing
never stops at the first problem: all line-numbered diagnostics are collected and raised
together in a ConfigError.
"""

from __future__ import annotations

import math
from collections.abc import Callable
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from sg_traffic import defaults
from sg_traffic.chaos.basis import FAMILIES, BasisSpec, resolve_quadrature
from sg_traffic.closures import HESITATIONS, SPEED_LAWS, VELOCITY_LAWS
from sg_traffic.initial import RiemannData
from sg_traffic.models.kinetic import KINETIC_CFL_LIMIT, KineticGrid
from sg_traffic.models.macro import MacroGrid, MacroModel
from sg_traffic.models.micro import SPEED_INPUTS, MicroParams
from sg_traffic.utils.error import BasisError, ConfigError

MODEL_TYPES = ("micro", "kinetic", "lwr", "arz")
EXPERIMENT_KINDS = ("none", "fdscan", "mccompare", "micro2macro", "meso2macro")
EXPERIMENT_MODELS: dict[str, tuple[str, ...]] = {
    "none": MODEL_TYPES,
    "fdscan": ("lwr",),
    "mccompare": ("lwr", "arz", "micro"),
    "micro2macro": ("micro",),
    "meso2macro": ("kinetic",),
}
OUTPUT_FORMATS = ("csv", "json", "svg")
DEFAULT_KINETIC_EPSILON = 1e-2


@dataclass(frozen=True)
class BasisSection:
    family: str = defaults.BASELINE_FAMILY
    order: int = defaults.BASELINE_ORDER
    quadrature: int | None = None

    def spec(self) -> BasisSpec:
        return BasisSpec(self.family, self.order, self.quadrature)


@dataclass(frozen=True)
class ModelSection:
    type: str = "lwr"
    velocity: str = "greenshields"
    hesitation: str = "linear"
    speed_law: str = "greenshields"
    speed_input: str = "density"
    epsilon: float | None = None
    order: int = 1
    n_vehicles: int = 100
    car_length: float | None = None
    leader_speed: float | None = None
    leader_accel: float = 0.0
    relative_gain: float = 1.0
    relaxation_gain: float = 1.0
    reaction_time: float = 1.0
    perception_noise: float = 0.0
    dt: float = 1e-3


@dataclass(frozen=True)
class GridSection:
    a: float = defaults.BASELINE_INTERVAL[0]
    b: float = defaults.BASELINE_INTERVAL[1]
    n_cells: int = defaults.BASELINE_CELLS
    cfl: float = 0.45
    t_final: float = defaults.BASELINE_FINAL_TIME
    boundary: str = "outflow"
    n_velocities: int = 40
    w_max: float | None = None
    equilibrium_width: float | None = None


@dataclass(frozen=True)
class InitialSection:
    kind: str = "riemann"
    u1: float = defaults.BASELINE_LEFT_LAW[0]
    u2: float = defaults.BASELINE_LEFT_LAW[1]
    rho_r: float = defaults.BASELINE_RIGHT_STATE
    discontinuity: float = defaults.BASELINE_DISCONTINUITY
    spacing: float = 1.0
    headway_noise: float = 0.0


@dataclass(frozen=True)
class OutputSection:
    directory: str | None = None
    snapshot_times: tuple[float, ...] = ()
    formats: tuple[str, ...] = ("csv", "json")
    full_field: bool = False
    tensor_csv: bool = False


@dataclass(frozen=True)
class ExperimentSection:
    kind: str = "none"
    n_list: tuple[int, ...] = defaults.VEHICLE_COUNTS
    eps_list: tuple[float, ...] = defaults.RELAXATION_TIMES
    rho_r_list: tuple[float, ...] = defaults.RIGHT_STATE_SWEEP
    k_list: tuple[int, ...] = ()
    samples: int = 1000
    seed: int = 0
    reference_nodes: int = 256
    atol: float = 5e-3
    bin_width: float = 0.02


@dataclass(frozen=True)
class ExperimentConfig:
    basis: BasisSection = field(default_factory=BasisSection)
    model: ModelSection = field(default_factory=ModelSection)
    grid: GridSection = field(default_factory=GridSection)
    initial: InitialSection = field(default_factory=InitialSection)
    output: OutputSection = field(default_factory=OutputSection)
    experiment: ExperimentSection = field(default_factory=ExperimentSection)
    text: str = field(default="", repr=False)

    def riemann(self) -> RiemannData:
        initial = self.initial
        return RiemannData(initial.u1, initial.u2, initial.rho_r, initial.discontinuity)

    def macro_grid(self, boundary: str | None = None) -> MacroGrid:
        grid = self.grid
        return MacroGrid(
            grid.a, grid.b, grid.n_cells, grid.t_final, grid.cfl, boundary or grid.boundary
        )

    def macro_model(self, kind: str | None = None, epsilon: float | None = None) -> MacroModel:
        model = self.model
        chosen = kind or model.type
        relaxation = epsilon if epsilon is not None else model.epsilon
        return MacroModel(
            kind=chosen,
            velocity=model.velocity,
            hesitation=model.hesitation,
            epsilon=relaxation if chosen == "arz" else None,
        )

    def kinetic_grid(self, epsilon: float | None = None) -> KineticGrid:
        grid, model = self.grid, self.model
        relaxation = epsilon if epsilon is not None else model.epsilon
        return KineticGrid(
            a=grid.a,
            b=grid.b,
            n_cells=grid.n_cells,
            n_velocities=grid.n_velocities,
            epsilon=relaxation if relaxation is not None else DEFAULT_KINETIC_EPSILON,
            w_max=grid.w_max,
            hesitation=model.hesitation,
            velocity=model.velocity,
            equilibrium_width=grid.equilibrium_width,
            boundary=grid.boundary,
        )

    def micro_params(self, n_vehicles: int | None = None) -> MicroParams:
        model = self.model
        count = n_vehicles or model.n_vehicles
        car_length = 1.0 / count
        if n_vehicles is None and model.car_length is not None:
            car_length = model.car_length
        return MicroParams(
            n_vehicles=count,
            car_length=car_length,
            speed_law=model.speed_law,
            speed_input=model.speed_input,
            leader_speed=model.leader_speed if model.leader_speed is not None else 1.0,
            leader_accel=model.leader_accel,
            relative_gain=model.relative_gain,
            relaxation_gain=model.relaxation_gain,
            reaction_time=model.reaction_time,
            perception_noise=model.perception_noise,
        )


Parser = Callable[[str], Any]
Check = Callable[[Any], str | None]


@dataclass(frozen=True)
class _Key:
    attribute: str
    parse: Parser
    check: Check | None = None


def _parse_int(raw: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ValueError(f"expected an integer, got {raw!r}") from None


def _parse_float(raw: str) -> float:
    try:
        value = float(raw)
    except ValueError:
        raise ValueError(f"expected a number, got {raw!r}") from None
    if not math.isfinite(value):
        raise ValueError(f"expected a finite number, got {raw!r}")
    return value


def _optional(parse: Parser) -> Parser:
    def parse_optional(raw: str) -> Any:
        return None if raw.lower() in ("none", "auto") else parse(raw)

    return parse_optional


def _choice(options: tuple[str, ...] | list[str]) -> Parser:
    def parse_choice(raw: str) -> str:
        if raw not in options:
            raise ValueError(f"expected one of {list(options)}, got {raw!r}")
        return raw

    return parse_choice


def _parse_bool(raw: str) -> bool:
    lowered = raw.lower()
    if lowered in ("true", "yes", "1", "on"):
        return True
    if lowered in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"expected a boolean, got {raw!r}")


def _list_of(parse: Parser) -> Parser:
    def parse_list(raw: str) -> tuple[Any, ...]:
        items = [item.strip() for item in raw.split(",") if item.strip()]
        return tuple(parse(item) for item in items)

    return parse_list


def _at_least(bound: float) -> Check:
    def check(value: Any) -> str | None:
        if value is None:
            return None
        values = value if isinstance(value, tuple) else (value,)
        if any(v < bound for v in values):
            return f"must be >= {bound:g}, got {value}"
        return None

    return check


def _positive(value: Any) -> str | None:
    if value is None:
        return None
    values = value if isinstance(value, tuple) else (value,)
    if any(v <= 0 for v in values):
        return f"must be positive, got {value}"
    return None


def _unit_interval(value: Any) -> str | None:
    values = value if isinstance(value, tuple) else (value,)
    if any(not 0.0 <= v <= 1.0 for v in values):
        return f"must lie in [0, 1], got {value}"
    return None


def _cfl(value: Any) -> str | None:
    return None if 0.0 < value <= 1.0 else f"must lie in (0, 1], got {value}"


def _dynamics_order(value: Any) -> str | None:
    return None if value in (1, 2) else f"must be 1 or 2, got {value}"


def _formats(value: Any) -> str | None:
    unknown = [item for item in value if item not in OUTPUT_FORMATS]
    return f"unknown formats {unknown}; expected {list(OUTPUT_FORMATS)}" if unknown else None


_SCHEMA: dict[str, dict[str, _Key]] = {
    "basis": {
        "family": _Key("family", _choice(FAMILIES)),
        "K": _Key("order", _parse_int, _at_least(0)),
        "Q": _Key("quadrature", _optional(_parse_int), _positive),
    },
    "model": {
        "type": _Key("type", _choice(MODEL_TYPES)),
        "velocity": _Key("velocity", _choice(sorted(VELOCITY_LAWS))),
        "hesitation": _Key("hesitation", _choice(sorted(HESITATIONS))),
        "speed_law": _Key("speed_law", _choice(sorted(SPEED_LAWS))),
        "speed_input": _Key("speed_input", _choice(SPEED_INPUTS)),
        "epsilon": _Key("epsilon", _optional(_parse_float), _positive),
        "order": _Key("order", _parse_int, _dynamics_order),
        "n_vehicles": _Key("n_vehicles", _parse_int, _at_least(2)),
        "car_length": _Key("car_length", _optional(_parse_float), _positive),
        "leader_speed": _Key("leader_speed", _optional(_parse_float), _at_least(0.0)),
        "leader_accel": _Key("leader_accel", _parse_float),
        "C": _Key("relative_gain", _parse_float, _at_least(0.0)),
        "A": _Key("relaxation_gain", _parse_float, _at_least(0.0)),
        "reaction_time": _Key("reaction_time", _parse_float, _positive),
        "perception_noise": _Key("perception_noise", _parse_float, _at_least(0.0)),
        "dt": _Key("dt", _parse_float, _positive),
    },
    "grid": {
        "a": _Key("a", _parse_float),
        "b": _Key("b", _parse_float),
        "N_x": _Key("n_cells", _parse_int, _at_least(1)),
        "cfl": _Key("cfl", _parse_float, _cfl),
        "T_f": _Key("t_final", _parse_float, _at_least(0.0)),
        "boundary": _Key("boundary", _choice(("outflow", "periodic"))),
        "N_w": _Key("n_velocities", _parse_int, _at_least(1)),
        "w_max": _Key("w_max", _optional(_parse_float), _positive),
        "equilibrium_width": _Key("equilibrium_width", _optional(_parse_float), _at_least(0.0)),
    },
    "initial": {
        "kind": _Key("kind", _choice(("riemann", "platoon"))),
        "u1": _Key("u1", _parse_float, _unit_interval),
        "u2": _Key("u2", _parse_float, _unit_interval),
        "rho_r": _Key("rho_r", _parse_float, _unit_interval),
        "discontinuity": _Key("discontinuity", _parse_float),
        "spacing": _Key("spacing", _parse_float, _positive),
        "headway_noise": _Key("headway_noise", _parse_float, _at_least(0.0)),
    },
    "output": {
        "directory": _Key("directory", str),
        "snapshot_times": _Key("snapshot_times", _list_of(_parse_float), _at_least(0.0)),
        "formats": _Key("formats", _list_of(str), _formats),
        "full_field": _Key("full_field", _parse_bool),
        "tensor_csv": _Key("tensor_csv", _parse_bool),
    },
    "experiment": {
        "kind": _Key("kind", _choice(EXPERIMENT_KINDS)),
        "N_list": _Key("n_list", _list_of(_parse_int), _at_least(2)),
        "eps_list": _Key("eps_list", _list_of(_parse_float), _positive),
        "rho_r_list": _Key("rho_r_list", _list_of(_parse_float), _unit_interval),
        "K_list": _Key("k_list", _list_of(_parse_int), _at_least(0)),
        "M": _Key("samples", _parse_int, _at_least(2)),
        "reference_nodes": _Key("reference_nodes", _parse_int, _at_least(2)),
        "seed": _Key("seed", _parse_int, _at_least(0)),
        "atol": _Key("atol", _parse_float, _positive),
        "bin_width": _Key("bin_width", _parse_float, _positive),
    },
}

_SECTIONS: dict[str, type] = {
    "basis": BasisSection,
    "model": ModelSection,
    "grid": GridSection,
    "initial": InitialSection,
    "output": OutputSection,
    "experiment": ExperimentSection,
}


def _where(lines: dict[str, int], key: str) -> str:
    return f"line {lines[key]}" if key in lines else "default"


def _cross_checks(config: ExperimentConfig, lines: dict[str, int]) -> list[str]:
    problems: list[str] = []
    try:
        resolve_quadrature(config.basis.spec())
    except BasisError as error:
        problems.append(f"{_where(lines, 'basis.K')}: basis.K: {error}")
    for order in config.experiment.k_list:
        try:
            resolve_quadrature(BasisSpec(config.basis.family, order))
        except BasisError as error:
            problems.append(f"{_where(lines, 'experiment.K_list')}: experiment.K_list: {error}")

    grid = config.grid
    if grid.b <= grid.a:
        problems.append(f"{_where(lines, 'grid.b')}: grid.b must exceed grid.a={grid.a:g}")
    if any(t > grid.t_final for t in config.output.snapshot_times):
        problems.append(
            f"{_where(lines, 'output.snapshot_times')}: output.snapshot_times must not exceed "
            f"grid.T_f={grid.t_final:g}"
        )
    if config.model.type == "kinetic" and grid.cfl > KINETIC_CFL_LIMIT:
        problems.append(
            f"{_where(lines, 'grid.cfl')}: kinetic runs need grid.cfl <= {KINETIC_CFL_LIMIT:g}, "
            f"got {grid.cfl:g}"
        )

    experiment = config.experiment
    allowed = EXPERIMENT_MODELS[experiment.kind]
    if config.model.type not in allowed:
        problems.append(
            f"{_where(lines, 'experiment.kind')}: experiment {experiment.kind!r} needs model.type "
            f"in {list(allowed)}, got {config.model.type!r}"
        )
    if list(experiment.n_list) != sorted(experiment.n_list):
        problems.append(f"{_where(lines, 'experiment.N_list')}: experiment.N_list must ascend")
    if list(experiment.eps_list) != sorted(experiment.eps_list, reverse=True):
        problems.append(f"{_where(lines, 'experiment.eps_list')}: experiment.eps_list must descend")
    initial = config.initial
    micro_mc = experiment.kind == "mccompare" and config.model.type == "micro"
    if micro_mc and initial.kind != "platoon":
        problems.append(
            f"{_where(lines, 'initial.kind')}: micro Monte Carlo comparisons start from "
            "initial.kind = platoon"
        )
    needs_density = config.model.type in ("micro", "kinetic") and initial.kind == "riemann"
    if needs_density and min(initial.u1, initial.u2, initial.rho_r) <= 0.0:
        problems.append(
            f"{_where(lines, 'initial.rho_r')}: {config.model.type} runs need a positive "
            "initial density on both sides"
        )
    return problems


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a configuration; raise ConfigError listing every problem."""
    problems: list[str] = []
    values: dict[str, dict[str, Any]] = {name: {} for name in _SECTIONS}
    lines: dict[str, int] = {}

    for number, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            problems.append(f"line {number}: expected 'section.key = value', got {line!r}")
            continue
        name, raw_value = (part.strip() for part in line.split("=", 1))
        section, _, key = name.partition(".")
        schema = _SCHEMA.get(section, {}).get(key)
        if schema is None:
            problems.append(f"line {number}: unknown key {name!r}")
            continue
        if name in lines:
            problems.append(
                f"line {number}: duplicate key {name!r} (first set on line {lines[name]})"
            )
            continue
        lines[name] = number
        try:
            value = schema.parse(raw_value)
        except ValueError as error:
            problems.append(f"line {number}: {name}: {error}")
            continue
        message = schema.check(value) if schema.check is not None else None
        if message is not None:
            problems.append(f"line {number}: {name}: {message}")
            continue
        values[section][schema.attribute] = value

    sections = {name: cls(**values[name]) for name, cls in _SECTIONS.items()}
    config = ExperimentConfig(**sections, text=text)
    problems.extend(_cross_checks(config, lines))
    if problems:
        raise ConfigError(problems)
    return config


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as error:
        raise ConfigError([f"{path}: cannot read configuration: {error.strerror}"]) from error
    return parse_config(text)

