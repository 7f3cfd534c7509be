"""Shared fixtures: bases, tensors and a run context backed by a thread pool."""

from __future__ import annotations

from collections.abc import Iterator
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import pytest

from sg_traffic.chaos.basis import BasisSpec
from sg_traffic.chaos.galerkin import TripleProductTensor, build_tensor
from sg_traffic.utils.common import RunContext
from sg_traffic.utils.config import ExperimentConfig, parse_config
from sg_traffic.utils.output import OutputCollector

# ---------------------------------------------------------------------------
# Expected subcommand names (must match HANDLERS in sg_traffic/cli.py).
# ---------------------------------------------------------------------------

EXPECTED_SUBCOMMANDS: set[str] = {
    "basis-check",
    "micro",
    "kinetic",
    "macro",
    "fd-scan",
    "mc-compare",
    "micro2macro",
    "meso2macro",
}

# A coarse version of the reference Riemann test, fast enough for every tool test.
SMALL_CONFIG = """
basis.family = haar
basis.K = 3

model.type = lwr

grid.a = 0
grid.b = 2
grid.N_x = 40
grid.T_f = 0.2

initial.kind = riemann
initial.u1 = 0.75
initial.u2 = 0.95
initial.rho_r = 0.2

output.snapshot_times = 0.1
"""


def small_config(extra: str = "", **replacements: str) -> ExperimentConfig:
    """SMALL_CONFIG with ``key = value`` lines replaced (keys written with ``__`` for ``.``)."""
    lines = []
    for line in SMALL_CONFIG.splitlines():
        key = line.split("=", 1)[0].strip().replace(".", "__")
        if key in replacements:
            line = f"{key.replace('__', '.')} = {replacements.pop(key)}"
        lines.append(line)
    lines.extend(f"{key.replace('__', '.')} = {value}" for key, value in replacements.items())
    return parse_config("\n".join(lines) + "\n" + extra)


# ---------------------------------------------------------------------------
# Bases and tensors
# ---------------------------------------------------------------------------


@pytest.fixture(scope="session")
def haar0() -> TripleProductTensor:
    return build_tensor(BasisSpec("haar", 0))


@pytest.fixture(scope="session")
def haar1() -> TripleProductTensor:
    return build_tensor(BasisSpec("haar", 1))


@pytest.fixture(scope="session")
def haar3() -> TripleProductTensor:
    return build_tensor(BasisSpec("haar", 3))


@pytest.fixture(scope="session")
def haar15() -> TripleProductTensor:
    return build_tensor(BasisSpec("haar", 15))


@pytest.fixture(scope="session")
def legendre3() -> TripleProductTensor:
    return build_tensor(BasisSpec("legendre", 3))


# ---------------------------------------------------------------------------
# Run context
# ---------------------------------------------------------------------------


@pytest.fixture()
def out_dir(tmp_path: Path) -> Path:
    return tmp_path / "out"


@pytest.fixture()
def run_context(out_dir: Path) -> Iterator[RunContext]:
    """A RunContext over a thread pool, writing below a temporary directory."""
    with ThreadPoolExecutor(max_workers=2) as executor:
        yield RunContext(executor, OutputCollector(out_dir), seed=7, workers=2)
