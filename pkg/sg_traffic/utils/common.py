"""Common helpers: runtime environment, the run context handed to tools, snapshot schedules."""

import asyncio
import os
from collections.abc import Callable, Iterable
from concurrent.futures import Executor
from dataclasses import dataclass
from typing import Any, TypeVar

from dotenv import load_dotenv

from sg_traffic.utils.output import OutputCollector

T = TypeVar("T")

_DEFAULT_OUT = "out"
_DEFAULT_WORKERS = 1
_DEFAULT_LOG_LEVEL = "INFO"


@dataclass(frozen=True)
class RuntimeEnv:
    out_dir: str | None
    workers: int
    log_level: str


def read_runtime_env(strict: bool = False) -> RuntimeEnv:
    """Read SG_TRAFFIC_OUT, SG_TRAFFIC_WORKERS and SG_TRAFFIC_LOG_LEVEL from environment or .env.

    If ``strict`` is True, raises RuntimeError when SG_TRAFFIC_WORKERS is not a positive
    integer. Otherwise an unusable value falls back to a single worker.
    """
    names = ("SG_TRAFFIC_OUT", "SG_TRAFFIC_WORKERS", "SG_TRAFFIC_LOG_LEVEL")
    if not all(os.environ.get(name, "").strip() for name in names):
        load_dotenv()
    out_dir = os.environ.get("SG_TRAFFIC_OUT", "").strip() or None
    raw_workers = os.environ.get("SG_TRAFFIC_WORKERS", "").strip()
    log_level = os.environ.get("SG_TRAFFIC_LOG_LEVEL", "").strip().upper() or _DEFAULT_LOG_LEVEL

    workers = _DEFAULT_WORKERS
    if raw_workers:
        try:
            workers = int(raw_workers)
        except ValueError:
            workers = 0
        if workers < 1:
            if strict:
                raise RuntimeError("SG_TRAFFIC_WORKERS must be a positive integer")
            workers = _DEFAULT_WORKERS
    return RuntimeEnv(out_dir=out_dir, workers=workers, log_level=log_level)


def default_out_dir(configured: str | None) -> str:
    """Resolve the output directory: environment first, then the config file, then ``out``."""
    env = read_runtime_env()
    return env.out_dir or configured or _DEFAULT_OUT


def snapshot_schedule(
    times: Iterable[float] | None, t_final: float, start: float = 0.0
) -> list[float]:
    """Sorted distinct snapshot times within [start, t_final], always ending at ``t_final``."""
    schedule = sorted({float(t) for t in (times or ()) if start <= t <= t_final})
    if not schedule or schedule[-1] != t_final:
        schedule.append(float(t_final))
    return schedule


class RunContext:
    """What a subcommand handler gets: the worker pool, the output collector and the seed."""

    def __init__(
        self, executor: Executor, collector: OutputCollector, seed: int | None, workers: int
    ):
        self.executor = executor
        self.collector = collector
        self.seed = seed
        self.workers = workers

    async def run(self, fn: Callable[..., T], *args: Any) -> T:
        loop = asyncio.get_running_loop()
        return await loop.run_in_executor(self.executor, fn, *args)

    async def map(self, fn: Callable[..., T], cases: Iterable[tuple[Any, ...]]) -> list[T]:
        """Run ``fn(*case)`` for every case in the pool; results keep the order of ``cases``."""
        return list(await asyncio.gather(*(self.run(fn, *case) for case in cases)))
