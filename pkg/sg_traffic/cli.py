import argparse
import asyncio
import sys
from collections.abc import AsyncIterator, Awaitable, Callable, Sequence
from concurrent.futures import Executor, ProcessPoolExecutor
from contextlib import asynccontextmanager
from logging import basicConfig, getLogger
from typing import Any

from sg_traffic.defaults import BASELINE_CONFIG, FD_SCAN_CONFIG, MC_COMPARE_CONFIG
from sg_traffic.tools import basis_check as basis_check_tool
from sg_traffic.tools import fd_scan as fd_scan_tool
from sg_traffic.tools import kinetic as kinetic_tool
from sg_traffic.tools import macro as macro_tool
from sg_traffic.tools import mc_compare as mc_compare_tool
from sg_traffic.tools import meso2macro as meso2macro_tool
from sg_traffic.tools import micro as micro_tool
from sg_traffic.tools import micro2macro as micro2macro_tool
from sg_traffic.utils.common import RunContext, default_out_dir, read_runtime_env
from sg_traffic.utils.config import ExperimentConfig, load_config, parse_config
from sg_traffic.utils.error import BasisError, ConfigError, NumericalError
from sg_traffic.utils.output import OutputCollector, dumps_result

logger = getLogger(__name__)

Handler = Callable[[RunContext, ExperimentConfig], Awaitable[dict[str, Any]]]

HANDLERS: dict[str, Handler] = {
    "basis-check": basis_check_tool.handle,
    "micro": micro_tool.handle,
    "kinetic": kinetic_tool.handle,
    "macro": macro_tool.handle,
    "fd-scan": fd_scan_tool.handle,
    "mc-compare": mc_compare_tool.handle,
    "micro2macro": micro2macro_tool.handle,
    "meso2macro": meso2macro_tool.handle,
}
SUBCOMMANDS = tuple(HANDLERS)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

_BUILTIN_CONFIGS = {"fd-scan": FD_SCAN_CONFIG, "mc-compare": MC_COMPARE_CONFIG}


def configure_logging(level: str) -> None:
    basicConfig(
        level=level.upper(),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        stream=sys.stderr,
    )


def _seed(raw: str) -> int:
    value = int(raw)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {raw}")
    return value


def _workers(raw: str) -> int:
    value = int(raw)
    if value < 1:
        raise argparse.ArgumentTypeError(f"workers must be a positive integer, got {raw}")
    return value


def parse_args(argv: Sequence[str] | None = None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(
        prog="sg-traffic", description="Stochastic Galerkin traffic flow experiments"
    )
    subparsers = parser.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        sub = subparsers.add_parser(name)
        sub.add_argument(
            "--config",
            dest="config",
            default=None,
            help="Experiment configuration file (default: the built-in reference Riemann test)",
        )
        sub.add_argument(
            "--out",
            dest="out",
            default=None,
            help="Output directory (overrides SG_TRAFFIC_OUT and output.directory)",
        )
        sub.add_argument(
            "--workers",
            dest="workers",
            type=_workers,
            default=None,
            help="Worker processes for independent runs (overrides SG_TRAFFIC_WORKERS)",
        )
        sub.add_argument(
            "--seed",
            dest="seed",
            type=_seed,
            default=None,
            help="Random seed (overrides experiment.seed)",
        )
        sub.add_argument(
            "--log-level",
            dest="log_level",
            default=None,
            choices=["DEBUG", "INFO", "WARNING", "ERROR"],
            help="Logging level (overrides SG_TRAFFIC_LOG_LEVEL)",
        )
    return parser.parse_args(argv)


def resolve_config(subcommand: str, path: str | None) -> ExperimentConfig:
    if path is not None:
        return load_config(path)
    return parse_config(_BUILTIN_CONFIGS.get(subcommand, BASELINE_CONFIG))


@asynccontextmanager
async def run_lifespan(
    out_dir: str, seed: int | None, workers: int, executor: Executor | None = None
) -> AsyncIterator[RunContext]:
    """Owns the worker pool for the duration of one subcommand."""
    owned = executor is None
    pool = executor if executor is not None else ProcessPoolExecutor(max_workers=workers)
    try:
        yield RunContext(pool, OutputCollector(out_dir), seed, workers)
    finally:
        if owned:
            pool.shutdown(wait=True, cancel_futures=True)


async def run_subcommand(
    subcommand: str,
    config: ExperimentConfig,
    out_dir: str,
    seed: int | None,
    workers: int,
    executor: Executor | None = None,
) -> dict[str, Any]:
    async with run_lifespan(out_dir, seed, workers, executor) as context:
        result = await HANDLERS[subcommand](context, config)
        effective_seed = seed if seed is not None else config.experiment.seed
        context.collector.write_manifest(subcommand, config.text, effective_seed)
    return result


def _failure(error: Exception) -> str:
    return dumps_result({"success": False, "error": str(error)})


def main(argv: Sequence[str] | None = None) -> int:
    args = parse_args(argv)
    env = read_runtime_env()
    configure_logging(args.log_level or env.log_level)

    try:
        config = resolve_config(args.subcommand, args.config)
        out_dir = args.out or default_out_dir(config.output.directory)
        workers = args.workers or env.workers
        logger.info("%s: output in %s, %d worker(s)", args.subcommand, out_dir, workers)
        result = asyncio.run(
            run_subcommand(args.subcommand, config, out_dir, args.seed, workers)
        )
    except (ConfigError, BasisError) as error:
        logger.error("configuration rejected: %s", error)
        print(_failure(error))
        return EXIT_CONFIG
    except NumericalError as error:
        logger.error("numerical failure: %s", error)
        print(_failure(error))
        return EXIT_NUMERICAL

    print(dumps_result({"success": True, "subcommand": args.subcommand, "result": result}))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
