"""Runtime environment, snapshot schedules and the run context."""

from __future__ import annotations

import pytest

from sg_traffic.utils.common import (
    RunContext,
    default_out_dir,
    read_runtime_env,
    snapshot_schedule,
)
from sg_traffic.utils.output import OutputCollector, format_value


@pytest.fixture()
def clean_env(monkeypatch):
    for name in ("SG_TRAFFIC_OUT", "SG_TRAFFIC_WORKERS", "SG_TRAFFIC_LOG_LEVEL"):
        monkeypatch.delenv(name, raising=False)
    monkeypatch.setattr("sg_traffic.utils.common.load_dotenv", lambda: False)
    return monkeypatch


def test_runtime_env_defaults(clean_env):
    env = read_runtime_env()
    assert (env.out_dir, env.workers, env.log_level) == (None, 1, "INFO")


def test_runtime_env_reads_variables(clean_env):
    clean_env.setenv("SG_TRAFFIC_OUT", "results")
    clean_env.setenv("SG_TRAFFIC_WORKERS", "4")
    clean_env.setenv("SG_TRAFFIC_LOG_LEVEL", "debug")
    env = read_runtime_env()
    assert (env.out_dir, env.workers, env.log_level) == ("results", 4, "DEBUG")


def test_unusable_worker_count(clean_env):
    clean_env.setenv("SG_TRAFFIC_WORKERS", "zero")
    assert read_runtime_env().workers == 1
    with pytest.raises(RuntimeError, match="positive integer"):
        read_runtime_env(strict=True)


def test_output_directory_precedence(clean_env):
    assert default_out_dir(None) == "out"
    assert default_out_dir("from-config") == "from-config"
    clean_env.setenv("SG_TRAFFIC_OUT", "from-env")
    assert default_out_dir("from-config") == "from-env"


def test_snapshot_schedule():
    assert snapshot_schedule([0.5, 0.1, 0.5, 2.0], 1.0) == [0.1, 0.5, 1.0]
    assert snapshot_schedule(None, 1.0) == [1.0]
    assert snapshot_schedule([0.0, 1.0], 1.0) == [0.0, 1.0]


def test_float_format_round_trips():
    assert float(format_value(0.1 + 0.2)) == 0.1 + 0.2
    assert format_value(3) == "3"


async def test_map_keeps_case_order(run_context: RunContext):
    results = await run_context.map(pow, [(2, k) for k in range(8)])
    assert results == [2**k for k in range(8)]


async def test_run_forwards_exceptions(run_context: RunContext):
    with pytest.raises(ZeroDivisionError):
        await run_context.run(divmod, 1, 0)


def test_collector_remembers_files(tmp_path):
    collector = OutputCollector(tmp_path / "nested")
    collector.write_json("a.json", {"x": 1})
    collector.write_csv("b.csv", ["x"], [[0.5]])
    collector.write_csv("b.csv", ["x"], [[0.25]])
    assert collector.files == ["a.json", "b.csv"]
    assert (tmp_path / "nested" / "b.csv").read_text(encoding="utf-8") == "x\n0.25\n"
