"""Single writer for every artifact of a run, plus the reproducibility manifest."""

from __future__ import annotations

import csv
import hashlib
import json
import platform
from collections.abc import Iterable, Sequence
from importlib import metadata
from logging import getLogger
from pathlib import Path
from typing import Any

import numpy as np

logger = getLogger(__name__)

FLOAT_FORMAT = ".17g"
_VERSIONED_PACKAGES = ("sg-traffic", "numpy", "scipy")


def format_value(value: Any) -> str:
    if isinstance(value, float | np.floating):
        return format(float(value), FLOAT_FORMAT)
    if isinstance(value, np.integer):
        return str(int(value))
    return str(value)


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, list | tuple):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.integer | np.bool_):
        return value.item()
    return value


def package_versions() -> dict[str, str]:
    versions = {"python": platform.python_version()}
    for name in _VERSIONED_PACKAGES:
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = "unknown"
    return versions


class OutputCollector:
    """Writes CSV, JSON and SVG files below one directory and remembers what it wrote."""

    def __init__(self, out_dir: str | Path):
        self.out_dir = Path(out_dir)
        self.files: list[str] = []

    def path(self, name: str) -> Path:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        target = self.out_dir / name
        if name not in self.files:
            self.files.append(name)
        return target

    def write_csv(
        self, name: str, header: Sequence[str], rows: Iterable[Sequence[Any]]
    ) -> Path:
        target = self.path(name)
        with target.open("w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([format_value(v) for v in row])
        logger.info("wrote %s", target)
        return target

    def write_json(self, name: str, payload: Any) -> Path:
        target = self.path(name)
        target.write_text(json.dumps(_jsonable(payload), indent=2) + "\n", encoding="utf-8")
        logger.info("wrote %s", target)
        return target

    def write_manifest(self, subcommand: str, config_text: str, seed: int | None) -> Path:
        """Config hash, package versions and seed; no timestamps, so reruns match byte for byte."""
        manifest = {
            "subcommand": subcommand,
            "config_sha256": hashlib.sha256(config_text.encode("utf-8")).hexdigest(),
            "seed": seed,
            "versions": package_versions(),
            "files": sorted(self.files),
        }
        return self.write_json("manifest.json", manifest)


def dumps_result(payload: Any) -> str:
    """JSON text printed on stdout by every subcommand."""
    return json.dumps(_jsonable(payload), indent=2)
