"""
Run configuration: a JSON file merged over DEFAULT_CONFIG, then CLI overrides.
"""

import json
import logging
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

from .errors import ConfigError
from .indices import DIRECTIONS, JOIN_MODES, GLOBAL_INTERSECTION, IndexSpec

logger = logging.getLogger(__name__)

CONFIG_FILE = "anthem_config.json"
FORMATS = ("csv", "json", "svg")
K_MAX_RANGE = (3, 20)

DEFAULT_CONFIG = {
    "corpus_dir": "anthems",
    "indices": [],
    "output_dir": "anthem_analysis_output",
    "seed": None,            # required, no wall-clock seeding
    "k_max": 10,
    "join_mode": GLOBAL_INTERSECTION,
    "formats": list(FORMATS),
    "n_jobs": 1,
    "max_iter": 300,
}


@dataclass
class RunConfig:
    corpus_dir: str
    index_specs: List[IndexSpec]
    output_dir: str
    seed: Optional[int]
    k_max: int = 10
    join_mode: str = GLOBAL_INTERSECTION
    formats: List[str] = field(default_factory=lambda: list(FORMATS))
    n_jobs: int = 1
    max_iter: int = 300

    def validate(self) -> "RunConfig":
        problems = []
        if self.seed is None:
            problems.append("seed: must be set explicitly (config file or --seed)")
        elif not isinstance(self.seed, int) or isinstance(self.seed, bool) or self.seed < 0:
            problems.append(f"seed: must be a non-negative integer, got {self.seed!r}")
        if not isinstance(self.k_max, int) or not K_MAX_RANGE[0] <= self.k_max <= K_MAX_RANGE[1]:
            problems.append(f"k_max: must be an integer in [{K_MAX_RANGE[0]}, {K_MAX_RANGE[1]}], got {self.k_max!r}")
        if self.join_mode not in JOIN_MODES:
            problems.append(f"join_mode: must be one of {list(JOIN_MODES)}, got {self.join_mode!r}")
        unknown = [f for f in self.formats if f not in FORMATS]
        if unknown or not self.formats:
            problems.append(f"formats: must be a non-empty subset of {list(FORMATS)}, got {self.formats!r}")
        if not isinstance(self.n_jobs, int) or self.n_jobs == 0:
            problems.append(f"n_jobs: must be a non-zero integer, got {self.n_jobs!r}")
        if not isinstance(self.max_iter, int) or self.max_iter < 1:
            problems.append(f"max_iter: must be a positive integer, got {self.max_iter!r}")
        if not self.corpus_dir:
            problems.append("corpus_dir: missing")

        names = [spec.name for spec in self.index_specs]
        if len(set(names)) != len(names):
            problems.append(f"indices: duplicate names {names}")
        for spec in self.index_specs:
            if not spec.name:
                problems.append("indices: every entry needs a name")
            if spec.direction not in DIRECTIONS:
                problems.append(f"indices[{spec.name}].direction: must be one of {list(DIRECTIONS)}")
            if not spec.path:
                problems.append(f"indices[{spec.name}].path: missing")

        if problems:
            raise ConfigError("invalid configuration:\n  " + "\n  ".join(problems))
        return self

    def echo(self) -> Dict[str, Any]:
        """JSON-safe copy for the run manifest."""
        data = asdict(self)
        data["index_specs"] = [asdict(spec) for spec in self.index_specs]
        return data

    def wants(self, fmt: str) -> bool:
        return fmt in self.formats


def _index_spec(entry: Dict[str, Any], base_dir: Path) -> IndexSpec:
    if not isinstance(entry, dict):
        raise ConfigError(f"indices: expected an object per index, got {entry!r}")
    path = entry.get("path")
    if path and not os.path.isabs(path):
        path = str(base_dir / path)
    return IndexSpec(
        name=entry.get("name", ""),
        direction=entry.get("direction", ""),
        country_column=entry.get("country_column", 0),
        score_column=entry.get("score_column", 1),
        rank_column=entry.get("rank_column"),
        path=path,
    )


def load_config(path: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    """Read the JSON config (if any), fill missing keys from DEFAULT_CONFIG, apply overrides."""
    config = dict(DEFAULT_CONFIG)
    base_dir = Path.cwd()
    if path:
        config_path = Path(path)
        if not config_path.exists():
            raise ConfigError(f"config file not found: {config_path}")
        try:
            with open(config_path, "r", encoding="utf-8") as f:
                loaded = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"config file {config_path} is not valid JSON: {e}")
        unknown = sorted(set(loaded) - set(DEFAULT_CONFIG))
        if unknown:
            logger.warning(f"Ignoring unknown config keys: {unknown}")
        config.update({k: v for k, v in loaded.items() if k in DEFAULT_CONFIG})
        base_dir = config_path.resolve().parent
        for key in ("corpus_dir", "output_dir"):
            if key in loaded and not os.path.isabs(loaded[key]):
                config[key] = str(base_dir / loaded[key])

    for key, value in (overrides or {}).items():
        if value is not None:
            config[key] = value

    run_config = RunConfig(
        corpus_dir=config["corpus_dir"],
        index_specs=[_index_spec(entry, base_dir) for entry in config["indices"]],
        output_dir=config["output_dir"],
        seed=config["seed"],
        k_max=config["k_max"],
        join_mode=config["join_mode"],
        formats=list(dict.fromkeys(config["formats"])),
        n_jobs=config["n_jobs"],
        max_iter=config["max_iter"],
    )
    return run_config.validate()
