"""
Config - experiment files (TOML or JSON) and process-level settings.

An experiment file has the blocks [scenario], [solver], [sweep], [output]
and [verify]. Each is parsed into a frozen dataclass; a bad field raises
ConfigError naming its path, e.g. "solver.tol: must be > 0".

TOML is read with the stdlib tomllib, so Python 3.11 is the floor.
"""

import hashlib
import json
import logging
import os
import tomllib
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence, Tuple

from stochastic_pf.envpath import EnvironmentPath, Scenario, scenario_from_config
from stochastic_pf.errors import ConfigError

logger = logging.getLogger(__name__)

# Process-level settings
DEFAULT_OUT_DIR = os.environ.get("STOCHASTIC_PF_OUT_DIR", "./runs")
LOG_LEVEL = os.environ.get("STOCHASTIC_PF_LOG_LEVEL", "INFO")
REPORT_FORMATS = ("csv", "json")


def worker_count() -> int:
    raw = os.environ.get("STOCHASTIC_PF_WORKERS")
    if raw:
        try:
            return max(int(raw), 1)
        except ValueError:
            logger.warning(f"Ignoring STOCHASTIC_PF_WORKERS={raw!r}: not an integer")
    return os.cpu_count() or 1


def store_path(out_dir: Path) -> Path:
    """Run-ledger database: STOCHASTIC_PF_STORE, else <out>/runs.db."""
    return Path(os.environ.get("STOCHASTIC_PF_STORE", str(Path(out_dir) / "runs.db")))


# ============================================================================
# Settings blocks
# ============================================================================

@dataclass(frozen=True)
class ScenarioSettings:
    scenario: Scenario
    seed: int = 0

    def environment(self, seed: int, base: int = 0) -> EnvironmentPath:
        return EnvironmentPath(seed, self.scenario, base)


@dataclass(frozen=True)
class SolverSettings:
    tol: float = 1e-8
    max_depth: int = 10_000
    probe_count: int = 8
    confirmation_gap: int = 5
    horizon: int = 1000
    norm_samples: int = 2000
    profile_depths: Optional[Tuple[int, ...]] = None
    strictness_budget: Optional[int] = None


@dataclass(frozen=True)
class SweepSettings:
    seeds: Tuple[int, ...] = (0,)
    base_offsets: Tuple[int, ...] = (0,)


@dataclass(frozen=True)
class VerifySettings:
    samples: int = 1000
    seed: int = 0
    max_l: int = 64
    max_pullback_depth: int = 20
    environments: int = 5


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    scenario: ScenarioSettings
    solver: SolverSettings = field(default_factory=SolverSettings)
    sweep: SweepSettings = field(default_factory=SweepSettings)
    verify: VerifySettings = field(default_factory=VerifySettings)
    out_dir: Path = Path(DEFAULT_OUT_DIR)
    formats: Tuple[str, ...] = REPORT_FORMATS

    def digest(self) -> str:
        """Hash of everything that determines run results (not output location)."""
        payload = {
            "scenario": self.scenario.scenario.describe(),
            "solver": asdict(self.solver),
        }
        blob = json.dumps(payload, sort_keys=True, default=list)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]

    def describe(self) -> dict:
        return {
            "name": self.name,
            "scenario": self.scenario.scenario.describe(),
            "solver": asdict(self.solver),
            "sweep": {"seeds": list(self.sweep.seeds), "base_offsets": list(self.sweep.base_offsets)},
            "formats": list(self.formats),
        }


# ============================================================================
# Parsing
# ============================================================================

def _block(raw: dict, name: str) -> dict:
    value = raw.get(name, {})
    if not isinstance(value, dict):
        raise ConfigError(name, "expected a table/object")
    return value


def _positive_int(block: dict, where: str, key: str, default: int, minimum: int = 1) -> int:
    value = block.get(key, default)
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        raise ConfigError(f"{where}.{key}", f"must be an integer >= {minimum}")
    return value


def _int_list(value, where: str) -> Tuple[int, ...]:
    if not isinstance(value, (list, tuple)) or not value:
        raise ConfigError(where, "must be a non-empty list of integers")
    if not all(isinstance(v, int) and not isinstance(v, bool) for v in value):
        raise ConfigError(where, "must be a non-empty list of integers")
    return tuple(value)


def _solver_settings(block: dict) -> SolverSettings:
    try:
        tol = float(block.get("tol", 1e-8))
    except (TypeError, ValueError):
        raise ConfigError("solver.tol", "must be a number")
    if not tol > 0.0:
        raise ConfigError("solver.tol", "must be > 0")
    depths = block.get("profile_depths")
    if depths is not None:
        depths = _int_list(depths, "solver.profile_depths")
        if min(depths) < 0:
            raise ConfigError("solver.profile_depths", "depths must be >= 0")
    budget = block.get("strictness_budget")
    if budget is not None:
        budget = _positive_int(block, "solver", "strictness_budget", 1)
    return SolverSettings(
        tol=tol,
        max_depth=_positive_int(block, "solver", "max_depth", 10_000),
        probe_count=_positive_int(block, "solver", "probe_count", 8, minimum=0),
        confirmation_gap=_positive_int(block, "solver", "confirmation_gap", 5, minimum=0),
        horizon=_positive_int(block, "solver", "horizon", 1000, minimum=0),
        norm_samples=_positive_int(block, "solver", "norm_samples", 2000, minimum=2),
        profile_depths=depths,
        strictness_budget=budget,
    )


def _sweep_settings(block: dict, first_seed: int) -> SweepSettings:
    if "seeds" in block:
        seeds = _int_list(block["seeds"], "sweep.seeds")
    else:
        count = _positive_int(block, "sweep", "count", 1)
        seeds = tuple(range(first_seed, first_seed + count))
    bases = _int_list(block.get("base_offsets", [0]), "sweep.base_offsets")
    return SweepSettings(seeds, bases)


def _verify_settings(block: dict) -> VerifySettings:
    seed = block.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigError("verify.seed", "must be a non-negative integer")
    return VerifySettings(
        samples=_positive_int(block, "verify", "samples", 1000),
        seed=seed,
        max_l=_positive_int(block, "verify", "max_l", 64),
        max_pullback_depth=_positive_int(block, "verify", "max_pullback_depth", 20),
        environments=_positive_int(block, "verify", "environments", 5),
    )


def _formats(value) -> Tuple[str, ...]:
    if isinstance(value, str):
        value = [value]
    if not isinstance(value, (list, tuple)) or not value or any(v not in REPORT_FORMATS for v in value):
        raise ConfigError("output.formats", f"must be a subset of {list(REPORT_FORMATS)}")
    return tuple(dict.fromkeys(value))


def parse_config(raw: dict, name: str = "experiment") -> ExperimentConfig:
    """Validate a decoded config document."""
    if not isinstance(raw, dict):
        raise ConfigError("", "config document must be a table/object")
    if "scenario" not in raw:
        raise ConfigError("scenario", "missing required block")
    scenario, seed = scenario_from_config(_block(raw, "scenario"))
    output = _block(raw, "output")
    out_dir = Path(output.get("dir", DEFAULT_OUT_DIR))
    return ExperimentConfig(
        name=str(raw.get("name", name)),
        scenario=ScenarioSettings(scenario, seed),
        solver=_solver_settings(_block(raw, "solver")),
        sweep=_sweep_settings(_block(raw, "sweep"), seed),
        verify=_verify_settings(_block(raw, "verify")),
        out_dir=out_dir,
        formats=_formats(output.get("formats", list(REPORT_FORMATS))),
    )


def read_document(path) -> dict:
    """Decode a TOML or JSON file, chosen by suffix."""
    path = Path(path)
    try:
        if path.suffix == ".toml":
            with open(path, "rb") as f:
                return tomllib.load(f)
        if path.suffix == ".json":
            with open(path, "r") as f:
                return json.load(f)
    except OSError as e:
        raise ConfigError("config", f"cannot read {path}: {e.strerror or e}")
    except (tomllib.TOMLDecodeError, json.JSONDecodeError) as e:
        raise ConfigError("config", f"cannot parse {path}: {e}")
    raise ConfigError("config", f"unsupported config suffix {path.suffix!r} (use .toml or .json)")


def load_config(path, out_dir=None, seeds: Optional[Sequence[int]] = None, tol: Optional[float] = None,
                formats: Optional[Sequence[str]] = None) -> ExperimentConfig:
    """Read an experiment file and apply command-line overrides."""
    path = Path(path)
    config = parse_config(read_document(path), name=path.stem)
    if out_dir is not None:
        config = replace(config, out_dir=Path(out_dir))
    if seeds is not None:
        config = replace(config, sweep=replace(config.sweep, seeds=_int_list(list(seeds), "--seeds")))
    if tol is not None:
        if not tol > 0.0:
            raise ConfigError("--tol", "must be > 0")
        config = replace(config, solver=replace(config.solver, tol=float(tol)))
    if formats is not None:
        config = replace(config, formats=_formats(list(formats)))
    logger.info(f"Loaded config {config.name} ({len(config.sweep.seeds)} seeds, digest {config.digest()})")
    return config
