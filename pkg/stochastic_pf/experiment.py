"""
Experiment - per-seed solves, sweeps and their result files.

A run is one (seed, base offset) pair: pullback solve, forward eigen path,
Lyapunov estimate and the uniform-convergence profile. Runs are independent
and execute on a thread pool; the report is assembled after the join in
(seed, base) order, so every file body is a pure function of the config.

Files (all written atomically):
    report.json     per-run summaries, aggregates, wall times under "timing"
    diameters.csv   seed, m, rho_hat, base
    profile.csv     seed, t, sup_gap, base
    eigenpath.csv   seed, t, alpha, residual, base

Each CSV opens with one comment line, `# schema=stochastic_pf/<name>/v1`,
before the header. read_table() strips it; pandas readers want
`comment="#"` and csv.DictReader wants the first line skipped.
"""

import csv
import io
import json
import logging
import math
import os
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from stochastic_pf import run_store
from stochastic_pf.config import ExperimentConfig, store_path, worker_count
from stochastic_pf.envpath import functional_at
from stochastic_pf.errors import StochasticPFError
from stochastic_pf.solver import (
    ProbePolicy,
    forward_extend,
    lyapunov_estimate,
    pullback_solve,
    uniform_convergence_profile,
)

logger = logging.getLogger(__name__)

SCHEMA_PREFIX = "stochastic_pf"
SCHEMA_VERSION = "v1"
SECTION_TOL = 1e-12

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NOT_CONVERGED = 2


@dataclass
class RunResult:
    seed: int
    base: int
    converged: bool
    m_strict: Optional[int]
    strictness_certificate: str
    depth_reached: int
    final_diameter: float
    reason: str = ""
    x0: Optional[List[float]] = None
    section_error: Optional[float] = None
    log_alpha: Optional[Dict[str, float]] = None
    lyapunov: Optional[float] = None
    lyapunov_stderr: Optional[float] = None
    residual_max: Optional[float] = None
    norm_tolerance: Optional[float] = None
    diameters: List[float] = field(default_factory=list)
    profile: List[Tuple[int, float]] = field(default_factory=list)
    alpha: List[float] = field(default_factory=list)
    residuals: List[float] = field(default_factory=list)
    wall_time: float = 0.0

    def summary(self) -> dict:
        out = asdict(self)
        for key in ("diameters", "profile", "alpha", "residuals", "wall_time"):
            out.pop(key)
        return out

    def to_payload(self) -> dict:
        return asdict(self)

    @classmethod
    def from_payload(cls, payload: dict) -> "RunResult":
        data = dict(payload)
        data["profile"] = [(int(t), float(g)) for t, g in data.get("profile", [])]
        data["diameters"] = [float(d) for d in data.get("diameters", [])]
        return cls(**data)


@dataclass
class RunReport:
    config: ExperimentConfig
    runs: List[RunResult]
    total_time: float = 0.0
    files: List[Path] = field(default_factory=list)

    @property
    def exit_code(self) -> int:
        return EXIT_OK if all(r.converged for r in self.runs) else EXIT_NOT_CONVERGED

    def aggregates(self) -> dict:
        done = [r for r in self.runs if r.converged]
        out = {"runs": len(self.runs), "converged": len(done), "not_converged": len(self.runs) - len(done)}
        if done:
            depths = [r.depth_reached for r in done]
            out["depth_reached"] = {"mean": float(np.mean(depths)), "max": int(max(depths))}
            lyap = [r.lyapunov for r in done if r.lyapunov is not None]
            if lyap:
                out["lyapunov"] = {"mean": float(np.mean(lyap)), "min": float(min(lyap)), "max": float(max(lyap))}
            residuals = [r.residual_max for r in done if r.residual_max is not None]
            if residuals:
                out["residual_max"] = float(max(residuals))
        return out

    def to_json(self) -> dict:
        return _jsonable({
            "schema": f"{SCHEMA_PREFIX}/report/{SCHEMA_VERSION}",
            "config": self.config.describe(),
            "config_digest": self.config.digest(),
            "runs": [r.summary() for r in self.runs],
            "aggregates": self.aggregates(),
            "exit_code": self.exit_code,
            "timing": {
                "total_seconds": self.total_time,
                "per_run": {f"{r.seed}:{r.base}": r.wall_time for r in self.runs},
            },
        })


def _jsonable(value):
    """Non-finite floats become strings so report.json stays strict JSON."""
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


# ============================================================================
# One run
# ============================================================================

def solve_one(config: ExperimentConfig, seed: int, base: int = 0) -> RunResult:
    """Solve, extend forward and profile one environment; failures become rows."""
    settings = config.solver
    env = config.scenario.environment(seed, base)
    policy = ProbePolicy(n_random=settings.probe_count, seed=seed)
    start = time.perf_counter()
    try:
        trace = pullback_solve(env, settings.tol, settings.max_depth, policy, settings.confirmation_gap,
                               settings.strictness_budget)
    except StochasticPFError as e:
        logger.error(f"Run seed={seed} base={base} failed: {e}")
        return RunResult(seed, base, False, None, "", 0, math.inf, reason=f"{type(e).__name__}: {e}",
                         wall_time=time.perf_counter() - start)

    result = RunResult(
        seed=seed, base=base, converged=trace.converged, m_strict=trace.m_strict,
        strictness_certificate=trace.strictness_certificate, depth_reached=trace.depth_reached,
        final_diameter=trace.diameters[-1] if trace.diameters else math.inf,
        reason=trace.reason, diameters=list(trace.diameters),
    )
    if not trace.converged:
        result.wall_time = time.perf_counter() - start
        return result

    try:
        phi0 = functional_at(env, 0)
        result.x0 = trace.x0.tolist()
        result.section_error = abs(phi0(trace.x0) - 1.0)
        if result.section_error > SECTION_TOL:
            logger.warning(f"Seed {seed}: x0 section error {result.section_error:.3g}")

        if settings.horizon > 0:
            path = forward_extend(env, trace.x0, settings.horizon)
            logs = np.log(path.alpha)
            estimate = lyapunov_estimate(path)
            result.log_alpha = {"mean": float(logs.mean()), "min": float(logs.min()), "max": float(logs.max())}
            result.lyapunov, result.lyapunov_stderr = estimate.mean, estimate.stderr
            result.residual_max = float(path.residuals.max())
            result.alpha = path.alpha.tolist()
            result.residuals = path.residuals.tolist()

        depths = settings.profile_depths or tuple(range(trace.depth_reached + 2))
        profile = uniform_convergence_profile(env, trace, depths, settings.probe_count, seed,
                                              settings.tol, settings.norm_samples)
        result.profile = list(zip(profile.depths, profile.gaps))
        result.norm_tolerance = profile.norm_tolerance
    except StochasticPFError as e:
        logger.error(f"Run seed={seed} base={base} failed after convergence: {e}")
        result.converged = False
        result.reason = f"{type(e).__name__}: {e}"
    result.wall_time = time.perf_counter() - start
    return result


# ============================================================================
# Sweeps and files
# ============================================================================

def run_experiment(config: ExperimentConfig, resume: bool = False, write: bool = True) -> RunReport:
    """Run every (seed, base) of the sweep and write the result files."""
    digest = config.digest()
    db = store_path(config.out_dir)
    jobs = [(seed, base) for seed in config.sweep.seeds for base in config.sweep.base_offsets]
    logger.info(f"Starting {len(jobs)} runs of {config.name} (digest {digest})")
    start = time.perf_counter()

    def job(seed: int, base: int) -> RunResult:
        if resume:
            payload = run_store.read_run(db, digest, seed, base)
            if payload is not None:
                logger.info(f"Reusing stored run seed={seed} base={base}")
                return RunResult.from_payload(payload)
        result = solve_one(config, seed, base)
        if write:
            run_store.write_run(db, digest, seed, base, result.to_payload())
        return result

    with ThreadPoolExecutor(max_workers=min(worker_count(), max(len(jobs), 1))) as pool:
        futures = [pool.submit(job, seed, base) for seed, base in jobs]
        runs = [f.result() for f in futures]

    report = RunReport(config, runs, time.perf_counter() - start)
    converged = sum(r.converged for r in runs)
    logger.info(f"Finished {config.name}: {converged}/{len(runs)} converged in {report.total_time:.2f}s")
    if write:
        report.files = write_outputs(report)
    return report


def atomic_write(path: Path, text: str):
    """Write text to path via a temp file in the same directory and os.replace."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(name: str, header: List[str], rows) -> str:
    buf = io.StringIO()
    buf.write(f"# schema={SCHEMA_PREFIX}/{name}/{SCHEMA_VERSION}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def read_table(path) -> Tuple[Optional[str], List[Dict[str, str]]]:
    """Read a result CSV back as (schema, rows); schema is None when the comment line is absent."""
    with open(path, newline="") as f:
        lines = f.read().splitlines()
    schema = None
    if lines and lines[0].startswith("#"):
        schema = lines[0].lstrip("# ").partition("schema=")[2] or None
        lines = lines[1:]
    return schema, list(csv.DictReader(lines))


def diameters_csv(runs: List[RunResult]) -> str:
    rows = ((r.seed, m, repr(float(d)), r.base) for r in runs for m, d in enumerate(r.diameters))
    return _csv_text("diameters", ["seed", "m", "rho_hat", "base"], rows)


def profile_csv(runs: List[RunResult]) -> str:
    rows = ((r.seed, t, repr(float(g)), r.base) for r in runs for t, g in r.profile)
    return _csv_text("profile", ["seed", "t", "sup_gap", "base"], rows)


def eigenpath_csv(runs: List[RunResult]) -> str:
    rows = (
        (r.seed, t, repr(a), repr(res), r.base)
        for r in runs for t, (a, res) in enumerate(zip(r.alpha, r.residuals))
    )
    return _csv_text("eigenpath", ["seed", "t", "alpha", "residual", "base"], rows)


def write_outputs(report: RunReport) -> List[Path]:
    out = Path(report.config.out_dir)
    written = []
    if "json" in report.config.formats:
        path = out / "report.json"
        atomic_write(path, json.dumps(report.to_json(), indent=2) + "\n")
        written.append(path)
    if "csv" in report.config.formats:
        for name, render in (("diameters", diameters_csv), ("profile", profile_csv), ("eigenpath", eigenpath_csv)):
            path = out / f"{name}.csv"
            atomic_write(path, render(report.runs))
            written.append(path)
    logger.info(f"Wrote {', '.join(p.name for p in written)} to {out}")
    return written
