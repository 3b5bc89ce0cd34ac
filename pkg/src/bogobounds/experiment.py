"""Config loading and (beta, scale) sweeps producing CSV/JSON reports.

Config files are TOML with a ``schema_version`` key::

    schema_version = 1
    seed = 0

    [model]
    kind = "ising_chain"        # ising_chain | xxz_chain | oscillator_chain | diagonal_random
    N = 8
    d = 2
    boundary = "open"           # open | periodic
    [model.couplings]
    J = 1.0
    h = 0.5

    [sweep]
    beta = [0.5, 1.0]
    scale = [0.0, 1.0]          # multipliers applied to U
    max_workers = 1

    [backend]
    kind = "dense"              # dense | stochastic
    probes = 32
    degree = 0                  # 0 = choose from the Chebyshev error bound

    [variational]
    enabled = false
    family = "coupling"         # coupling | per_boundary
    budget = 200

    [output]
    dir = "results"
    format = "both"             # csv | json | both
    timing = false              # fill wall_time_ms in report.csv

Rows come out in grid order: beta ascending, then scale in file order.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .bounds import (
    ObservableFamily,
    TrialStateFamily,
    bogoliubov_bounds,
    bound_tolerance,
    optimize_lower,
    optimize_upper,
)
from .models import MAX_DENSE_DIM, MODEL_KINDS, ModelSpec, ModelTooLargeError, build_model, model_terms
from .stochastic import estimate_bound_lower, estimate_bound_upper

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
WORKERS_ENV = "BOGOBOUNDS_MAX_WORKERS"
BACKENDS = ("dense", "stochastic")
FAMILIES = ("coupling", "per_boundary")
FORMATS = ("csv", "json", "both")

REPORT_FIELDS = (
    "model_id", "N", "d", "beta", "scale",
    "lower", "delta_F", "upper", "gap",
    "var_lower", "var_upper", "residual_upper", "residual_lower",
    "lower_stderr", "upper_stderr", "wall_time_ms",
)


class ConfigError(ValueError):
    """Config could not be parsed or violates the schema; ``problems`` lists every issue."""

    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("invalid config:\n  " + "\n  ".join(self.problems))


class RowFailure(RuntimeError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelSpec
    beta_grid: tuple[float, ...]
    scale_grid: tuple[float, ...] = (1.0,)
    backend: str = "dense"
    probes: int = 32
    degree: int | None = None
    seed: int = 0
    variational: bool = False
    family: str = "coupling"
    budget: int = 200
    output_dir: str = "results"
    output_format: str = "both"
    timing: bool = False
    max_workers: int = 1
    schema_version: int = SCHEMA_VERSION

    def grid(self) -> list[tuple[float, float]]:
        return [(b, s) for b in sorted(self.beta_grid) for s in self.scale_grid]

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        d["model"] = {"kind": self.model.kind, "N": self.model.N, "d": self.model.d,
                      "boundary": self.model.boundary, "couplings": dict(self.model.couplings)}
        return d

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


_TOP_KEYS = {"schema_version", "seed", "model", "sweep", "backend", "variational", "output"}
_SECTION_KEYS = {
    "model": {"kind", "N", "d", "boundary", "couplings"},
    "sweep": {"beta", "scale", "max_workers"},
    "backend": {"kind", "probes", "degree"},
    "variational": {"enabled", "family", "budget"},
    "output": {"dir", "format", "timing"},
}


def _is_int(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


def _is_real(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and np.isfinite(x)


def parse_config(raw: dict[str, Any]) -> ExperimentConfig:
    """Validate a parsed config mapping and fill defaults."""
    problems: list[str] = []
    for key in sorted(set(raw) - _TOP_KEYS):
        problems.append(f"unknown top-level key {key!r}")
    sections = {}
    for name, allowed in _SECTION_KEYS.items():
        sec = raw.get(name, {})
        if not isinstance(sec, dict):
            problems.append(f"[{name}] must be a table")
            sec = {}
        for key in sorted(set(sec) - allowed):
            problems.append(f"unknown key {name}.{key}")
        sections[name] = sec

    version = raw.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        problems.append(f"schema_version: expected {SCHEMA_VERSION}, got {version!r}")
    seed = raw.get("seed", 0)
    if not _is_int(seed) or seed < 0:
        problems.append(f"seed: must be a non-negative integer, got {seed!r}")

    m = sections["model"]
    model = None
    if "kind" not in m:
        problems.append(f"model.kind: required; allowed kinds: {', '.join(MODEL_KINDS)}")
    else:
        try:
            model = ModelSpec(kind=m["kind"], N=m.get("N", 1), d=m.get("d", 1),
                              couplings=dict(m.get("couplings", {})), boundary=m.get("boundary", "open"))
        except (ValueError, TypeError) as exc:
            problems.append(f"model: {exc}")

    sw = sections["sweep"]
    betas = sw.get("beta")
    if betas is None:
        problems.append("beta_grid (sweep.beta): required")
        betas = []
    elif not isinstance(betas, list) or not betas:
        problems.append("beta_grid (sweep.beta): must be a non-empty list")
        betas = []
    elif not all(_is_real(b) and b > 0 for b in betas):
        problems.append(f"beta_grid (sweep.beta): every beta must be a finite number > 0, got {betas}")
    scales = sw.get("scale", [1.0])
    if not isinstance(scales, list) or not scales or not all(_is_real(s) for s in scales):
        problems.append(f"scale_grid (sweep.scale): must be a non-empty list of finite numbers, got {scales!r}")
        scales = [1.0]
    workers = sw.get("max_workers", 1)
    if not _is_int(workers) or workers < 1:
        problems.append(f"sweep.max_workers: must be an integer >= 1, got {workers!r}")

    be = sections["backend"]
    backend = be.get("kind", "dense")
    if backend not in BACKENDS:
        problems.append(f"backend.kind: must be one of {BACKENDS}, got {backend!r}")
    probes = be.get("probes", 32)
    if not _is_int(probes) or probes < 2:
        problems.append(f"backend.probes: must be an integer >= 2, got {probes!r}")
    degree = be.get("degree", 0)
    if not _is_int(degree) or degree < 0:
        problems.append(f"backend.degree: must be a non-negative integer, got {degree!r}")

    va = sections["variational"]
    enabled = va.get("enabled", False)
    if not isinstance(enabled, bool):
        problems.append("variational.enabled: must be true or false")
    family = va.get("family", "coupling")
    if family not in FAMILIES:
        problems.append(f"variational.family: must be one of {FAMILIES}, got {family!r}")
    budget = va.get("budget", 200)
    if enabled and (not _is_int(budget) or budget < 1):
        problems.append(f"variational.budget: must be an integer >= 1 when enabled, got {budget!r}")

    out = sections["output"]
    out_dir = out.get("dir", "results")
    if not isinstance(out_dir, str) or not out_dir:
        problems.append("output.dir: must be a non-empty string")
    fmt = out.get("format", "both")
    if fmt not in FORMATS:
        problems.append(f"output.format: must be one of {FORMATS}, got {fmt!r}")
    timing = out.get("timing", False)
    if not isinstance(timing, bool):
        problems.append("output.timing: must be true or false")

    if problems:
        raise ConfigError(problems)
    return ExperimentConfig(
        model=model,
        beta_grid=tuple(float(b) for b in betas),
        scale_grid=tuple(float(s) for s in scales),
        backend=backend,
        probes=probes,
        degree=degree or None,
        seed=seed,
        variational=enabled,
        family=family,
        budget=budget,
        output_dir=out_dir,
        output_format=fmt,
        timing=timing,
        max_workers=workers,
        schema_version=version,
    )


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        raw = tomllib.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError([f"config file not found: {path}"]) from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError([f"{path}: parse error: {exc}"]) from None
    return parse_config(raw)


def _dense_row(cfg: ExperimentConfig, P, beta: float, scale: float) -> dict[str, Any]:
    Ps = P.scaled(scale)
    rep = bogoliubov_bounds(Ps, beta)
    row = {"lower": rep.lower, "delta_F": rep.delta_F, "upper": rep.upper, "gap": rep.gap,
           "residual_upper": rep.residual_upper, "residual_lower": rep.residual_lower}
    tol = bound_tolerance(Ps.dim)
    if not rep.ordered(tol):
        raise RowFailure(f"bound ordering violated at beta={beta}, scale={scale}: "
                         f"{rep.lower!r} <= {rep.delta_F!r} <= {rep.upper!r}")
    if cfg.variational:
        fam = ObservableFamily.coupling(Ps) if cfg.family == "coupling" else ObservableFamily.per_boundary(Ps)
        low = optimize_lower(Ps, beta, fam, cfg.budget, seed=cfg.seed)
        up = optimize_upper(Ps, beta, TrialStateFamily.around_decoupled(Ps, beta, fam), cfg.budget, seed=cfg.seed)
        if low.value > rep.delta_F + tol or up.value < rep.delta_F - tol:
            raise RowFailure(f"variational bounds do not bracket delta_F at beta={beta}, scale={scale}")
        row["var_lower"], row["var_upper"] = low.value, up.value
    return row


def _stochastic_row(cfg: ExperimentConfig, parts, beta: float, scale: float) -> dict[str, Any]:
    layout, h0, u = parts
    scaled = (layout, h0, [t.scaled(scale) for t in u])
    kw = dict(probes=cfg.probes, degree=cfg.degree, seed=cfg.seed)
    low = estimate_bound_lower(scaled, beta, **kw)
    up = estimate_bound_upper(scaled, beta, **kw)
    return {"lower": low.value, "upper": up.value, "gap": up.value - low.value,
            "lower_stderr": low.stderr, "upper_stderr": up.stderr}


def _format(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def write_csv(path: Path, rows: list[dict[str, Any]]) -> None:
    lines = [",".join(REPORT_FIELDS)]
    lines += [",".join(_format(r.get(k)) for k in REPORT_FIELDS) for r in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_json(path: Path, rows: list[dict[str, Any]]) -> None:
    payload = [{k: r.get(k) for k in REPORT_FIELDS} for r in rows]
    path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def _resolve_workers(cfg: ExperimentConfig, workers: int | None) -> int:
    if workers is not None:
        return max(1, int(workers))
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    return cfg.max_workers


def run_experiment(cfg: ExperimentConfig, output_dir=None, *, workers: int | None = None) -> list[dict[str, Any]]:
    """Evaluate every grid point and write the report files.

    Grid points run on a thread pool, but rows are assembled in grid order
    and BLAS is pinned to one thread, so output does not depend on the
    worker count.
    """
    from threadpoolctl import threadpool_limits

    out = Path(output_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    marker = out / "PARTIAL"
    if marker.exists():
        marker.unlink()
    workers = _resolve_workers(cfg, workers)
    spec = cfg.model

    if cfg.backend == "dense":
        if spec.dim > MAX_DENSE_DIM:
            raise ModelTooLargeError(f"dense backend refuses dimension {spec.dim} > {MAX_DENSE_DIM}; "
                                     "set backend.kind = \"stochastic\"")
        system = build_model(spec)
        evaluate = _dense_row
    else:
        system = model_terms(spec)
        evaluate = _stochastic_row

    grid = cfg.grid()

    def one(point):
        beta, scale = point
        t0 = time.perf_counter()
        row = {"model_id": spec.model_id, "N": spec.N, "d": spec.d, "beta": beta, "scale": scale}
        row.update(evaluate(cfg, system, beta, scale))
        return row, 1e3 * (time.perf_counter() - t0)

    results: list = [None] * len(grid)
    failure = None
    with threadpool_limits(limits=1, user_api="blas"):
        with ThreadPoolExecutor(max_workers=workers) as ex:
            futures = [ex.submit(one, p) for p in grid]
            for i, fut in enumerate(futures):
                try:
                    results[i] = fut.result()
                except Exception as exc:  # any failing row aborts the run
                    failure = (i, exc)
                    for f in futures[i + 1:]:
                        f.cancel()
                    break

    done = [r for r in results if r is not None]
    rows = []
    for row, ms in done:
        if cfg.timing:
            row["wall_time_ms"] = ms
        rows.append(row)
    if cfg.output_format in ("csv", "both"):
        write_csv(out / "report.csv", rows)
    if cfg.output_format in ("json", "both"):
        write_json(out / "report.json", rows)
    manifest = {
        "toolkit": "bogobounds",
        "version": __version__,
        "schema_version": cfg.schema_version,
        "config_sha256": cfg.digest(),
        "seed": cfg.seed,
        "backend": cfg.backend,
        "workers": workers,
        "rows": len(rows),
        "grid_points": len(grid),
        "wall_time_ms": [ms for _, ms in done],
        "numpy": np.__version__,
        "complete": failure is None,
        "config": cfg.to_dict(),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    if failure is not None:
        i, exc = failure
        marker.write_text(f"run aborted at grid point {i} {grid[i]}: {exc}\n", encoding="utf-8")
        raise RowFailure(f"grid point {i} {grid[i]} failed: {exc}") from exc
    return rows
