"""Experiment configuration, parallel ensemble execution and persistence.

A run takes a TOML config, drives N independent chains (chain i draws from the
counter-based stream keyed (seed, i)), and writes four artifacts: averages.csv,
qq.csv, summary.json and, last and atomically, manifest.json.  A directory
without a manifest is an incomplete run; killing the process mid-run can never
leave a manifest claiming completion.

Results are bit-identical for any thread count: chains never share state and
outputs are assembled in chain-index order.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from . import __version__
from .diagnostics import TestFunctionSpec, normality_stats, standardize
from .engine import ErgodicAverageCollector, run_chain
from .kernels import KernelConfig, default_h
from .targets import TargetSpec

SCHEMA_VERSION = 1
THREADS_ENV = "HEAVYTAIL_THREADS"

# chains whose state leaves this ball are flagged as diverged
DIVERGENCE_NORM = 1e100


class ConfigError(ValueError):
    """Config schema violation; carries the offending field path."""

    def __init__(self, field_path: str, message: str):
        self.field_path = field_path
        super().__init__(f"config field '{field_path}': {message}")


@dataclass(frozen=True)
class ExperimentConfig:
    target: TargetSpec
    kernel: KernelConfig
    g: TestFunctionSpec
    chains_n: int
    steps_n: int
    burn_fraction: float = 1.0 / 3.0
    seed: int = 0
    init: Optional[tuple] = None  # None = origin
    threads: int = 0              # 0 = auto
    output_dir: str = "out"

    def __post_init__(self):
        if self.chains_n < 1:
            raise ConfigError("run.chains", f"must be >= 1, got {self.chains_n}")
        if self.steps_n < 1:
            raise ConfigError("run.steps", f"must be >= 1, got {self.steps_n}")
        if not 0.0 <= self.burn_fraction < 1.0:
            raise ConfigError("run.burn_fraction", f"must lie in [0, 1), got {self.burn_fraction}")

    @property
    def n_burn(self) -> int:
        # default thirds must be exact: floor(n/3), not a float product
        if abs(self.burn_fraction * 3.0 - 1.0) < 1e-12:
            return self.steps_n // 3
        return int(self.burn_fraction * self.steps_n)

    def x0(self) -> np.ndarray:
        if self.init is None:
            return np.zeros(self.target.d)
        return np.asarray(self.init, dtype=float)

    def canonical(self) -> dict:
        return {
            "target": vars(self.target).copy(),
            "kernel": {k: v for k, v in vars(self.kernel).items() if v is not None},
            "g": vars(self.g).copy(),
            "run": {
                "chains": self.chains_n,
                "steps": self.steps_n,
                "burn_fraction": self.burn_fraction,
                "seed": self.seed,
                "init": list(self.init) if self.init is not None else "origin",
            },
        }

    def config_hash(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _require(table: dict, key: str, section: str):
    if key not in table:
        raise ConfigError(f"{section}.{key}", "missing required key")
    return table[key]


def _parse_target(raw: dict) -> TargetSpec:
    try:
        return TargetSpec(
            kind=str(_require(raw, "kind", "target")),
            v=float(_require(raw, "v", "target")),
            d=int(_require(raw, "d", "target")),
            scale=float(raw.get("scale", 1.0)),
        )
    except ConfigError:
        raise
    except (ValueError, TypeError) as e:
        raise ConfigError("target", str(e)) from e


def _parse_kernel(raw: dict, d: int) -> KernelConfig:
    algorithm = str(_require(raw, "algorithm", "kernel"))
    try:
        return KernelConfig(
            algorithm=algorithm,
            h=float(raw.get("h", default_h(algorithm, d))),
            proposal_eta=raw.get("proposal_eta"),
            is_k=raw.get("is_k"),
            levy_alpha=raw.get("levy_alpha"),
            drift_kind=raw.get("drift"),
            drift_delta=raw.get("drift_delta"),
        )
    except (ValueError, TypeError) as e:
        raise ConfigError("kernel.algorithm", str(e)) from e


def _parse_g(raw: dict) -> TestFunctionSpec:
    try:
        return TestFunctionSpec(
            kind=str(_require(raw, "kind", "g")),
            threshold=float(raw.get("threshold", 0.0)),
            s=float(raw.get("s", 1.0)),
        )
    except ConfigError:
        raise
    except (ValueError, TypeError) as e:
        raise ConfigError("g.kind", str(e)) from e


def load_config(
    path,
    threads: Optional[int] = None,
    seed: Optional[int] = None,
    scale: Optional[float] = None,
    out: Optional[str] = None,
) -> tuple[ExperimentConfig, dict]:
    """Parse a TOML experiment config; CLI overrides win over file values.

    Returns the experiment config plus the raw table (subcommand sections like
    [drift] / [tails] / [excursions] are read by their own entry points).
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError("<path>", f"no such config file: {path}")
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError("<toml>", str(e)) from e

    target = _parse_target(_require(raw, "target", "<root>"))
    kernel = _parse_kernel(_require(raw, "kernel", "<root>"), target.d)
    run = raw.get("run", {})
    g = _parse_g(raw.get("g", {"kind": "power_norm", "s": 1.0}))

    eff_scale = scale if scale is not None else float(raw.get("scale", 1.0))
    if eff_scale <= 0:
        raise ConfigError("scale", f"must be positive, got {eff_scale}")
    init_raw = run.get("init", "origin")
    if isinstance(init_raw, str):
        if init_raw != "origin":
            raise ConfigError("run.init", f"expected 'origin' or a coordinate list, got {init_raw!r}")
        init = None
    else:
        init = tuple(float(v) for v in init_raw)
        if len(init) != target.d:
            raise ConfigError("run.init", f"length {len(init)} does not match d = {target.d}")

    env_threads = os.environ.get(THREADS_ENV)
    eff_threads = threads if threads is not None else int(run.get("threads", env_threads or 0))

    cfg = ExperimentConfig(
        target=target,
        kernel=kernel,
        g=g,
        chains_n=max(1, round(int(run.get("chains", 4)) * eff_scale)),
        steps_n=max(1, round(int(run.get("steps", 10_000)) * eff_scale)),
        burn_fraction=float(run.get("burn_fraction", 1.0 / 3.0)),
        seed=int(seed if seed is not None else run.get("seed", 0)),
        init=init,
        threads=eff_threads,
        output_dir=str(out if out is not None else run.get("output_dir", "out")),
    )
    return cfg, raw


@dataclass
class EnsembleResult:
    """Per-chain ergodic averages from N independent chains."""

    averages: np.ndarray          # NaN where a chain diverged
    n_total: int
    n_burn: int
    config_hash: str
    accept_rates: np.ndarray = field(default_factory=lambda: np.empty(0))
    diverged_at: list = field(default_factory=list)  # None or 1-based step per chain
    seed: int = 0

    @property
    def valid_averages(self) -> np.ndarray:
        return self.averages[np.isfinite(self.averages)]


def resolve_threads(threads: int) -> int:
    if threads and threads > 0:
        return threads
    env = os.environ.get(THREADS_ENV)
    if env:
        return max(1, int(env))
    return max(1, os.cpu_count() or 1)


def run_ensemble(cfg: ExperimentConfig) -> EnsembleResult:
    """Run ``chains_n`` independent chains; output does not depend on threads."""
    n_burn = cfg.n_burn
    x0 = cfg.x0()
    target = None if cfg.kernel.algorithm == "levy_em" else cfg.target

    def one_chain(i: int):
        from .rng import RngStream

        collector = ErgodicAverageCollector(cfg.g, n_burn)
        outcome = run_chain(
            target,
            cfg.kernel,
            x0,
            cfg.steps_n,
            RngStream(cfg.seed, i),
            collectors=[collector],
            stop_norm=DIVERGENCE_NORM,
        )
        avg = math.nan if outcome.diverged_at is not None else collector.value
        return avg, outcome.accept_rate, outcome.diverged_at

    workers = resolve_threads(cfg.threads)
    if workers > 1 and cfg.chains_n > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(one_chain, range(cfg.chains_n)))
    else:
        rows = [one_chain(i) for i in range(cfg.chains_n)]

    return EnsembleResult(
        averages=np.array([r[0] for r in rows]),
        n_total=cfg.steps_n,
        n_burn=n_burn,
        config_hash=cfg.config_hash(),
        accept_rates=np.array([r[1] for r in rows]),
        diverged_at=[r[2] for r in rows],
        seed=cfg.seed,
    )


def _atomic_write(path: Path, data: str):
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(data)
    os.replace(tmp, path)


def _write_csv(path: Path, header: list, rows):
    import csv
    import io

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(row)
    _atomic_write(path, buf.getvalue())


def run_experiment(
    config_path,
    threads: Optional[int] = None,
    seed: Optional[int] = None,
    scale: Optional[float] = None,
    out: Optional[str] = None,
) -> Path:
    """Execute a config end to end; returns the output directory.

    Artifacts: averages.csv (chain_id, average, accept_rate, flag), qq.csv,
    summary.json, manifest.json (written last; its presence marks completion).
    """
    cfg, _ = load_config(config_path, threads=threads, seed=seed, scale=scale, out=out)
    outdir = Path(cfg.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    stale = outdir / "manifest.json"
    if stale.exists():
        stale.unlink()  # never leave a manifest describing partial results

    t0 = time.time()
    result = run_ensemble(cfg)

    rows = []
    for i in range(cfg.chains_n):
        avg = result.averages[i]
        flag = "ok" if result.diverged_at[i] is None else f"diverged@{result.diverged_at[i]}"
        rows.append(
            (i, "" if math.isnan(avg) else f"{avg:.17g}", f"{result.accept_rates[i]:.17g}", flag)
        )
    _write_csv(outdir / "averages.csv", ["chain_id", "average", "accept_rate", "flag"], rows)

    valid = result.valid_averages
    summary = {
        "schema": SCHEMA_VERSION,
        "config_hash": result.config_hash,
        "N": cfg.chains_n,
        "valid_chains": int(len(valid)),
        "n": cfg.steps_n,
        "n_burn": result.n_burn,
        "seed": cfg.seed,
    }
    if len(valid) >= 2 and float(np.std(valid, ddof=1)) > 0:
        qq = standardize(valid)
        _write_csv(
            outdir / "qq.csv",
            ["theoretical_q", "empirical_q"],
            (
                (f"{t:.17g}", f"{e:.17g}")
                for t, e in zip(qq.theoretical_quantiles, qq.empirical_quantiles)
            ),
        )
        summary["mu_hat"] = qq.mu_hat
        summary["sigma_hat"] = qq.sigma_hat
        if len(valid) >= 8:
            kurt, a2 = normality_stats((valid - qq.mu_hat) / qq.sigma_hat)
            summary["excess_kurtosis"] = kurt
            summary["anderson_darling_a2"] = a2
    else:
        _write_csv(outdir / "qq.csv", ["theoretical_q", "empirical_q"], [])
    _atomic_write(outdir / "summary.json", json.dumps(summary, indent=2, sort_keys=True))

    manifest = {
        "schema": SCHEMA_VERSION,
        "config_hash": result.config_hash,
        "config": cfg.canonical(),
        "seed_layout": {
            "bit_generator": "philox4x64",
            "key": ["seed", "chain_index"],
            "seed": cfg.seed,
        },
        "version": __version__,
        "wall_time_s": time.time() - t0,
        "accept_rates": [float(a) for a in result.accept_rates],
        "complete": True,
    }
    _atomic_write(outdir / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True))
    return outdir
