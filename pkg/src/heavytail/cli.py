"""Command-line interface.

Subcommands:

* ``run <config.toml>``: ensemble experiment, writes the four artifacts
* ``oracle --alg ... --v ...``: theory verdict (CLT / rates) as JSON
* ``drift <config.toml>``: one-step drift estimates (CSV plus exponent fit)
* ``tails <config.toml>``: single long trajectory + tail-index report
* ``excursions <config.toml>``: excursion durations above a level + tail fit

Common flags: ``--threads`` (else $HEAVYTAIL_THREADS, else all cores),
``--seed``, ``--scale`` (multiplies chains and steps), ``--out``.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import oracle as O
from .diagnostics import hill_estimator, hill_report
from .drift import (
    ABS_NORM,
    FKind,
    LyapunovSpec,
    collect_excursions,
    drift_profile,
    estimate_drift,
    fit_power_law,
)
from .engine import StrideNormCollector, ThresholdNormCollector, run_chain
from .kernels import RWM_GAUSSIAN, RWM_STUDENT_T
from .rng import RngStream
from .runner import THREADS_ENV, ConfigError, load_config, resolve_threads, run_experiment

_ORACLE_ALGS = {
    "fv-rwm": O.ALG_FV_RWM,
    "iv-rwm": O.ALG_IV_RWM,
    "mala": O.ALG_MALA,
    "ula": O.ALG_ULA,
    "sps": O.ALG_SPS,
    "is": O.ALG_INDEPENDENCE,
    "levy-em": O.ALG_LEVY_EM,
}


def _algorithm_id(args) -> O.AlgorithmId:
    kind = _ORACLE_ALGS[args.alg]
    return O.AlgorithmId(kind, eta=args.eta, k=args.k, alpha=args.alpha)


def kernel_algorithm_id(kernel, gamma=None) -> O.AlgorithmId:
    """Map a sampler config onto the theory oracle's algorithm identifier."""
    mapping = {
        RWM_GAUSSIAN: O.fv_rwm,
        "mala": O.mala,
        "ula": O.ula,
        "sps": O.sps,
    }
    if kernel.algorithm == RWM_STUDENT_T:
        return O.iv_rwm(kernel.proposal_eta)
    if kernel.algorithm == "independence":
        return O.independence(kernel.is_k)
    if kernel.algorithm == "levy_em":
        return O.levy_em(kernel.levy_alpha)
    return mapping[kernel.algorithm]()


def _cmd_oracle(args) -> int:
    alg = _algorithm_id(args)
    if args.g == "bounded":
        query = O.CltQuery(O.BOUNDED)
    elif args.g == "power":
        query = O.CltQuery(O.POWER, s=args.s)
    else:
        query = O.CltQuery(O.EXP_GROWTH, s=args.s)
    out = {"algorithm": alg.label(), "v": args.v, "d": args.d, "g": args.g}
    if args.g != "bounded":
        out["s"] = args.s
    verdict = O.clt_verdict(alg, args.v, args.d, query)
    out["verdict"] = {
        "status": verdict.status,
        "citation": verdict.citation,
        "statement": verdict.statement,
        "literature_cited": verdict.literature_cited,
    }
    try:
        rate = O.rate_prediction(alg, args.v, args.d)
        out["rate"] = {
            "tv_exponent": "uniformly_ergodic" if rate.uniformly_ergodic else rate.tv_exponent,
            "beta": rate.beta,
            "jump_type": rate.jump_type,
        }
    except ValueError as e:
        out["rate"] = {"error": str(e)}
    if alg.kind == O.ALG_LEVY_EM and args.drift is not None:
        growth = (
            O.DRIFT_AT_MOST_LINEAR if args.drift == "linear" else O.DRIFT_SUPERLINEAR_GROWTH
        )
        cls = O.levy_classification(alg, growth)
        out["classification"] = {
            "kind": cls.kind,
            "citation": cls.citation,
            "statement": cls.statement,
        }
    print(json.dumps(out, indent=2, sort_keys=True))
    return 0


def _drift_f_kind(raw: dict) -> FKind:
    name = raw.get("f", "reciprocal")
    if name == "reciprocal":
        return FKind.reciprocal()
    if name == "power":
        return FKind.power(float(raw.get("s", 1.0)))
    if name == "exp":
        return FKind.exp_rate(float(raw.get("s", 1.0)))
    if name == "psi":
        return None  # resolved from the registry profile below
    raise ConfigError("drift.f", f"expected reciprocal|power|exp|psi, got {name!r}")


def _cmd_drift(args) -> int:
    cfg, raw = load_config(args.config, threads=args.threads, seed=args.seed, out=args.out)
    section = raw.get("drift", {})
    gamma = float(section["gamma"]) if "gamma" in section else None
    alg = kernel_algorithm_id(cfg.kernel, gamma)
    profile = drift_profile(alg, cfg.target.v, cfg.target.d, gamma)
    f_kind = _drift_f_kind(section)
    if f_kind is None:
        f_kind = profile.psi_f_kind()
    lyapunov = (
        LyapunovSpec(str(section["lyapunov"]), gamma) if "lyapunov" in section else profile.V
    )
    probes = [float(p) for p in section.get("probes", [10, 20, 40, 80, 160])]
    samples = int(section.get("samples", 100_000))
    threads = resolve_threads(cfg.threads)

    outdir = Path(cfg.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    rows = []
    estimates = []
    for j, r in enumerate(probes):
        probe = np.zeros(cfg.target.d)
        probe[0] = r
        est = estimate_drift(
            cfg.kernel, cfg.target, lyapunov, f_kind, probe, samples,
            RngStream(cfg.seed, j), threads=threads,
        )
        estimates.append(est)
        rows.append((f"{r:g}", f_kind.label(), f"{est.mean:.17g}", f"{est.stderr:.17g}", est.samples))
    from .runner import _write_csv

    _write_csv(outdir / "drift.csv", ["probe_norm", "f_kind", "mean", "stderr", "samples"], rows)

    fit = {}
    points = [(r, e.mean) for r, e in zip(probes, estimates) if e.mean != 0.0]
    if len(points) >= 3:
        slope, intercept, r2 = fit_power_law(points)
        fit = {"slope": slope, "intercept": intercept, "r_squared": r2}
    summary = {
        "schema": 1,
        "algorithm": alg.label(),
        "f_kind": f_kind.label(),
        "lyapunov": lyapunov.kind,
        "samples_per_probe": samples,
        "registry_phi_exponent": profile.phi_exponent,
        "registry_phi_growth": profile.phi_growth,
        "registry_psi": profile.psi_exponent_or_rate,
        "registry_psi_growth": profile.psi_growth,
        "fit": fit,
    }
    (outdir / "drift_fit.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


def _cmd_tails(args) -> int:
    cfg, raw = load_config(args.config, threads=args.threads, seed=args.seed,
                           scale=args.scale, out=args.out)
    section = raw.get("tails", {})
    steps = int(section.get("steps", cfg.steps_n))
    stride = int(section.get("stride", max(1, steps // 1_000_000)))
    target = None if cfg.kernel.algorithm == "levy_em" else cfg.target
    subsample = StrideNormCollector(stride, n_burn=int(cfg.burn_fraction * steps))
    collectors = [subsample]
    deep = None
    if "level" in section:  # exact store of everything above the level
        deep = ThresholdNormCollector(float(section["level"]))
        collectors.append(deep)
    outcome = run_chain(
        target, cfg.kernel, cfg.x0(), steps, RngStream(cfg.seed, 0), collectors=collectors
    )
    samples = subsample.samples
    samples = samples[samples > 0]
    outdir = Path(cfg.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    report = hill_report(samples)
    from .runner import _write_csv

    _write_csv(
        outdir / "hill.csv",
        ["k", "estimate"],
        ((int(k), f"{e:.17g}") for k, e in zip(report.k_values, report.estimates)),
    )
    summary = {
        "schema": 1,
        "steps": outcome.steps,
        "stride": stride,
        "subsample_size": int(len(samples)),
        "hill_estimate": report.estimate,
        "plateau": bool(report.plateau),
        "accept_rate": outcome.accept_rate,
        "diverged_at": outcome.diverged_at,
    }
    if deep is not None:
        exceed = deep.samples
        summary["level"] = deep.level
        summary["exceedances"] = int(len(exceed))
        _write_csv(
            outdir / "exceedances.csv", ["norm"], ((f"{v:.17g}",) for v in exceed)
        )
    (outdir / "tails.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


def _cmd_excursions(args) -> int:
    cfg, raw = load_config(args.config, threads=args.threads, seed=args.seed,
                           scale=args.scale, out=args.out)
    section = raw.get("excursions", {})
    ell = float(section.get("ell", 5.0))
    steps = int(section.get("steps", cfg.steps_n))
    lyapunov = LyapunovSpec(str(section.get("lyapunov", ABS_NORM)),
                            section.get("gamma"))
    target = None if cfg.kernel.algorithm == "levy_em" else cfg.target
    stats = collect_excursions(
        cfg.kernel, target, lyapunov, ell, steps, RngStream(cfg.seed, 0)
    )
    outdir = Path(cfg.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    values, counts = np.unique(stats.durations, return_counts=True)
    from .runner import _write_csv

    _write_csv(
        outdir / "duration_counts.csv",
        ["duration", "count"],
        ((int(v), int(c)) for v, c in zip(values, counts)),
    )
    summary = {
        "schema": 1,
        "ell": ell,
        "total_steps": stats.total_steps,
        "excursions": int(len(stats.durations)),
        "censored": stats.censored,
        "censored_steps": stats.censored_steps,
        "steps_below": stats.steps_below,
    }
    if len(stats.durations) > 100:
        k = min(len(stats.durations) - 1, max(10, int(len(stats.durations) ** 0.6)))
        summary["duration_tail_hill"] = hill_estimator(stats.durations.astype(float), k)
        summary["hill_k"] = k
    (outdir / "excursions.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


def _cmd_run(args) -> int:
    outdir = run_experiment(
        args.config, threads=args.threads, seed=args.seed, scale=args.scale, out=args.out
    )
    summary = json.loads((outdir / "summary.json").read_text())
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--threads", type=int, default=None,
                   help=f"worker threads (default: ${THREADS_ENV} or all cores)")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--scale", type=float, default=None,
                   help="multiply chain count and step count by this factor")
    p.add_argument("--out", type=str, default=None, help="output directory override")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="heavytail",
        description="Samplers, drift verification and theory verdicts for heavy-tailed targets.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an ensemble experiment from a TOML config")
    p_run.add_argument("config", help="path to the experiment TOML")
    _add_common(p_run)
    p_run.set_defaults(fn=_cmd_run)

    p_oracle = sub.add_parser("oracle", help="print the theory verdict for an algorithm/target")
    p_oracle.add_argument("--alg", required=True, choices=sorted(_ORACLE_ALGS))
    p_oracle.add_argument("--v", type=float, required=True, help="target tail index")
    p_oracle.add_argument("--d", type=int, required=True, help="target dimension")
    p_oracle.add_argument("--g", default="bounded", choices=["bounded", "power", "exp"],
                          help="growth class of the test function")
    p_oracle.add_argument("--s", type=float, default=0.0, help="growth exponent for power/exp")
    p_oracle.add_argument("--eta", type=float, default=None, help="iv-rwm proposal moment index")
    p_oracle.add_argument("--k", type=float, default=None, help="independence proposal decay")
    p_oracle.add_argument("--alpha", type=float, default=None, help="levy-em stable index")
    p_oracle.add_argument("--drift", default=None, choices=["linear", "superlinear"],
                          help="levy-em drift growth (adds the dichotomy classification)")
    p_oracle.set_defaults(fn=_cmd_oracle)

    p_drift = sub.add_parser("drift", help="estimate one-step drifts and fit the exponent")
    p_drift.add_argument("config")
    _add_common(p_drift)
    p_drift.set_defaults(fn=_cmd_drift)

    p_tails = sub.add_parser("tails", help="long trajectory + tail-index (Hill) report")
    p_tails.add_argument("config")
    _add_common(p_tails)
    p_tails.set_defaults(fn=_cmd_tails)

    p_exc = sub.add_parser("excursions", help="excursion durations above a level")
    p_exc.add_argument("config")
    _add_common(p_exc)
    p_exc.set_defaults(fn=_cmd_excursions)

    return parser


def cli_dispatch(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.fn(args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(cli_dispatch())


if __name__ == "__main__":
    main()
