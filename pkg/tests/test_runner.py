import json
import math
import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from heavytail.cli import cli_dispatch
from heavytail.runner import (
    ConfigError,
    ExperimentConfig,
    load_config,
    run_ensemble,
    run_experiment,
)

SMOKE = """
[target]
kind = "student_t"
v = 3.0
d = 1

[kernel]
algorithm = "rwm_gaussian"
h = 2.4

[g]
kind = "indicator_norm_ge"
threshold = 2.0

[run]
chains = 4
steps = 1000
seed = 99
output_dir = "{out}"
"""


def _write_smoke(tmp_path, name="cfg.toml", **extra) -> Path:
    out = tmp_path / "results"
    text = SMOKE.format(out=str(out).replace("\\", "/"))
    for block in extra.values():
        text += "\n" + block
    p = tmp_path / name
    p.write_text(text)
    return p


def test_load_config_defaults_and_overrides(tmp_path):
    p = _write_smoke(tmp_path)
    cfg, _ = load_config(p)
    assert cfg.chains_n == 4 and cfg.steps_n == 1000 and cfg.seed == 99
    cfg, _ = load_config(p, seed=7, scale=2.0, threads=3)
    assert cfg.seed == 7 and cfg.chains_n == 8 and cfg.steps_n == 2000 and cfg.threads == 3


def test_load_config_missing_file():
    with pytest.raises(ConfigError):
        load_config("missing.toml")


def test_load_config_unknown_algorithm(tmp_path):
    p = tmp_path / "bad.toml"
    p.write_text(SMOKE.format(out="o").replace("rwm_gaussian", "nuts"))
    with pytest.raises(ConfigError) as err:
        load_config(p)
    assert "algorithm" in str(err.value)


def test_load_config_bad_init_length(tmp_path):
    p = tmp_path / "bad.toml"
    p.write_text(SMOKE.format(out="o") + "\n")
    text = p.read_text().replace('seed = 99', 'seed = 99\ninit = [1.0, 2.0]')
    p.write_text(text)
    with pytest.raises(ConfigError) as err:
        load_config(p)
    assert "init" in str(err.value)


def test_run_ensemble_thread_count_invariance(tmp_path):
    p = _write_smoke(tmp_path)
    cfg1, _ = load_config(p, threads=1)
    cfg8, _ = load_config(p, threads=8)
    r1 = run_ensemble(cfg1)
    r8 = run_ensemble(cfg8)
    assert np.array_equal(r1.averages, r8.averages)
    assert np.array_equal(r1.accept_rates, r8.accept_rates)


def test_run_ensemble_chains_differ():
    from heavytail.diagnostics import TestFunctionSpec
    from heavytail.kernels import KernelConfig
    from heavytail.targets import TargetSpec

    cfg = ExperimentConfig(
        target=TargetSpec("student_t", 3.0, 1),
        kernel=KernelConfig("rwm_gaussian", 2.4),
        g=TestFunctionSpec("power_norm", s=1.0),
        chains_n=6,
        steps_n=2000,
        seed=1,
        threads=1,
    )
    res = run_ensemble(cfg)
    assert len(set(res.averages)) == 6  # independent streams
    assert np.all((res.accept_rates > 0) & (res.accept_rates <= 1))


def test_run_ensemble_divergence_flagged():
    from heavytail.diagnostics import TestFunctionSpec
    from heavytail.kernels import KernelConfig
    from heavytail.targets import TargetSpec

    cfg = ExperimentConfig(
        target=TargetSpec("student_t", 1.0, 1),  # placeholder; levy ignores it
        kernel=KernelConfig("levy_em", 0.1, levy_alpha=1.5,
                            drift_kind="superlinear", drift_delta=2.0),
        g=TestFunctionSpec("power_norm", s=1.0),
        chains_n=3,
        steps_n=100_000,
        seed=3,
        threads=1,
    )
    res = run_ensemble(cfg)
    assert all(d is not None for d in res.diverged_at)
    assert np.all(np.isnan(res.averages))
    assert len(res.valid_averages) == 0


def test_run_experiment_artifacts(tmp_path):
    p = _write_smoke(tmp_path)
    outdir = run_experiment(p, threads=1)
    for name in ("averages.csv", "qq.csv", "summary.json", "manifest.json"):
        assert (outdir / name).exists(), name
    lines = (outdir / "averages.csv").read_text().splitlines()
    assert lines[0] == "chain_id,average,accept_rate,flag"
    assert len(lines) == 5
    summary = json.loads((outdir / "summary.json").read_text())
    assert summary["schema"] == 1
    assert summary["N"] == 4 and summary["n"] == 1000
    manifest = json.loads((outdir / "manifest.json").read_text())
    assert manifest["complete"] is True
    assert manifest["config_hash"] == summary["config_hash"]
    assert manifest["seed_layout"]["key"] == ["seed", "chain_index"]


def test_run_experiment_byte_identical_reruns(tmp_path):
    p = _write_smoke(tmp_path)
    out1 = run_experiment(p, threads=1, out=str(tmp_path / "a"))
    out2 = run_experiment(p, threads=8, out=str(tmp_path / "b"))
    assert (out1 / "averages.csv").read_bytes() == (out2 / "averages.csv").read_bytes()
    assert (out1 / "qq.csv").read_bytes() == (out2 / "qq.csv").read_bytes()


def test_cli_run_and_exit_codes(tmp_path, capsys):
    p = _write_smoke(tmp_path)
    assert cli_dispatch(["run", str(p), "--threads", "1"]) == 0
    capsys.readouterr()
    assert cli_dispatch(["run", str(tmp_path / "nope.toml")]) == 2
    err = capsys.readouterr().err
    assert "nope.toml" in err


def test_cli_unknown_algorithm_names_field(tmp_path, capsys):
    p = tmp_path / "bad.toml"
    p.write_text(SMOKE.format(out=str(tmp_path / "o")).replace("rwm_gaussian", "hmc"))
    assert cli_dispatch(["run", str(p)]) == 2
    assert "algorithm" in capsys.readouterr().err


def test_cli_oracle_json(capsys):
    code = cli_dispatch(["oracle", "--alg", "sps", "--v", "1", "--d", "4", "--g", "bounded"])
    assert code == 0
    out = json.loads(capsys.readouterr().out)
    assert out["verdict"]["status"] == "fails"
    assert out["verdict"]["citation"].startswith("clt:sps")
    assert out["rate"]["tv_exponent"] == pytest.approx(1 / 3)


def test_cli_oracle_levy_classification(capsys):
    code = cli_dispatch([
        "oracle", "--alg", "levy-em", "--alpha", "1.5", "--v", "1", "--d", "1",
        "--drift", "superlinear",
    ])
    assert code == 0
    out = json.loads(capsys.readouterr().out)
    assert out["classification"]["kind"] == "transient"


def test_cli_help_and_unknown_subcommand(capsys):
    assert cli_dispatch(["--help"]) == 0
    capsys.readouterr()
    assert cli_dispatch(["frobnicate"]) == 2


def test_cli_entry_point_subprocess(tmp_path):
    env = dict(os.environ, PYTHONPATH="src")
    proc = subprocess.run(
        [sys.executable, "-m", "heavytail.cli", "oracle", "--alg", "fv-rwm",
         "--v", "1", "--d", "20", "--g", "bounded"],
        capture_output=True, text=True, cwd=Path(__file__).resolve().parent.parent, env=env,
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["verdict"]["status"] == "fails"


def test_cli_drift_subcommand(tmp_path, capsys):
    p = _write_smoke(
        tmp_path,
        drift="""
[drift]
f = "reciprocal"
probes = [10.0, 20.0, 40.0]
samples = 2000
""",
    )
    assert cli_dispatch(["drift", str(p), "--threads", "1"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["fit"]["slope"] < 0
    saved = json.loads((tmp_path / "results" / "drift_fit.json").read_text())
    assert saved["fit"] == out["fit"]
    lines = (tmp_path / "results" / "drift.csv").read_text().splitlines()
    assert lines[0] == "probe_norm,f_kind,mean,stderr,samples"
    assert len(lines) == 4


def test_cli_tails_subcommand(tmp_path, capsys):
    p = _write_smoke(
        tmp_path,
        tails="""
[tails]
steps = 200000
stride = 10
level = 10.0
""",
    )
    assert cli_dispatch(["tails", str(p), "--threads", "1"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["subsample_size"] > 10_000
    assert out["exceedances"] > 0
    assert (tmp_path / "results" / "hill.csv").exists()
    assert (tmp_path / "results" / "tails.json").exists()
    exceed = (tmp_path / "results" / "exceedances.csv").read_text().splitlines()
    assert exceed[0] == "norm"
    assert all(float(v) > 10.0 for v in exceed[1:])


def test_cli_excursions_subcommand(tmp_path, capsys):
    p = _write_smoke(
        tmp_path,
        exc="""
[excursions]
ell = 5.0
steps = 100000
""",
    )
    assert cli_dispatch(["excursions", str(p), "--threads", "1"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["excursions"] > 0
    assert out["excursions"] * 1 + out["censored_steps"] <= out["total_steps"]
    assert (tmp_path / "results" / "duration_counts.csv").exists()


def test_crash_safety_no_manifest_before_completion(tmp_path):
    # a prior manifest must be removed before recomputation starts
    p = _write_smoke(tmp_path)
    outdir = run_experiment(p, threads=1)
    assert (outdir / "manifest.json").exists()
    # simulate a stale manifest surviving into a new run directory
    (outdir / "manifest.json").write_text("{}")
    outdir2 = run_experiment(p, threads=1)
    manifest = json.loads((outdir2 / "manifest.json").read_text())
    assert manifest["complete"] is True


def test_env_threads_fallback(tmp_path, monkeypatch):
    from heavytail.runner import resolve_threads

    monkeypatch.setenv("HEAVYTAIL_THREADS", "3")
    assert resolve_threads(0) == 3
    monkeypatch.delenv("HEAVYTAIL_THREADS")
    assert resolve_threads(5) == 5
