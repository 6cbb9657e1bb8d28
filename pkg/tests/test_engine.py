"""The block drivers must implement exactly the single-step semantics.

Each block kernel is replayed against the reference step functions on the same
injected variates; collectors are checked against brute-force recomputation.
"""

import math

import numpy as np
import pytest

from heavytail.diagnostics import TestFunctionSpec
from heavytail.drift import LyapunovSpec
from heavytail.engine import (
    ErgodicAverageCollector,
    ExcursionCollector,
    StrideNormCollector,
    ThinnedCollector,
    _is_block,
    _levy_block,
    _mala_block,
    _rwm_block,
    _sps_block,
    _ula_block,
    run_chain,
)
from heavytail.kernels import KernelConfig, init_state, step_mala, step_rwm, step_ula
from heavytail.sphere import step_sps
from heavytail.rng import RngStream
from heavytail.targets import TargetSpec, log_density
from test_kernels import ReplayStream


def _flat_normals(noise):
    return [float(v) for v in noise.ravel()]


@pytest.mark.parametrize("kind,v,d", [("student_t", 1.0, 1), ("exponential", 2.0, 3)])
def test_rwm_block_replays_single_steps(kind, v, d):
    t = TargetSpec(kind, v, d)
    cfg = KernelConfig("rwm_gaussian", 1.7)
    B = 64
    gen = np.random.default_rng(0)
    normals = gen.normal(size=(B, d))
    unifs = gen.random(B)

    state = init_state(t, np.full(d, 0.5))
    replay = ReplayStream(normals=_flat_normals(normals), uniforms=list(unifs))
    for _ in range(B):
        state = step_rwm(state, cfg, t, replay)

    x = np.full(d, 0.5)
    xnorm = np.empty(B)
    x1 = np.empty(B)
    logpi, acc = _rwm_block(
        x, log_density(t, x), cfg.h * normals, unifs, 1 if kind == "exponential" else 0,
        v, 1.0, xnorm, x1,
    )
    assert acc == state.accepts
    assert np.allclose(x, state.x, atol=1e-13)
    assert logpi == pytest.approx(state.log_pi, abs=1e-12)
    assert xnorm[-1] == pytest.approx(np.linalg.norm(state.x), abs=1e-13)


def test_mala_block_replays_single_steps():
    t = TargetSpec("student_t", 3.0, 2)
    cfg = KernelConfig("mala", 0.4)
    B = 64
    gen = np.random.default_rng(1)
    normals = gen.normal(size=(B, 2))
    unifs = gen.random(B)

    state = init_state(t, np.array([1.0, -2.0]), with_grad=True)
    replay = ReplayStream(normals=_flat_normals(normals), uniforms=list(unifs))
    for _ in range(B):
        state = step_mala(state, cfg, t, replay)

    x = np.array([1.0, -2.0])
    xnorm = np.empty(B)
    x1 = np.empty(B)
    gcoeff = -(t.v + t.d) / (t.v + float(x @ x))
    logpi, gcoeff, acc = _mala_block(
        x, log_density(t, x), gcoeff, math.sqrt(2 * cfg.h) * normals, unifs,
        0, t.v, 1.0, cfg.h, xnorm, x1,
    )
    assert acc == state.accepts
    assert np.allclose(x, state.x, atol=1e-12)
    assert logpi == pytest.approx(state.log_pi, abs=1e-11)


def test_ula_block_replays_single_steps():
    t = TargetSpec("exponential", 1.5, 2)
    cfg = KernelConfig("ula", 0.15)
    B = 50
    gen = np.random.default_rng(2)
    normals = gen.normal(size=(B, 2))

    state = init_state(t, np.array([0.2, 0.8]), with_grad=True)
    replay = ReplayStream(normals=_flat_normals(normals))
    for _ in range(B):
        state = step_ula(state, cfg, t, replay)

    x = np.array([0.2, 0.8])
    xnorm = np.empty(B)
    x1 = np.empty(B)
    _ula_block(x, math.sqrt(2 * cfg.h) * normals, 1, t.v, 1.0, cfg.h, xnorm, x1)
    assert np.allclose(x, state.x, atol=1e-12)
    assert x1[-1] == pytest.approx(state.x[0], abs=1e-13)


def test_sps_block_replays_single_steps():
    t = TargetSpec("student_t", 1.0, 2)
    cfg = KernelConfig("sps", 0.8)
    B = 64
    gen = np.random.default_rng(3)
    normals = gen.normal(size=(B, 3))
    unifs = gen.random(B)

    state = init_state(t, np.array([2.0, -0.5]))
    replay = ReplayStream(normals=_flat_normals(normals), uniforms=list(unifs))
    for _ in range(B):
        state = step_sps(state, cfg, t, replay)

    x = np.array([2.0, -0.5])
    xnorm = np.empty(B)
    x1 = np.empty(B)
    logpi, acc = _sps_block(
        x, log_density(t, x), cfg.h * normals, unifs, 0, t.v, 1.0, 1e-14, xnorm, x1
    )
    assert acc == state.accepts
    assert np.allclose(x, state.x, atol=1e-10)
    assert logpi == pytest.approx(state.log_pi, abs=1e-10)


def test_is_block_against_reference_loop():
    t = TargetSpec("polynomial", 3.0, 1)
    k = 2.0
    B = 200
    gen = np.random.default_rng(4)
    props = gen.standard_t(df=2, size=(B, 1))
    logq = np.array([-0.5 * (k + 1) * math.log1p(p[0] ** 2 / k) for p in props])
    unifs = gen.random(B)

    # reference: plain python Metropolis on the same proposals
    x_ref, lp_ref = 5.0, log_density(t, [5.0])
    lq_ref = -0.5 * (k + 1) * math.log1p(x_ref**2 / k)
    acc_ref = 0
    for b in range(B):
        lp_y = log_density(t, props[b])
        if math.log(unifs[b]) < (lp_y - logq[b]) - (lp_ref - lq_ref):
            x_ref, lp_ref, lq_ref = props[b, 0], lp_y, logq[b]
            acc_ref += 1

    x = np.array([5.0])
    xnorm = np.empty(B)
    x1 = np.empty(B)
    lq_start = -0.5 * (k + 1) * math.log1p(25.0 / k)
    logpi, logq_x, acc = _is_block(
        x, log_density(t, [5.0]), lq_start, props, logq, unifs, 0, t.v, 1.0, xnorm, x1
    )
    assert acc == acc_ref
    assert x[0] == pytest.approx(x_ref, abs=1e-13)


def test_levy_block_formula_and_early_stop():
    B = 10
    noise = np.zeros((B, 1))
    x = np.array([4.0])
    xnorm = np.empty(B)
    x1 = np.empty(B)
    # linear drift, h = 0.5: x -> x/2 each step with zero noise
    taken = _levy_block(x, noise, 0.5, False, 0.0, 1e6, xnorm, x1)
    assert taken == B
    assert x[0] == pytest.approx(4.0 * 0.5**B)
    # superlinear drift from a distant start overshoots and diverges
    x = np.array([100.0])
    taken = _levy_block(x, np.zeros((50, 1)), 0.1, True, 1.0, 1e6, np.empty(50), np.empty(50))
    assert taken < 50


def test_run_chain_is_reproducible():
    t = TargetSpec("student_t", 2.0, 2)
    cfg = KernelConfig("rwm_gaussian", 1.5)
    a = run_chain(t, cfg, np.zeros(2), 70_000, RngStream(5, 3))
    b = run_chain(t, cfg, np.zeros(2), 70_000, RngStream(5, 3))
    assert np.array_equal(a.x, b.x)
    assert a.accepts == b.accepts
    assert a.log_pi == pytest.approx(log_density(t, a.x), abs=1e-12)


def test_ergodic_collector_matches_batch_mean():
    t = TargetSpec("student_t", 3.0, 1)
    cfg = KernelConfig("ula", 0.1)
    g = TestFunctionSpec("power_norm", s=1.0)
    n, burn = 100_000, 33_333
    col = ErgodicAverageCollector(g, burn)
    trace = ThinnedCollector(1)  # full trajectory of first coordinates
    run_chain(t, cfg, np.zeros(1), n, RngStream(6, 0), [col, trace])
    batch = np.abs(trace.samples[burn:]).mean()
    assert col.value == pytest.approx(batch, abs=1e-12)
    assert col.count == n - burn


def test_thinned_collector_indices():
    t = TargetSpec("student_t", 3.0, 1)
    cfg = KernelConfig("ula", 0.1)
    full = ThinnedCollector(1)
    every7 = ThinnedCollector(7)
    run_chain(t, cfg, np.zeros(1), 10_000, RngStream(7, 0), [full, every7])
    # kept steps are k = 7, 14, ... (1-based), i.e. 0-based positions 6, 13, ...
    assert np.array_equal(every7.samples, full.samples[6::7])


def test_stride_collector_with_burn_in():
    t = TargetSpec("student_t", 3.0, 1)
    cfg = KernelConfig("ula", 0.1)
    full = ThinnedCollector(1)
    sub = StrideNormCollector(10, n_burn=5_000)
    run_chain(t, cfg, np.zeros(1), 20_000, RngStream(8, 0), [full, sub])
    # first kept step after burn-in 5000 is step 5010 (0-based index 5009)
    expect = np.abs(full.samples)[5_009::10]
    assert np.allclose(sub.samples, expect)


def test_excursion_collector_against_brute_force():
    gen = np.random.default_rng(9)
    xnorm = np.exp(gen.normal(size=25_000) * 2)  # plenty of crossings of 5
    V = LyapunovSpec("abs_norm")
    col = ExcursionCollector(V, 5.0)
    # feed in unequal chunks to exercise boundary carries
    i = 0
    for size in (1, 7, 500, 3, 9000, 1, 15_487, 1):
        col.update(xnorm[i : i + size], xnorm[i : i + size], i)
        i += size
    durations, open_run = col.finish()

    above = np.maximum(xnorm, 1.0) > 5.0
    runs = []
    count = 0
    for flag in above:
        if flag:
            count += 1
        elif count:
            runs.append(count)
            count = 0
    assert np.array_equal(durations, np.array(runs, dtype=np.int64))
    assert open_run == count
    assert durations.sum() + open_run + (~above).sum() == len(xnorm)


def test_divergence_detection_levy_superlinear():
    cfg = KernelConfig("levy_em", 0.1, levy_alpha=1.5, drift_kind="superlinear", drift_delta=2.0)
    out = run_chain(None, cfg, np.zeros(1), 100_000, RngStream(10, 0), stop_norm=1e6)
    assert out.diverged_at is not None
    assert out.steps == out.diverged_at
