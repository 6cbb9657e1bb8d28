import math

import numpy as np
import pytest
from scipy import stats

from heavytail.kernels import KernelConfig, init_state
from heavytail.rng import RngStream
from heavytail.sphere import (
    SpherePoint,
    sp_forward,
    sp_inverse,
    sphere_log_density,
    sps_propose,
    sps_z_marginal,
    sps_z_marginal_batch,
    step_sps,
)
from heavytail.targets import TargetSpec, log_density


def test_south_pole_maps_to_origin():
    p = SpherePoint(np.array([0.0, 0.0, -1.0]))
    assert np.allclose(sp_forward(p), 0.0)


def test_equator_maps_to_unit_sphere():
    p = SpherePoint(np.array([1.0, 0.0, 0.0]))
    x = sp_forward(p)
    assert np.linalg.norm(x) == pytest.approx(1.0, abs=1e-14)


def test_inverse_formulas():
    p = sp_inverse(np.zeros(2))
    assert np.allclose(p.coords, [0.0, 0.0, -1.0])
    p = sp_inverse(np.array([1.0, 0.0]))
    assert p.z == pytest.approx(0.0, abs=1e-15)
    p = sp_inverse(np.array([1e3, 0.0]))
    assert 1.0 - p.z == pytest.approx(2e-6, rel=0.01)


def test_round_trips():
    rng = np.random.default_rng(0)
    for _ in range(50):
        direction = rng.normal(size=3)
        x = direction / np.linalg.norm(direction) * 10 ** rng.uniform(-1, 6)
        back = sp_forward(sp_inverse(x))
        assert np.max(np.abs(back - x) / (1.0 + np.abs(x))) < 1e-10
    for _ in range(50):
        c = rng.normal(size=4)
        p = SpherePoint(c)
        if 1.0 - p.z < 1e-6:
            continue
        again = sp_inverse(sp_forward(p))
        assert np.max(np.abs(again.coords - p.coords)) < 1e-10


def test_projection_refuses_north_pole():
    with pytest.raises(ValueError):
        sp_forward(SpherePoint(np.array([0.0, 0.0, 1.0])))


def test_propose_stays_on_sphere_and_identity_without_noise():
    rng = RngStream(1, 0)
    p = sp_inverse(np.array([2.0, -1.0]))
    for _ in range(100):
        q = sps_propose(p, 0.7, rng)
        assert abs(np.linalg.norm(q.coords) - 1.0) < 1e-12

    class Zero:
        def normal(self, size=None):
            return np.zeros(size) if size is not None else 0.0

    q = sps_propose(p, 0.7, Zero())
    assert np.allclose(q.coords, p.coords)


def test_acceptance_ratio_equivalence_both_sides():
    # the R^d-side ratio with the (1+|x|^2)^d Jacobian equals the ratio of
    # pulled-back sphere densities
    t = TargetSpec("student_t", 1.5, 3)
    rng = np.random.default_rng(4)
    for _ in range(40):
        x = rng.normal(size=3) * 5
        y = rng.normal(size=3) * 5
        plane = (
            log_density(t, y) + t.d * math.log1p(float(y @ y))
            - log_density(t, x) - t.d * math.log1p(float(x @ x))
        )
        sphere_side = sphere_log_density(t, sp_inverse(y)) - sphere_log_density(t, sp_inverse(x))
        assert plane == pytest.approx(sphere_side, abs=1e-10)


def test_step_sps_cauchy_d1_always_accepts():
    # for the d=1 Cauchy target the pulled-back density is uniform on the circle
    t = TargetSpec("student_t", 1.0, 1)
    cfg = KernelConfig("sps", 1.0)
    state = init_state(t, [0.3])
    rng = RngStream(5, 0)
    for _ in range(500):
        state = step_sps(state, cfg, t, rng)
    assert state.accepts == state.steps == 500
    assert state.log_pi == pytest.approx(log_density(t, state.x), abs=1e-12)


def test_step_sps_acceptance_away_from_zero_uniformly():
    # v >= d regime: acceptance stays away from 0 for starts across scales
    t = TargetSpec("student_t", 2.0, 2)
    cfg = KernelConfig("sps", 1.0 / math.sqrt(2))
    for r0 in (1.0, 10.0, 1e3):
        state = init_state(t, [r0, 0.0])
        rng = RngStream(6, int(r0))
        for _ in range(2000):
            state = step_sps(state, cfg, t, rng)
        assert state.accepts / state.steps > 0.2


def test_z_marginal_range_and_identity():
    rng = RngStream(7, 0)
    for _ in range(1000):
        z = sps_z_marginal(0.95, 1.0, 4, rng)
        assert -1.0 < z < 1.0

    class Zero:
        def normal(self, size=None):
            return 0.0

        def chisquare(self, df, size=None):
            return 0.0

    assert sps_z_marginal(0.4, 2.0, 3, Zero()) == pytest.approx(0.4, abs=1e-15)


def test_z_marginal_matches_full_proposal_z_coordinate():
    # the closed-form last-coordinate law agrees with projecting the full
    # tangent-space proposal
    d, h, z0 = 3, 0.8, 0.6
    x0 = math.sqrt((1 + z0) / (1 - z0))  # |x| with z(x) = z0
    p = sp_inverse(np.array([x0] + [0.0] * (d - 1)))
    assert p.z == pytest.approx(z0, abs=1e-12)
    rng = RngStream(8, 0)
    n = 200_000
    direct = np.array([sps_propose(p, h, rng).z for _ in range(n)])
    marginal = sps_z_marginal_batch(z0, h, d, RngStream(8, 1), n)
    ks = stats.ks_2samp(direct, marginal).statistic
    assert ks < 0.01


@pytest.mark.parametrize("d", [1, 2, 4])
@pytest.mark.parametrize("z0", [0.9, 0.95])
def test_z_marginal_two_sided_tail_band(d, z0):
    # P(Z > a) / (1-a)^(d/2) stays within a fixed factor band over the deep tail
    rng = RngStream(9, 10 * d + int(100 * z0))
    n = 10_000_000 if d == 4 else 2_000_000  # deep-tail counts scale like (1-a)^(d/2)
    z = sps_z_marginal_batch(z0, 1.0, d, rng, n)
    for a in (0.97, 0.99, 0.999):
        ratio = float((z > a).mean()) / (1 - a) ** (d / 2)
        assert 0.2 < ratio < 5.0


def test_z_marginal_validation():
    rng = RngStream(0, 0)
    with pytest.raises(ValueError):
        sps_z_marginal(1.0, 1.0, 2, rng)
    with pytest.raises(ValueError):
        sps_z_marginal(0.5, 1.0, 0, rng)
