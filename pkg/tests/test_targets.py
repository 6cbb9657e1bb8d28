import math

import numpy as np
import pytest
from scipy import stats

from heavytail.targets import (
    TargetSpec,
    cdf_1d,
    grad_log_density,
    log_density,
    log_density_rows,
    tail_index,
)


def test_student_t_closed_forms():
    assert log_density(TargetSpec("student_t", 1.0, 1), [0.0]) == 0.0
    val = log_density(TargetSpec("student_t", 3.0, 1), [math.sqrt(3.0)])
    assert val == pytest.approx(-2.0 * math.log(2.0), abs=1e-12)


def test_exponential_tail_value():
    t = TargetSpec("exponential", 2.0, 1)
    # -v * sqrt(1 + x^2): asymptotically -v|x| with a vanishing smooth-core offset
    assert log_density(t, [5.0]) == pytest.approx(-2.0 * math.sqrt(26.0), abs=1e-12)
    assert log_density(t, [5.0]) == pytest.approx(-10.0, abs=0.2)
    assert log_density(t, [1e6]) == pytest.approx(-2e6, rel=1e-9)


def test_log_density_validation():
    t = TargetSpec("student_t", 1.0, 2)
    with pytest.raises(ValueError):
        log_density(t, [1.0])
    with pytest.raises(ValueError):
        log_density(t, [1.0, math.nan])
    with pytest.raises(ValueError):
        grad_log_density(t, [1.0, 2.0, 3.0])


def test_spec_validation():
    with pytest.raises(ValueError):
        TargetSpec("student_t", -1.0, 1)
    with pytest.raises(ValueError):
        TargetSpec("student_t", 1.0, 0)
    with pytest.raises(ValueError):
        TargetSpec("gaussian", 1.0, 1)


def test_gradient_closed_forms():
    t = TargetSpec("student_t", 1.0, 1)
    assert grad_log_density(t, [1.0])[0] == pytest.approx(-1.0, abs=1e-14)
    for d in (1, 3):
        t = TargetSpec("student_t", 2.0, d)
        assert np.allclose(grad_log_density(t, np.zeros(d)), 0.0)


@pytest.mark.parametrize("kind", ["student_t", "polynomial", "exponential"])
@pytest.mark.parametrize("v,d,scale", [(1.0, 1, 1.0), (3.0, 2, 1.0), (2.5, 4, 2.0)])
def test_gradient_matches_finite_differences(kind, v, d, scale):
    t = TargetSpec(kind, v, d, scale)
    rng = np.random.default_rng(5)
    eps = 1e-5
    for _ in range(100):
        x = rng.normal(size=d) * rng.choice([0.5, 2.0, 20.0])
        g = grad_log_density(t, x)
        fd = np.empty(d)
        for j in range(d):
            e = np.zeros(d)
            e[j] = eps
            fd[j] = (log_density(t, x + e) - log_density(t, x - e)) / (2 * eps)
        assert np.max(np.abs(g - fd) / (1.0 + np.abs(g))) < 1e-6


@pytest.mark.parametrize("kind", ["student_t", "polynomial"])
def test_tail_exponent_slope(kind):
    # slope of log pi along a ray over |x| in [1e2, 1e6] is exactly -(v+d)
    t = TargetSpec(kind, 1.5, 3)
    rs = np.geomspace(1e2, 1e6, 9)
    vals = np.array([log_density(t, np.array([r, 0.0, 0.0])) for r in rs])
    slope = np.polyfit(np.log(rs), vals, 1)[0]
    assert slope == pytest.approx(-(t.v + t.d), abs=1e-3)


def test_radial_symmetry_under_rotation():
    rng = np.random.default_rng(11)
    for kind in ("student_t", "exponential"):
        t = TargetSpec(kind, 2.0, 3)
        for _ in range(20):
            x = rng.normal(size=3) * 5
            q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
            assert log_density(t, q @ x) == pytest.approx(log_density(t, x), abs=1e-12)


def test_tail_index_projection():
    assert tail_index(TargetSpec("student_t", 1.0, 20)) == 1.0
    assert tail_index(TargetSpec("student_t", 3.0, 1)) == 3.0
    assert tail_index(TargetSpec("polynomial", 2.5, 4)) == 2.5


def test_cdf_cauchy_closed_form():
    c = TargetSpec("student_t", 1.0, 1)
    assert cdf_1d(c, 0.0) == 0.5
    assert cdf_1d(c, 1.0) == pytest.approx(0.5 + math.atan(1.0) / math.pi, abs=1e-9)
    assert cdf_1d(c, -1.0) == pytest.approx(0.25, abs=1e-9)


def test_cdf_matches_scipy_student_t():
    t = TargetSpec("student_t", 3.0, 1)
    assert cdf_1d(t, 0.0) == 0.5
    for x in (-2.0, -0.3, 0.7, 5.0, 50.0):
        assert cdf_1d(t, x) == pytest.approx(stats.t.cdf(x, df=3), abs=1e-8)


def test_cdf_monotone_and_limits():
    t = TargetSpec("exponential", 1.5, 1)
    xs = np.linspace(-20, 20, 41)
    vals = [cdf_1d(t, x) for x in xs]
    assert all(b >= a for a, b in zip(vals, vals[1:]))
    assert cdf_1d(t, 1e8) == pytest.approx(1.0, abs=1e-7)
    assert cdf_1d(t, -1e8) == pytest.approx(0.0, abs=1e-7)


def test_cdf_requires_dimension_one():
    with pytest.raises(ValueError):
        cdf_1d(TargetSpec("student_t", 1.0, 2), 0.0)


def test_rows_helpers_match_scalar():
    t = TargetSpec("exponential", 2.0, 3, scale=1.5)
    rng = np.random.default_rng(3)
    xs = rng.normal(size=(50, 3)) * 10
    rows = log_density_rows(t, xs)
    for i in range(50):
        assert rows[i] == pytest.approx(log_density(t, xs[i]), rel=1e-13)
