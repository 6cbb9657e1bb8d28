"""Ergodic-average statistics, QQ standardization, normality and tail estimators.

The standardization pipeline follows the replicate protocol: run N independent
chains, discard the first third of each as burn-in, and compare the empirical
quantiles of the N ergodic averages against a Gaussian fitted to the same
replicates.  Note the replicate-based scaling: Z_i = (S_i - mean) / std of the
averages themselves.  (Scaling by sqrt(n) against a variance estimated across
replicates would be dimensionally inconsistent; QQ shape is affine-invariant,
so this choice changes nothing in the plots.)
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats as sps_stats

INDICATOR_NORM_GE = "indicator_norm_ge"
POWER_NORM = "power_norm"
ABS_FIRST_COORD = "abs_first_coord"


@dataclass(frozen=True)
class TestFunctionSpec:
    """Test function g for ergodic averages; a function of |x| and x_1 only."""

    kind: str
    threshold: float = 0.0  # indicator_norm_ge
    s: float = 1.0          # power_norm exponent

    def __post_init__(self):
        if self.kind not in (INDICATOR_NORM_GE, POWER_NORM, ABS_FIRST_COORD):
            raise ValueError(f"unknown test function kind {self.kind!r}")
        if self.kind == INDICATOR_NORM_GE and not self.threshold > 0:
            raise ValueError("indicator threshold must be positive")
        if self.kind == POWER_NORM and self.s < 0:
            raise ValueError("power exponent must be >= 0")

    def eval_blocks(self, xnorm: np.ndarray, x1: np.ndarray) -> np.ndarray:
        if self.kind == INDICATOR_NORM_GE:
            return (xnorm >= self.threshold).astype(float)
        if self.kind == POWER_NORM:
            return xnorm**self.s
        return np.abs(x1)


def eval_test_function(g: TestFunctionSpec, x) -> float:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    r = float(np.linalg.norm(x))
    return float(g.eval_blocks(np.array([r]), np.array([x[0]]))[0])


def _neumaier_add(total: float, comp: float, value: float):
    t = total + value
    if abs(total) >= abs(value):
        comp += (total - t) + value
    else:
        comp += (value - t) + total
    return t, comp


def ergodic_average(states, g: TestFunctionSpec, n_total: int, n_burn: int) -> float:
    """Streaming post-burn-in mean of g over exactly ``n_total`` states.

    ``states`` yields chain positions (vectors); the first ``n_burn`` are
    discarded.  Summation is compensated, so the result matches a two-pass
    batch mean to ~1e-15 relative error without materializing the trajectory.
    """
    if not n_burn < n_total:
        raise ValueError("empty post-burn-in window")
    total = comp = 0.0
    seen = 0
    for x in states:
        seen += 1
        if seen > n_total:
            break
        if seen <= n_burn:
            continue
        total, comp = _neumaier_add(total, comp, eval_test_function(g, x))
    if seen < n_total:
        raise ValueError(f"stream ended after {seen} states, expected {n_total}")
    return (total + comp) / (n_total - n_burn)


@dataclass
class QQData:
    empirical_quantiles: np.ndarray
    theoretical_quantiles: np.ndarray
    mu_hat: float
    sigma_hat: float


def standardize(averages) -> QQData:
    """Standardize replicate averages and pair them with normal quantiles."""
    a = np.asarray(averages, dtype=float)
    if a.ndim != 1 or len(a) < 2:
        raise ValueError("need at least 2 replicate averages")
    mu = float(np.mean(a))
    sigma = float(np.std(a, ddof=1))
    if sigma == 0.0:
        raise ValueError("replicate averages have zero variance")
    z = np.sort((a - mu) / sigma)
    n = len(a)
    theo = sps_stats.norm.ppf((np.arange(1, n + 1) - 0.5) / n)
    return QQData(z, theo, mu, sigma)


def normality_stats(z) -> tuple[float, float]:
    """(bias-corrected excess kurtosis, Anderson-Darling A^2 vs fitted normal)."""
    z = np.asarray(z, dtype=float)
    n = len(z)
    if n < 8:
        raise ValueError(f"need at least 8 values, got {n}")
    m2 = float(np.var(z))
    if m2 == 0.0:
        raise ValueError("degenerate sample: zero variance")
    m4 = float(np.mean((z - np.mean(z)) ** 4))
    g2 = m4 / (m2 * m2) - 3.0
    kurt = ((n - 1) / ((n - 2) * (n - 3))) * ((n + 1) * g2 + 6.0)
    a2 = float(sps_stats.anderson(z, dist="norm").statistic)
    return kurt, a2


def hill_estimator(samples, k: int) -> float:
    """Hill tail-index estimate from the top ``k`` order statistics."""
    x = np.asarray(samples, dtype=float)
    n = len(x)
    if k >= n:
        raise ValueError(f"k = {k} must be smaller than the sample size {n}")
    if k < 10:
        raise ValueError(f"k must be at least 10, got {k}")
    if np.any(x <= 0):
        raise ValueError("Hill estimator requires strictly positive samples")
    top = np.partition(x, n - k - 1)[n - k - 1 :]  # X_(n-k) and the k above it
    top.sort()
    denom = float(np.sum(np.log(top[1:]))) - k * math.log(top[0])
    if denom <= 0.0:
        raise ValueError("degenerate tail: all top order statistics equal")
    return k / denom


@dataclass
class HillReport:
    estimate: float            # median Hill estimate over the detected plateau
    k_values: np.ndarray
    estimates: np.ndarray
    plateau: bool              # False signals no stable plateau (light tail)
    plateau_slice: tuple
    k_default: int

    @property
    def light_tail(self) -> bool:
        return not self.plateau


# relative spread of the flattest window above which no plateau is declared
_PLATEAU_SPREAD = 0.25


def hill_report(samples, n_grid: int = 15) -> HillReport:
    """Hill estimate with a plateau scan over k in [n^0.4, n^0.7].

    The reported index is the median over the largest-k half of the scan,
    where the thresholds are lowest and best resolved; a polynomial tail
    stabilizes there, so that window drifting (relative spread beyond a fixed
    band) flags a tail lighter than any polynomial.  Small-k values are kept
    for inspection but never enter the estimate: for correlated chains the
    deep-tail order statistics are dominated by a handful of excursions.
    """
    x = np.asarray(samples, dtype=float)
    n = len(x)
    k_lo = max(10, int(n**0.4))
    k_hi = max(k_lo + 1, min(n - 1, int(n**0.7)))
    ks = np.unique(np.geomspace(k_lo, k_hi, n_grid).astype(int))
    ests = np.array([hill_estimator(x, int(k)) for k in ks])
    width = max(2, (len(ks) + 1) // 2)
    window = ests[-width:]
    med = float(np.median(window))
    spread = float((window.max() - window.min()) / med) if med > 0 else math.inf
    return HillReport(
        estimate=med,
        k_values=ks,
        estimates=ests,
        plateau=spread < _PLATEAU_SPREAD,
        plateau_slice=(len(ks) - width, len(ks)),
        k_default=min(n - 1, max(10, int(n**0.6))),
    )


TV_BINNED = "tv_binned"
W1_SORTED = "w1_sorted"


def distance_1d(samples_a, samples_b, metric: str = W1_SORTED, bins: int = 64) -> float:
    """Empirical 1-d distance between two samples.

    ``tv_binned``: half L1 distance of bin proportions over shared quantile
    bins of the pooled sample.  ``w1_sorted``: mean absolute difference of
    matched quantiles (equal sizes: plain sorted-sample matching, exact).
    """
    a = np.asarray(samples_a, dtype=float)
    b = np.asarray(samples_b, dtype=float)
    if len(a) == 0 or len(b) == 0:
        raise ValueError("distance_1d: empty sample")
    if metric == TV_BINNED:
        pooled = np.concatenate([a, b])
        edges = np.quantile(pooled, np.linspace(0.0, 1.0, bins + 1))
        edges[0], edges[-1] = -np.inf, np.inf
        edges = np.unique(edges)
        pa, _ = np.histogram(a, bins=edges)
        pb, _ = np.histogram(b, bins=edges)
        return 0.5 * float(np.abs(pa / len(a) - pb / len(b)).sum())
    if metric == W1_SORTED:
        if len(a) == len(b):
            return float(np.mean(np.abs(np.sort(a) - np.sort(b))))
        m = min(len(a), len(b))
        probs = (np.arange(m) + 0.5) / m
        qa = np.quantile(a, probs)
        qb = np.quantile(b, probs)
        return float(np.mean(np.abs(qa - qb)))
    raise ValueError(f"unknown metric {metric!r}")


def ks_distance(samples, cdf) -> float:
    """Kolmogorov-Smirnov distance of a sample to a CDF callable."""
    x = np.sort(np.asarray(samples, dtype=float))
    n = len(x)
    if n == 0:
        raise ValueError("empty sample")
    f = np.array([cdf(v) for v in x])
    upper = np.max(np.arange(1, n + 1) / n - f)
    lower = np.max(f - np.arange(0, n) / n)
    return float(max(upper, lower))
