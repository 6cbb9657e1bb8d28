"""Numerical verification of one-step drift behaviour.

For a Lyapunov function V and a kernel P, the quantities of interest are the
one-step drifts P f - f at probe points for f = 1/V (whose decay exponent in
|probe| identifies the return-time behaviour) and f = Psi(V) (whose positive
drift certifies the submartingale property behind tail-excursion lower bounds).

Everything here is directional (sign and exponent), not constant-sharp: the
registry constants are existential.  The epsilon slack in polynomial Psi
exponents is fixed to 0.5 (mid-interval) for all numerical checks.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels as K
from .engine import ExcursionCollector, _draw_is_proposals, run_chain
from .oracle import (
    ALG_FV_RWM,
    ALG_INDEPENDENCE,
    ALG_IV_RWM,
    ALG_LEVY_EM,
    ALG_MALA,
    ALG_SPS,
    ALG_ULA,
    AlgorithmId,
)
from .rng import RngStream
from .targets import (
    EXPONENTIAL,
    TargetSpec,
    grad_coeff_sq_rows,
    grad_log_density,
    log_density,
    log_density_sq_rows,
)

ABS_NORM = "abs_norm"
LOG_NORM = "log_norm"
SPHERE_GAMMA = "sphere_gamma"

POLYNOMIAL_GROWTH = "polynomial"
EXPONENTIAL_GROWTH = "exponential"

# mid-interval choice of the epsilon slack in polynomial Psi exponents
PSI_EPS = 0.5


@dataclass(frozen=True)
class LyapunovSpec:
    """V >= 1 as a function of |x| (or of the sphere height via |x|)."""

    kind: str
    gamma: Optional[float] = None

    def __post_init__(self):
        if self.kind not in (ABS_NORM, LOG_NORM, SPHERE_GAMMA):
            raise ValueError(f"unknown Lyapunov kind {self.kind!r}")
        if self.kind == SPHERE_GAMMA and not (self.gamma is not None and self.gamma > 0):
            raise ValueError("sphere_gamma Lyapunov requires gamma > 0")

    def value_from_norm(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == ABS_NORM:
            return np.maximum(r, 1.0)
        if self.kind == LOG_NORM:
            with np.errstate(divide="ignore"):
                return np.maximum(np.log(np.maximum(r, 1e-300)), 1.0)
        # 1 - z = 2 / (1 + |x|^2) on the sphere, so (1-z)^(-gamma) lifts to:
        return np.maximum((0.5 * (1.0 + r * r)) ** self.gamma, 1.0)

    def value(self, x) -> float:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return float(self.value_from_norm(np.array([np.linalg.norm(x)]))[0])


RECIPROCAL_V = "reciprocal_v"
POWER_OF_V = "power_of_v"
EXP_RATE_OF_V = "exp_rate_of_v"


@dataclass(frozen=True)
class FKind:
    """Functional of V whose one-step drift is estimated."""

    kind: str
    s: float = 0.0

    @staticmethod
    def reciprocal() -> "FKind":
        return FKind(RECIPROCAL_V)

    @staticmethod
    def power(s: float) -> "FKind":
        return FKind(POWER_OF_V, s)

    @staticmethod
    def exp_rate(s: float) -> "FKind":
        return FKind(EXP_RATE_OF_V, s)

    def apply(self, v_values):
        v_values = np.asarray(v_values, dtype=float)
        if self.kind == RECIPROCAL_V:
            return 1.0 / v_values
        if self.kind == POWER_OF_V:
            return v_values**self.s
        if self.kind == EXP_RATE_OF_V:
            with np.errstate(over="ignore"):  # inf is caught by the finiteness precheck
                return np.exp(self.s * v_values)
        raise ValueError(f"unknown f kind {self.kind!r}")

    def label(self) -> str:
        if self.kind == RECIPROCAL_V:
            return "1/V"
        if self.kind == POWER_OF_V:
            return f"V^{self.s:g}"
        return f"exp({self.s:g} V)"


@dataclass(frozen=True)
class DriftProfile:
    """Registry entry: which (V, phi, Psi) certify the kernel's drift behaviour."""

    algorithm: AlgorithmId
    V: LyapunovSpec
    phi_growth: str
    phi_exponent: float          # phi(1/r) ~ r^(-e) (polynomial) or exp(-e r)
    psi_growth: str
    psi_exponent_or_rate: float  # Psi(r) = r^e or exp(e r)

    def psi_f_kind(self) -> FKind:
        if self.psi_growth == POLYNOMIAL_GROWTH:
            return FKind.power(self.psi_exponent_or_rate)
        return FKind.exp_rate(self.psi_exponent_or_rate)


def drift_profile(
    alg: AlgorithmId,
    v: float,
    d: Optional[int] = None,
    gamma: Optional[float] = None,
) -> DriftProfile:
    """Look up the certified (V, phi, Psi) triple for an algorithm/target pair."""
    if not v > 0:
        raise ValueError(f"tail index v must be positive, got {v}")
    if alg.kind in (ALG_FV_RWM, ALG_MALA, ALG_ULA):
        return DriftProfile(
            alg, LyapunovSpec(ABS_NORM), POLYNOMIAL_GROWTH, 3.0,
            POLYNOMIAL_GROWTH, v + 2.0 + PSI_EPS,
        )
    if alg.kind == ALG_IV_RWM:
        return DriftProfile(
            alg, LyapunovSpec(ABS_NORM), POLYNOMIAL_GROWTH, 1.0 + alg.eta,
            POLYNOMIAL_GROWTH, v + alg.eta + PSI_EPS,
        )
    if alg.kind == ALG_SPS:
        if d is None or gamma is None or not gamma > 0:
            raise ValueError("SPS drift profile requires dimension d and gamma > 0")
        if not v < d:
            raise ValueError(
                f"SPS drift registry covers the polynomial regime v < d only (v={v}, d={d})"
            )
        return DriftProfile(
            alg, LyapunovSpec(SPHERE_GAMMA, gamma), POLYNOMIAL_GROWTH,
            (d - v) / (2.0 * gamma), POLYNOMIAL_GROWTH, d / (2.0 * gamma),
        )
    if alg.kind == ALG_INDEPENDENCE:
        if not alg.k > v:
            raise ValueError(
                f"independence-sampler registry requires proposal decay k > v (k={alg.k}, v={v})"
            )
        return DriftProfile(
            alg, LyapunovSpec(ABS_NORM), EXPONENTIAL_GROWTH, alg.k - v,
            EXPONENTIAL_GROWTH, alg.k,
        )
    if alg.kind == ALG_LEVY_EM:
        return DriftProfile(
            alg, LyapunovSpec(LOG_NORM), POLYNOMIAL_GROWTH, 2.0,
            EXPONENTIAL_GROWTH, alg.alpha,
        )
    raise ValueError(
        f"no drift registry entry for {alg.kind!r}; covered: fv_rwm, iv_rwm, mala, ula,"
        " sps (v < d), independence (exponential family, k > v), levy_em"
    )


def one_step_batch(
    cfg: K.KernelConfig,
    target: Optional[TargetSpec],
    x: np.ndarray,
    m: int,
    rng: RngStream,
) -> np.ndarray:
    """``m`` independent one-step draws of the kernel from the fixed point ``x``."""
    x = np.asarray(x, dtype=float)
    d = len(x)
    alg = cfg.algorithm
    if alg == K.LEVY_EM:
        from .rng import sample_isotropic_stable_vec

        z = sample_isotropic_stable_vec(rng, cfg.levy_alpha, d, size=m)
        return x + cfg.h * K.levy_drift(cfg, x) + cfg.h ** (1.0 / cfg.levy_alpha) * z

    lp_x = log_density(target, x)
    if alg in (K.RWM_GAUSSIAN, K.RWM_STUDENT_T):
        if alg == K.RWM_GAUSSIAN:
            noise = cfg.h * rng.normal((m, d))
        else:
            w = rng.chisquare(cfg.proposal_eta, m)
            noise = (cfg.h * np.sqrt(cfg.proposal_eta / w))[:, None] * rng.normal((m, d))
        y = x + noise
        log_ratio = log_density_sq_rows(target, np.einsum("ij,ij->i", y, y)) - lp_x
    elif alg in (K.MALA, K.ULA):
        grad = grad_log_density(target, x)
        noise = math.sqrt(2.0 * cfg.h) * rng.normal((m, d))
        y = x + cfg.h * grad + noise
        if alg == K.ULA:
            return y
        sq_y = np.einsum("ij,ij->i", y, y)
        lp_y = log_density_sq_rows(target, sq_y)
        gc_y = grad_coeff_sq_rows(target, sq_y)
        dev = x - y - cfg.h * gc_y[:, None] * y
        log_q_xy = -np.einsum("ij,ij->i", noise, noise) / (4.0 * cfg.h)
        log_q_yx = -np.einsum("ij,ij->i", dev, dev) / (4.0 * cfg.h)
        log_ratio = lp_y - lp_x + log_q_yx - log_q_xy
    elif alg == K.SPS:
        sq = float(x @ x)
        p = np.empty(d + 1)
        p[:-1] = (2.0 / (sq + 1.0)) * x
        p[-1] = (sq - 1.0) / (sq + 1.0)
        tilde = cfg.h * rng.normal((m, d + 1))
        w = p + tilde - (tilde @ p)[:, None] * p
        wn = np.linalg.norm(w, axis=1)
        wn = np.maximum(wn, 1e-300)
        # cancellation-free 1 - z_hat where z_hat > 0 (see sphere module)
        perp = np.einsum("ij,ij->i", w[:, :-1], w[:, :-1])
        one_minus_z = np.where(
            w[:, -1] > 0, perp / (wn * (wn + np.abs(w[:, -1]))), 1.0 - w[:, -1] / wn
        )
        ok = one_minus_z >= 1e-14
        y = np.where(
            ok[:, None], w[:, :-1] / np.maximum(wn * one_minus_z, 1e-300)[:, None], x
        )
        sq_y = np.einsum("ij,ij->i", y, y)
        log_ratio = np.where(
            ok,
            log_density_sq_rows(target, sq_y)
            + target.d * np.log1p(sq_y)
            - lp_x
            - target.d * math.log1p(sq),
            -np.inf,
        )
    elif alg == K.INDEPENDENCE:
        y, logq = _draw_is_proposals(rng, target, cfg.is_k, m)
        proposal = TargetSpec(target.kind, cfg.is_k, d, target.scale)
        logq_x = float(log_density_sq_rows(proposal, np.array([float(x @ x)]))[0])
        lp_y = log_density_sq_rows(target, np.einsum("ij,ij->i", y, y))
        log_ratio = (lp_y - logq) - (lp_x - logq_x)
    else:
        raise ValueError(f"one_step_batch: unsupported algorithm {alg!r}")
    with np.errstate(divide="ignore"):
        accept = np.log(rng.uniform(m)) < log_ratio
    return np.where(accept[:, None], y, x)


@dataclass(frozen=True)
class DriftEstimate:
    probe: np.ndarray
    f_kind: FKind
    mean: float
    stderr: float
    samples: int


_DRIFT_BLOCK = 1 << 14


def estimate_drift(
    cfg: K.KernelConfig,
    target: Optional[TargetSpec],
    V: LyapunovSpec,
    f_kind: FKind,
    probe,
    samples: int,
    rng: RngStream,
    threads: int = 1,
) -> DriftEstimate:
    """Monte Carlo estimate of P f - f at ``probe`` for f = f_kind(V).

    Work is split into fixed-size blocks with derived substreams, and block
    sums are combined in index order, so the result is independent of the
    thread count.
    """
    if samples < 1000:
        raise ValueError(f"need at least 1e3 samples, got {samples}")
    probe = np.asarray(probe, dtype=float)
    f_x = float(f_kind.apply(V.value(probe)))
    if not math.isfinite(f_x):
        raise ValueError(f"f(V(probe)) is not finite at probe with |x|={np.linalg.norm(probe)}")

    n_blocks = (samples + _DRIFT_BLOCK - 1) // _DRIFT_BLOCK

    def block_sums(b: int):
        m = min(_DRIFT_BLOCK, samples - b * _DRIFT_BLOCK)
        x1 = one_step_batch(cfg, target, probe, m, rng.child(b))
        diffs = f_kind.apply(V.value_from_norm(np.linalg.norm(x1, axis=1))) - f_x
        return float(np.sum(diffs)), float(np.sum(diffs * diffs)), m

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(block_sums, range(n_blocks)))
    else:
        results = [block_sums(b) for b in range(n_blocks)]
    total = math.fsum(r[0] for r in results)
    total_sq = math.fsum(r[1] for r in results)
    count = sum(r[2] for r in results)
    mean = total / count
    var = max(total_sq - count * mean * mean, 0.0) / (count - 1)
    return DriftEstimate(
        probe=probe, f_kind=f_kind, mean=mean, stderr=math.sqrt(var / count), samples=count
    )


def fit_power_law(points) -> tuple[float, float, float]:
    """OLS fit of log|y| against log x; returns (slope, intercept, r_squared)."""
    pts = [(float(x), float(y)) for x, y in points]
    if len(pts) < 3:
        raise ValueError(f"need at least 3 points, got {len(pts)}")
    xs = np.array([p[0] for p in pts])
    ys = np.array([p[1] for p in pts])
    if np.any(xs <= 0):
        raise ValueError("all x values must be positive")
    if np.any(ys == 0):
        raise ValueError("cannot fit a power law through y = 0")
    lx, ly = np.log(xs), np.log(np.abs(ys))
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), r2


@dataclass
class ExcursionStats:
    """Durations of maximal excursions of V(X) above a level."""

    level_ell: float
    durations: np.ndarray
    censored: int        # number of excursions unfinished at the horizon (0 or 1)
    censored_steps: int  # steps spent in the unfinished excursion
    total_steps: int

    @property
    def steps_below(self) -> int:
        return self.total_steps - int(self.durations.sum()) - self.censored_steps


def collect_excursions(
    cfg: K.KernelConfig,
    target: Optional[TargetSpec],
    V: LyapunovSpec,
    ell: float,
    total_steps: int,
    rng: RngStream,
    x0=None,
) -> ExcursionStats:
    """Run one chain and record every maximal excursion of V(X) above ``ell``."""
    if not ell > 1:
        raise ValueError(f"excursion level must exceed 1, got {ell}")
    d = target.d if target is not None else 1
    if x0 is None:
        x0 = np.zeros(d)
    collector = ExcursionCollector(V, ell)
    run_chain(target, cfg, x0, total_steps, rng, collectors=[collector])
    durations, open_run = collector.finish()
    return ExcursionStats(
        level_ell=ell,
        durations=durations,
        censored=1 if open_run else 0,
        censored_steps=open_run,
        total_steps=collector.total_steps,
    )
