"""One-step transition kernels and the shared Metropolis acceptance rule.

Six samplers are configured through :class:`KernelConfig`:

* ``rwm_gaussian``: random walk Metropolis, Gaussian proposal N(0, h^2 Id)
* ``rwm_student_t``: random walk Metropolis, heavy-tailed h * t(eta) proposal
* ``mala``: Metropolis-adjusted Langevin, proposal N(x + h grad, 2h Id)
* ``ula``: unadjusted Langevin (no accept/reject step)
* ``independence``: proposal from the target's own family with decay ``is_k``
* ``levy_em``: Euler chain x + h b(x) + h^{1/alpha} Z, Z isotropic stable
* ``sps``: stereographic sampler (step function lives in ``sphere``)

All log-ratios are computed as differences of log-densities; densities
themselves are never formed (they underflow at |x| ~ 1e6 for heavy tails).

These single-step functions are the reference semantics; long runs go through
the block engine in :mod:`heavytail.engine`, which implements the same updates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .rng import RngStream, sample_isotropic_stable_vec, sample_student_t_vec
from .targets import (
    EXPONENTIAL,
    POLYNOMIAL,
    TargetSpec,
    grad_log_density,
    log_density,
)

RWM_GAUSSIAN = "rwm_gaussian"
RWM_STUDENT_T = "rwm_student_t"
MALA = "mala"
ULA = "ula"
INDEPENDENCE = "independence"
LEVY_EM = "levy_em"
SPS = "sps"

ALGORITHMS = (RWM_GAUSSIAN, RWM_STUDENT_T, MALA, ULA, INDEPENDENCE, LEVY_EM, SPS)

DRIFT_LINEAR = "linear"
DRIFT_SUPERLINEAR = "superlinear"


@dataclass(frozen=True)
class KernelConfig:
    """Algorithm choice plus step size / proposal scale and per-algorithm knobs."""

    algorithm: str
    h: float
    proposal_eta: Optional[float] = None  # iv-RWM t-proposal degrees of freedom
    is_k: Optional[float] = None          # independence-sampler proposal decay
    levy_alpha: Optional[float] = None    # stable index of the Euler chain noise
    drift_kind: Optional[str] = None      # "linear" or "superlinear"
    drift_delta: Optional[float] = None   # superlinear exponent delta > 0

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(
                f"unknown algorithm {self.algorithm!r}; expected one of {ALGORITHMS}"
            )
        # degenerate kernels (h <= 0) break non-confinement; reject at validation
        if not (self.h > 0 and math.isfinite(self.h)):
            raise ValueError(f"step size h must be positive and finite, got {self.h}")
        if self.algorithm == RWM_STUDENT_T and not (
            self.proposal_eta is not None and self.proposal_eta > 0
        ):
            raise ValueError("rwm_student_t requires proposal_eta > 0")
        if self.algorithm == INDEPENDENCE and not (self.is_k is not None and self.is_k > 0):
            raise ValueError("independence sampler requires is_k > 0")
        if self.algorithm == LEVY_EM:
            if not (self.levy_alpha is not None and 1.0 < self.levy_alpha < 2.0):
                raise ValueError("levy_em requires levy_alpha in (1, 2)")
            if self.drift_kind not in (DRIFT_LINEAR, DRIFT_SUPERLINEAR):
                raise ValueError("levy_em requires drift_kind 'linear' or 'superlinear'")
            if self.drift_kind == DRIFT_SUPERLINEAR and not (
                self.drift_delta is not None and self.drift_delta > 0
            ):
                raise ValueError("superlinear drift requires drift_delta > 0")


def default_h(algorithm: str, d: int) -> float:
    """Standard-practice proposal scales, used when a config omits ``h``."""
    if algorithm in (RWM_GAUSSIAN, RWM_STUDENT_T):
        return 2.4 / math.sqrt(d)
    if algorithm in (MALA, ULA):
        return 0.1
    if algorithm == SPS:
        return 1.0 / math.sqrt(d)
    return 0.1


@dataclass(frozen=True)
class ChainState:
    """Current position with cached log-density (and gradient, when used)."""

    x: np.ndarray
    log_pi: float
    grad: Optional[np.ndarray] = None
    steps: int = 0
    accepts: int = 0


def init_state(target: Optional[TargetSpec], x0, with_grad: bool = False) -> ChainState:
    x0 = np.asarray(x0, dtype=float)
    if target is None:
        # target-free chains (levy_em) carry no density cache
        return ChainState(x=x0, log_pi=math.nan)
    lp = log_density(target, x0)
    g = grad_log_density(target, x0) if with_grad else None
    return ChainState(x=x0, log_pi=lp, grad=g)


def mh_accept(log_ratio: float, rng: RngStream) -> bool:
    """Accept with probability min{1, exp(log_ratio)}.

    Consumes exactly one uniform per call (so drivers that pre-draw variates
    stay aligned), except for log_ratio = +inf, the degenerate always-accept
    branch of the Metropolis rule.
    """
    if math.isnan(log_ratio):
        raise ValueError("mh_accept: log_ratio is NaN")
    if log_ratio == math.inf:
        return True
    u = rng.uniform()
    with np.errstate(divide="ignore"):
        return bool(np.log(u) < log_ratio)


def _advance(state: ChainState, accepted: bool, y=None, log_pi_y=None, grad_y=None) -> ChainState:
    if accepted:
        return ChainState(
            x=y, log_pi=log_pi_y, grad=grad_y, steps=state.steps + 1, accepts=state.accepts + 1
        )
    return replace(state, steps=state.steps + 1)


def step_rwm(state: ChainState, cfg: KernelConfig, target: TargetSpec, rng: RngStream) -> ChainState:
    """Random walk Metropolis step with a spherically symmetric proposal."""
    if cfg.algorithm not in (RWM_GAUSSIAN, RWM_STUDENT_T):
        raise ValueError(f"step_rwm got algorithm {cfg.algorithm!r}")
    if cfg.algorithm == RWM_GAUSSIAN:
        xi = cfg.h * rng.normal(target.d)
    else:
        xi = sample_student_t_vec(rng, cfg.proposal_eta, target.d, scale=cfg.h)
    y = state.x + xi
    log_pi_y = log_density(target, y)
    accepted = mh_accept(log_pi_y - state.log_pi, rng)
    return _advance(state, accepted, y, log_pi_y)


def mala_log_q(target: TargetSpec, cfg: KernelConfig, a: np.ndarray, b: np.ndarray) -> float:
    """log q_h(a -> b) for the Langevin proposal, up to a constant shared by all pairs."""
    dev = b - a - cfg.h * grad_log_density(target, a)
    return -float(dev @ dev) / (4.0 * cfg.h)


def step_mala(state: ChainState, cfg: KernelConfig, target: TargetSpec, rng: RngStream) -> ChainState:
    """Metropolis-adjusted Langevin step; caches the gradient at the new state."""
    if cfg.algorithm != MALA:
        raise ValueError(f"step_mala got algorithm {cfg.algorithm!r}")
    grad = state.grad if state.grad is not None else grad_log_density(target, state.x)
    noise = math.sqrt(2.0 * cfg.h) * rng.normal(target.d)
    y = state.x + cfg.h * grad + noise
    log_pi_y = log_density(target, y)
    grad_y = grad_log_density(target, y)
    # forward density only involves the injected noise
    log_q_xy = -float(noise @ noise) / (4.0 * cfg.h)
    dev = state.x - y - cfg.h * grad_y
    log_q_yx = -float(dev @ dev) / (4.0 * cfg.h)
    accepted = mh_accept(log_pi_y - state.log_pi + log_q_yx - log_q_xy, rng)
    if accepted:
        return _advance(state, True, y, log_pi_y, grad_y)
    return replace(state, grad=grad, steps=state.steps + 1)


def step_ula(state: ChainState, cfg: KernelConfig, target: TargetSpec, rng: RngStream) -> ChainState:
    """Unadjusted Langevin step; every move is taken."""
    if cfg.algorithm != ULA:
        raise ValueError(f"step_ula got algorithm {cfg.algorithm!r}")
    grad = state.grad if state.grad is not None else grad_log_density(target, state.x)
    y = state.x + cfg.h * grad + math.sqrt(2.0 * cfg.h) * rng.normal(target.d)
    return ChainState(
        x=y,
        log_pi=log_density(target, y),
        grad=grad_log_density(target, y),
        steps=state.steps + 1,
        accepts=state.accepts + 1,
    )


def is_proposal_log_density(kind: str, k: float, y: np.ndarray) -> float:
    """Unnormalized log-density of the independence proposal with decay ``k``."""
    return log_density(TargetSpec(kind, k, len(y)), y)


def sample_is_proposal(rng: RngStream, kind: str, k: float, d: int) -> np.ndarray:
    """Exact draw from the independence-sampler proposal family.

    Polynomial family is a multivariate t(k).  The exponential family is drawn
    radially by rejection from a Gamma(d, 1/k) envelope (acceptance probability
    exp(-k (sqrt(1+r^2) - r)), bounded below by exp(-k)).
    """
    if kind == POLYNOMIAL or kind == "student_t":
        return sample_student_t_vec(rng, k, d)
    if kind != EXPONENTIAL:
        raise ValueError(f"no independence proposal for target kind {kind!r}")
    while True:
        r = rng.generator.gamma(d, 1.0 / k)
        if math.log(rng.uniform() + 1e-300) < -k * (math.sqrt(1.0 + r * r) - r):
            break
    direction = rng.normal(d)
    nrm = float(np.linalg.norm(direction))
    while nrm == 0.0:  # probability-zero guard
        direction = rng.normal(d)
        nrm = float(np.linalg.norm(direction))
    return (r / nrm) * direction


def step_is(state: ChainState, cfg: KernelConfig, target: TargetSpec, rng: RngStream) -> ChainState:
    """Independence-sampler step: the proposal ignores the current position."""
    if cfg.algorithm != INDEPENDENCE:
        raise ValueError(f"step_is got algorithm {cfg.algorithm!r}")
    if target.kind not in (POLYNOMIAL, EXPONENTIAL):
        raise ValueError("independence sampler requires a polynomial or exponential target")
    k = cfg.is_k
    y = sample_is_proposal(rng, target.kind, k, target.d)
    log_pi_y = log_density(target, y)
    log_ratio = (log_pi_y - state.log_pi) + (
        is_proposal_log_density(target.kind, k, state.x)
        - is_proposal_log_density(target.kind, k, y)
    )
    accepted = mh_accept(log_ratio, rng)
    return _advance(state, accepted, y, log_pi_y)


def levy_drift(cfg: KernelConfig, x: np.ndarray) -> np.ndarray:
    if cfg.drift_kind == DRIFT_LINEAR:
        return -x
    return -x * float(np.linalg.norm(x)) ** cfg.drift_delta


def step_levy_em(state: ChainState, cfg: KernelConfig, rng: RngStream) -> ChainState:
    """Euler step of the heavy-noise chain; no Metropolis correction, no target."""
    if cfg.algorithm != LEVY_EM:
        raise ValueError(f"step_levy_em got algorithm {cfg.algorithm!r}")
    d = len(state.x)
    z = sample_isotropic_stable_vec(rng, cfg.levy_alpha, d)
    y = state.x + cfg.h * levy_drift(cfg, state.x) + cfg.h ** (1.0 / cfg.levy_alpha) * z
    return ChainState(
        x=y, log_pi=math.nan, steps=state.steps + 1, accepts=state.accepts + 1
    )
