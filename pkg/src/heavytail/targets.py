"""Heavy-tailed target distributions: log-densities, gradients, tail indices, 1-d CDFs.

All densities are unnormalized; Metropolis ratios only ever use differences of
log-densities, and ``cdf_1d`` normalizes by quadrature.

Three spherically symmetric families are provided:

* ``student_t``: density proportional to ``(1 + |x/scale|^2 / v)^{-(v+d)/2}``,
  tail exponent exactly ``v + d``.
* ``polynomial``: same functional form as ``student_t`` (slowly varying part
  held constant); a separate kind so downstream theory verdicts can distinguish
  the assumption families.
* ``exponential``: density proportional to ``exp(-v * sqrt(1 + |x/scale|^2))``:
  smooth at the origin, exactly exponential decay rate ``v`` in the tail.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import quad

STUDENT_T = "student_t"
POLYNOMIAL = "polynomial"
EXPONENTIAL = "exponential"

_KINDS = (STUDENT_T, POLYNOMIAL, EXPONENTIAL)

# quadrature tolerance for cdf_1d
_CDF_TOL = 1e-10


@dataclass(frozen=True)
class TargetSpec:
    """A heavy-tailed target law with tail/decay index ``v`` in dimension ``d``."""

    kind: str
    v: float
    d: int
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown target kind {self.kind!r}; expected one of {_KINDS}")
        if not (self.v > 0 and math.isfinite(self.v)):
            raise ValueError(f"tail index v must be positive and finite, got {self.v}")
        if not (isinstance(self.d, int) and self.d >= 1):
            raise ValueError(f"dimension d must be an integer >= 1, got {self.d}")
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise ValueError(f"scale must be positive and finite, got {self.scale}")

    @property
    def differentiable(self) -> bool:
        return True  # all three families are smooth everywhere


def _check_point(target: TargetSpec, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (target.d,):
        raise ValueError(f"point has shape {x.shape}, target dimension is {target.d}")
    if not np.all(np.isfinite(x)):
        raise ValueError("point has non-finite coordinates")
    return x


def log_density_from_sq(target: TargetSpec, sq: float) -> float:
    """Unnormalized log-density as a function of the squared norm |x|^2.

    All three families are spherically symmetric, so kernels that already track
    |x|^2 can evaluate the density without materializing the point.
    """
    u = sq / (target.scale * target.scale)
    if target.kind == EXPONENTIAL:
        return -target.v * math.sqrt(1.0 + u)
    return -0.5 * (target.v + target.d) * math.log1p(u / target.v)


def log_density(target: TargetSpec, x) -> float:
    """Unnormalized log-density at ``x``; finite for every finite ``x``."""
    x = _check_point(target, x)
    return log_density_from_sq(target, float(x @ x))


def grad_coeff_from_sq(target: TargetSpec, sq: float) -> float:
    """Scalar ``c`` with grad log-density = ``c * x`` at any point of squared norm ``sq``."""
    s2 = target.scale * target.scale
    if target.kind == EXPONENTIAL:
        return -target.v / (s2 * math.sqrt(1.0 + sq / s2))
    return -(target.v + target.d) / (target.v * s2 + sq)


def grad_log_density(target: TargetSpec, x) -> np.ndarray:
    """Gradient of the log-density; by radial symmetry a scalar multiple of ``x``."""
    x = _check_point(target, x)
    return grad_coeff_from_sq(target, float(x @ x)) * x


def tail_index(target: TargetSpec) -> float:
    """Tail/decay index ``v`` of the target."""
    return target.v


def log_density_sq_rows(target: TargetSpec, sq: np.ndarray) -> np.ndarray:
    """Vectorized log-density over an array of squared norms."""
    u = np.asarray(sq, dtype=float) / (target.scale * target.scale)
    if target.kind == EXPONENTIAL:
        return -target.v * np.sqrt(1.0 + u)
    return -0.5 * (target.v + target.d) * np.log1p(u / target.v)


def log_density_rows(target: TargetSpec, xs: np.ndarray) -> np.ndarray:
    """Vectorized log-density over row-stacked points of shape (m, d)."""
    xs = np.asarray(xs, dtype=float)
    return log_density_sq_rows(target, np.einsum("ij,ij->i", xs, xs))


def grad_coeff_sq_rows(target: TargetSpec, sq: np.ndarray) -> np.ndarray:
    """Vectorized gradient coefficient (grad = coeff * x) over squared norms."""
    sq = np.asarray(sq, dtype=float)
    s2 = target.scale * target.scale
    if target.kind == EXPONENTIAL:
        return -target.v / (s2 * np.sqrt(1.0 + sq / s2))
    return -(target.v + target.d) / (target.v * s2 + sq)


def _half_mass(target: TargetSpec, upper: float) -> float:
    """Integral of the unnormalized density over (0, upper), via t = u/(1-u)."""
    # map (0, inf) -> (0, 1); the transformed integrand has at worst an
    # integrable endpoint singularity (1-u)^{v-1}, which QUADPACK handles
    def integrand(u):
        t = u / (1.0 - u)
        return math.exp(log_density_from_sq(target, t * t)) / ((1.0 - u) * (1.0 - u))

    u_max = 1.0 if math.isinf(upper) else upper / (1.0 + upper)
    val, _ = quad(integrand, 0.0, u_max, epsabs=_CDF_TOL, epsrel=_CDF_TOL, limit=200)
    return val


@lru_cache(maxsize=64)
def _normalization_1d(target: TargetSpec) -> float:
    return 2.0 * _half_mass(target, math.inf)


def cdf_1d(target: TargetSpec, x: float) -> float:
    """CDF of the normalized one-dimensional law, by adaptive quadrature."""
    if target.d != 1:
        raise ValueError(f"cdf_1d requires d = 1, got d = {target.d}")
    x = float(x)
    if math.isnan(x):
        raise ValueError("cdf_1d: x is NaN")
    if x == 0.0:
        return 0.5
    half = _half_mass(target, abs(x)) / _normalization_1d(target)
    return 0.5 + math.copysign(half, x)
