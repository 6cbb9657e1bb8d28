"""Stereographic geometry and the sphere-walk sampler.

The sampler's canonical state lives in R^d; sphere coordinates are transient
within a step.  The unit sphere S^d sits in R^{d+1} with North Pole
N = (0, ..., 0, 1); radius is fixed at 1.

The projection SP(y, z) = y / (1 - z) is a bijection S^d \\ {N} -> R^d with
Jacobian factor (1 + |x|^2)^d, so the pulled-back density on the sphere is
pi(SP(p)) * (1 + |SP(p)|^2)^d and the acceptance ratio can be evaluated on
either side of the projection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .kernels import ChainState, KernelConfig, SPS, _advance, mh_accept
from .rng import RngStream
from .targets import TargetSpec, log_density

# 1 - z below this is treated as numerically at the North Pole
NORTH_POLE_EPS = 1e-14
# projection to R^d refuses points this close to the pole
_PROJECTION_EPS = 1e-12


@dataclass(frozen=True)
class SpherePoint:
    """A point on the unit sphere S^d subset R^{d+1}; renormalized on creation."""

    coords: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coords, dtype=float)
        nrm = float(np.linalg.norm(c))
        if not (nrm > 0 and np.all(np.isfinite(c))):
            raise ValueError("sphere point must have finite, nonzero coordinates")
        object.__setattr__(self, "coords", c / nrm)

    @property
    def z(self) -> float:
        return float(self.coords[-1])

    def one_minus_z(self) -> float:
        """1 - z without cancellation: |y|^2 / (1 + z) on the unit sphere.

        Near the North Pole the subtraction 1 - z loses all precision (1 - z
        is ~2/|x|^2, far below the float spacing at 1), while the y-components
        carry it exactly.
        """
        z = self.z
        if z <= 0.0:
            return 1.0 - z
        y = self.coords[:-1]
        return float(y @ y) / (1.0 + z)


def sp_forward(p: SpherePoint) -> np.ndarray:
    """Project a sphere point to R^d: x = y / (1 - z)."""
    one_minus_z = p.one_minus_z()
    if one_minus_z < _PROJECTION_EPS:
        raise ValueError("cannot project a point at the North Pole to R^d")
    return p.coords[:-1] / one_minus_z


def sp_inverse(x) -> SpherePoint:
    """Lift x in R^d to the sphere: y = 2x/(|x|^2+1), z = (|x|^2-1)/(|x|^2+1)."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("sp_inverse: point has non-finite coordinates")
    sq = float(x @ x)
    coords = np.empty(len(x) + 1)
    coords[:-1] = (2.0 / (sq + 1.0)) * x
    coords[-1] = (sq - 1.0) / (sq + 1.0)
    return SpherePoint(coords)


def sps_propose(p: SpherePoint, h: float, rng: RngStream) -> SpherePoint:
    """Gaussian tangent-space move, renormalized onto the sphere."""
    while True:
        tilde = h * rng.normal(len(p.coords))
        step = tilde - float(p.coords @ tilde) * p.coords
        w = p.coords + step
        if float(np.linalg.norm(w)) >= 1e-300:  # probability-zero retry guard
            return SpherePoint(w)


def step_sps(state: ChainState, cfg: KernelConfig, target: TargetSpec, rng: RngStream) -> ChainState:
    """One sphere-walk step: lift, propose on the sphere, project back, accept.

    Acceptance ratio includes the Jacobian factor:
    log pi(y) + d log(1+|y|^2) - log pi(x) - d log(1+|x|^2).
    Proposals numerically at the North Pole are rejected rather than projected.
    """
    if cfg.algorithm != SPS:
        raise ValueError(f"step_sps got algorithm {cfg.algorithm!r}")
    p = sp_inverse(state.x)
    p_hat = sps_propose(p, cfg.h, rng)
    if p_hat.one_minus_z() < NORTH_POLE_EPS:
        rng.uniform()  # keep per-step variate consumption fixed
        return _advance(state, False)
    y = sp_forward(p_hat)
    log_pi_y = log_density(target, y)
    sq_x = float(state.x @ state.x)
    sq_y = float(y @ y)
    log_ratio = (log_pi_y + target.d * math.log1p(sq_y)) - (
        state.log_pi + target.d * math.log1p(sq_x)
    )
    accepted = mh_accept(log_ratio, rng)
    return _advance(state, accepted, y, log_pi_y)


def sphere_log_density(target: TargetSpec, p: SpherePoint) -> float:
    """Log of the pulled-back density on the sphere (unnormalized)."""
    x = sp_forward(p)
    return log_density(target, x) + target.d * math.log1p(float(x @ x))


def sps_z_marginal(z: float, h: float, d: int, rng: RngStream) -> float:
    """One draw of the proposal's last coordinate started from height ``z``.

    Z(z) = (z + sqrt(1-z^2) h U) / sqrt(1 + h^2 (U^2 + Uperp^2)) with U standard
    normal and Uperp^2 chi-square with d-1 degrees of freedom (zero when d = 1).
    """
    if not -1.0 < z < 1.0:
        raise ValueError(f"z must lie in (-1, 1), got {z}")
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    u = float(rng.normal())
    uperp2 = float(rng.chisquare(d - 1)) if d > 1 else 0.0
    return (z + math.sqrt(1.0 - z * z) * h * u) / math.sqrt(1.0 + h * h * (u * u + uperp2))


def sps_z_marginal_batch(z: float, h: float, d: int, rng: RngStream, size: int) -> np.ndarray:
    """Vectorized version of :func:`sps_z_marginal` for tail-exponent estimates."""
    if not -1.0 < z < 1.0:
        raise ValueError(f"z must lie in (-1, 1), got {z}")
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    u = rng.normal(size)
    uperp2 = rng.chisquare(d - 1, size) if d > 1 else np.zeros(size)
    return (z + math.sqrt(1.0 - z * z) * h * u) / np.sqrt(1.0 + h * h * (u * u + uperp2))
