"""Reproducible counter-based random streams and heavy-tailed variate generators.

Each chain (or worker) owns an :class:`RngStream` keyed by ``(seed, stream_id)``
through a Philox counter-based bit generator, so ensembles are reproducible for
any thread count and streams with distinct ids are statistically independent.

Scale convention for stable laws: the standard symmetric alpha-stable variate
has characteristic function ``exp(-|t|^alpha)`` (no extra scale factor); kernel
configs carry their own explicit scales.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

_MASK64 = (1 << 64) - 1


def _mix64(a: int, b: int) -> int:
    """SplitMix64-style mixing of two 64-bit words, for derived stream ids."""
    z = (a * 0x9E3779B97F4A7C15 + b + 1) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


@dataclass
class RngStream:
    """One reproducible random stream, owned by exactly one chain or worker."""

    seed: int
    stream_id: int = 0
    _gen: np.random.Generator = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        key = [self.seed & _MASK64, self.stream_id & _MASK64]
        self._gen = np.random.Generator(np.random.Philox(key=key))

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def child(self, index: int) -> "RngStream":
        """Derive an independent substream (for drift-estimation workers etc.)."""
        return RngStream(self.seed, _mix64(self.stream_id, index))

    # thin draw helpers so kernels do not touch numpy's Generator directly
    def uniform(self, size=None):
        return self._gen.random(size)

    def normal(self, size=None):
        return self._gen.standard_normal(size)

    def exponential(self, size=None):
        return self._gen.standard_exponential(size)

    def chisquare(self, df: float, size=None):
        # gamma(df/2, 2) so non-integer degrees of freedom are exact
        return self._gen.gamma(df / 2.0, 2.0, size)


def sample_gaussian_vec(rng: RngStream, d: int, sigma: float) -> np.ndarray:
    """One draw from N(0, sigma^2 * Id) in dimension ``d``."""
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    return sigma * rng.normal(d)


def _cms_sym(alpha: float, u: np.ndarray, e: np.ndarray):
    """Chambers-Mallows-Stuck transform for the symmetric alpha-stable law.

    ``u`` uniform on (-pi/2, pi/2), ``e`` standard exponential; output has
    characteristic function exp(-|t|^alpha).
    """
    if alpha == 1.0:
        return np.tan(u)
    return (np.sin(alpha * u) / np.cos(u) ** (1.0 / alpha)) * (
        np.cos((1.0 - alpha) * u) / e
    ) ** ((1.0 - alpha) / alpha)


def sample_stable_sym(rng: RngStream, alpha: float, size=None):
    """Standard symmetric alpha-stable draw(s), CF exp(-|t|^alpha), alpha in (0, 2]."""
    if not (0.0 < alpha <= 2.0):
        raise ValueError(f"alpha must lie in (0, 2], got {alpha}")
    u = math.pi * (rng.uniform(size) - 0.5)
    e = rng.exponential(size)
    return _cms_sym(alpha, u, e)


def _kanter_positive_stable(alpha1: float, u: np.ndarray, e: np.ndarray):
    """Kanter's representation of the one-sided stable law, alpha1 in (0, 1).

    ``u`` uniform on (0, pi), ``e`` standard exponential; output A >= 0 has
    Laplace transform E[exp(-lam * A)] = exp(-lam^alpha1).
    """
    a = (
        np.sin(alpha1 * u) ** (alpha1 / (1.0 - alpha1))
        * np.sin((1.0 - alpha1) * u)
        / np.sin(u) ** (1.0 / (1.0 - alpha1))
    )
    return (a / e) ** ((1.0 - alpha1) / alpha1)


def sample_isotropic_stable_vec(rng: RngStream, alpha: float, d: int, size=None):
    """Isotropic alpha-stable draw(s) on R^d via Gaussian subordination.

    X = sqrt(2 A) G with G ~ N(0, Id) and A one-sided (alpha/2)-stable, so the
    characteristic function is exp(-|t|^alpha) and every 1-d projection onto a
    unit vector is standard symmetric alpha-stable.
    """
    if not (0.0 < alpha < 2.0):
        raise ValueError(f"alpha must lie in (0, 2), got {alpha}")
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    u = math.pi * rng.uniform(size)
    e = rng.exponential(size)
    a = _kanter_positive_stable(alpha / 2.0, u, e)
    g_shape = (d,) if size is None else (size, d)
    g = rng.normal(g_shape)
    return np.sqrt(2.0 * a)[..., np.newaxis] * g if size is not None else math.sqrt(2.0 * a) * g


def sample_student_t_vec(rng: RngStream, eta: float, d: int, scale: float = 1.0, size=None):
    """Multivariate t draw(s): scale * Z * sqrt(eta / W), W ~ chi^2(eta).

    The norm has tail exponent exactly ``eta``; non-integer ``eta`` (e.g. 0.05)
    is supported through the gamma representation of the chi-square.
    """
    if not eta > 0:
        raise ValueError(f"eta must be positive, got {eta}")
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    if not scale > 0:
        raise ValueError(f"scale must be positive, got {scale}")
    w = rng.chisquare(eta, size)
    g_shape = (d,) if size is None else (size, d)
    z = rng.normal(g_shape)
    factor = scale * np.sqrt(eta / w)
    return factor[..., np.newaxis] * z if size is not None else float(factor) * z
