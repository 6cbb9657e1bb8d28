"""Block-compiled chain drivers for long runs.

The single-step functions in :mod:`heavytail.kernels` define the semantics;
this module runs the same updates in numba-compiled blocks fed by vectorized
draws from the chain's own counter-based stream, reaching ~1e7-1e8 steps/s.

A driver produces, per block of steps, the trajectory's norms |x| and first
coordinates x_1 (all diagnostics in this package are functions of those two),
and feeds them to collectors: streaming ergodic averages, thinned samples,
threshold/stride tail stores and excursion records.  Trajectories are never
materialized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numba import njit

from . import kernels as K
from .rng import RngStream, _kanter_positive_stable
from .sphere import NORTH_POLE_EPS
from .targets import EXPONENTIAL, TargetSpec, log_density_sq_rows

BLOCK = 1 << 15

_TK_POLY = 0
_TK_EXP = 1


def _tkind(target: TargetSpec) -> int:
    return _TK_EXP if target.kind == EXPONENTIAL else _TK_POLY


@njit(inline="always")
def _logpi_sq(tkind, v, dim, inv_s2, sq):
    u = sq * inv_s2
    if tkind == _TK_EXP:
        return -v * math.sqrt(1.0 + u)
    return -0.5 * (v + dim) * math.log1p(u / v)


@njit(inline="always")
def _grad_coeff_sq(tkind, v, dim, inv_s2, sq):
    if tkind == _TK_EXP:
        return -v * inv_s2 / math.sqrt(1.0 + sq * inv_s2)
    return -(v + dim) * inv_s2 / (v + sq * inv_s2)


@njit(cache=True, nogil=True)
def _rwm_block(x, logpi, noise, unif, tkind, v, inv_s2, xnorm, x1):
    m, dim = noise.shape
    acc = 0
    for b in range(m):
        sq_y = 0.0
        for j in range(dim):
            yj = x[j] + noise[b, j]
            sq_y += yj * yj
        lp_y = _logpi_sq(tkind, v, dim, inv_s2, sq_y)
        if np.log(unif[b]) < lp_y - logpi:
            for j in range(dim):
                x[j] += noise[b, j]
            logpi = lp_y
            acc += 1
        sq = 0.0
        for j in range(dim):
            sq += x[j] * x[j]
        xnorm[b] = math.sqrt(sq)
        x1[b] = x[0]
    return logpi, acc


@njit(cache=True, nogil=True)
def _mala_block(x, logpi, gcoeff, noise, unif, tkind, v, inv_s2, h, xnorm, x1):
    m, dim = noise.shape
    acc = 0
    for b in range(m):
        sq_y = 0.0
        nsq = 0.0
        for j in range(dim):
            yj = x[j] + h * gcoeff * x[j] + noise[b, j]
            sq_y += yj * yj
            nsq += noise[b, j] * noise[b, j]
        lp_y = _logpi_sq(tkind, v, dim, inv_s2, sq_y)
        gc_y = _grad_coeff_sq(tkind, v, dim, inv_s2, sq_y)
        # reverse move deviation: x - y - h * grad(y)
        dsq = 0.0
        for j in range(dim):
            yj = x[j] + h * gcoeff * x[j] + noise[b, j]
            dev = x[j] - yj - h * gc_y * yj
            dsq += dev * dev
        log_ratio = lp_y - logpi + (nsq - dsq) / (4.0 * h)
        if np.log(unif[b]) < log_ratio:
            for j in range(dim):
                x[j] += h * gcoeff * x[j] + noise[b, j]
            logpi = lp_y
            gcoeff = gc_y
            acc += 1
        sq = 0.0
        for j in range(dim):
            sq += x[j] * x[j]
        xnorm[b] = math.sqrt(sq)
        x1[b] = x[0]
    return logpi, gcoeff, acc


@njit(cache=True, nogil=True)
def _ula_block(x, noise, tkind, v, inv_s2, h, xnorm, x1):
    m, dim = noise.shape
    for b in range(m):
        sq = 0.0
        for j in range(dim):
            sq += x[j] * x[j]
        gc = _grad_coeff_sq(tkind, v, dim, inv_s2, sq)
        sq = 0.0
        for j in range(dim):
            x[j] += h * gc * x[j] + noise[b, j]
            sq += x[j] * x[j]
        xnorm[b] = math.sqrt(sq)
        x1[b] = x[0]


@njit(cache=True, nogil=True)
def _sps_block(x, logpi, noise, unif, tkind, v, inv_s2, pole_eps, xnorm, x1):
    m = noise.shape[0]
    dim = noise.shape[1] - 1
    acc = 0
    p = np.empty(dim + 1)
    w = np.empty(dim + 1)
    sq = 0.0
    for j in range(dim):
        sq += x[j] * x[j]
    for b in range(m):
        # lift to the sphere: p = (2x/(sq+1), (sq-1)/(sq+1))
        s = 2.0 / (sq + 1.0)
        for j in range(dim):
            p[j] = s * x[j]
        p[dim] = 1.0 - s
        # tangent-space Gaussian move, renormalized
        dot = 0.0
        for j in range(dim + 1):
            dot += p[j] * noise[b, j]
        wsq = 0.0
        for j in range(dim + 1):
            w[j] = p[j] + noise[b, j] - dot * p[j]
            wsq += w[j] * w[j]
        wn = math.sqrt(wsq)
        if wn >= 1e-300:
            # cancellation-free 1 - z_hat: sum of the non-z components squared
            if w[dim] > 0.0:
                perp = 0.0
                for j in range(dim):
                    perp += w[j] * w[j]
                one_minus_z = perp / (wn * (wn + w[dim]))
            else:
                one_minus_z = 1.0 - w[dim] / wn
            if one_minus_z >= pole_eps:  # proposals at the pole are rejections
                sq_y = 0.0
                for j in range(dim):
                    yj = w[j] / (wn * one_minus_z)
                    sq_y += yj * yj
                lp_y = _logpi_sq(tkind, v, dim, inv_s2, sq_y)
                log_ratio = (lp_y + dim * math.log1p(sq_y)) - (logpi + dim * math.log1p(sq))
                if np.log(unif[b]) < log_ratio:
                    for j in range(dim):
                        x[j] = w[j] / (wn * one_minus_z)
                    sq = sq_y
                    logpi = lp_y
                    acc += 1
        xnorm[b] = math.sqrt(sq)
        x1[b] = x[0]
    return logpi, acc


@njit(cache=True, nogil=True)
def _is_block(x, logpi, logq_x, props, logq, unif, tkind, v, inv_s2, xnorm, x1):
    m, dim = props.shape
    acc = 0
    for b in range(m):
        sq_y = 0.0
        for j in range(dim):
            sq_y += props[b, j] * props[b, j]
        lp_y = _logpi_sq(tkind, v, dim, inv_s2, sq_y)
        log_ratio = (lp_y - logq[b]) - (logpi - logq_x)
        if np.log(unif[b]) < log_ratio:
            for j in range(dim):
                x[j] = props[b, j]
            logpi = lp_y
            logq_x = logq[b]
            acc += 1
        sq = 0.0
        for j in range(dim):
            sq += x[j] * x[j]
        xnorm[b] = math.sqrt(sq)
        x1[b] = x[0]
    return logpi, logq_x, acc


@njit(cache=True, nogil=True)
def _levy_block(x, noise, h, superlinear, delta, stop_norm, xnorm, x1):
    """Returns the number of steps taken; < m means |x| crossed stop_norm."""
    m, dim = noise.shape
    stop_sq = stop_norm * stop_norm
    for b in range(m):
        sq = 0.0
        for j in range(dim):
            sq += x[j] * x[j]
        if superlinear:
            coeff = -h * math.sqrt(sq) ** delta
        else:
            coeff = -h
        sq = 0.0
        for j in range(dim):
            x[j] += coeff * x[j] + noise[b, j]
            sq += x[j] * x[j]
        xnorm[b] = math.sqrt(sq)
        x1[b] = x[0]
        if not sq <= stop_sq:  # catches inf/nan too
            return b + 1
    return m


def _draw_is_proposals(rng: RngStream, target: TargetSpec, k: float, m: int):
    """Vectorized exact draws from the independence proposal family."""
    d, s = target.d, target.scale
    if target.kind == EXPONENTIAL:
        r = np.empty(m)
        filled = 0
        while filled < m:
            need = m - filled
            cand = rng.generator.gamma(d, 1.0 / k, need)
            u = rng.uniform(need)
            keep = np.log(u + 1e-300) < -k * (np.sqrt(1.0 + cand * cand) - cand)
            kept = cand[keep]
            r[filled : filled + len(kept)] = kept
            filled += len(kept)
        direction = rng.normal((m, d))
        direction /= np.linalg.norm(direction, axis=1, keepdims=True)
        y = (s * r)[:, None] * direction
    else:
        w = rng.chisquare(k, m)
        y = (s * np.sqrt(k / w))[:, None] * rng.normal((m, d))
    proposal = TargetSpec(target.kind, k, d, s)
    logq = log_density_sq_rows(proposal, np.einsum("ij,ij->i", y, y))
    return y, logq


@dataclass
class ChainOutcome:
    x: np.ndarray
    log_pi: float
    steps: int
    accepts: int
    diverged_at: Optional[int] = None  # 1-based step index of first |x| > stop_norm

    @property
    def accept_rate(self) -> float:
        return self.accepts / self.steps if self.steps else 0.0


def run_chain(
    target: Optional[TargetSpec],
    cfg: K.KernelConfig,
    x0,
    n_steps: int,
    rng: RngStream,
    collectors=(),
    stop_norm: float = 1e100,
    block: int = BLOCK,
) -> ChainOutcome:
    """Drive one chain for ``n_steps``, feeding per-block (|x|, x_1) to collectors."""
    alg = cfg.algorithm
    x = np.array(x0, dtype=float).copy()
    d = len(x)
    if alg == K.LEVY_EM:
        tk, v, inv_s2 = 0, 1.0, 1.0  # unused
        logpi = math.nan
    else:
        tk = _tkind(target)
        v = target.v
        inv_s2 = 1.0 / (target.scale * target.scale)
        logpi = _logpi_sq(tk, v, d, inv_s2, float(x @ x))
    gcoeff = _grad_coeff_sq(tk, v, d, inv_s2, float(x @ x)) if alg == K.MALA else 0.0
    logq_x = 0.0
    if alg == K.INDEPENDENCE:
        proposal = TargetSpec(target.kind, cfg.is_k, d, target.scale)
        logq_x = float(log_density_sq_rows(proposal, np.array([float(x @ x)]))[0])

    xnorm = np.empty(block)
    x1 = np.empty(block)
    done = 0
    accepts = 0
    diverged_at = None
    sqrt2h = math.sqrt(2.0 * cfg.h)
    while done < n_steps:
        m = min(block, n_steps - done)
        taken = m
        if alg in (K.RWM_GAUSSIAN, K.RWM_STUDENT_T):
            if alg == K.RWM_GAUSSIAN:
                noise = cfg.h * rng.normal((m, d))
            else:
                w = rng.chisquare(cfg.proposal_eta, m)
                noise = (cfg.h * np.sqrt(cfg.proposal_eta / w))[:, None] * rng.normal((m, d))
            u = rng.uniform(m)
            logpi, a = _rwm_block(x, logpi, noise, u, tk, v, inv_s2, xnorm, x1)
            accepts += a
        elif alg == K.MALA:
            noise = sqrt2h * rng.normal((m, d))
            u = rng.uniform(m)
            logpi, gcoeff, a = _mala_block(
                x, logpi, gcoeff, noise, u, tk, v, inv_s2, cfg.h, xnorm, x1
            )
            accepts += a
        elif alg == K.ULA:
            noise = sqrt2h * rng.normal((m, d))
            _ula_block(x, noise, tk, v, inv_s2, cfg.h, xnorm, x1)
            accepts += m
            logpi = _logpi_sq(tk, v, d, inv_s2, float(x @ x))
        elif alg == K.SPS:
            noise = cfg.h * rng.normal((m, d + 1))
            u = rng.uniform(m)
            logpi, a = _sps_block(
                x, logpi, noise, u, tk, v, inv_s2, NORTH_POLE_EPS, xnorm, x1
            )
            accepts += a
        elif alg == K.INDEPENDENCE:
            props, logq = _draw_is_proposals(rng, target, cfg.is_k, m)
            u = rng.uniform(m)
            logpi, logq_x, a = _is_block(
                x, logpi, logq_x, props, logq, u, tk, v, inv_s2, xnorm, x1
            )
            accepts += a
        else:  # levy_em
            uu = math.pi * rng.uniform(m)
            ee = rng.exponential(m)
            amp = np.sqrt(2.0 * _kanter_positive_stable(cfg.levy_alpha / 2.0, uu, ee))
            noise = (cfg.h ** (1.0 / cfg.levy_alpha) * amp)[:, None] * rng.normal((m, d))
            taken = _levy_block(
                x,
                noise,
                cfg.h,
                cfg.drift_kind == K.DRIFT_SUPERLINEAR,
                cfg.drift_delta if cfg.drift_delta is not None else 0.0,
                stop_norm,
                xnorm,
                x1,
            )
            accepts += taken
        for c in collectors:
            c.update(xnorm[:taken], x1[:taken], done)
        done += taken
        if taken < m:
            diverged_at = done
            break
        if alg != K.LEVY_EM and not (math.isfinite(logpi) and np.all(np.isfinite(x))):
            diverged_at = done
            break
    return ChainOutcome(x=x, log_pi=logpi, steps=done, accepts=accepts, diverged_at=diverged_at)


class ErgodicAverageCollector:
    """Streaming post-burn-in average of g along the chain, compensated (Neumaier)."""

    def __init__(self, g, n_burn: int):
        self.g = g  # TestFunctionSpec, evaluated on (xnorm, x1) blocks
        self.n_burn = n_burn
        self._sum = 0.0
        self._comp = 0.0
        self.count = 0

    def update(self, xnorm, x1, start):
        lo = max(self.n_burn - start, 0)
        if lo >= len(xnorm):
            return
        vals = self.g.eval_blocks(xnorm[lo:], x1[lo:])
        s = float(np.sum(vals))
        t = self._sum + s
        if abs(self._sum) >= abs(s):
            self._comp += (self._sum - t) + s
        else:
            self._comp += (s - t) + self._sum
        self._sum = t
        self.count += len(vals)

    @property
    def value(self) -> float:
        if self.count == 0:
            raise ValueError("empty post-burn-in window")
        return (self._sum + self._comp) / self.count


def _first_kept(first: int, stride: int) -> int:
    """Smallest 0-based index >= first that is step stride, 2*stride, ... (1-based)."""
    return ((first + 1 + stride - 1) // stride) * stride - 1


class ThinnedCollector:
    """Every ``stride``-th first coordinate (for 1-d stationarity tests)."""

    def __init__(self, stride: int, n_burn: int = 0):
        self.stride = stride
        self.n_burn = n_burn
        self._chunks = []

    def update(self, xnorm, x1, start):
        n = len(x1)
        k0 = _first_kept(max(self.n_burn, start), self.stride) - start
        if k0 < n:
            self._chunks.append(x1[k0 :: self.stride].copy())

    @property
    def samples(self) -> np.ndarray:
        return np.concatenate(self._chunks) if self._chunks else np.empty(0)


class StrideNormCollector:
    """Systematic subsample of |x| (uniform over time) for tail-index estimates."""

    def __init__(self, stride: int, n_burn: int = 0):
        self.stride = stride
        self.n_burn = n_burn
        self._chunks = []

    def update(self, xnorm, x1, start):
        n = len(xnorm)
        k0 = _first_kept(max(self.n_burn, start), self.stride) - start
        if k0 < n:
            self._chunks.append(xnorm[k0 :: self.stride].copy())

    @property
    def samples(self) -> np.ndarray:
        return np.concatenate(self._chunks) if self._chunks else np.empty(0)


class ThresholdNormCollector:
    """All |x| values above a level (deep-tail store for Hill diagnostics)."""

    def __init__(self, level: float, cap: int = 10_000_000):
        self.level = level
        self.cap = cap
        self._chunks = []
        self._count = 0

    def update(self, xnorm, x1, start):
        if self._count >= self.cap:
            return
        vals = xnorm[xnorm > self.level]
        if len(vals):
            vals = vals[: self.cap - self._count]
            self._chunks.append(vals.copy())
            self._count += len(vals)

    @property
    def samples(self) -> np.ndarray:
        return np.concatenate(self._chunks) if self._chunks else np.empty(0)


class ExcursionCollector:
    """Maximal runs of V(X) > ell, tracked across block boundaries."""

    def __init__(self, lyapunov, ell: float):
        if not ell > 1:
            raise ValueError(f"excursion level must exceed 1, got {ell}")
        self.lyapunov = lyapunov
        self.ell = ell
        self._open_run = 0  # length of the excursion in progress
        self._chunks = []
        self.total_steps = 0

    def update(self, xnorm, x1, start):
        above = self.lyapunov.value_from_norm(xnorm) > self.ell
        n = len(above)
        self.total_steps += n
        if n == 0:
            return
        prev = np.empty(n, dtype=bool)
        prev[0] = False
        prev[1:] = above[:-1]
        nxt = np.empty(n, dtype=bool)
        nxt[-1] = False
        nxt[:-1] = above[1:]
        starts = np.flatnonzero(above & ~prev)
        ends = np.flatnonzero(above & ~nxt)
        lengths = (ends - starts + 1).astype(np.int64)
        if self._open_run and not above[0]:
            # previous block's excursion closed exactly at the boundary
            self._chunks.append(np.array([self._open_run], dtype=np.int64))
            self._open_run = 0
        if len(lengths) == 0:
            return
        if self._open_run:
            lengths[0] += self._open_run
            self._open_run = 0
        if above[-1]:  # last run is still open; hold it back
            self._open_run = int(lengths[-1])
            lengths = lengths[:-1]
        if len(lengths):
            self._chunks.append(lengths)

    def finish(self):
        """Completed durations plus the length of any censored (unfinished) run."""
        durations = (
            np.concatenate(self._chunks) if self._chunks else np.empty(0, dtype=np.int64)
        )
        return durations, self._open_run
