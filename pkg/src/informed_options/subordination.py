"""Random-clock (subordinated) binary market and the log-stable call pricer.

The trading clock ``tau(t)`` is a nondecreasing Levy process. Prices follow
``S_t = S_0 exp(r t + rho tau(t) + sigma B(tau(t)))``. With an
``alpha/2``-stable clock the log-returns are symmetric ``alpha``-stable and
a call is worth ``S F+(x) - K* F-(x)`` where ``K* = K e^{-r(T-t)}``,
``x = log(S/K*)`` and ``F+-(x) = E Phi((x +- Y/2) / sqrt(Y))`` for the
clock variance ``Y = sigma^2 (tau(T) - tau(t))``. ``F+-`` are estimated by
seeded Monte Carlo over ``Y``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .model import MarketParams, OptionSpec, ValidationError, norm_cdf

ClockKind = Literal["stable", "deterministic", "empirical"]


class NonPositiveFactorError(ValueError):
    """A simulated gross return fell to zero or below."""


@dataclass(frozen=True)
class MCEstimate:
    value: float
    stderr: float
    n: int


@dataclass(frozen=True)
class SubordinatorSpec:
    """Random clock.

    ``stable`` uses ``alpha/2``-stable increments, ``deterministic`` is
    ``tau(t) = t`` and ``empirical`` bootstraps the positive ``samples``
    (clock increments per ``base_dt``). ``printed_scale`` selects the
    alternative grouping of the stable clock scale, see :func:`y_scale`.
    """

    kind: ClockKind = "stable"
    alpha: float = 1.7
    rho: float = 0.0
    base_dt: float = 1.0 / 252.0
    samples: tuple = ()
    printed_scale: bool = False

    def __post_init__(self):
        if self.kind not in ("stable", "deterministic", "empirical"):
            raise ValidationError("kind", f"unknown clock kind {self.kind!r}")
        if self.kind == "stable" and not 1.0 < self.alpha < 2.0:
            raise ValidationError("alpha", f"must lie in (1, 2), got {self.alpha!r}")
        if not math.isfinite(self.rho):
            raise ValidationError("rho", "must be finite")
        if not (math.isfinite(self.base_dt) and self.base_dt > 0.0):
            raise ValidationError("base_dt", f"must be positive, got {self.base_dt!r}")
        samples = tuple(float(x) for x in self.samples)
        object.__setattr__(self, "samples", samples)
        if self.kind == "empirical":
            if not samples:
                raise ValidationError("samples", "empirical clock needs increment samples")
            if any(not (math.isfinite(x) and x > 0.0) for x in samples):
                raise ValidationError("samples", "clock increments must be positive and finite")


def market_price_of_risk(spec: SubordinatorSpec, m: MarketParams) -> float:
    """``psi = -(rho + sigma^2/2) / sigma``."""
    return -(spec.rho + 0.5 * m.sigma * m.sigma) / m.sigma


# --------------------------------------------------------------------------
# stable sampling
# --------------------------------------------------------------------------

def _check_alpha(alpha: float) -> float:
    if not 1.0 < alpha < 2.0:
        raise ValidationError("alpha", f"must lie in (1, 2), got {alpha!r}")
    return alpha


def sample_stable_increment(alpha: float, scale: float, rng: np.random.Generator, size=None):
    """Draw ``scale * V`` with ``V ~ S_{alpha/2}(1, 1, 0)``, totally skewed and positive.

    Chambers-Mallows-Stuck transform of a uniform angle and a unit
    exponential; exact for every ``alpha`` in (1, 2).
    """
    _check_alpha(alpha)
    if not (math.isfinite(scale) and scale > 0.0):
        raise ValidationError("scale", f"must be positive, got {scale!r}")
    a = 0.5 * alpha
    u = rng.uniform(-0.5 * math.pi, 0.5 * math.pi, size=size)
    w = rng.standard_exponential(size=size)
    shifted = a * (u + 0.5 * math.pi)
    norm = math.cos(0.5 * math.pi * a) ** (-1.0 / a)
    v = (
        norm
        * np.sin(shifted)
        / np.cos(u) ** (1.0 / a)
        * (np.cos(u - shifted) / w) ** ((1.0 - a) / a)
    )
    out = scale * v
    if size is None:
        return float(out)
    return out


def stable_laplace(alpha: float, scale: float, s):
    """``E exp(-s scale V)`` for ``V ~ S_{alpha/2}(1, 1, 0)``."""
    a = 0.5 * _check_alpha(alpha)
    return np.exp(-((scale * np.asarray(s, dtype=float)) ** a) / math.cos(0.5 * math.pi * a))


def y_scale(m: MarketParams, alpha: float, tenor: float, printed: bool = False) -> float:
    """Scale of the clock variance ``Y`` over ``tenor``.

    Default grouping ``(2 sigma^2 cos(pi alpha/4))^(2/alpha) tenor^(2/alpha)``;
    ``printed=True`` gives ``2 sigma^2 cos(pi alpha/4)^(2/alpha) tenor^(2/alpha)``.
    """
    _check_alpha(alpha)
    if not (math.isfinite(tenor) and tenor > 0.0):
        raise ValidationError("tenor", f"must be positive, got {tenor!r}")
    c = math.cos(math.pi * alpha / 4.0)
    s2 = m.sigma * m.sigma
    if printed:
        base = 2.0 * s2 * c ** (2.0 / alpha)
    else:
        base = (2.0 * s2 * c) ** (2.0 / alpha)
    return base * tenor ** (2.0 / alpha)


def clock_variance(spec: SubordinatorSpec, m: MarketParams, tenor: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` draws of ``Y = sigma^2 (tau(T) - tau(t))`` over ``tenor``."""
    s2 = m.sigma * m.sigma
    if spec.kind == "deterministic":
        return np.full(n, s2 * tenor)
    if spec.kind == "stable":
        return sample_stable_increment(spec.alpha, y_scale(m, spec.alpha, tenor, spec.printed_scale), rng, size=n)
    k = max(1, round(tenor / spec.base_dt))
    draws = rng.choice(np.asarray(spec.samples), size=(n, k), replace=True)
    return s2 * draws.sum(axis=1)


def clock_increments(spec: SubordinatorSpec, m: MarketParams, dt: float, shape, rng: np.random.Generator) -> np.ndarray:
    """Clock increments ``tau((k+1) dt) - tau(k dt)`` in clock units."""
    if spec.kind == "deterministic":
        return np.full(shape, dt)
    if spec.kind == "stable":
        scale = y_scale(m, spec.alpha, dt, spec.printed_scale) / (m.sigma * m.sigma)
        return sample_stable_increment(spec.alpha, scale, rng, size=shape)
    if not math.isclose(dt, spec.base_dt, rel_tol=1e-9):
        raise ValidationError("base_dt", f"empirical increments are sampled at {spec.base_dt!r}, not {dt!r}")
    return rng.choice(np.asarray(spec.samples), size=shape, replace=True)


# --------------------------------------------------------------------------
# pricing
# --------------------------------------------------------------------------

def _mixture_terms(x: float, y: np.ndarray, side: str, one_sided: bool) -> np.ndarray:
    sy = np.sqrt(y)
    if one_sided:
        return norm_cdf((x + y) / sy)
    if side == "plus":
        return norm_cdf((x + 0.5 * y) / sy)
    if side == "minus":
        return norm_cdf((x - 0.5 * y) / sy)
    raise ValidationError("side", f"must be 'plus' or 'minus', got {side!r}")


def _estimate(values: np.ndarray) -> MCEstimate:
    n = values.size
    if n > 1 and np.ptp(values) > 0.0:
        se = float(values.std(ddof=1) / math.sqrt(n))
    else:
        se = 0.0
    return MCEstimate(float(values.mean()), se, n)


def _check_n(n_mc: int) -> int:
    if int(n_mc) != n_mc or n_mc < 1:
        raise ValidationError("n_mc", f"must be a positive integer, got {n_mc!r}")
    return int(n_mc)


def f_mixture(
    x: float,
    side: str,
    spec: SubordinatorSpec,
    m: MarketParams,
    tenor: float,
    n_mc: int,
    seed: int,
    one_sided: bool = False,
) -> MCEstimate:
    """Monte Carlo estimate of ``F+-(x) = E Phi((x +- Y/2) / sqrt(Y))``.

    ``one_sided=True`` uses the integrand ``(x + Y) / sqrt(Y)`` for both sides.
    """
    n = _check_n(n_mc)
    if spec.kind == "deterministic":
        y = np.array([m.sigma * m.sigma * tenor])
        return MCEstimate(float(_mixture_terms(x, y, side, one_sided)[0]), 0.0, 1)
    y = clock_variance(spec, m, tenor, n, np.random.default_rng(seed))
    return _estimate(_mixture_terms(x, y, side, one_sided))


def logstable_call(
    opt: OptionSpec,
    m: MarketParams,
    spec: SubordinatorSpec,
    n_mc: int,
    seed: int,
    one_sided: bool = False,
) -> MCEstimate:
    """Random-clock call ``S F+(x) - K* F-(x)`` with common random numbers.

    Under a deterministic clock this is the Black-Scholes price.
    """
    n = _check_n(n_mc)
    tenor = opt.tenor
    S = opt.spot
    k_disc = opt.strike * math.exp(-m.r * tenor)
    if tenor == 0.0:
        return MCEstimate(float(opt.payoff(S)), 0.0, 1)
    if spec.kind == "deterministic":
        y = np.array([m.sigma * m.sigma * tenor])
    else:
        y = clock_variance(spec, m, tenor, n, np.random.default_rng(seed))
    x = math.log(S / k_disc)
    values = S * _mixture_terms(x, y, "plus", one_sided) - k_disc * _mixture_terms(x, y, "minus", one_sided)
    if opt.kind == "put":
        values = values - S + k_disc
    return _estimate(values)


def pathwise_mc_call(
    opt: OptionSpec,
    m: MarketParams,
    spec: SubordinatorSpec,
    n_paths: int,
    seed: int,
    n_steps: int = 16,
) -> MCEstimate:
    """Discounted payoff averaged over simulated risk-neutral time-changed paths.

    The clock is built step by step and the Brownian part is sampled on the
    clock; under the pricing measure the clock drift is ``-sigma^2/2``. The
    heavy-tailed clock gives the raw payoff infinite variance, so the
    discounted terminal price (mean: spot) is subtracted as a control
    variate with unit coefficient.
    """
    n = _check_n(n_paths)
    tenor = opt.tenor
    if tenor == 0.0:
        return MCEstimate(float(opt.payoff(opt.spot)), 0.0, 1)
    rng = np.random.default_rng(seed)
    dt = tenor / n_steps
    inc = clock_increments(spec, m, dt, (n, n_steps), rng)
    z = rng.standard_normal((n, n_steps))
    clock = inc.sum(axis=1)
    brownian = (np.sqrt(inc) * z).sum(axis=1)
    log_st = math.log(opt.spot) + m.r * tenor - 0.5 * m.sigma**2 * clock + m.sigma * brownian
    disc = math.exp(-m.r * tenor)
    s_t = np.exp(log_st)
    # control variate: discounted terminal price has mean spot; leaves a payoff bounded by K
    if opt.kind == "call":
        values = disc * (opt.payoff(s_t) - s_t) + opt.spot
    else:
        values = disc * opt.payoff(s_t)
    return _estimate(values)


def simulate_subordinated_path(
    spec: SubordinatorSpec,
    m: MarketParams,
    horizon: float,
    n_steps: int,
    seed: int,
    p: float = 0.5,
    spot: float = 1.0,
    n_paths: int = 1,
    scheme: Literal["tree", "exponential"] = "tree",
) -> np.ndarray:
    """Price paths of shape ``(n_paths, n_steps + 1)``.

    ``tree`` steps the binary subordinated tree: gross return
    ``1 + r dt + rho D + sqrt((1-p)/p) sigma sqrt(D)`` with probability ``p``
    and ``1 + r dt + rho D - sqrt(p/(1-p)) sigma sqrt(D)`` otherwise, ``D``
    the clock increment. ``exponential`` steps the continuous limit exactly
    on the grid.
    """
    if not 0.0 < p < 1.0:
        raise ValidationError("p", f"must lie in (0, 1), got {p!r}")
    if int(n_steps) != n_steps or n_steps < 1:
        raise ValidationError("n_steps", f"must be a positive integer, got {n_steps!r}")
    rng = np.random.default_rng(seed)
    dt = horizon / n_steps
    inc = clock_increments(spec, m, dt, (n_paths, n_steps), rng)
    if scheme == "exponential":
        z = rng.standard_normal((n_paths, n_steps))
        growth = np.exp(m.r * dt + spec.rho * inc + m.sigma * np.sqrt(inc) * z)
    elif scheme == "tree":
        up = rng.random((n_paths, n_steps)) < p
        dev = np.where(up, math.sqrt((1.0 - p) / p), -math.sqrt(p / (1.0 - p)))
        growth = 1.0 + m.r * dt + spec.rho * inc + dev * m.sigma * np.sqrt(inc)
        bad = growth <= 0.0
        if bad.any():
            path, step = (int(i[0]) for i in np.nonzero(bad))
            raise NonPositiveFactorError(
                f"gross return {growth[path, step]!r} <= 0 at path {path}, step {step}; clock increment {inc[path, step]!r}"
            )
    else:
        raise ValidationError("scheme", f"unknown scheme {scheme!r}")
    out = np.empty((n_paths, n_steps + 1))
    out[:, 0] = spot
    out[:, 1:] = spot * np.cumprod(growth, axis=1)
    return out
