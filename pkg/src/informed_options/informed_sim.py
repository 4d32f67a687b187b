"""Payoff mechanics of informed and arbitrage traders.

Covers the one-period forward bet of a trader who calls the direction of
the next move correctly with probability ``p_success``, the mean-variance
optimal hedge under a turnover constraint, the arbitrage payoff on a
random clock and a diagnostic for arbitrage-like return series.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .lattice import ProbabilityBoundError, crr_up_prob, rn_up_prob
from .model import MarketParams, TraderInfo, ValidationError, sharpe
from .subordination import SubordinatorSpec, clock_increments


@dataclass(frozen=True)
class PayoffDistribution:
    """Discrete payoff law: a tuple of ``(payoff, probability)`` pairs."""

    outcomes: tuple

    def __post_init__(self):
        outcomes = tuple((float(x), float(p)) for x, p in self.outcomes)
        object.__setattr__(self, "outcomes", outcomes)
        probs = [p for _, p in outcomes]
        if any(not 0.0 <= p <= 1.0 for p in probs):
            raise ValidationError("outcomes", f"probabilities must lie in [0, 1], got {probs}")
        if abs(math.fsum(probs) - 1.0) > 1e-14:
            raise ValidationError("outcomes", f"probabilities sum to {math.fsum(probs)!r}")

    @property
    def payoffs(self) -> np.ndarray:
        return np.array([x for x, _ in self.outcomes])

    @property
    def probs(self) -> np.ndarray:
        return np.array([p for _, p in self.outcomes])

    def variance(self) -> float:
        mean = expected_info_payoff(self)
        return math.fsum(p * (x - mean) ** 2 for x, p in self.outcomes)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return rng.choice(self.payoffs, size=n, p=self.probs)


def _binary_factors(drift: float, sigma: float, p: float, dt: float) -> tuple:
    s = sigma * math.sqrt(dt)
    return (
        1.0 + drift * dt + math.sqrt((1.0 - p) / p) * s,
        1.0 + drift * dt - math.sqrt(p / (1.0 - p)) * s,
    )


def forward_payoff_dist(
    m: MarketParams,
    info: TraderInfo,
    spot: float,
    dt: float,
    p: Optional[float] = None,
) -> PayoffDistribution:
    """Payoff of one forward bet placed on the trader's direction call.

    The stock moves by ``u`` or ``d`` (the physical binomial factors) with
    probability ``p`` (default: the CRR up-probability); the forward is
    struck at ``F = e^{r dt}``. Outcomes, in order: right on an up move,
    wrong on an up move, right on a down move, wrong on a down move.
    """
    if p is None:
        p = crr_up_prob(m, dt)
    if not 0.0 < p < 1.0:
        raise ProbabilityBoundError(f"p = {p!r} outside (0, 1)", dt)
    u, d = _binary_factors(m.mu, m.sigma, p, dt)
    fwd = math.exp(m.r * dt)
    if not d < fwd < u:
        raise ProbabilityBoundError(f"forward {fwd!r} not strictly inside ({d!r}, {u!r})", dt)
    ps = info.p_success
    return PayoffDistribution(
        (
            (spot * (u - fwd), p * ps),
            (spot * (fwd - u), (1.0 - ps) * p),
            (spot * (fwd - d), ps * (1.0 - p)),
            (spot * (d - fwd), (1.0 - ps) * (1.0 - p)),
        )
    )


def expected_info_payoff(dist: PayoffDistribution) -> float:
    return math.fsum(x * p for x, p in dist.outcomes)


def mv_epsilon(f_up: float, f_down: float, p: float, lam: float) -> float:
    """Variance budget ``lam (f_up - f_down) sqrt(p (1 - p))``."""
    return lam * (f_up - f_down) * math.sqrt(p * (1.0 - p))


def mv_optimal_delta(f_up: float, f_down: float, m: MarketParams, p: float, dt: float, epsilon: float) -> float:
    """Optimal stock position (in currency, ``Delta * y``) under a variance cap.

    ``epsilon / (sigma sqrt(dt)) + (f_up - f_down) sqrt(p (1 - p)) / (sigma sqrt(dt))``;
    the hedged portfolio variance then equals ``epsilon^2``.
    """
    if not (math.isfinite(dt) and dt > 0.0):
        raise ValidationError("dt", f"must be positive, got {dt!r}")
    if not 0.0 < p < 1.0:
        raise ValidationError("p", f"must lie in (0, 1), got {p!r}")
    s = m.sigma * math.sqrt(dt)
    return epsilon / s + (f_up - f_down) / s * math.sqrt(p * (1.0 - p))


def hedged_portfolio_dist(
    delta_y: float,
    f_up: float,
    f_down: float,
    m: MarketParams,
    p: float,
    dt: float,
    gamma: Optional[float] = None,
) -> PayoffDistribution:
    """Short option plus ``delta_y`` of stock over one step with drift ``gamma``."""
    gamma = m.mu if gamma is None else gamma
    u, d = _binary_factors(gamma, m.sigma, p, dt)
    return PayoffDistribution(((delta_y * u - f_up, p), (delta_y * d - f_down, 1.0 - p)))


def arb_payoff_dist(
    m: MarketParams,
    spec: SubordinatorSpec,
    spot: float,
    p: float,
    clock_increment: float,
) -> PayoffDistribution:
    """Arbitrageur's forward payoff over one clock increment ``D``.

    ``spot (rho D + sqrt((1-p)/p) sigma sqrt(D))`` with probability ``p``,
    ``spot (rho D - sqrt(p/(1-p)) sigma sqrt(D))`` otherwise.
    """
    if not 0.0 < p < 1.0:
        raise ProbabilityBoundError(f"p = {p!r} outside (0, 1)", clock_increment)
    if not (math.isfinite(clock_increment) and clock_increment > 0.0):
        raise ValidationError("clock_increment", f"must be positive, got {clock_increment!r}")
    drift = spec.rho * clock_increment
    s = m.sigma * math.sqrt(clock_increment)
    return PayoffDistribution(
        (
            (spot * (drift + math.sqrt((1.0 - p) / p) * s), p),
            (spot * (drift - math.sqrt(p / (1.0 - p)) * s), 1.0 - p),
        )
    )


def arb_step_prob(p: float, rho: float, sigma: float, clock_increment: float) -> float:
    """Arbitrage pricing probability ``1/2 + (p - 1/2) / (1 + 2 rho/sigma sqrt(D) sqrt(p (1-p)))``."""
    if not 0.0 < p < 1.0:
        raise ValidationError("p", f"must lie in (0, 1), got {p!r}")
    if not (sigma > 0.0 and clock_increment > 0.0):
        raise ValidationError("sigma", "volatility and clock increment must be positive")
    denom = 1.0 + 2.0 * rho / sigma * math.sqrt(clock_increment) * math.sqrt(p * (1.0 - p))
    if not denom > 0.0:
        raise ProbabilityBoundError(f"denominator {denom!r} is not positive", clock_increment)
    q = 0.5 + (p - 0.5) / denom
    if not 0.0 < q < 1.0:
        raise ProbabilityBoundError(f"q_a = {q!r} outside (0, 1)", clock_increment)
    return q


@dataclass(frozen=True)
class DiagnosticResult:
    fraction: float
    band: float
    band95: float
    n: int


def arbitrage_centers(clock_increments: np.ndarray, m: MarketParams, spec: SubordinatorSpec, p: float) -> np.ndarray:
    """Arbitrage log-return prediction ``r dt + 2 rho p D`` per observation."""
    return m.r * spec.base_dt + 2.0 * spec.rho * p * np.asarray(clock_increments, dtype=float)


def default_band(clock_increments: np.ndarray, m: MarketParams, spec: SubordinatorSpec, p: float) -> float:
    """Three robust (MAD-based) standard deviations of the predicted log-return."""
    centers = arbitrage_centers(clock_increments, m, spec, p)
    mad = float(np.median(np.abs(centers - np.median(centers))))
    return 3.0 * 1.4826 * mad


def arbitrage_diagnostic(
    log_returns: Sequence[float],
    clock_increments: Sequence[float],
    m: MarketParams,
    spec: SubordinatorSpec,
    p: float,
    band: Optional[float] = None,
) -> DiagnosticResult:
    """Share of log-returns within ``band`` of ``r dt + 2 rho p D``.

    Also reports ``band95``, the band that captures 95% of observations.
    """
    lr = np.asarray(log_returns, dtype=float)
    inc = np.asarray(clock_increments, dtype=float)
    if lr.shape != inc.shape or lr.ndim != 1:
        raise ValidationError("clock_increments", f"length {inc.shape} does not match log_returns {lr.shape}")
    if lr.size == 0:
        raise ValidationError("log_returns", "no observations")
    if band is None:
        band = default_band(inc, m, spec, p)
    if not band >= 0.0:
        raise ValidationError("band", f"must be >= 0, got {band!r}")
    dev = np.abs(lr - arbitrage_centers(inc, m, spec, p))
    return DiagnosticResult(
        fraction=float(np.mean(dev <= band)),
        band=float(band),
        band95=float(np.quantile(dev, 0.95)),
        n=int(lr.size),
    )


def simulate_arbitrage_returns(m: MarketParams, spec: SubordinatorSpec, p: float, n: int, seed: int) -> tuple:
    """Log-returns that follow the arbitrage relation exactly, with their clock increments."""
    rng = np.random.default_rng(seed)
    inc = clock_increments(spec, m, spec.base_dt, n, rng)
    return arbitrage_centers(inc, m, spec, p), inc


def simulate_null_returns(m: MarketParams, spec: SubordinatorSpec, p: float, n: int, seed: int) -> tuple:
    """Log-returns of the plain risk-neutral binary tree, with clock increments drawn alongside."""
    rng = np.random.default_rng(seed)
    dt = spec.base_dt
    inc = clock_increments(spec, m, dt, n, rng)
    q = rn_up_prob(p, sharpe(m), dt)
    u, d = _binary_factors(m.mu, m.sigma, p, dt)
    up = rng.random(n) < q
    return np.log(np.where(up, u, d)), inc
