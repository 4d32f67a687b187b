"""Domain types shared by every pricer, plus the normal CDF kernel.

All types are frozen dataclasses validated on construction. A bad field
raises :class:`ValidationError` carrying the field name.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np
from scipy.special import ndtr

OptionKind = Literal["call", "put"]


class ValidationError(ValueError):
    """Input violates a documented invariant."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


def _finite(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise ValidationError(name, f"must be finite, got {value!r}")
    return value


def _positive(name: str, value: float) -> float:
    value = _finite(name, value)
    if value <= 0.0:
        raise ValidationError(name, f"must be > 0, got {value!r}")
    return value


def _nonnegative(name: str, value: float) -> float:
    value = _finite(name, value)
    if value < 0.0:
        raise ValidationError(name, f"must be >= 0, got {value!r}")
    return value


def norm_cdf(x):
    """Standard normal CDF. Accepts scalars or arrays."""
    out = ndtr(x)
    if np.ndim(out) == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class MarketParams:
    """True GBM dynamics: drift ``mu``, volatility ``sigma``, short rate ``r``."""

    mu: float
    sigma: float
    r: float

    def __post_init__(self):
        _finite("mu", self.mu)
        _positive("sigma", self.sigma)
        _finite("r", self.r)

    @property
    def theta(self) -> float:
        return sharpe(self)


@dataclass(frozen=True)
class PerceivedParams:
    """Market-perceived quantities; any of them may be absent.

    ``nu`` is the perceived mean return of the mean-return trees, ``gamma``
    the perceived mean of the trinomial and risk-adjusted trees, ``rho_vol``
    the perceived volatility and ``R_rate`` the perceived discount rate.
    """

    nu: Optional[float] = None
    gamma: Optional[float] = None
    rho_vol: Optional[float] = None
    R_rate: Optional[float] = None

    def __post_init__(self):
        for name in ("nu", "gamma", "R_rate"):
            value = getattr(self, name)
            if value is not None:
                _finite(name, value)
        if self.rho_vol is not None:
            _positive("rho_vol", self.rho_vol)

    def require(self, name: str) -> float:
        value = getattr(self, name)
        if value is None:
            raise ValidationError(name, "required by this model but not supplied")
        return value


@dataclass(frozen=True)
class TraderInfo:
    """Information parameters of an informed trader.

    The defaults describe an uninformed trader: ``tau = 0``, unit informed
    volatility and no turnover constraint (``phi_ht = 0``, ``b_ht = inf``).
    """

    tau: float = 0.0
    c_tau: float = 0.0
    d_tau: float = 0.0
    a_tau: float = 1.0
    b_tau: float = 0.0
    c_disc: float = 0.0
    p_success: float = 0.5
    lambda0: float = 0.0
    phi_ht: float = 0.0
    b_ht: float = math.inf

    def __post_init__(self):
        _finite("tau", self.tau)
        for name in ("c_tau", "d_tau", "a_tau", "b_tau", "c_disc", "lambda0", "phi_ht"):
            _nonnegative(name, getattr(self, name))
        p = _finite("p_success", self.p_success)
        if not 0.0 <= p <= 1.0:
            raise ValidationError("p_success", f"must lie in [0, 1], got {p!r}")
        if math.isnan(self.b_ht) or self.b_ht <= 0.0:
            raise ValidationError("b_ht", f"must be > 0, got {self.b_ht!r}")

    @property
    def info_yield(self) -> float:
        """Direction-information yield ``C_tau * tau``."""
        return self.c_tau * self.tau

    @property
    def vol_multiplier(self) -> float:
        """Informed-volatility factor ``A_tau * exp(-B_tau * tau)``."""
        return self.a_tau * math.exp(-self.b_tau * self.tau)

    @property
    def disc_yield(self) -> float:
        """Discount-rate information yield ``C^(tau) * tau``."""
        return self.c_disc * self.tau

    @property
    def lam(self) -> float:
        """Risk-aversion ``lambda0 + phi / B``."""
        return self.lambda0 + self.phi_ht / self.b_ht


@dataclass(frozen=True)
class OptionSpec:
    spot: float
    strike: float
    t: float
    T: float
    kind: OptionKind = "call"

    def __post_init__(self):
        _positive("spot", self.spot)
        _positive("strike", self.strike)
        _finite("t", self.t)
        _finite("T", self.T)
        if self.t < 0.0:
            raise ValidationError("t", f"must be >= 0, got {self.t!r}")
        if self.T < self.t:
            raise ValidationError("T", f"maturity {self.T!r} precedes valuation time {self.t!r}")
        if self.kind not in ("call", "put"):
            raise ValidationError("kind", f"must be 'call' or 'put', got {self.kind!r}")

    @property
    def tenor(self) -> float:
        return self.T - self.t

    def payoff(self, s):
        if self.kind == "call":
            return np.maximum(s - self.strike, 0.0)
        return np.maximum(self.strike - s, 0.0)


@dataclass(frozen=True)
class BinaryProbModel:
    """Up-probability ``p(dt) = g + v * sqrt(dt)`` of the binary tree."""

    g: float
    v: float

    def __post_init__(self):
        g = _finite("g", self.g)
        _finite("v", self.v)
        if not 0.0 < g < 1.0:
            raise ValidationError("g", f"must lie in (0, 1), got {g!r}")

    def prob(self, dt: float) -> float:
        p = self.g + self.v * math.sqrt(dt)
        if not 0.0 < p < 1.0:
            raise ValidationError("dt", f"g + v*sqrt(dt) = {p!r} leaves (0, 1) at dt={dt!r}")
        return p


def sharpe(params: MarketParams) -> float:
    """Market price of risk ``(mu - r) / sigma``."""
    _positive("sigma", params.sigma)
    return (params.mu - params.r) / params.sigma


def perceived_sharpe(params: MarketParams, perceived: PerceivedParams) -> float:
    """Perceived Sharpe ratio ``(gamma - r) / rho_vol``."""
    gamma = perceived.require("gamma")
    rho_vol = _positive("rho_vol", perceived.require("rho_vol"))
    return (gamma - params.r) / rho_vol
