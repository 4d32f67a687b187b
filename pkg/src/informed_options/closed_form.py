"""Closed-form call prices for informed traders.

Every formula is one generalized Black-Scholes kernel; the pricing wrappers
only map trader parameters onto a :class:`YieldSpec`.
Puts come from put-call parity on the same discounted forward.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .model import (
    MarketParams,
    OptionSpec,
    PerceivedParams,
    TraderInfo,
    ValidationError,
    norm_cdf,
)


@dataclass(frozen=True)
class YieldSpec:
    """Kernel parameters.

    ``info_yield`` discounts the spot leg, ``disc_rate`` the strike leg,
    ``vol_eff`` is the lognormal volatility. ``d1_drift`` overrides the
    ``disc_rate - info_yield`` drift inside d1 (used only by sensitivity
    variants).
    """

    info_yield: float
    disc_rate: float
    vol_eff: float
    d1_drift: Optional[float] = None

    def __post_init__(self):
        for name in ("info_yield", "disc_rate", "vol_eff"):
            if not math.isfinite(getattr(self, name)):
                raise ValidationError(name, "must be finite")
        if self.vol_eff <= 0.0:
            raise ValidationError("vol_eff", f"must be > 0, got {self.vol_eff!r}")


def gbs_call(opt: OptionSpec, y: YieldSpec) -> float:
    """Generalized Black-Scholes value of ``opt``.

    At ``T == t`` returns intrinsic value. ``opt.kind == 'put'`` is priced
    by parity: ``P = C - S e^{-q tau} + K e^{-r_d tau}``.
    """
    tau = opt.tenor
    S, K = opt.spot, opt.strike
    if tau == 0.0:
        return float(opt.payoff(S))
    spot_leg = S * math.exp(-y.info_yield * tau)
    strike_leg = K * math.exp(-y.disc_rate * tau)
    drift = y.disc_rate - y.info_yield if y.d1_drift is None else y.d1_drift
    sd = y.vol_eff * math.sqrt(tau)
    d1 = (math.log(S / K) + (drift + 0.5 * y.vol_eff * y.vol_eff) * tau) / sd
    d2 = d1 - sd
    call = spot_leg * norm_cdf(d1) - strike_leg * norm_cdf(d2)
    if opt.kind == "put":
        return call - spot_leg + strike_leg
    return call


def bs_price(opt: OptionSpec, m: MarketParams) -> float:
    """Plain Black-Scholes (no yield)."""
    return gbs_call(opt, YieldSpec(0.0, m.r, m.sigma))


def prop1_price(opt: OptionSpec, m: MarketParams, info: TraderInfo) -> float:
    """Direction information: spot yield ``C_tau * tau``."""
    return gbs_call(opt, YieldSpec(info.info_yield, m.r, m.sigma))


def mean_return_yield(m: MarketParams, perceived: PerceivedParams, info: TraderInfo) -> float:
    """``J = (C_tau tau nu - sigma^2) / 2``; note ``J = -sigma^2/2`` at ``tau = 0``."""
    nu = perceived.require("nu")
    return 0.5 * (info.c_tau * info.tau * nu - m.sigma * m.sigma)


def prop2_price(opt: OptionSpec, m: MarketParams, perceived: PerceivedParams, info: TraderInfo) -> float:
    """Mean-return information: spot yield ``J``."""
    return gbs_call(opt, YieldSpec(mean_return_yield(m, perceived, info), m.r, m.sigma))


def prop3_price(opt: OptionSpec, m: MarketParams, info: TraderInfo) -> float:
    """Mean-return and volatility information: yield ``D_tau tau``, vol ``V(tau) sigma``."""
    if info.a_tau <= 0.0:
        raise ValidationError("a_tau", "informed volatility needs A_tau > 0")
    return gbs_call(opt, YieldSpec(info.d_tau * info.tau, m.r, info.vol_multiplier * m.sigma))


def prop4_price(
    opt: OptionSpec,
    m: MarketParams,
    perceived: PerceivedParams,
    info: TraderInfo,
    d1_at_informed_rate: bool = False,
) -> float:
    """Discount-rate information.

    Spot leg discounted at ``C^(tau) tau``, strike leg at
    ``R^(tau) = R + C^(tau) tau``, d1 built with drift ``R``. Setting
    ``d1_at_informed_rate`` rebuilds d1 with ``R^(tau)`` instead.
    """
    R = perceived.require("R_rate")
    c = info.disc_yield
    r_tau = R + c
    return gbs_call(opt, YieldSpec(c, r_tau, m.sigma, d1_drift=r_tau if d1_at_informed_rate else None))


def mv_price(opt: OptionSpec, m: MarketParams, gamma: float, lambda0: float) -> float:
    """Mean-variance (risk-adjusted) price: spot yield ``(gamma - r) lambda0``."""
    if not math.isfinite(lambda0) or lambda0 < 0.0:
        raise ValidationError("lambda0", f"must be >= 0, got {lambda0!r}")
    return gbs_call(opt, YieldSpec((gamma - m.r) * lambda0, m.r, m.sigma))


def central_delta_vega(pricer, opt: OptionSpec, m: MarketParams, h: float = 1e-4) -> tuple:
    """Central-difference delta and vega of ``pricer(opt, m)``; test support only."""
    up = OptionSpec(opt.spot * (1 + h), opt.strike, opt.t, opt.T, opt.kind)
    dn = OptionSpec(opt.spot * (1 - h), opt.strike, opt.t, opt.T, opt.kind)
    delta = (pricer(up, m) - pricer(dn, m)) / (2 * h * opt.spot)
    m_up = MarketParams(m.mu, m.sigma + h, m.r)
    m_dn = MarketParams(m.mu, m.sigma - h, m.r)
    vega = (pricer(opt, m_up) - pricer(opt, m_dn)) / (2 * h)
    return delta, vega
