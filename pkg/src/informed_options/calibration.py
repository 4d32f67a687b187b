"""Implied information surface and binary-tree parameter estimation.

The implied information yield of a quote is the spot yield ``I`` that makes
the chosen informed-trader formula reproduce the quoted mid price. Call
prices are strictly decreasing in ``I``, so a bracketing root finder
recovers the unique root.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Literal, Sequence

import numpy as np
from scipy.optimize import brentq

from .closed_form import YieldSpec, gbs_call
from .model import OptionSpec, ValidationError

Model = Literal["prop1", "prop3", "prop4"]

BRACKET = 5.0
MAX_BRACKET = 50.0
PRICE_TOL = 1e-10
MAX_ITER = 200


class CalibrationError(ValueError):
    pass


class OutOfBandError(CalibrationError):
    """Quote lies outside the prices attainable inside the bracket."""

    def __init__(self, mid: float, band: tuple):
        self.mid = mid
        self.band = band
        super().__init__(f"mid {mid!r} outside attainable band [{band[0]!r}, {band[1]!r}]")


class ConvergenceError(CalibrationError):
    pass


class EstimationError(ValueError):
    pass


@dataclass(frozen=True)
class OptionQuote:
    strike: float
    maturity: float
    mid: float
    spot: float
    rate: float
    vol: float

    def __post_init__(self):
        for name in ("strike", "maturity", "spot", "vol"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0.0):
                raise ValidationError(name, f"must be positive, got {value!r}")
        if not (math.isfinite(self.mid) and self.mid >= 0.0):
            raise ValidationError("mid", f"must be >= 0, got {self.mid!r}")
        if not math.isfinite(self.rate):
            raise ValidationError("rate", "must be finite")


def quote_price(q: OptionQuote, info_yield: float, model: Model = "prop1") -> float:
    """Model call price of the quote's contract at information yield ``info_yield``.

    ``prop1`` and ``prop3`` put the yield on the spot leg and discount the
    strike at the quote rate, with the quote volatility taken as the
    (informed) effective volatility. ``prop4`` also adds the yield to the
    strike-leg rate while keeping d1 at the quote rate.
    """
    opt = OptionSpec(q.spot, q.strike, 0.0, q.maturity)
    if model in ("prop1", "prop3"):
        return gbs_call(opt, YieldSpec(info_yield, q.rate, q.vol))
    if model == "prop4":
        return gbs_call(opt, YieldSpec(info_yield, q.rate + info_yield, q.vol))
    raise ValidationError("model", f"unknown model {model!r}")


def implied_info_point(
    q: OptionQuote,
    model: Model = "prop1",
    expand: bool = True,
    tol: float = PRICE_TOL,
) -> float:
    """Implied information yield of one quote.

    Starts on ``[-5, 5]`` and, if the quote is not bracketed and ``expand``
    is set, doubles the bracket up to ``[-50, 50]``.
    """
    def objective(i):
        return quote_price(q, i, model) - q.mid

    width = BRACKET
    while True:
        hi_price = quote_price(q, -width, model)
        lo_price = quote_price(q, width, model)
        # a zero mid is a limit, not attained at any finite yield
        if lo_price <= q.mid <= hi_price and q.mid > 0.0:
            break
        if not expand or width >= MAX_BRACKET:
            raise OutOfBandError(q.mid, (lo_price, hi_price))
        width = min(2.0 * width, MAX_BRACKET)

    if objective(-width) == 0.0:
        return -width
    if objective(width) == 0.0:
        return width
    try:
        root, res = brentq(objective, -width, width, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=MAX_ITER, full_output=True, disp=False)
    except RuntimeError as exc:
        raise ConvergenceError(str(exc)) from None
    if not res.converged or abs(objective(root)) > tol * max(1.0, q.mid):
        raise ConvergenceError(f"no root within {MAX_ITER} iterations (residual {objective(root)!r})")
    return float(root)


@dataclass(frozen=True)
class InfoPoint:
    strike: float
    maturity: float
    implied_info: float
    status: str
    message: str = ""
    reprice_error: float = math.nan


@dataclass(frozen=True)
class InfoSurface:
    points: tuple

    @property
    def converged(self) -> tuple:
        return tuple(p for p in self.points if p.status == "ok")

    def max_reprice_error(self) -> float:
        errs = [p.reprice_error for p in self.converged]
        return max(errs) if errs else math.nan


def implied_info_surface(quotes: Iterable[OptionQuote], model: Model = "prop1") -> InfoSurface:
    """Invert every quote independently; failures stay in the surface with a status.

    Points come back sorted by strike, then maturity.
    """
    points = []
    for q in quotes:
        try:
            if not isinstance(q, OptionQuote):
                raise ValidationError("quote", f"not an OptionQuote: {q!r}")
            value = implied_info_point(q, model)
        except OutOfBandError as exc:
            points.append(InfoPoint(q.strike, q.maturity, math.nan, "out_of_band", str(exc)))
            continue
        except ConvergenceError as exc:
            points.append(InfoPoint(q.strike, q.maturity, math.nan, "no_convergence", str(exc)))
            continue
        except (ValidationError, AttributeError, TypeError) as exc:
            strike = getattr(q, "strike", math.nan)
            maturity = getattr(q, "maturity", math.nan)
            points.append(InfoPoint(strike, maturity, math.nan, "invalid", str(exc)))
            continue
        err = abs(quote_price(q, value, model) - q.mid)
        points.append(InfoPoint(q.strike, q.maturity, value, "ok", "", err))
    points.sort(key=lambda p: (p.strike, p.maturity))
    return InfoSurface(tuple(points))


@dataclass(frozen=True)
class BinaryFit:
    mu: float
    sigma: float
    g: float
    v: float
    g_se: float
    v_se: float
    degenerate: bool = False


def estimate_binary_params(returns: Sequence[float], dts: Sequence[float], min_obs: int = 30) -> BinaryFit:
    """Fit ``mu, sigma`` and ``p(dt) = g + v sqrt(dt)`` from simple returns.

    ``returns[i]`` was observed over ``dts[i]``. ``mu`` and ``sigma`` match
    the first two log-return moments at the finest interval; ``(g, v)`` is a
    count-weighted least-squares line through the share of nonnegative
    returns against ``sqrt(dt)``. A zero sample volatility sets
    ``degenerate``.
    """
    x = np.asarray(returns, dtype=float)
    h = np.asarray(dts, dtype=float)
    if x.shape != h.shape or x.ndim != 1:
        raise EstimationError("returns and dts must be one-dimensional and of equal length")
    if np.any(~np.isfinite(x)) or np.any(x <= -1.0):
        raise EstimationError("returns must be finite and above -1")
    if np.any(~(h > 0.0)):
        raise EstimationError("sampling intervals must be positive")
    grid = np.unique(h)
    if grid.size < 2:
        raise EstimationError("need at least two distinct sampling intervals to separate g from v")

    freqs, counts = [], []
    for step in grid:
        sel = x[h == step]
        if sel.size < min_obs:
            raise EstimationError(f"only {sel.size} observations at dt={step!r}; need {min_obs}")
        freqs.append(np.mean(sel >= 0.0))
        counts.append(sel.size)
    freqs = np.array(freqs)
    counts = np.array(counts, dtype=float)

    finest = grid[0]
    logs = np.log1p(x[h == finest])
    var = float(np.var(logs, ddof=1))
    sigma = math.sqrt(var / finest)
    mu = float(np.mean(logs)) / finest + 0.5 * sigma * sigma

    design = np.column_stack([np.ones_like(grid), np.sqrt(grid)])
    w = np.sqrt(counts)
    coef, *_ = np.linalg.lstsq(design * w[:, None], freqs * w, rcond=None)
    g, v = (float(c) for c in coef)
    # binomial sampling variance of each frequency, evaluated at the fit
    fitted = np.clip(design @ coef, 1e-12, 1 - 1e-12)
    cov_inv = design.T @ (design * (counts / (fitted * (1.0 - fitted)))[:, None])
    cov = np.linalg.inv(cov_inv)
    g_se, v_se = (float(math.sqrt(c)) for c in np.diag(cov))
    return BinaryFit(mu, sigma, g, v, g_se, v_se, degenerate=sigma == 0.0)


def simulate_binary_returns(
    mu: float,
    sigma: float,
    g: float,
    v: float,
    dts: Sequence[float],
    n_per_dt: int,
    seed: int,
) -> tuple:
    """Simple returns of the binary tree at each interval in ``dts``.

    Up with probability ``p = g + v sqrt(dt)``: ``mu dt + sqrt((1-p)/p) sigma sqrt(dt)``;
    otherwise ``mu dt - sqrt(p/(1-p)) sigma sqrt(dt)``.
    """
    rng = np.random.default_rng(seed)
    out_r, out_h = [], []
    for step in dts:
        p = g + v * math.sqrt(step)
        if not 0.0 < p < 1.0:
            raise ValidationError("dts", f"p = {p!r} outside (0, 1) at dt={step!r}")
        s = sigma * math.sqrt(step)
        up = rng.random(n_per_dt) < p
        out_r.append(mu * step + np.where(up, math.sqrt((1 - p) / p) * s, -math.sqrt(p / (1 - p)) * s))
        out_h.append(np.full(n_per_dt, step))
    return np.concatenate(out_r), np.concatenate(out_h)
