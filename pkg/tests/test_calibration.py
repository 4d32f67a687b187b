import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from informed_options.calibration import (
    EstimationError,
    OptionQuote,
    OutOfBandError,
    estimate_binary_params,
    implied_info_point,
    implied_info_surface,
    quote_price,
    simulate_binary_returns,
)
from informed_options.closed_form import bs_price, prop1_price, prop3_price, prop4_price
from informed_options.model import MarketParams, OptionSpec, PerceivedParams, TraderInfo, ValidationError


def quote(strike=100.0, T=1.0, mid=10.0, vol=0.2, rate=0.05):
    return OptionQuote(strike, T, mid, 100.0, rate, vol)


def test_quote_price_matches_library_formulas():
    m = MarketParams(0.1, 0.2, 0.05)
    opt = OptionSpec(100, 110, 0, 2)
    q = quote(110, 2)
    assert quote_price(q, 0.03, "prop1") == prop1_price(opt, m, TraderInfo(tau=1, c_tau=0.03))
    assert quote_price(q, 0.03, "prop3") == pytest.approx(prop3_price(opt, m, TraderInfo(tau=1, d_tau=0.03)), abs=1e-14)
    got = prop4_price(opt, m, PerceivedParams(R_rate=0.05), TraderInfo(tau=1, c_disc=0.03))
    assert quote_price(q, 0.03, "prop4") == pytest.approx(got, abs=1e-14)


def test_round_trip_point():
    q = quote()
    mid = quote_price(q, 0.03)
    got = implied_info_point(quote(mid=mid))
    assert got == pytest.approx(0.03, abs=1e-8)
    assert abs(quote_price(q, got) - mid) <= 1e-10


def test_black_scholes_quote_gives_zero():
    bs = bs_price(OptionSpec(100, 100, 0, 1), MarketParams(0.1, 0.2, 0.05))
    assert implied_info_point(quote(mid=bs)) == pytest.approx(0.0, abs=1e-8)


def test_out_of_band():
    q = quote()
    top = quote_price(q, -5.0)
    with pytest.raises(OutOfBandError):
        implied_info_point(quote(mid=top * 1.01), expand=False)
    with pytest.raises(OutOfBandError):
        implied_info_point(quote(mid=quote_price(q, -50.0) * 1.01))
    # expansion reaches quotes above the initial bracket
    assert implied_info_point(quote(mid=top * 1.01)) < -5.0


@settings(max_examples=40, deadline=None)
@given(st.floats(-4.0, 4.0), st.floats(60, 160), st.floats(0.1, 3.0), st.sampled_from(["prop1", "prop3", "prop4"]))
def test_round_trip_property(i_star, strike, T, model):
    q = quote(strike, T)
    mid = quote_price(q, i_star, model)
    if mid < 1e-12:
        return
    got = implied_info_point(quote(strike, T, mid), model)
    assert abs(quote_price(q, got, model) - mid) <= 1e-10 * max(1.0, mid)


def test_objective_strictly_decreasing():
    q = quote(120, 2)
    grid = np.linspace(-5, 5, 201)
    prices = [quote_price(q, i) for i in grid]
    assert all(a > b for a, b in zip(prices, prices[1:]))


def test_surface_round_trip():
    quotes = []
    for K in np.linspace(70, 130, 10):
        for T in (0.25, 0.5, 1.0, 2.0):
            i_star = 0.01 + 0.02 * math.log(K / 100)
            base = quote(K, T)
            quotes.append(quote(K, T, quote_price(base, i_star)))
    surface = implied_info_surface(reversed(quotes))
    assert len(surface.converged) == 40
    errs = [abs(p.implied_info - (0.01 + 0.02 * math.log(p.strike / 100))) for p in surface.points]
    assert max(errs) < 1e-8
    keys = [(p.strike, p.maturity) for p in surface.points]
    assert keys == sorted(keys)
    assert implied_info_surface(quotes) == surface


def test_surface_edge_cases():
    assert implied_info_surface([]).points == ()
    good = quote(mid=quote_price(quote(), 0.01))
    surface = implied_info_surface([good, "not a quote", good])
    statuses = sorted(p.status for p in surface.points)
    assert statuses == ["invalid", "ok", "ok"]


def test_quote_validation():
    with pytest.raises(ValidationError):
        OptionQuote(100, -1, 5, 100, 0.05, 0.2)
    with pytest.raises(ValidationError):
        OptionQuote(100, 1, -5, 100, 0.05, 0.2)


DTS = (1 / 252, 1 / 52, 1 / 12)


def test_binary_estimation_recovers_params():
    r, h = simulate_binary_returns(0.1, 0.2, 0.5, 0.2, DTS, 100_000, 1)
    fit = estimate_binary_params(r, h)
    assert abs(fit.g - 0.5) < 0.01 and abs(fit.v - 0.2) < 0.05
    assert fit.sigma == pytest.approx(0.2, rel=0.05)
    assert not fit.degenerate


def test_binary_estimation_v_zero_world():
    r, h = simulate_binary_returns(0.1, 0.2, 0.5, 0.0, DTS, 50_000, 2)
    fit = estimate_binary_params(r, h)
    assert abs(fit.v) <= 2 * fit.v_se


def test_binary_estimation_degenerate():
    h = np.repeat(DTS[:2], 40)
    fit = estimate_binary_params(np.full(80, 0.001), h)
    assert fit.degenerate and fit.sigma == 0.0


def test_binary_estimation_errors():
    with pytest.raises(EstimationError):
        estimate_binary_params([0.01] * 50, [0.1] * 50)
    with pytest.raises(EstimationError):
        estimate_binary_params([0.01] * 10 + [0.02] * 10, [0.1] * 10 + [0.2] * 10)
    with pytest.raises(EstimationError):
        estimate_binary_params([0.01, -1.5], [0.1, 0.2], min_obs=1)
