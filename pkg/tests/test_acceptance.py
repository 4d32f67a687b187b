"""Acceptance criteria 1 to 9. Each test prints one PASS/FAIL line."""

import itertools
import math
import time

import numpy as np
import pytest

from informed_options import cli
from informed_options.calibration import OptionQuote, OutOfBandError, implied_info_point, implied_info_surface, quote_price
from informed_options.closed_form import YieldSpec, gbs_call, mv_price, prop1_price, prop3_price, prop4_price
from informed_options.informed_sim import (
    arbitrage_diagnostic,
    default_band,
    expected_info_payoff,
    forward_payoff_dist,
    simulate_arbitrage_returns,
    simulate_null_returns,
)
from informed_options.lattice import (
    LatticeSpec,
    build_lattice,
    effective_drift,
    informed_up_prob,
    price_european,
    rn_up_prob,
    step_moments,
)
from informed_options.model import MarketParams, OptionSpec, PerceivedParams, TraderInfo, sharpe
from informed_options.subordination import (
    SubordinatorSpec,
    logstable_call,
    pathwise_mc_call,
    sample_stable_increment,
    stable_laplace,
)


@pytest.fixture
def report(capsys):
    def emit(number, title, ok, detail, elapsed, limit=None):
        timing = f"{elapsed:.2f}s" + (f" (limit {limit}s)" if limit else "")
        with capsys.disabled():
            print(f"\nCRITERION {number} [{'PASS' if ok else 'FAIL'}] {title}: {detail}; {timing}")

    return emit


def test_criterion_1_reductions(report):
    t0 = time.perf_counter()
    worst = 0.0
    for mny, sigma, T in itertools.product((0.7, 0.85, 1.0, 1.15, 1.3), (0.1, 0.2, 0.3, 0.45, 0.6), (0.25, 1.0, 3.0)):
        m = MarketParams(0.1, sigma, 0.05)
        opt = OptionSpec(100.0, 100.0 / mny, 0.0, T)
        bs = gbs_call(opt, YieldSpec(0.0, m.r, sigma))
        got = (
            prop1_price(opt, m, TraderInfo(tau=0.0, c_tau=0.03)),
            prop3_price(opt, m, TraderInfo(tau=0.0, d_tau=0.02, a_tau=1.0, b_tau=0.4)),
            prop4_price(opt, m, PerceivedParams(R_rate=m.r), TraderInfo(tau=0.0, c_disc=0.02)),
            mv_price(opt, m, 0.08, 0.0),
        )
        worst = max(worst, max(abs(g - bs) for g in got))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-12 and elapsed < 1.0
    report(1, "reduction suite", ok, f"max |diff| = {worst:.2e} over 75 grid points", elapsed, 1)
    assert ok


def test_criterion_2_martingale(report):
    t0 = time.perf_counter()
    specs = [
        LatticeSpec(100, 1.0, "risk_neutral"),
        LatticeSpec(100, 1.0, "informed"),
        LatticeSpec(100, 1.0, "mean_return"),
        LatticeSpec(100, 1.0, "mean_return", informed=True),
        LatticeSpec(100, 1.0, "trinomial"),
        LatticeSpec(100, 1.0, "trinomial", informed=True),
        LatticeSpec(100, 1.0, "discount"),
        LatticeSpec(100, 1.0, "discount", informed=True),
        LatticeSpec(100, 1.0, "risk_adjusted", lam=0.2),
    ]
    worst, count = 0.0, 0
    per = PerceivedParams(nu=0.07, gamma=0.08, rho_vol=0.5, R_rate=0.06)
    for mu, sigma, r, tau in itertools.product((0.0, 0.1, 0.2), (0.15, 0.3), (0.01, 0.05), (-1.0, 0.0, 1.0, 2.0)):
        m = MarketParams(mu, sigma, r)
        info = TraderInfo(tau=tau, c_tau=0.02, d_tau=0.01, b_tau=0.1, c_disc=0.01)
        for spec in specs:
            b = build_lattice(spec, m, per, info)[0]
            worst = max(worst, abs(step_moments(b)[0] - 1.0 - effective_drift(spec, m, per, info) * spec.dt))
            count += 1
    # literal trinomial tree (printed tilts): the step mean is off by (r - gamma) dt
    m = MarketParams(0.1, 0.2, 0.05)
    lit = LatticeSpec(100, 1.0, "trinomial", literal_mode=True)
    b = build_lattice(lit, m, PerceivedParams(gamma=0.08, rho_vol=0.3))[0]
    literal_gap = abs(step_moments(b)[0] - 1.0 - m.r * lit.dt)
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-13 and literal_gap > 1e-6 and elapsed < 1.0
    detail = f"corrected max |E[f] - 1 - g dt| = {worst:.2e} over {count} trees; literal trinomial gap = {literal_gap:.2e} (expected violation)"
    report(2, "martingale suite", ok, detail, elapsed, 1)
    assert ok


def _averaged_errors(spec_for, m, per, info, exact, opt):
    errs = []
    for n in (64, 256, 1024, 4096):
        a = price_european(build_lattice(spec_for(n), m, per, info), opt)
        b = price_european(build_lattice(spec_for(n + 1), m, per, info), opt)
        errs.append((n, abs(a - exact), abs(0.5 * (a + b) - exact)))
    return errs


def test_criterion_3_convergence(report):
    t0 = time.perf_counter()
    m = MarketParams(0.1, 0.2, 0.05)
    opt = OptionSpec(100.0, 100.0, 0.0, 1.0)
    info = TraderInfo(tau=1.0, c_tau=0.02, c_disc=0.01)
    per = PerceivedParams(gamma=0.08, R_rate=0.06)
    cases = {
        "risk_neutral": (lambda n: LatticeSpec(n, 1.0), gbs_call(opt, YieldSpec(0.0, 0.05, 0.2))),
        "informed": (lambda n: LatticeSpec(n, 1.0, "informed"), prop1_price(opt, m, info)),
        "discount": (lambda n: LatticeSpec(n, 1.0, "discount", informed=True), prop4_price(opt, m, per, info)),
        "risk_adj": (lambda n: LatticeSpec(n, 1.0, "risk_adjusted", lam=0.2), mv_price(opt, m, 0.08, 0.2)),
    }
    ok, parts = True, []
    for name, (spec_for, exact) in cases.items():
        errs = _averaged_errors(spec_for, m, per, info, exact, opt)
        avg = [e[2] for e in errs]
        final = errs[-1][1]
        mono = all(a >= b for a, b in zip(avg, avg[1:]))
        ok &= final <= 5e-3 and mono
        parts.append(f"{name} err4096={final:.1e} avg={'/'.join(f'{a:.0e}' for a in avg)}{'' if mono else ' NOT MONOTONE'}")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 30.0
    report(3, "convergence suite", ok, "; ".join(parts), elapsed, 30)
    assert ok


def test_criterion_4_oracle_triangle(report):
    t0 = time.perf_counter()
    det = SubordinatorSpec("deterministic")
    worst_det = 0.0
    for S, K, r, sigma, T in itertools.product((80.0, 100.0, 125.0), (100.0,), (0.0, 0.05), (0.15, 0.35), (0.5, 2.0)):
        m = MarketParams(0.1, sigma, r)
        opt = OptionSpec(S, K, 0.0, T)
        worst_det = max(worst_det, abs(logstable_call(opt, m, det, 10, 0).value - gbs_call(opt, YieldSpec(0.0, r, sigma))))
    stable = SubordinatorSpec("stable", alpha=1.7)
    m = MarketParams(0.1, 0.2, 0.05)
    ok = worst_det <= 1e-10
    parts = [f"deterministic clock max |diff| = {worst_det:.1e}"]
    for K, T in ((90.0, 1.0), (100.0, 1.0), (110.0, 0.5)):
        opt = OptionSpec(100.0, K, 0.0, T)
        a = logstable_call(opt, m, stable, 100_000, 101)
        b = pathwise_mc_call(opt, m, stable, 100_000, 202)
        z = abs(a.value - b.value) / (a.stderr + b.stderr)
        ok &= z <= 3.0
        parts.append(f"K={K:g},T={T:g}: {a.value:.4f} vs {b.value:.4f} ({z:.2f} combined SE)")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 60.0
    report(4, "subordination oracle triangle", ok, "; ".join(parts), elapsed, 60)
    assert ok


def test_criterion_5_stable_sampler(report):
    t0 = time.perf_counter()
    x = sample_stable_increment(1.7, 1.0, np.random.default_rng(2024), size=1_000_000)
    worst = 0.0
    for s in (0.5, 1.0, 2.0):
        v = np.exp(-s * x)
        worst = max(worst, abs(v.mean() - stable_laplace(1.7, 1.0, s)) / (v.std(ddof=1) / math.sqrt(v.size)))
    elapsed = time.perf_counter() - t0
    ok = worst <= 3.0 and elapsed < 10.0
    report(5, "stable sampler Laplace transform", ok, f"max deviation {worst:.2f} SE at N=1e6", elapsed, 10)
    assert ok


def test_criterion_6_calibration(report):
    t0 = time.perf_counter()
    quotes = []
    for K in np.linspace(70.0, 130.0, 10):
        for T in (0.25, 0.5, 1.0, 2.0):
            base = OptionQuote(float(K), T, 1.0, 100.0, 0.05, 0.2)
            quotes.append(OptionQuote(float(K), T, quote_price(base, 0.01 + 0.02 * math.log(K / 100.0)), 100.0, 0.05, 0.2))
    surface = implied_info_surface(quotes)
    err = max(abs(p.implied_info - (0.01 + 0.02 * math.log(p.strike / 100.0))) for p in surface.points)
    # quotes beyond the attainable band must be rejected, never matched to a spurious root
    atm = OptionQuote(100.0, 1.0, 1.0, 100.0, 0.05, 0.2)
    high = OptionQuote(100.0, 1.0, quote_price(atm, -50.0) * 1.5, 100.0, 0.05, 0.2)
    low = OptionQuote(100.0, 1.0, 0.0, 100.0, 0.05, 0.2)
    rejected = 0
    for q in (high, low):
        try:
            implied_info_point(q)
        except OutOfBandError:
            rejected += 1
    narrow = OptionQuote(100.0, 1.0, quote_price(atm, -6.0), 100.0, 0.05, 0.2)
    try:
        implied_info_point(narrow, expand=False)
    except OutOfBandError:
        rejected += 1
    statuses = [p.status for p in implied_info_surface([high]).points]
    elapsed = time.perf_counter() - t0
    ok = len(surface.converged) == 40 and err < 1e-8 and rejected == 3 and statuses == ["out_of_band"] and elapsed < 5.0
    report(6, "calibration round trip", ok, f"max |I - I*| = {err:.1e} over 40 quotes; {rejected}/3 out-of-band quotes rejected", elapsed, 5)
    assert ok


def test_criterion_7_informed_payoffs(report):
    t0 = time.perf_counter()
    m = MarketParams(0.1, 0.2, 0.05)
    dt = 1.0 / 52.0
    e_half = expected_info_payoff(forward_payoff_dist(m, TraderInfo(p_success=0.5), 100.0, dt))
    grid = [expected_info_payoff(forward_payoff_dist(m, TraderInfo(p_success=k / 20), 100.0, dt)) for k in range(21)]
    increasing = all(a < b for a, b in zip(grid, grid[1:]))
    info = TraderInfo(tau=1.0, c_tau=0.02)
    limits = [informed_up_prob(rn_up_prob(p, sharpe(m), dt), info, m, dt) for p in (0.9, 0.99, 0.999)]
    edge = informed_up_prob(rn_up_prob(1 - 1e-12, sharpe(m), dt), info, m, dt)
    to_one = all(a < b for a, b in zip(limits, limits[1:])) and 1 - limits[-1] < 5e-3 and 1 - edge < 1e-6
    elapsed = time.perf_counter() - t0
    ok = abs(e_half) <= 1e-14 and increasing and to_one
    detail = f"E at p=1/2 = {e_half:.1e}; increasing on 21 points: {increasing}; q_informed at p=.9/.99/.999 = " + "/".join(f"{q:.6f}" for q in limits)
    report(7, "informed payoff laws", ok, detail, elapsed)
    assert ok


def test_criterion_8_diagnostic_power(report):
    t0 = time.perf_counter()
    m = MarketParams(0.1, 0.2, 0.05)
    spec = SubordinatorSpec("stable", alpha=1.7, rho=0.05)
    p = 0.6
    arb_fracs, null_fracs = [], []
    for seed in range(100):
        lr, inc = simulate_arbitrage_returns(m, spec, p, 500, seed)
        band = default_band(inc, m, spec, p)
        arb_fracs.append(arbitrage_diagnostic(lr, inc, m, spec, p, band).fraction)
        lr0, inc0 = simulate_null_returns(m, spec, p, 500, 10_000 + seed)
        null_fracs.append(arbitrage_diagnostic(lr0, inc0, m, spec, p, band).fraction)
    elapsed = time.perf_counter() - t0
    ok = min(arb_fracs) == 1.0 and max(null_fracs) < 0.5 and elapsed < 30.0
    report(8, "diagnostic power", ok, f"arbitrage min fraction {min(arb_fracs)}; null max fraction {max(null_fracs):.3f} over 100 trials", elapsed, 30)
    assert ok


def test_criterion_9_determinism(report, tmp_path, capsys):
    t0 = time.perf_counter()
    cfg = tmp_path / "run.cfg"
    cfg.write_text(
        "market.mu = 0.1\nmarket.sigma = 0.2\nmarket.r = 0.05\ntrader.tau = 1\ntrader.c_tau = 0.02\n"
        "clock.rho = 0.05\nsimulate.p = 0.6\nsimulate.n_steps = 16\nmc.n_samples = 5000\nseed = 3\n"
    )
    chain = tmp_path / "chain.csv"
    rows = [",".join(cli.CHAIN_HEADER)]
    for K in (90, 100, 110):
        q = OptionQuote(K, 1.0, 1.0, 100.0, 0.05, 0.2)
        rows.append(f"{K},1,{quote_price(q, 0.02)!r},100,0.05,0.2")
    chain.write_text("\n".join(rows) + "\n")
    commands = [
        ["price", "--config", str(cfg), "--model", "logstable"],
        ["price", "--config", str(cfg), "--model", "lattice:informed"],
        ["converge", "--config", str(cfg), "--model", "lattice:informed", "--n-list", "16,64"],
        ["calibrate", "--config", str(cfg), "--chain", str(chain)],
        ["simulate", "--config", str(cfg), "--kind", "paths", "--count", "20"],
        ["simulate", "--config", str(cfg), "--kind", "payoffs", "--count", "200"],
        ["simulate", "--config", str(cfg), "--kind", "diagnostic", "--count", "200"],
    ]
    identical = 0
    for argv in commands:
        outs = []
        for k in range(2):
            target = tmp_path / f"out{k}"
            code = cli.main(argv + ["--out", str(target)])
            printed = capsys.readouterr()
            outs.append((code, target.read_bytes(), printed.out, printed.err))
        identical += outs[0] == outs[1] and outs[0][0] == 0
    elapsed = time.perf_counter() - t0
    ok = identical == len(commands)
    report(9, "determinism", ok, f"{identical}/{len(commands)} commands byte-identical on repeat", elapsed)
    assert ok
