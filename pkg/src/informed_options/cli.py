"""Command-line front end: ``price``, ``converge``, ``calibrate``, ``simulate``.

Configuration is a flat ``key = value`` text file; ``#`` starts a comment.
Unknown keys are rejected. See ``CONFIG_KEYS`` for the grammar.

Exit codes: 0 success, 2 input or validation error, 3 numerical or solver
error. Errors are written to stderr as one JSON object.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import io
import json
import math
import sys
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import calibration, closed_form, informed_sim, lattice, subordination
from .calibration import CalibrationError, OptionQuote
from .lattice import LatticeSpec, ProbabilityBoundError
from .model import (
    BinaryProbModel,
    MarketParams,
    OptionSpec,
    PerceivedParams,
    TraderInfo,
    ValidationError,
)
from .subordination import NonPositiveFactorError, SubordinatorSpec

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERIC = 3

CHAIN_HEADER = ["strike", "maturity_years", "mid_price", "spot", "rate", "vol"]
SURFACE_HEADER = ["strike", "maturity_years", "implied_info", "status"]


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _floats(text: str) -> tuple:
    return tuple(float(x) for x in text.split(",") if x.strip())


def _str(text: str) -> str:
    return text.strip()


# key -> parser; every key is optional unless listed in REQUIRED_KEYS
CONFIG_KEYS = {
    "market.mu": float,
    "market.sigma": float,
    "market.r": float,
    "perceived.nu": float,
    "perceived.gamma": float,
    "perceived.rho_vol": float,
    "perceived.R_rate": float,
    "trader.tau": float,
    "trader.c_tau": float,
    "trader.d_tau": float,
    "trader.a_tau": float,
    "trader.b_tau": float,
    "trader.c_disc": float,
    "trader.p_success": float,
    "trader.lambda0": float,
    "trader.phi_ht": float,
    "trader.b_ht": float,
    "option.spot": float,
    "option.strike": float,
    "option.t": float,
    "option.T": float,
    "option.kind": _str,
    "lattice.n_steps": int,
    "lattice.literal_mode": _bool,
    "lattice.half_variance": _bool,
    "lattice.lam": float,
    "lattice.binary_g": float,
    "lattice.binary_v": float,
    "clock.kind": _str,
    "clock.alpha": float,
    "clock.rho": float,
    "clock.base_dt": float,
    "clock.samples": _floats,
    "clock.printed_scale": _bool,
    "mc.n_samples": int,
    "mc.n_steps": int,
    "simulate.p": float,
    "simulate.dt": float,
    "simulate.n_steps": int,
    "simulate.scheme": _str,
    "seed": int,
    "output.dir": _str,
}
REQUIRED_KEYS = ("market.mu", "market.sigma", "market.r")


class InputError(ValueError):
    """Malformed command input (config, chain file, flags)."""


@dataclass(frozen=True)
class RunConfig:
    market: MarketParams
    perceived: PerceivedParams
    trader: TraderInfo
    option: OptionSpec
    n_steps: int
    literal_mode: bool
    half_variance: bool
    lam: Optional[float]
    binary: Optional[BinaryProbModel]
    clock: SubordinatorSpec
    n_samples: int
    mc_steps: int
    sim_p: Optional[float]
    sim_dt: Optional[float]
    sim_steps: int
    sim_scheme: str
    seed: int
    output_dir: Optional[str]
    digest: str


def parse_config_text(text: str) -> dict:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputError(f"config line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise InputError(f"config line {lineno}: unknown key {key!r}")
        if key in values:
            raise InputError(f"config line {lineno}: duplicate key {key!r}")
        try:
            values[key] = CONFIG_KEYS[key](value)
        except ValueError as exc:
            raise InputError(f"config line {lineno}: bad value for {key}: {exc}") from None
    return values


def config_digest(values: dict) -> str:
    canon = "\n".join(f"{k}={values[k]!r}" for k in sorted(values))
    return hashlib.sha256(canon.encode()).hexdigest()


def build_config(values: dict) -> RunConfig:
    missing = [k for k in REQUIRED_KEYS if k not in values]
    if missing:
        raise InputError(f"config is missing required keys: {', '.join(missing)}")

    def section(prefix):
        n = len(prefix) + 1
        return {k[n:]: v for k, v in values.items() if k.startswith(prefix + ".")}

    market = MarketParams(**section("market"))
    perceived = PerceivedParams(**section("perceived"))
    trader = TraderInfo(**section("trader"))
    opt = {"spot": 100.0, "strike": 100.0, "t": 0.0, "T": 1.0, "kind": "call"}
    opt.update(section("option"))
    option = OptionSpec(**opt)
    lat = section("lattice")
    binary = None
    if "binary_g" in lat or "binary_v" in lat:
        binary = BinaryProbModel(lat.get("binary_g", 0.5), lat.get("binary_v", 0.0))
    clk = section("clock")
    clock = SubordinatorSpec(
        kind=clk.get("kind", "stable"),
        alpha=clk.get("alpha", 1.7),
        rho=clk.get("rho", 0.0),
        base_dt=clk.get("base_dt", 1.0 / 252.0),
        samples=clk.get("samples", ()),
        printed_scale=clk.get("printed_scale", False),
    )
    sim = section("simulate")
    return RunConfig(
        market=market,
        perceived=perceived,
        trader=trader,
        option=option,
        n_steps=lat.get("n_steps", 1024),
        literal_mode=lat.get("literal_mode", False),
        half_variance=lat.get("half_variance", False),
        lam=lat.get("lam"),
        binary=binary,
        clock=clock,
        n_samples=values.get("mc.n_samples", 100_000),
        mc_steps=values.get("mc.n_steps", 16),
        sim_p=sim.get("p"),
        sim_dt=sim.get("dt"),
        sim_steps=sim.get("n_steps", 252),
        sim_scheme=sim.get("scheme", "tree"),
        seed=values.get("seed", 0),
        output_dir=values.get("output.dir"),
        digest=config_digest(values),
    )


def load_config(path: Optional[str]) -> RunConfig:
    if path is None:
        raise InputError("--config is required for this command")
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc.strerror}") from None
    return build_config(parse_config_text(text))


# --------------------------------------------------------------------------
# formatting
# --------------------------------------------------------------------------

def fmt(x) -> str:
    """17 significant digits; non-finite values as ``nan``/``inf``."""
    return format(float(x), ".17g")


def to_json(obj) -> str:
    """JSON with every float printed to 17 significant digits."""
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt(obj) if math.isfinite(obj) else "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {to_json(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(to_json(v) for v in obj) + "]"
    if dataclasses.is_dataclass(obj):
        return to_json(dataclasses.asdict(obj))
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _emit(text: str, out: Optional[str]) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


# --------------------------------------------------------------------------
# model selection
# --------------------------------------------------------------------------

CLOSED_FORMS = ("prop1", "prop2", "prop3", "prop4", "mv", "logstable")


def lattice_spec(cfg: RunConfig, mode: str, n_steps: int) -> LatticeSpec:
    base, side, informed = mode, "risk_neutral", False
    if mode.endswith("_physical"):
        base, side = mode[: -len("_physical")], "physical"
    elif mode.endswith("_informed"):
        base, informed = mode[: -len("_informed")], True
    if base not in lattice.MEASURES:
        raise InputError(f"unknown lattice mode {mode!r}")
    return LatticeSpec(
        n_steps=n_steps,
        horizon=cfg.option.tenor,
        measure=base,
        side=side,
        informed=informed,
        literal_mode=cfg.literal_mode,
        lam=cfg.lam,
        binary=cfg.binary,
        half_variance=cfg.half_variance,
    )


def lattice_closed_form(cfg: RunConfig, spec: LatticeSpec, opt: OptionSpec) -> float:
    """Closed-form counterpart of a risk-neutral lattice mode."""
    m, info, perceived = cfg.market, cfg.trader, cfg.perceived
    if spec.measure == "physical" or spec.side == "physical":
        raise InputError("physical trees have no closed-form counterpart")
    if spec.measure in ("risk_neutral", "binary"):
        return closed_form.bs_price(opt, m)
    if spec.measure == "informed" or (spec.measure == "mean_return" and spec.informed):
        return closed_form.prop1_price(opt, m, info)
    if spec.measure == "mean_return":
        return closed_form.bs_price(opt, m)
    if spec.measure == "trinomial":
        return closed_form.prop3_price(opt, m, info) if spec.informed else closed_form.bs_price(opt, m)
    if spec.measure == "discount":
        return closed_form.prop4_price(opt, m, perceived, info if spec.informed else TraderInfo())
    if spec.measure == "risk_adjusted":
        gamma = perceived.gamma if perceived.gamma is not None else m.mu
        lam = spec.lam if spec.lam is not None else info.lam
        return closed_form.mv_price(opt, m, gamma, lam)
    raise InputError(f"no closed form for {spec.measure!r}")


def price_model(cfg: RunConfig, model: str, info: TraderInfo, seed: int) -> tuple:
    """(price, standard error or None) of ``model`` for trader ``info``."""
    m, opt, perceived = cfg.market, cfg.option, cfg.perceived
    if model == "prop1":
        return closed_form.prop1_price(opt, m, info), None
    if model == "prop2":
        return closed_form.prop2_price(opt, m, perceived, info), None
    if model == "prop3":
        return closed_form.prop3_price(opt, m, info), None
    if model == "prop4":
        return closed_form.prop4_price(opt, m, perceived, info), None
    if model == "mv":
        gamma = perceived.require("gamma")
        return closed_form.mv_price(opt, m, gamma, info.lambda0), None
    if model == "logstable":
        est = subordination.logstable_call(opt, m, cfg.clock, cfg.n_samples, seed)
        return est.value, est.stderr
    if model.startswith("lattice:"):
        spec = lattice_spec(cfg, model.split(":", 1)[1], cfg.n_steps)
        tree = lattice.build_lattice(spec, m, perceived, info)
        return lattice.price_european(tree, opt), None
    raise InputError(f"unknown model {model!r}")


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def _inputs(cfg: RunConfig, seed: int) -> dict:
    return {
        "config_hash": cfg.digest,
        "seed": seed,
        "market": dataclasses.asdict(cfg.market),
        "perceived": dataclasses.asdict(cfg.perceived),
        "trader": dataclasses.asdict(cfg.trader),
        "option": dataclasses.asdict(cfg.option),
    }


def cmd_price(args) -> int:
    cfg = load_config(args.config)
    seed = cfg.seed if args.seed is None else args.seed
    price, se = price_model(cfg, args.model, cfg.trader, seed)
    if args.model == "logstable":
        tau0 = None
    else:
        tau0, _ = price_model(cfg, args.model, TraderInfo(), seed)
    report = {
        "model": args.model,
        "inputs": _inputs(cfg, seed),
        "price": price,
        "standard_error": se,
        "reductions": {"bs_price": closed_form.bs_price(cfg.option, cfg.market), "tau0_price": tau0},
    }
    _emit(to_json(report) + "\n", args.out)
    return EXIT_OK


def cmd_converge(args) -> int:
    cfg = load_config(args.config)
    if not args.model.startswith("lattice:"):
        raise InputError("converge needs a lattice model, e.g. --model lattice:risk_neutral")
    mode = args.model.split(":", 1)[1]
    try:
        n_list = [int(x) for x in args.n_list.split(",") if x.strip()]
    except ValueError:
        raise InputError(f"bad --n-list {args.n_list!r}") from None
    if not n_list:
        raise InputError("--n-list is empty")
    opt = cfg.option
    rows = []
    for n in n_list:
        spec = lattice_spec(cfg, mode, n)
        exact = lattice_closed_form(cfg, spec, opt)
        tree = lattice.build_lattice(spec, cfg.market, cfg.perceived, cfg.trader)
        price = lattice.price_european(tree, opt)
        nxt = lattice.price_european(
            lattice.build_lattice(replace(spec, n_steps=n + 1), cfg.market, cfg.perceived, cfg.trader), opt
        )
        rows.append([n, price, exact, abs(price - exact), abs(0.5 * (price + nxt) - exact)])
    _emit(_csv_text(["n", "lattice_price", "closed_form_price", "abs_error", "avg_abs_error"], rows), args.out)
    return EXIT_OK


def read_chain(path: str) -> tuple:
    """Parse a chain CSV. Returns (quotes, row_errors, n_rows)."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read chain {path}: {exc.strerror}") from None
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise InputError(f"chain file {path} is empty") from None
    if [h.strip() for h in header] != CHAIN_HEADER:
        raise InputError(f"chain header must be {','.join(CHAIN_HEADER)}, got {','.join(header)}")
    quotes, errors, n_rows = [], [], 0
    for row in reader:
        lineno = reader.line_num
        if not row or all(not c.strip() for c in row):
            continue
        n_rows += 1
        try:
            if len(row) != len(CHAIN_HEADER):
                raise ValueError(f"expected {len(CHAIN_HEADER)} fields, got {len(row)}")
            strike, maturity, mid, spot, rate, vol = (float(c) for c in row)
            quotes.append(OptionQuote(strike, maturity, mid, spot, rate, vol))
        except ValueError as exc:
            errors.append({"line": lineno, "message": str(exc)})
    if n_rows == 0:
        raise InputError(f"chain file {path} has no data rows")
    return quotes, errors, n_rows


def cmd_calibrate(args) -> int:
    digest = load_config(args.config).digest if args.config else None
    if args.model not in ("prop1", "prop3", "prop4"):
        raise InputError(f"calibration model must be prop1, prop3 or prop4, got {args.model!r}")
    quotes, row_errors, n_rows = read_chain(args.chain)
    surface = calibration.implied_info_surface(quotes, args.model)
    rows = [[p.strike, p.maturity, p.implied_info, p.status] for p in surface.points]
    _emit(_csv_text(SURFACE_HEADER, rows), args.out)
    n_ok = len(surface.converged)
    summary = {
        "config_hash": digest,
        "model": args.model,
        "rows": n_rows,
        "points": len(surface.points),
        "converged": n_ok,
        "failed": len(surface.points) - n_ok,
        "row_errors": row_errors,
        "max_reprice_error": surface.max_reprice_error(),
    }
    text = to_json(summary) + "\n"
    if args.summary:
        Path(args.summary).write_text(text)
    else:
        sys.stderr.write(text) if args.out is None else sys.stdout.write(text)
    if n_ok == 0:
        return EXIT_NUMERIC if quotes else EXIT_INPUT
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    seed = cfg.seed if args.seed is None else args.seed
    m, opt = cfg.market, cfg.option
    if args.count < 1:
        raise InputError("--count must be positive")
    summary = {"config_hash": cfg.digest, "seed": seed, "kind": args.kind, "count": args.count}

    if args.kind == "paths":
        p = cfg.sim_p if cfg.sim_p is not None else 0.5
        paths = subordination.simulate_subordinated_path(
            cfg.clock, m, opt.tenor, cfg.sim_steps, seed, p=p, spot=opt.spot, n_paths=args.count, scheme=cfg.sim_scheme
        )
        rows = [[i, k, paths[i, k]] for i in range(paths.shape[0]) for k in range(paths.shape[1])]
        _emit(_csv_text(["path", "step", "price"], rows), args.out)
        summary["mean_terminal"] = float(paths[:, -1].mean())
    elif args.kind == "payoffs":
        dt = cfg.sim_dt if cfg.sim_dt is not None else 1.0 / 252.0
        dist = informed_sim.forward_payoff_dist(m, cfg.trader, opt.spot, dt, cfg.sim_p)
        draws = dist.sample(args.count, np.random.default_rng(seed))
        _emit(_csv_text(["draw", "payoff"], [[i, x] for i, x in enumerate(draws)]), args.out)
        se = float(draws.std(ddof=1) / math.sqrt(draws.size)) if draws.size > 1 else 0.0
        summary.update(
            expected=informed_sim.expected_info_payoff(dist), sample_mean=float(draws.mean()), standard_error=se
        )
    elif args.kind == "diagnostic":
        p = cfg.sim_p if cfg.sim_p is not None else 0.5
        gen = informed_sim.simulate_arbitrage_returns if args.source == "arbitrage" else informed_sim.simulate_null_returns
        lr, inc = gen(m, cfg.clock, p, args.count, seed)
        res = informed_sim.arbitrage_diagnostic(lr, inc, m, cfg.clock, p, args.band)
        _emit(_csv_text(["obs", "log_return", "clock_increment"], [[i, a, b] for i, (a, b) in enumerate(zip(lr, inc))]), args.out)
        summary.update(source=args.source, fraction=res.fraction, band=res.band, band95=res.band95)
    else:
        raise InputError(f"unknown simulation kind {args.kind!r}")
    text = to_json(summary) + "\n"
    (sys.stdout if args.out is not None else sys.stderr).write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="informed-options", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, model_default):
        p.add_argument("--config", help="key = value configuration file")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--model", default=model_default, help="prop1|prop2|prop3|prop4|mv|logstable|lattice:MODE")
        p.add_argument("--out", default=None, help="output path (default: stdout)")

    p = sub.add_parser("price", help="price one option")
    common(p, "prop1")
    p.set_defaults(func=cmd_price)

    p = sub.add_parser("converge", help="lattice vs closed-form convergence table (CSV)")
    common(p, "lattice:risk_neutral")
    p.add_argument("--n-list", default="64,256,1024,4096")
    p.set_defaults(func=cmd_converge)

    p = sub.add_parser("calibrate", help="implied information surface from an option chain CSV")
    common(p, "prop1")
    p.add_argument("--chain", required=True, help="CSV: " + ",".join(CHAIN_HEADER))
    p.add_argument("--summary", default=None, help="write the JSON summary here")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("simulate", help="sample paths, forward payoffs or diagnostic data (CSV)")
    common(p, "prop1")
    p.add_argument("--kind", choices=["paths", "payoffs", "diagnostic"], required=True)
    p.add_argument("--count", type=int, default=1000)
    p.add_argument("--source", choices=["arbitrage", "null"], default="arbitrage")
    p.add_argument("--band", type=float, default=None)
    p.set_defaults(func=cmd_simulate)
    return parser


def _fail(code: int, exc: Exception) -> int:
    err = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    for attr in ("field", "dt", "max_dt", "step", "band"):
        if getattr(exc, attr, None) is not None:
            err[attr] = getattr(exc, attr)
    sys.stderr.write(to_json(err) + "\n")
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (ProbabilityBoundError, CalibrationError, NonPositiveFactorError, calibration.EstimationError) as exc:
        return _fail(EXIT_NUMERIC, exc)
    except (InputError, ValidationError, ValueError, TypeError) as exc:
        return _fail(EXIT_INPUT, exc)
    except ArithmeticError as exc:
        return _fail(EXIT_NUMERIC, exc)


if __name__ == "__main__":
    sys.exit(main())
