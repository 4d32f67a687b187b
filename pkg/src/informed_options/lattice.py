"""Binomial and trinomial step distributions and European backward induction.

Every tree here is homogeneous: one :class:`BranchDistribution` (gross growth
factors with their probabilities, plus a one-step discount) repeated
``n_steps`` times. The trees recombine because the factors are the same at
every step, so a binomial tree costs O(n^2) and a trinomial tree O(n^3).

Two construction modes exist. The default ("corrected") mode keeps the
physical branch factors and moves only the probabilities, choosing them so
that the step mean is exactly ``1 + drift * dt`` for the drift the matching
closed-form formula assumes. ``literal_mode=True`` reproduces the printed
textbook formulas verbatim, including the ones whose step mean drifts away
from the martingale value; it exists for side-by-side study.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Literal, Optional, Sequence

import numpy as np

from .model import (
    BinaryProbModel,
    MarketParams,
    OptionSpec,
    PerceivedParams,
    TraderInfo,
    ValidationError,
    perceived_sharpe,
    sharpe,
)

Side = Literal["physical", "risk_neutral"]

MEASURES = (
    "physical",
    "risk_neutral",
    "informed",
    "mean_return",
    "trinomial",
    "discount",
    "risk_adjusted",
    "binary",
)

# probabilities closer than this to 0 or 1 are rejected by build_lattice
PROB_EPS = 1e-12


class ProbabilityBoundError(ValueError):
    """A branch probability left its admissible range at the requested step size."""

    def __init__(self, message: str, dt: float, max_dt: Optional[float] = None, step: Optional[int] = None):
        self.reason = message
        self.dt = dt
        self.max_dt = max_dt
        self.step = step
        parts = [message, f"dt={dt!r}"]
        if max_dt is not None:
            parts.append(f"max admissible dt={max_dt!r}")
        if step is not None:
            parts.append(f"step={step}")
        super().__init__("; ".join(parts))


@dataclass(frozen=True)
class BranchDistribution:
    """One lattice step: growth factors listed from highest to lowest."""

    factors: tuple
    probs: tuple
    discount: float

    def __post_init__(self):
        factors = tuple(float(f) for f in self.factors)
        probs = tuple(float(p) for p in self.probs)
        object.__setattr__(self, "factors", factors)
        object.__setattr__(self, "probs", probs)
        if len(factors) != len(probs) or len(factors) < 1:
            raise ValidationError("probs", "need one probability per factor")
        if any(not 0.0 <= p <= 1.0 for p in probs):
            raise ValidationError("probs", f"probabilities must lie in [0, 1], got {probs}")
        if abs(math.fsum(probs) - 1.0) > 1e-14:
            raise ValidationError("probs", f"probabilities sum to {math.fsum(probs)!r}")
        if any(not f > 0.0 for f in factors):
            raise ValidationError("factors", f"growth factors must be positive, got {factors}")
        if any(a <= b for a, b in zip(factors, factors[1:])):
            raise ValidationError("factors", f"factors must be strictly decreasing, got {factors}")
        if not 0.0 < self.discount <= math.inf:
            raise ValidationError("discount", f"must be positive, got {self.discount!r}")


@dataclass(frozen=True)
class LatticeSpec:
    """What tree to build.

    ``measure`` picks the construction; ``side`` picks physical or
    risk-neutral probabilities for the constructions that have both;
    ``informed`` switches the mean-return tree (also the trinomial and discount trees) to
    the informed trader's probabilities. ``lam`` overrides the trader's
    risk-aversion for the risk-adjusted tree, ``binary`` supplies
    ``p = g + v sqrt(dt)`` in place of the default up-probability, and
    ``half_variance`` swaps the literal discount-tree probability to the
    ``R - sigma^2/2`` reading.
    """

    n_steps: int
    horizon: float
    measure: str = "risk_neutral"
    side: Side = "risk_neutral"
    informed: bool = False
    literal_mode: bool = False
    lam: Optional[float] = None
    binary: Optional[BinaryProbModel] = None
    half_variance: bool = False

    def __post_init__(self):
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ValidationError("n_steps", f"must be a positive integer, got {self.n_steps!r}")
        if not (math.isfinite(self.horizon) and self.horizon > 0.0):
            raise ValidationError("horizon", f"must be positive, got {self.horizon!r}")
        if self.measure not in MEASURES:
            raise ValidationError("measure", f"unknown measure {self.measure!r}")
        if self.side not in ("physical", "risk_neutral"):
            raise ValidationError("side", f"must be physical or risk_neutral, got {self.side!r}")
        if self.measure == "binary" and self.binary is None:
            raise ValidationError("binary", "binary measure needs a BinaryProbModel")

    @property
    def dt(self) -> float:
        return self.horizon / self.n_steps


# --------------------------------------------------------------------------
# step probabilities
# --------------------------------------------------------------------------

def _check_prob(p: float, dt: float, label: str, eps: float = 0.0) -> float:
    if not (eps < p < 1.0 - eps):
        raise ProbabilityBoundError(f"{label} = {p!r} outside (0, 1)", dt)
    return p


def _crr(drift: float, sigma: float, dt: float) -> float:
    return 0.5 + (drift - 0.5 * sigma * sigma) / (2.0 * sigma) * math.sqrt(dt)


def _symmetric(tilt: float, sigma: float, dt: float) -> float:
    return 0.5 + tilt / (2.0 * sigma) * math.sqrt(dt)


def _require_dt(dt: float) -> float:
    if not (math.isfinite(dt) and dt > 0.0):
        raise ValidationError("dt", f"must be positive, got {dt!r}")
    return dt


def max_admissible_dt(step: Callable[[float], object], dt: float, iters: int = 200) -> float:
    """Largest step size not exceeding ``dt`` for which ``step`` succeeds.

    Searches geometrically; returns 0.0 when even a vanishing step fails.
    """

    def ok(h: float) -> bool:
        try:
            step(h)
        except ProbabilityBoundError:
            return False
        return True

    if ok(dt):
        return dt
    lo = dt * 1e-12
    if not ok(lo):
        return 0.0
    hi = dt
    for _ in range(iters):
        mid = math.sqrt(lo * hi)
        if mid <= lo or mid >= hi:
            break
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo


def _with_bound(fn: Callable[[float], float], dt: float) -> float:
    try:
        return fn(dt)
    except ProbabilityBoundError as exc:
        raise ProbabilityBoundError(exc.reason, dt, max_admissible_dt(fn, dt)) from None


def crr_up_prob(m: MarketParams, dt: float) -> float:
    """Physical up-probability ``1/2 + (mu - sigma^2/2) / (2 sigma) * sqrt(dt)``."""
    _require_dt(dt)
    return _with_bound(lambda h: _check_prob(_crr(m.mu, m.sigma, h), h, "p"), dt)


def rn_up_prob(p: float, theta: float, dt: float) -> float:
    """Risk-neutral probability ``p - sqrt(p (1 - p)) * theta * sqrt(dt)``."""
    _require_dt(dt)
    if not 0.0 < p < 1.0:
        raise ValidationError("p", f"must lie in (0, 1), got {p!r}")

    def f(h):
        return _check_prob(p - math.sqrt(p * (1.0 - p)) * theta * math.sqrt(h), h, "q")

    return _with_bound(f, dt)


def informed_up_prob(q: float, info: TraderInfo, m: MarketParams, dt: float) -> float:
    """Informed trader's probability ``q - 2 C tau / sigma * sqrt(dt) * q (1 - q)``.

    Tends to 1 (resp. 0) whenever ``q`` does, at any fixed ``dt``.
    """
    _require_dt(dt)
    if not 0.0 < q < 1.0:
        raise ValidationError("q", f"must lie in (0, 1), got {q!r}")
    k = 2.0 * info.c_tau / m.sigma * math.sqrt(dt) * q * (1.0 - q)
    value = q - k * info.tau
    if not 0.0 < value < 1.0:
        if k > 0.0:
            span = f"admissible tau in ({(q - 1.0) / k!r}, {q / k!r})"
        else:
            span = "no admissible tau"
        raise ProbabilityBoundError(f"informed probability {value!r} outside (0, 1); {span}", dt)
    return value


def informed_up_prob_affine(info: TraderInfo, m: MarketParams, dt: float) -> float:
    """Asymptotic form ``1/2 + (r - C tau - sigma^2/2) / (2 sigma) * sqrt(dt)``.

    Agrees with :func:`informed_up_prob` only to O(dt); kept as a cross-check.
    """
    _require_dt(dt)
    return _crr(m.r - info.info_yield, m.sigma, dt)


def mean_return_probs(
    m: MarketParams,
    nu: float,
    dt: float,
    measure: Side = "risk_neutral",
    info: Optional[TraderInfo] = None,
) -> float:
    """Up-probability of the tree with factors ``1 + nu dt +- sigma sqrt(dt)``.

    Physical: ``1/2 + (mu - nu) / (2 sigma) sqrt(dt)``; risk-neutral:
    ``1/2 + (r - nu) / (2 sigma) sqrt(dt)``. Passing ``info`` composes the
    risk-neutral value with :func:`informed_up_prob`.
    """
    _require_dt(dt)
    target = m.mu if measure == "physical" else m.r
    q = _with_bound(lambda h: _check_prob(_symmetric(target - nu, m.sigma, h), h, "p_nu"), dt)
    if info is not None:
        if measure == "physical":
            raise ValidationError("measure", "informed probabilities are risk-neutral")
        return informed_up_prob(q, info, m, dt)
    return q


def discount_probs(
    m: MarketParams,
    R: float,
    dt: float,
    measure: Side = "risk_neutral",
    half_variance: bool = False,
) -> float:
    """Up-probabilities of the perceived-discount tree, as printed.

    Factors are ``1 + lam dt +- sigma sqrt(dt)`` with
    ``lam = r - R + sigma^2/2``. Physical: ``1/2 + (mu - lam)/(2 sigma)
    sqrt(dt)``. Risk-neutral: ``1/2 + (R - sigma^2)/(2 sigma) sqrt(dt)``, or
    ``R - sigma^2/2`` in the numerator when ``half_variance`` is set.
    """
    _require_dt(dt)
    s2 = m.sigma * m.sigma
    if measure == "physical":
        tilt = m.mu - (m.r - R + 0.5 * s2)
    else:
        tilt = R - (0.5 * s2 if half_variance else s2)
    return _with_bound(lambda h: _check_prob(_symmetric(tilt, m.sigma, h), h, "p_R"), dt)


def risk_adjusted_prob(p: float, theta: float, lam: float, dt: float) -> float:
    """Mean-variance probability ``p - theta (1 + lam) sqrt(p (1 - p)) sqrt(dt)``."""
    return rn_up_prob(p, theta * (1.0 + lam), dt)


def trinomial_probs(
    m: MarketParams,
    perceived: PerceivedParams,
    dt: float,
    measure: Side = "risk_neutral",
    literal_mode: bool = False,
    info: Optional[TraderInfo] = None,
) -> BranchDistribution:
    """Trinomial step with factors ``1 + gamma dt + {rho, 0, -rho} sqrt(dt)``.

    The middle branch carries ``1 - vol^2 / rho^2``. Corrected tilts
    ``+-(target - gamma) / (2 rho) sqrt(dt)`` make the step mean exactly
    ``1 + target dt``; literal tilts are ``+-(theta - phi) sqrt(dt)``
    (physical) and ``-+phi sqrt(dt)`` (risk-neutral). With ``info`` the
    risk-neutral tree uses volatility ``V(tau) sigma`` and drift
    ``r - D_tau tau``.
    """
    _require_dt(dt)
    gamma = perceived.require("gamma")
    rho = perceived.require("rho_vol")
    vol = m.sigma
    target = m.mu if measure == "physical" else m.r
    if info is not None:
        if measure == "physical" or literal_mode:
            raise ValidationError("info", "informed trinomial tree exists only in corrected risk-neutral mode")
        vol = m.sigma * info.vol_multiplier
        target = m.r - info.d_tau * info.tau
    if rho < vol:
        raise ValidationError("rho_vol", f"perceived volatility {rho!r} below volatility {vol!r}; middle probability negative")
    side = vol * vol / (2.0 * rho * rho)
    middle = 1.0 - vol * vol / (rho * rho)

    def build(h):
        sq = math.sqrt(h)
        if not literal_mode:
            tilt = (target - gamma) / (2.0 * rho) * sq
        elif measure == "physical":
            tilt = (sharpe(m) - perceived_sharpe(m, perceived)) * sq
        else:
            tilt = -perceived_sharpe(m, perceived) * sq
        pu, pd = side + tilt, side - tilt
        for label, p in (("p_up", pu), ("p_down", pd)):
            if not 0.0 <= p <= 1.0:
                raise ProbabilityBoundError(f"{label} = {p!r} outside [0, 1]", h)
        mid = 1.0 + gamma * h
        return BranchDistribution(
            factors=(mid + rho * sq, mid, mid - rho * sq),
            probs=(pu, middle, pd),
            discount=math.exp(-m.r * h),
        )

    try:
        return build(dt)
    except ProbabilityBoundError as exc:
        raise ProbabilityBoundError(exc.reason, dt, max_admissible_dt(build, dt)) from None


# --------------------------------------------------------------------------
# tree assembly
# --------------------------------------------------------------------------

def n_steps_for_turnover(phi: float, bound: float, horizon: float) -> int:
    """Steps implied by the hedge-turnover limit ``dt = T phi^2 / B^2``, rounded up."""
    if not (phi > 0.0 and bound > 0.0 and horizon > 0.0):
        raise ValidationError("phi_ht", "turnover rate and bound must be positive, as must the horizon")
    if math.isinf(bound):
        raise ValidationError("b_ht", "an unbounded turnover allows continuous hedging; no finite step")
    dt = horizon * phi * phi / (bound * bound)
    return max(1, math.ceil(horizon / dt - 1e-9))


def _binomial(up_dev: float, down_dev: float, drift: float, prob: float, dt: float, discount: float) -> BranchDistribution:
    base = 1.0 + drift * dt
    return BranchDistribution(factors=(base + up_dev, base - down_dev), probs=(prob, 1.0 - prob), discount=discount)


def _asym_devs(p: float, sigma: float, dt: float) -> tuple:
    s = sigma * math.sqrt(dt)
    return math.sqrt((1.0 - p) / p) * s, math.sqrt(p / (1.0 - p)) * s


def _natural_prob(spec: LatticeSpec, drift: float, sigma: float, dt: float) -> float:
    if spec.binary is not None:
        p = spec.binary.g + spec.binary.v * math.sqrt(dt)
    else:
        p = _crr(drift, sigma, dt)
    return _check_prob(p, dt, "p")


def _step(spec: LatticeSpec, m: MarketParams, perceived: PerceivedParams, info: TraderInfo, dt: float) -> BranchDistribution:
    disc = math.exp(-m.r * dt)
    measure = spec.measure
    literal = spec.literal_mode
    side = spec.side
    if measure == "physical":
        side = "physical"
    elif measure == "informed":
        side = "risk_neutral"

    if measure in ("physical", "risk_neutral", "informed", "binary"):
        p = _natural_prob(spec, m.mu, m.sigma, dt)
        up, down = _asym_devs(p, m.sigma, dt)
        if side == "physical":
            return _binomial(up, down, m.mu, p, dt, disc)
        q = _check_prob(p - math.sqrt(p * (1.0 - p)) * sharpe(m) * math.sqrt(dt), dt, "q")
        if measure == "informed":
            if literal:
                q = informed_up_prob(q, info, m, dt)
            else:
                theta_eff = (m.mu - (m.r - info.info_yield)) / m.sigma
                q = p - math.sqrt(p * (1.0 - p)) * theta_eff * math.sqrt(dt)
            q = _check_prob(q, dt, "q_informed")
        elif literal:
            # printed risk-neutral tree: factors rebuilt from q
            up, down = _asym_devs(q, m.sigma, dt)
        return _binomial(up, down, m.mu, q, dt, disc)

    if measure == "mean_return":
        nu = perceived.require("nu")
        s = m.sigma * math.sqrt(dt)
        if side == "physical":
            prob = _symmetric(m.mu - nu, m.sigma, dt)
        elif spec.informed and literal:
            q = _check_prob(_symmetric(m.r - nu, m.sigma, dt), dt, "q_nu")
            prob = informed_up_prob(q, info, m, dt)
        elif spec.informed:
            prob = _symmetric(m.r - info.info_yield - nu, m.sigma, dt)
        else:
            prob = _symmetric(m.r - nu, m.sigma, dt)
        return _binomial(s, s, nu, _check_prob(prob, dt, "q_nu"), dt, disc)

    if measure == "discount":
        R = perceived.require("R_rate")
        lam = m.r - R + 0.5 * m.sigma * m.sigma
        s = m.sigma * math.sqrt(dt)
        r_tau = R + info.disc_yield if spec.informed else R
        if side == "physical":
            prob = _symmetric(m.mu - lam, m.sigma, dt)
        elif literal:
            tilt = R - (0.5 if spec.half_variance else 1.0) * m.sigma * m.sigma
            prob = _symmetric(tilt, m.sigma, dt)
        else:
            prob = _symmetric(R - lam, m.sigma, dt)
        return _binomial(s, s, lam, _check_prob(prob, dt, "q_R"), dt, math.exp(-r_tau * dt))

    if measure == "risk_adjusted":
        gamma = perceived.gamma if perceived.gamma is not None else m.mu
        lam = spec.lam if spec.lam is not None else info.lam
        p = _natural_prob(spec, gamma, m.sigma, dt)
        up, down = _asym_devs(p, m.sigma, dt)
        theta = sharpe(m) if literal else (gamma - m.r) / m.sigma
        prob = p - math.sqrt(p * (1.0 - p)) * (theta * (1.0 + lam)) * math.sqrt(dt)
        return _binomial(up, down, gamma, _check_prob(prob, dt, "Q"), dt, disc)

    if measure == "trinomial":
        b = trinomial_probs(m, perceived, dt, side, literal, info if spec.informed else None)
        keep = [i for i, p in enumerate(b.probs) if p > 0.0]
        b = BranchDistribution(
            factors=tuple(b.factors[i] for i in keep),
            probs=tuple(b.probs[i] for i in keep),
            discount=b.discount,
        )
        for p in b.probs:
            _check_prob(p, dt, "p_trinomial")
        return b

    raise ValidationError("measure", f"unknown measure {measure!r}")


def _admissible_step(spec, m, perceived, info, dt) -> BranchDistribution:
    try:
        b = _step(spec, m, perceived, info, dt)
    except ValidationError as exc:
        # a coarse step can push the down factor to zero or below
        if exc.field != "factors":
            raise
        raise ProbabilityBoundError(str(exc), dt) from None
    for p in b.probs:
        if not PROB_EPS < p < 1.0 - PROB_EPS:
            raise ProbabilityBoundError(f"branch probability {p!r} outside ({PROB_EPS}, 1 - {PROB_EPS})", dt)
    return b


def build_lattice(
    spec: LatticeSpec,
    m: MarketParams,
    perceived: Optional[PerceivedParams] = None,
    info: Optional[TraderInfo] = None,
) -> tuple:
    """Homogeneous tree: ``spec.n_steps`` copies of one validated step.

    Raises :class:`ProbabilityBoundError` carrying the largest admissible
    ``dt`` when some branch probability leaves ``(1e-12, 1 - 1e-12)`` or a
    growth factor is not positive.
    """
    perceived = perceived if perceived is not None else PerceivedParams()
    info = info if info is not None else TraderInfo()
    dt = spec.dt

    def step(h):
        return _admissible_step(spec, m, perceived, info, h)

    try:
        b = step(dt)
    except ProbabilityBoundError as exc:
        raise ProbabilityBoundError(exc.reason, dt, max_admissible_dt(step, dt), step=0) from None
    return (b,) * spec.n_steps


def effective_drift(
    spec: LatticeSpec,
    m: MarketParams,
    perceived: Optional[PerceivedParams] = None,
    info: Optional[TraderInfo] = None,
) -> float:
    """Drift ``g`` with ``E[factor] = 1 + g dt`` for a corrected-mode tree."""
    perceived = perceived if perceived is not None else PerceivedParams()
    info = info if info is not None else TraderInfo()
    measure, side = spec.measure, spec.side
    if measure == "physical" or (measure in ("mean_return", "trinomial", "discount", "binary") and side == "physical"):
        return m.mu
    if measure == "informed":
        return m.r - info.info_yield
    if measure == "mean_return":
        return m.r - info.info_yield if spec.informed else m.r
    if measure == "trinomial":
        return m.r - info.d_tau * info.tau if spec.informed else m.r
    if measure == "discount":
        return perceived.require("R_rate")
    if measure == "risk_adjusted":
        gamma = perceived.gamma if perceived.gamma is not None else m.mu
        lam = spec.lam if spec.lam is not None else info.lam
        return m.r - (gamma - m.r) * lam
    return m.r


def step_moments(b: BranchDistribution) -> tuple:
    """Mean and variance of the growth factor."""
    mean = math.fsum(p * f for p, f in zip(b.probs, b.factors))
    var = math.fsum(p * (f - mean) ** 2 for p, f in zip(b.probs, b.factors))
    return mean, var


def price_european(tree: Sequence[BranchDistribution], opt: OptionSpec) -> float:
    """Backward induction of a European payoff on a homogeneous tree.

    The step size is implied by the tree itself; callers build it over
    ``opt.tenor``. Puts are induced directly on the put payoff.
    """
    if len(tree) == 0:
        raise ValidationError("tree", "empty tree")
    b = tree[0]
    if any(step is not b and step != b for step in tree):
        raise ValidationError("tree", "only homogeneous trees are supported")
    n = len(tree)
    disc = b.discount

    if len(b.factors) == 1:
        (f,) = b.factors
        return float(opt.payoff(np.array([opt.spot * f**n]))[0] * disc**n)

    if len(b.factors) == 2:
        u, d = b.factors
        pu, pd = b.probs
        j = np.arange(n + 1)
        values = opt.payoff(opt.spot * u**j * d ** (n - j))
        for _ in range(n):
            values = disc * (pu * values[1:] + pd * values[:-1])
        return float(values[0])

    if len(b.factors) == 3:
        u, mid, d = b.factors
        pu, pm, pd = b.probs
        a = np.arange(n + 1)[:, None]
        c = np.arange(n + 1)[None, :]
        valid = a + c <= n
        downs = np.where(valid, n - a - c, 0)
        values = np.where(valid, opt.payoff(opt.spot * u**a * mid**c * d**downs), 0.0)
        for _ in range(n):
            values = disc * (pu * values[1:, :-1] + pm * values[:-1, 1:] + pd * values[:-1, :-1])
        return float(values[0, 0])

    raise ValidationError("tree", f"unsupported branch count {len(b.factors)}")
