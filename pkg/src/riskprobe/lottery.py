"""Holt-Laury decision sheet and expected-utility mathematics.

The sheet is ten paired lotteries. Option A (safe) pays $2.00 or $1.60,
option B (risky) pays $3.85 or $0.10, and the chance of the high payoff is
``i/10`` on decision ``i``. A subject's answer is the *switch point*, the
first decision at which B is chosen.

Payoffs are stored in integer cents and probabilities in integer tenths so the
table itself carries no float drift; utilities are ordinary doubles.

CRRA utility::

    u(x) = x**(1 - r) / (1 - r)    r != 1
    u(x) = ln(x)                   r == 1

Larger ``r`` means more risk averse.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from numbers import Integral
from typing import Literal, NamedTuple

N_DECISIONS = 10

SAFE_HIGH_CENTS = 200
SAFE_LOW_CENTS = 160
RISKY_HIGH_CENTS = 385
RISKY_LOW_CENTS = 10

DEFAULT_BISECTION_TOL = 1e-9
DEFAULT_SEARCH_BOUNDS = (-20.0, 20.0)

Which = Literal["A", "B"]


class RiskClass(str, Enum):
    RISK_SEEKING = "RiskSeeking"
    RISK_NEUTRAL = "RiskNeutral"
    RISK_AVERSE = "RiskAverse"


class TieBreak(str, Enum):
    """How indifference (EU_B == EU_A) at a decision is resolved."""

    PREFER_B = "PreferB"
    PREFER_A = "PreferA"


@dataclass(frozen=True)
class LotteryOption:
    chance_tenths: int
    high_cents: int
    low_cents: int

    def __post_init__(self) -> None:
        if not 0 <= self.chance_tenths <= N_DECISIONS:
            raise ValueError(f"chance must be in 0..10 tenths, got {self.chance_tenths}")
        if not self.high_cents > self.low_cents >= 0:
            raise ValueError("payoffs must satisfy high > low >= 0")

    @property
    def p_high(self) -> float:
        return self.chance_tenths / N_DECISIONS

    @property
    def payoff_high(self) -> float:
        return self.high_cents / 100

    @property
    def payoff_low(self) -> float:
        return self.low_cents / 100


@dataclass(frozen=True)
class LotteryDecision:
    index: int
    option_a: LotteryOption
    option_b: LotteryOption

    def option(self, which: Which) -> LotteryOption:
        if which == "A":
            return self.option_a
        if which == "B":
            return self.option_b
        raise ValueError(f"which must be 'A' or 'B', got {which!r}")


@dataclass(frozen=True)
class CrraParams:
    r: float
    tie_break: TieBreak = TieBreak.PREFER_B

    def __post_init__(self) -> None:
        if not math.isfinite(self.r):
            raise ValueError(f"r must be finite, got {self.r}")
        # accept plain strings from config files
        object.__setattr__(self, "tie_break", TieBreak(self.tie_break))


def build_task_sheet() -> list[LotteryDecision]:
    return [
        LotteryDecision(
            index=i,
            option_a=LotteryOption(i, SAFE_HIGH_CENTS, SAFE_LOW_CENTS),
            option_b=LotteryOption(i, RISKY_HIGH_CENTS, RISKY_LOW_CENTS),
        )
        for i in range(1, N_DECISIONS + 1)
    ]


TASK_SHEET: tuple[LotteryDecision, ...] = tuple(build_task_sheet())


def expected_value_exact(d: LotteryDecision, which: Which) -> Fraction:
    """Expected payoff in dollars as an exact rational."""
    opt = d.option(which)
    tenth_cents = opt.chance_tenths * opt.high_cents + (N_DECISIONS - opt.chance_tenths) * opt.low_cents
    return Fraction(tenth_cents, N_DECISIONS * 100)


def expected_value(d: LotteryDecision, which: Which) -> float:
    return float(expected_value_exact(d, which))


def crra_utility(x: float, r: float) -> float:
    if not x > 0:
        raise ValueError(f"CRRA utility is defined for x > 0 only, got {x}")
    if r == 1:
        return math.log(x)
    return x ** (1 - r) / (1 - r)


def expected_utility(d: LotteryDecision, which: Which, params: CrraParams | float) -> float:
    r = params.r if isinstance(params, CrraParams) else float(params)
    opt = d.option(which)
    p = opt.p_high
    return p * crra_utility(opt.payoff_high, r) + (1 - p) * crra_utility(opt.payoff_low, r)


def prefers_b(d: LotteryDecision, params: CrraParams) -> bool:
    eu_a = expected_utility(d, "A", params)
    eu_b = expected_utility(d, "B", params)
    if params.tie_break is TieBreak.PREFER_A:
        return eu_b > eu_a
    return eu_b >= eu_a


def predicted_switch_point(params: CrraParams | float) -> int:
    """First decision at which a CRRA agent weakly (or strictly) prefers B.

    Option B first-order dominates A on decision 10, so the result is always
    in 1..10.
    """
    if not isinstance(params, CrraParams):
        params = CrraParams(float(params))
    for d in TASK_SHEET:
        if prefers_b(d, params):
            return d.index
    # unreachable for increasing utility; kept as a hard guard
    raise ArithmeticError(f"no switch found for r={params.r}")


def n_safe(switch: int) -> int:
    _check_switch(switch)
    return switch - 1


def classify(switch: int) -> RiskClass:
    safe = n_safe(switch)
    if safe < 4:
        return RiskClass.RISK_SEEKING
    if safe == 4:
        return RiskClass.RISK_NEUTRAL
    return RiskClass.RISK_AVERSE


def switch_to_choice_vector(switch: int) -> tuple[int, ...]:
    """Safe-choice indicators: 1 where A is chosen (decisions before the switch)."""
    _check_switch(switch)
    return tuple(1 if d < switch else 0 for d in range(1, N_DECISIONS + 1))


class CrraInterval(NamedTuple):
    """Open interval of ``r`` mapping to one switch point.

    Unbounded ends are ``-inf`` / ``+inf``. An unreachable switch point gives
    ``lo >= hi``.
    """

    lo: float
    hi: float

    @property
    def is_empty(self) -> bool:
        return not self.lo < self.hi

    def contains(self, r: float) -> bool:
        return self.lo < r < self.hi


def _bisect_first_true(pred, lo: float, hi: float, tol: float) -> tuple[float, float]:
    # pred(lo) is False, pred(hi) is True, pred monotone in r
    while hi - lo > tol:
        mid = lo + (hi - lo) / 2
        if mid <= lo or mid >= hi:
            break
        if pred(mid):
            hi = mid
        else:
            lo = mid
    return lo, hi


def crra_interval_for_switch(
    switch: int,
    tolerance: float = DEFAULT_BISECTION_TOL,
    *,
    tie_break: TieBreak = TieBreak.PREFER_B,
    bounds: tuple[float, float] = DEFAULT_SEARCH_BOUNDS,
) -> CrraInterval:
    """Invert :func:`predicted_switch_point` by bisection.

    Endpoints are returned on the conservative side of each bracket, so every
    ``r`` strictly inside the interval maps back to ``switch``.
    """
    _check_switch(switch)
    if not tolerance > 0:
        raise ValueError("tolerance must be positive")
    b_lo, b_hi = bounds

    def sp(r: float) -> int:
        return predicted_switch_point(CrraParams(r, tie_break))

    at_lo, at_hi = sp(b_lo), sp(b_hi)

    # lower end: where sp(r) >= switch begins
    if at_lo >= switch:
        lo = -math.inf
    elif at_hi < switch:
        return CrraInterval(math.inf, math.inf)
    else:
        _, lo = _bisect_first_true(lambda r: sp(r) >= switch, b_lo, b_hi, tolerance)

    # upper end: where sp(r) > switch begins
    if at_hi <= switch:
        hi = math.inf
    elif at_lo > switch:
        return CrraInterval(-math.inf, -math.inf)
    else:
        hi, _ = _bisect_first_true(lambda r: sp(r) > switch, b_lo, b_hi, tolerance)

    return CrraInterval(lo, hi)


def _check_switch(switch: int) -> None:
    if isinstance(switch, bool) or not isinstance(switch, Integral) or not 1 <= switch <= N_DECISIONS:
        raise ValueError(f"switch point must be an integer in 1..10, got {switch!r}")
