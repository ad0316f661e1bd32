"""Order-flow model: fee-tilted exchange rates, controlled intensities, penalty.

Fees tilt the taker-facing rates, (1 - fee_sell) * Z_plus on the sell leg and
(1 + fee_buy) * Z_minus on the buy leg, and the arrival intensities respond
exponentially to the gap between the tilted rate and the oracle price.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

from .errors import BoundaryError, DomainError, NumericalError
from .pool import RateTriple

__all__ = [
    "MarketParams",
    "FeePair",
    "CashAccount",
    "effective_rates",
    "sell_intensity",
    "buy_intensity",
    "penalty",
    "EXP_CAP",
]

# intensities above lambda * e^EXP_CAP signal an unbounded-arbitrage parameterization
EXP_CAP = 50.0


@dataclass(frozen=True)
class MarketParams:
    """Baseline intensities, decay, oracle dynamics, penalty weight and horizon.

    lambda_sell and lambda_buy are the baseline arrival rates of trades that
    deposit into / take out of the pool, k > 0 the exponential decay of the
    arrival response, zeta the external half-spread (folded to 0 by default),
    s0 and sigma the oracle price level and volatility, phi the weight of the
    quadratic price-alignment penalty, horizon the terminal time T.
    """

    lambda_sell: float
    lambda_buy: float
    k: float
    s0: float
    horizon: float
    sigma: float = 0.0
    phi: float = 0.0
    zeta: float = 0.0

    def __post_init__(self):
        values = (self.lambda_sell, self.lambda_buy, self.k, self.s0,
                  self.horizon, self.sigma, self.phi, self.zeta)
        if not all(math.isfinite(v) for v in values):
            raise DomainError("market parameters must be finite")
        if self.k <= 0:
            raise DomainError(f"decay k must be positive, got {self.k}")
        if self.horizon <= 0:
            raise DomainError(f"horizon must be positive, got {self.horizon}")
        if min(self.lambda_sell, self.lambda_buy, self.sigma, self.phi, self.zeta) < 0:
            raise DomainError("rates, sigma, phi and zeta must be nonnegative")


class FeePair(NamedTuple):
    """Proportional fees (sell side, buy side); either may be negative."""

    fee_sell: float
    fee_buy: float


@dataclass
class CashAccount:
    """Cumulative fees collected by the venue, in units of asset X."""

    value: float = 0.0

    def credit(self, amount: float) -> None:
        self.value += amount


def effective_rates(rates: RateTriple, fees: FeePair) -> tuple[float, float]:
    """Taker-facing rates ((1 - fee_sell) * z_sell, (1 + fee_buy) * z_buy)."""
    return (1.0 - fees.fee_sell) * rates.z_sell, (1.0 + fees.fee_buy) * rates.z_buy


def _guarded_exp(lam: float, exponent: float, cap: float) -> float:
    if exponent > cap:
        raise NumericalError(
            f"intensity exponent {exponent:.3g} exceeds cap {cap:.3g}; "
            "parameterization implies unbounded arbitrage flow")
    return lam * math.exp(exponent)


def sell_intensity(params: MarketParams, rates: RateTriple, s: float,
                   fee_sell: float, at_upper_boundary: bool = False,
                   exp_cap: float = EXP_CAP) -> float:
    """Arrival rate of sells into the pool; zero when the pool is full."""
    if at_upper_boundary:
        return 0.0
    if not rates.has_sell:
        raise BoundaryError("sell side undefined here; pass at_upper_boundary=True")
    gap = (1.0 - fee_sell) * rates.z_sell - (s + params.zeta)
    return _guarded_exp(params.lambda_sell, params.k * gap * rates.delta_sell, exp_cap)


def buy_intensity(params: MarketParams, rates: RateTriple, s: float,
                  fee_buy: float, at_lower_boundary: bool = False,
                  exp_cap: float = EXP_CAP) -> float:
    """Arrival rate of buys out of the pool; zero when the pool is empty."""
    if at_lower_boundary:
        return 0.0
    if not rates.has_buy:
        raise BoundaryError("buy side undefined here; pass at_lower_boundary=True")
    gap = (1.0 + fee_buy) * rates.z_buy - (s - params.zeta)
    return _guarded_exp(params.lambda_buy, -params.k * gap * rates.delta_buy, exp_cap)


def penalty(params: MarketParams, z_marginal: float, s: float) -> float:
    """Quadratic misalignment cost phi * (Z(y) - s)**2."""
    return params.phi * (z_marginal - s) ** 2
