"""Optimal dynamic trading fees for a constant-product market maker.

Two tractable solvers for the venue's fee-setting control problem (a
matrix-exponential solution with a frozen oracle price and a Riccati/linear
ODE solution under a quadratic expansion with a Brownian oracle), plus a
Monte Carlo engine comparing optimal, linearized and constant fee rules.
"""

from .errors import (BoundaryError, ConfigError, ContractError, DomainError,
                     NumericalError)
from .market import CashAccount, FeePair, MarketParams
from .pool import (AssetGrid, PoolSpec, RateTriple, build_price_grid,
                   build_uniform_grid, level_value, rates_at)

__all__ = [
    "BoundaryError", "ConfigError", "ContractError", "DomainError",
    "NumericalError",
    "CashAccount", "FeePair", "MarketParams",
    "AssetGrid", "PoolSpec", "RateTriple", "build_price_grid",
    "build_uniform_grid", "level_value", "rates_at",
]

__version__ = "0.1.0"
