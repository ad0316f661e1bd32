"""Constant-product pool geometry: inventory grids and exchange rates.

The pool holds a riskless asset X and a risky asset Y subject to the
trading condition x * y = depth_sq.  The level function phi(y) =
depth_sq / y gives the X reserve implied by a Y reserve, and the three
exchange rates (marginal, sell leg, buy leg) follow from differences of
phi along a finite inventory grid.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import BoundaryError, DomainError

__all__ = [
    "PoolSpec",
    "AssetGrid",
    "RateTriple",
    "level_value",
    "build_price_grid",
    "build_uniform_grid",
    "rates_at",
    "write_grid_csv",
]


@dataclass(frozen=True)
class PoolSpec:
    """Pool constants: invariant level (depth_sq = p**2) and initial Y reserve."""

    depth_sq: float
    y0: float

    def __post_init__(self):
        if not (math.isfinite(self.depth_sq) and self.depth_sq > 0):
            raise DomainError(f"depth_sq must be positive, got {self.depth_sq}")
        if not (math.isfinite(self.y0) and 0 < self.y0 < self.depth_sq):
            raise DomainError(f"y0 must lie in (0, depth_sq), got {self.y0}")


def level_value(spec: PoolSpec, y):
    """X reserve phi(y) = depth_sq / y for a Y reserve y (scalar or array)."""
    arr = np.asarray(y, dtype=float)
    if not np.all(arr > 0):
        raise DomainError("level function requires y > 0")
    out = spec.depth_sq / arr
    return float(out) if np.isscalar(y) or arr.ndim == 0 else out


class AssetGrid:
    """Immutable inventory grid y^-N .. y^N with per-index trade sizes.

    Signed offsets -N..N address grid points relative to the starting
    reserve y^0 = y0; dense positions 0..2N address the same points for
    matrix work.  delta_sell (the amount deposited by a sell) is undefined
    at the top index and delta_buy at the bottom one; those slots hold nan.
    """

    def __init__(self, spec: PoolSpec, points: np.ndarray, kind: str, spacing: float):
        points = np.asarray(points, dtype=float)
        if points.ndim != 1 or points.size % 2 == 0:
            raise DomainError("grid must be a flat array with 2N+1 points")
        if np.any(points <= 0) or np.any(points >= spec.depth_sq):
            raise DomainError("grid points must lie in (0, depth_sq)")
        if np.any(np.diff(points) <= 0):
            raise DomainError("grid points must be strictly increasing")
        levels = spec.depth_sq / points
        # convexity of phi along the grid (nondecreasing secant slopes, i.e.
        # z_sell <= z_buy at interior points) excludes roundtrip arbitrage;
        # the plain second difference would only be valid on uniform spacing
        slopes = np.diff(levels) / np.diff(points)
        if np.any(np.diff(slopes) < 0):
            raise DomainError("level values are not convex along the grid")
        self.spec = spec
        self.points = points
        self.level_values = levels
        self.kind = kind
        self.spacing = float(spacing)
        self.n = points.size // 2
        self.center_index = self.n
        self.delta_sell = np.full(points.size, np.nan)
        self.delta_buy = np.full(points.size, np.nan)
        self.delta_sell[:-1] = np.diff(points)
        self.delta_buy[1:] = np.diff(points)
        for a in (self.points, self.level_values, self.delta_sell, self.delta_buy):
            a.flags.writeable = False

    @property
    def size(self) -> int:
        return self.points.size

    def to_dense(self, i: int) -> int:
        """Map a signed offset in [-N, N] to a dense position in [0, 2N]."""
        if not -self.n <= i <= self.n:
            raise BoundaryError(f"index {i} outside [-{self.n}, {self.n}]")
        return i + self.n

    def y_at(self, i: int) -> float:
        return float(self.points[self.to_dense(i)])

    def marginal_rates(self) -> np.ndarray:
        """Z(y) = depth_sq / y**2 at every grid point."""
        return self.spec.depth_sq / self.points**2

    def sell_leg_values(self) -> np.ndarray:
        """Z_plus(y^i) * Delta_plus(y^i) = phi(y^i) - phi(y^{i+1}); nan at the top."""
        out = np.full(self.size, np.nan)
        out[:-1] = self.level_values[:-1] - self.level_values[1:]
        return out

    def buy_leg_values(self) -> np.ndarray:
        """Z_minus(y^i) * Delta_minus(y^i) = phi(y^{i-1}) - phi(y^i); nan at the bottom."""
        out = np.full(self.size, np.nan)
        out[1:] = self.level_values[:-1] - self.level_values[1:]
        return out


@dataclass(frozen=True)
class RateTriple:
    """Exchange rates at one grid index; nan marks a boundary-undefined side."""

    z_marginal: float
    z_sell: float
    z_buy: float
    delta_sell: float
    delta_buy: float

    @property
    def has_sell(self) -> bool:
        return not math.isnan(self.z_sell)

    @property
    def has_buy(self) -> bool:
        return not math.isnan(self.z_buy)

    def sell_leg(self) -> float:
        """Z_plus * Delta_plus, raising at the upper boundary."""
        if not self.has_sell:
            raise BoundaryError("sell rate undefined at the upper grid boundary")
        return self.z_sell * self.delta_sell

    def buy_leg(self) -> float:
        """Z_minus * Delta_minus, raising at the lower boundary."""
        if not self.has_buy:
            raise BoundaryError("buy rate undefined at the lower grid boundary")
        return self.z_buy * self.delta_buy


def build_price_grid(spec: PoolSpec, dz: float, n: int) -> AssetGrid:
    """Grid on which every one-step trade moves the marginal rate by exactly dz.

    Z(y^i) = Z(y0) - dz*i, hence y^i = sqrt(depth_sq / (Z(y0) - dz*i)).
    """
    if dz <= 0:
        raise DomainError("dz must be positive")
    z0 = spec.depth_sq / spec.y0**2
    if z0 - dz * n <= 0:
        raise DomainError(f"grid crosses Z <= 0: Z(y0)={z0}, dz*N={dz * n}")
    i = np.arange(-n, n + 1)
    points = np.sqrt(spec.depth_sq / (z0 - dz * i))
    return AssetGrid(spec, points, kind="price_spaced", spacing=dz)


def build_uniform_grid(spec: PoolSpec, delta: float, n: int) -> AssetGrid:
    """Equally spaced inventory grid y^i = y0 + delta*i."""
    if delta <= 0:
        raise DomainError("delta must be positive")
    if spec.y0 - delta * n <= 0:
        raise DomainError("grid crosses y <= 0")
    i = np.arange(-n, n + 1)
    points = spec.y0 + delta * i
    return AssetGrid(spec, points, kind="uniform", spacing=delta)


def rates_at(spec: PoolSpec, grid: AssetGrid, i: int) -> RateTriple:
    """Marginal, sell and buy exchange rates at signed index i.

    The closed CPM forms are used: Z = p^2/y^2, Z_plus(y^i) = p^2/(y^i y^{i+1})
    and Z_minus(y^i) = p^2/(y^i y^{i-1}), equal to the phi difference quotients.
    """
    j = grid.to_dense(i)
    y = grid.points[j]
    z = spec.depth_sq / y**2
    if i < grid.n:
        z_sell = spec.depth_sq / (y * grid.points[j + 1])
        d_sell = grid.delta_sell[j]
    else:
        z_sell, d_sell = math.nan, math.nan
    if i > -grid.n:
        z_buy = spec.depth_sq / (y * grid.points[j - 1])
        d_buy = grid.delta_buy[j]
    else:
        z_buy, d_buy = math.nan, math.nan
    return RateTriple(float(z), float(z_sell), float(z_buy), float(d_sell), float(d_buy))


def _cell(x: float) -> str:
    return "" if math.isnan(x) else repr(float(x))


def write_grid_csv(spec: PoolSpec, grid: AssetGrid, path) -> None:
    """Dump the grid with rates; boundary-undefined cells are left empty."""
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["i", "y", "phi_y", "z_marginal", "z_sell", "z_buy", "delta_sell", "delta_buy"])
        for i in range(-grid.n, grid.n + 1):
            r = rates_at(spec, grid, i)
            j = grid.to_dense(i)
            wr.writerow([i, repr(float(grid.points[j])), repr(float(grid.level_values[j])),
                         repr(r.z_marginal), _cell(r.z_sell), _cell(r.z_buy),
                         _cell(r.delta_sell), _cell(r.delta_buy)])
