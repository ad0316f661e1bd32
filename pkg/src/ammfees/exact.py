"""Closed-form solver for the constant-oracle-price control problem.

With the oracle pinned at s, the log-transformed value w = exp(k*g) solves
the linear system dw/dt + A w = 0 with w(T) = 1, where A is tridiagonal:
row j couples grid point j to j+1 through the sell-arrival coefficient and
to j-1 through the buy-arrival coefficient, with the penalty -k*P(y,s) on
the diagonal.  The value is recovered as g = log(w)/k and the optimal fees
from log-ratios of w at neighbouring grid points.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import ConfigError, ContractError, DomainError
from .market import EXP_CAP, FeePair, MarketParams
from .pool import AssetGrid

__all__ = [
    "GeneratorMatrix",
    "ValueSurface",
    "FeeSchedule",
    "LinearFeeModel",
    "build_generator",
    "matrix_exponential",
    "solve_value",
    "optimal_fees",
    "limit_fees_k0",
    "linearize_fees",
    "hjb_residual",
    "write_fee_csv",
    "write_value_csv",
]


@dataclass(frozen=True)
class GeneratorMatrix:
    """Tridiagonal coupling matrix of the linear w-system at oracle price oracle_s."""

    matrix: np.ndarray
    oracle_s: float

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def build_generator(params: MarketParams, grid: AssetGrid, s: float) -> GeneratorMatrix:
    """Assemble the matrix A so that dw/dt + A w = 0 holds per grid point.

    Superdiagonal entry (j, j+1): lambda_sell * exp(-k*(s+zeta)*Delta_plus - 1
    + k*Z_plus*Delta_plus) evaluated at point j; subdiagonal entry (j, j-1):
    the mirrored buy coefficient; diagonal: -k*phi*(Z(y^j) - s)^2.
    """
    n = grid.size
    zpd = grid.sell_leg_values()
    zmd = grid.buy_leg_values()
    ds = grid.delta_sell
    db = grid.delta_buy
    k = params.k
    up = -k * (s + params.zeta) * ds[:-1] - 1.0 + k * zpd[:-1]
    dn = k * (s - params.zeta) * db[1:] - 1.0 - k * zmd[1:]
    if np.max(up, initial=-np.inf) > EXP_CAP or np.max(dn, initial=-np.inf) > EXP_CAP:
        raise ConfigError("generator exponent exceeds the overflow guard; "
                          "rescale rates or the grid")
    a = np.zeros((n, n))
    idx = np.arange(n - 1)
    a[idx, idx + 1] = params.lambda_sell * np.exp(up)
    a[idx + 1, idx] = params.lambda_buy * np.exp(dn)
    z = grid.marginal_rates()
    a[np.arange(n), np.arange(n)] = -k * params.phi * (z - s) ** 2
    a.flags.writeable = False
    return GeneratorMatrix(matrix=a, oracle_s=float(s))


def matrix_exponential(m: np.ndarray) -> np.ndarray:
    """exp(m) for a square real matrix (scaling-and-squaring Pade)."""
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DomainError("matrix_exponential requires a square matrix")
    if not np.all(np.isfinite(m)):
        raise DomainError("matrix_exponential requires finite entries")
    return scipy.linalg.expm(m)


@dataclass(frozen=True)
class ValueSurface:
    """w(t, y^j) on a time grid, with the decay k needed to read off the value.

    g = log(w)/k is the reduced value and v(t, y, c) = c + g the full one
    (the cash account separates additively).
    """

    times: np.ndarray
    w: np.ndarray
    k: float
    generator: GeneratorMatrix

    @property
    def g(self) -> np.ndarray:
        return np.log(self.w) / self.k

    def v(self, c: float) -> np.ndarray:
        return c + self.g

    def time_index(self, t: float) -> int:
        """Index of the nearest stored time."""
        return int(np.argmin(np.abs(self.times - t)))


def solve_value(gen: GeneratorMatrix, params: MarketParams, times) -> ValueSurface:
    """w rows at the requested times, w(t) = exp(A*(T-t)) applied to ones.

    Rows are propagated backward from the terminal condition, reusing one
    matrix exponential per distinct time gap.
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0:
        raise ContractError("times must be a nonempty 1-d array")
    if np.any(np.diff(times) <= 0):
        raise ContractError("times must be strictly increasing")
    t_end = params.horizon
    if times[0] < 0 or times[-1] > t_end + 1e-12 * max(1.0, t_end):
        raise DomainError(f"times must lie within [0, {t_end}]")
    n = gen.dim
    w = np.empty((times.size, n))
    taus = t_end - times[::-1]          # ascending distances from T
    current = np.ones(n)
    prev_tau = 0.0
    cache: dict[float, np.ndarray] = {}
    for pos, tau in enumerate(taus):
        gap = tau - prev_tau
        if gap > 0:
            step = cache.get(gap)
            if step is None:
                step = matrix_exponential(gen.matrix * gap)
                cache[gap] = step
            current = step @ current
        w[times.size - 1 - pos] = current
        prev_tau = tau
    w.flags.writeable = False
    return ValueSurface(times=times.copy(), w=w, k=params.k, generator=gen)


@dataclass(frozen=True)
class FeeSchedule:
    """Optimal fees on (time, grid); nan where a side is untradable."""

    times: np.ndarray
    fee_sell: np.ndarray
    fee_buy: np.ndarray

    def time_index(self, t: float) -> int:
        return int(np.argmin(np.abs(self.times - t)))

    def at(self, t: float, i: int, n_half: int | None = None) -> FeePair:
        """Fee pair at time t and signed grid index i."""
        n = (self.fee_sell.shape[1] - 1) // 2 if n_half is None else n_half
        if not -n <= i <= n:
            raise ContractError(f"index {i} outside grid")
        r = self.time_index(t)
        return FeePair(float(self.fee_sell[r, i + n]), float(self.fee_buy[r, i + n]))


def optimal_fees(surface: ValueSurface, grid: AssetGrid) -> FeeSchedule:
    """Closed-form maximizing fees from log-ratios of w at adjacent points."""
    if surface.w.shape[1] != grid.size:
        raise ContractError(f"surface has {surface.w.shape[1]} grid points, "
                            f"grid has {grid.size}")
    lw = np.log(surface.w)
    zpd = grid.sell_leg_values()
    zmd = grid.buy_leg_values()
    k = surface.k
    p = np.full_like(surface.w, np.nan)
    m = np.full_like(surface.w, np.nan)
    p[:, :-1] = (1.0 + lw[:, :-1] - lw[:, 1:]) / (k * zpd[:-1])
    m[:, 1:] = (1.0 + lw[:, 1:] - lw[:, :-1]) / (k * zmd[1:])
    p.flags.writeable = False
    m.flags.writeable = False
    return FeeSchedule(times=surface.times, fee_sell=p, fee_buy=m)


def limit_fees_k0(grid: AssetGrid, params: MarketParams, t: float) -> FeeSchedule:
    """Small-decay limit of k times the optimal fees.

    The limit generator keeps only lambda_sell/e on the superdiagonal and
    lambda_buy/e on the subdiagonal; the returned quantities are the limits
    of k*fee_sell and k*fee_buy, not fees themselves.
    """
    if not 0 <= t <= params.horizon:
        raise DomainError(f"t={t} outside [0, {params.horizon}]")
    n = grid.size
    a = np.zeros((n, n))
    idx = np.arange(n - 1)
    a[idx, idx + 1] = params.lambda_sell / math.e
    a[idx + 1, idx] = params.lambda_buy / math.e
    w = matrix_exponential(a * (params.horizon - t)) @ np.ones(n)
    lw = np.log(w)
    zpd = grid.sell_leg_values()
    zmd = grid.buy_leg_values()
    p = np.full((1, n), np.nan)
    m = np.full((1, n), np.nan)
    p[0, :-1] = (1.0 + lw[:-1] - lw[1:]) / zpd[:-1]
    m[0, 1:] = (1.0 + lw[1:] - lw[:-1]) / zmd[1:]
    return FeeSchedule(times=np.array([t]), fee_sell=p, fee_buy=m)


@dataclass(frozen=True)
class LinearFeeModel:
    """Per-time affine fee rule fee(y) ~= intercept + slope * (y - y0)."""

    times: np.ndarray
    intercept_sell: np.ndarray
    slope_sell: np.ndarray
    intercept_buy: np.ndarray
    slope_buy: np.ndarray
    y0: float

    def time_index(self, t: float) -> int:
        return int(np.argmin(np.abs(self.times - t)))

    def at(self, t: float, y: float) -> FeePair:
        r = self.time_index(t)
        dy = y - self.y0
        return FeePair(float(self.intercept_sell[r] + self.slope_sell[r] * dy),
                       float(self.intercept_buy[r] + self.slope_buy[r] * dy))


def linearize_fees(schedule: FeeSchedule, grid: AssetGrid) -> LinearFeeModel:
    """Affine fit of the schedule around the center: central-difference slope,
    intercept pinned to the schedule value at y0."""
    if grid.n < 2:
        raise ContractError("linearization needs at least 3 interior points around y0")
    c = grid.center_index
    span = grid.points[c + 1] - grid.points[c - 1]
    return LinearFeeModel(
        times=schedule.times,
        intercept_sell=schedule.fee_sell[:, c].copy(),
        slope_sell=(schedule.fee_sell[:, c + 1] - schedule.fee_sell[:, c - 1]) / span,
        intercept_buy=schedule.fee_buy[:, c].copy(),
        slope_buy=(schedule.fee_buy[:, c + 1] - schedule.fee_buy[:, c - 1]) / span,
        y0=float(grid.points[c]),
    )


def hjb_residual(surface: ValueSurface, params: MarketParams, grid: AssetGrid,
                 t: float) -> float:
    """max over the grid of |dw/dt + A w| at time t, dw/dt by central difference.

    Serves as an independent consistency oracle for the solved surface.
    """
    if surface.w.shape[1] != grid.size:
        raise ContractError("surface and grid dimensions disagree")
    r = surface.time_index(t)
    if r == 0 or r == surface.times.size - 1:
        raise ContractError("t must be interior to the surface time grid")
    dt_span = surface.times[r + 1] - surface.times[r - 1]
    dwdt = (surface.w[r + 1] - surface.w[r - 1]) / dt_span
    return float(np.max(np.abs(dwdt + surface.generator.matrix @ surface.w[r])))


def _cell(x: float) -> str:
    return "" if math.isnan(x) else repr(float(x))


def write_fee_csv(schedule: FeeSchedule, grid: AssetGrid, path) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["t", "i", "y", "fee_sell", "fee_buy"])
        for r, t in enumerate(schedule.times):
            for j in range(grid.size):
                wr.writerow([repr(float(t)), j - grid.n, repr(float(grid.points[j])),
                             _cell(schedule.fee_sell[r, j]), _cell(schedule.fee_buy[r, j])])


def write_value_csv(surface: ValueSurface, grid: AssetGrid, path) -> None:
    g = surface.g
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["t", "i", "y", "w", "g"])
        for r, t in enumerate(surface.times):
            for j in range(grid.size):
                wr.writerow([repr(float(t)), j - grid.n, repr(float(grid.points[j])),
                             repr(float(surface.w[r, j])), repr(float(g[r, j]))])
