"""Monte Carlo comparison of fee strategies on the controlled jump dynamics.

Paths follow the Euler scheme: per step the oracle price gains a Gaussian
increment, the strategy is queried at the pre-step state, and each side
fires independently with probability 1 - exp(-intensity * dt).  When both
sides fire in one step they are applied sequentially in a randomly drawn
order.  Every path is driven by its own counter-based random stream keyed
by (seed, path_id), so results are reproducible regardless of batching.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import ContractError, NumericalError
from .exact import FeeSchedule, LinearFeeModel
from .market import EXP_CAP, FeePair, MarketParams
from .pool import AssetGrid
from .quadratic import LinearizedRates, QuadCoeffs, fees_quadratic

__all__ = [
    "SimConfig",
    "PathResult",
    "AggregateStats",
    "MetricStat",
    "Strategy",
    "ScheduleFees",
    "LinearFees",
    "QuadraticFees",
    "ConstantFees",
    "constant_fee_level",
    "strategy_fee_lookup",
    "simulate_path",
    "run_batch",
    "write_results_csv",
]


@dataclass(frozen=True)
class SimConfig:
    """Batch geometry and the single seed all randomness flows from."""

    n_paths: int
    n_steps: int
    seed: int
    record_paths: bool = False
    block_size: int = 4096
    jump_scheme: str = "bernoulli"  # or "thinning" for exact in-step event times
    fee_clamp: tuple[float, float] | None = None

    def __post_init__(self):
        if self.n_paths < 1 or self.n_steps < 1:
            raise ContractError("n_paths and n_steps must be positive")
        if not 0 <= self.seed < 2**64:
            raise ContractError("seed must fit in 64 bits")
        if self.jump_scheme not in ("bernoulli", "thinning"):
            raise ContractError(f"unknown jump scheme {self.jump_scheme!r}")


class MetricStat(NamedTuple):
    mean: float
    stderr: float


@dataclass(frozen=True)
class PathResult:
    """Terminal outcome of one path."""

    fees_collected: float
    n_sell: int
    n_buy: int
    qv: float
    terminal_index: int


@dataclass(frozen=True)
class AggregateStats:
    """Per-metric means and standard errors over a batch of paths."""

    fees: MetricStat
    sells: MetricStat
    buys: MetricStat
    qv: MetricStat
    n_paths: int
    per_path: np.ndarray | None = field(default=None, repr=False)


class Strategy:
    """A total fee rule: a pair (fee_sell, fee_buy) for every tradable state."""

    name = "strategy"

    def check_grid(self, grid: AssetGrid) -> None:
        """Raise ContractError when the strategy cannot drive this grid."""

    def lookup(self, t: float, i: int, s: float, grid: AssetGrid) -> FeePair:
        j = grid.to_dense(i)
        p, m = self.step_fees(t, np.array([j]), np.array([float(s)]), grid)
        return FeePair(float(p[0]), float(m[0]))

    def step_fees(self, t, idx, s, grid):
        raise NotImplementedError


def _nearest_index(times: np.ndarray, t: float) -> int:
    pos = int(np.searchsorted(times, t))
    if pos <= 0:
        return 0
    if pos >= times.size:
        return times.size - 1
    return pos if times[pos] - t < t - times[pos - 1] else pos - 1


class ScheduleFees(Strategy):
    """Fees read off a solved schedule by nearest time and grid index.

    The oracle argument is ignored: the schedule was solved at a fixed
    oracle price, and is applied as-is when the simulated price moves.
    """

    name = "optimal_fa"

    def __init__(self, schedule: FeeSchedule):
        self.schedule = schedule
        self._p = np.nan_to_num(schedule.fee_sell)
        self._m = np.nan_to_num(schedule.fee_buy)

    def check_grid(self, grid: AssetGrid) -> None:
        if self.schedule.fee_sell.shape[1] != grid.size:
            raise ContractError("fee schedule width does not match the grid")

    def lookup(self, t: float, i: int, s: float, grid: AssetGrid) -> FeePair:
        grid.to_dense(i)
        return self.schedule.at(t, i)

    def step_fees(self, t, idx, s, grid):
        r = _nearest_index(self.schedule.times, t)
        return self._p[r][idx], self._m[r][idx]


class LinearFees(Strategy):
    """Affine-in-inventory fees from a linearized schedule; ignores the oracle."""

    name = "linear_fa"

    def __init__(self, model: LinearFeeModel):
        self.model = model

    def check_grid(self, grid: AssetGrid) -> None:
        if not math.isclose(self.model.y0, grid.points[grid.center_index]):
            raise ContractError("linear fee model was fit around a different y0")

    def step_fees(self, t, idx, s, grid):
        r = _nearest_index(self.model.times, t)
        dy = grid.points[idx] - self.model.y0
        return (self.model.intercept_sell[r] + self.model.slope_sell[r] * dy,
                self.model.intercept_buy[r] + self.model.slope_buy[r] * dy)


class QuadraticFees(Strategy):
    """State-dependent fees from the quadratic-expansion solution; these do
    respond to the simulated oracle price."""

    name = "optimal_sa"

    def __init__(self, coeffs: QuadCoeffs, lin: LinearizedRates, params: MarketParams):
        self.coeffs = coeffs
        self.lin = lin
        self.params = params

    def check_grid(self, grid: AssetGrid) -> None:
        if grid.kind != "uniform":
            raise ContractError("quadratic-expansion fees require a uniform grid")
        if not math.isclose(grid.spacing, self.lin.delta_sell) or \
                not math.isclose(grid.spacing, self.lin.delta_buy):
            raise ContractError("grid spacing differs from the expansion trade size")

    def step_fees(self, t, idx, s, grid):
        return fees_quadratic(self.coeffs, self.lin, self.params, t,
                              grid.points[idx], s)


class ConstantFees(Strategy):
    """The same fee on both sides, everywhere and always."""

    name = "constant"

    def __init__(self, level: float):
        self.level = float(level)

    def step_fees(self, t, idx, s, grid):
        c = np.full(np.shape(idx), self.level)
        return c, c.copy()


def constant_fee_level(schedule: FeeSchedule, grid: AssetGrid, t: float = 0.5) -> float:
    """Benchmark level: average of the two schedule fees at (t, y0)."""
    if not schedule.times[0] <= t <= schedule.times[-1]:
        raise ContractError(f"schedule does not cover t={t}")
    pair = schedule.at(t, 0)
    if math.isnan(pair.fee_sell) or math.isnan(pair.fee_buy):
        raise ContractError("schedule undefined at the center index")
    return 0.5 * (pair.fee_sell + pair.fee_buy)


def strategy_fee_lookup(strat: Strategy, t: float, i: int, s: float,
                        grid: AssetGrid, params: MarketParams) -> FeePair:
    """Fee pair a strategy quotes at time t, signed index i and oracle s."""
    if not 0 <= t <= params.horizon:
        raise ContractError(f"t={t} outside [0, {params.horizon}]")
    if not -grid.n <= i <= grid.n:
        raise ContractError(f"index {i} outside the grid")
    return strat.lookup(t, i, s, grid)


class _GridTables:
    """Boundary-safe grid arrays for the vectorized kernel (zeros where undefined)."""

    def __init__(self, grid: AssetGrid):
        self.zpd = np.nan_to_num(grid.sell_leg_values())
        self.zmd = np.nan_to_num(grid.buy_leg_values())
        self.ds = np.nan_to_num(grid.delta_sell)
        self.db = np.nan_to_num(grid.delta_buy)
        self.zmarg = grid.marginal_rates()
        self.top = grid.size - 1


def _path_draws(seed: int, path_id: int, n_steps: int):
    rng = np.random.Generator(np.random.Philox(key=np.array([seed, path_id],
                                                            dtype=np.uint64)))
    u = rng.random((3, n_steps))
    xi = rng.standard_normal(n_steps)
    return u[0], u[1], u[2], xi, rng


def _apply_clamp(p, m, clamp):
    if clamp is None:
        return p, m
    lo, hi = clamp
    return np.clip(p, lo, hi), np.clip(m, lo, hi)


def _run_block(path_ids: np.ndarray, cfg: SimConfig, strat: Strategy,
               params: MarketParams, grid: AssetGrid, tables: _GridTables):
    npaths = path_ids.size
    n_steps = cfg.n_steps
    us = np.empty((npaths, n_steps))
    ub = np.empty((npaths, n_steps))
    uo = np.empty((npaths, n_steps))
    xi = np.empty((npaths, n_steps))
    for row, pid in enumerate(path_ids):
        us[row], ub[row], uo[row], xi[row], _ = _path_draws(cfg.seed, int(pid), n_steps)

    dt = params.horizon / n_steps
    sig_dt = params.sigma * math.sqrt(dt)
    k = params.k
    idx = np.full(npaths, grid.center_index, dtype=np.int64)
    s = np.full(npaths, params.s0)
    cash = np.zeros(npaths)
    qv = np.zeros(npaths)
    nsell = np.zeros(npaths, dtype=np.int64)
    nbuy = np.zeros(npaths, dtype=np.int64)

    for step in range(n_steps):
        t = step * dt
        p, m = strat.step_fees(t, idx, s, grid)
        p, m = _apply_clamp(p, m, cfg.fee_clamp)
        exp_up = k * ((1.0 - p) * tables.zpd[idx] - (s + params.zeta) * tables.ds[idx])
        exp_dn = -k * ((1.0 + m) * tables.zmd[idx] - (s - params.zeta) * tables.db[idx])
        if max(exp_up.max(), exp_dn.max()) > EXP_CAP:
            raise NumericalError("intensity exponent exceeded the overflow guard "
                                 f"at step {step}")
        lam_up = np.where(idx == tables.top, 0.0, params.lambda_sell * np.exp(exp_up))
        lam_dn = np.where(idx == 0, 0.0, params.lambda_buy * np.exp(exp_dn))
        sell = us[:, step] < -np.expm1(-lam_up * dt)
        buy = ub[:, step] < -np.expm1(-lam_dn * dt)
        both = sell & buy
        sell_only = sell & ~buy
        buy_only = buy & ~sell
        sell_first = uo[:, step] < 0.5

        # a sell then a buy nets to the starting index; the two legs trade at
        # phi differences that telescope, so the credit collapses per order
        zpd_i = tables.zpd[idx]
        zmd_i = tables.zmd[idx]
        credit = np.where(sell_only, p * zpd_i,
                          np.where(buy_only, m * zmd_i,
                                   np.where(both,
                                            np.where(sell_first, (p + m) * zpd_i,
                                                     (p + m) * zmd_i),
                                            0.0)))
        cash += credit
        idx_after = idx + sell_only.astype(np.int64) - buy_only.astype(np.int64)
        qv += (tables.zmarg[idx_after] - tables.zmarg[idx]) ** 2
        idx = idx_after
        nsell += sell
        nbuy += buy
        s = s + sig_dt * xi[:, step]
    return cash, nsell, nbuy, qv, idx - grid.center_index


def _run_path_thinning(path_id: int, cfg: SimConfig, strat: Strategy,
                       params: MarketParams, grid: AssetGrid,
                       tables: _GridTables) -> PathResult:
    """Exact in-step event times by thinning against a per-step dominating rate.

    The oracle price and the clock feeding the strategy are still frozen at
    the step start; only the jump mechanism is refined.
    """
    rng = np.random.Generator(np.random.Philox(key=np.array([cfg.seed, path_id],
                                                            dtype=np.uint64)))
    n_steps = cfg.n_steps
    dt = params.horizon / n_steps
    sig_dt = params.sigma * math.sqrt(dt)
    k = params.k
    all_idx = np.arange(grid.size)
    i = grid.center_index
    s = params.s0
    cash = qv = 0.0
    nsell = nbuy = 0
    for step in range(n_steps):
        t = step * dt
        p_all, m_all = strat.step_fees(t, all_idx, np.full(grid.size, s), grid)
        p_all, m_all = _apply_clamp(p_all, m_all, cfg.fee_clamp)
        lam_up = np.where(all_idx == tables.top, 0.0, params.lambda_sell * np.exp(
            k * ((1.0 - p_all) * tables.zpd - (s + params.zeta) * tables.ds)))
        lam_dn = np.where(all_idx == 0, 0.0, params.lambda_buy * np.exp(
            -k * ((1.0 + m_all) * tables.zmd - (s - params.zeta) * tables.db)))
        bound = float(np.max(lam_up + lam_dn))
        tau = 0.0
        while bound > 0.0:
            tau -= math.log(rng.random()) / bound
            if tau >= dt:
                break
            total = lam_up[i] + lam_dn[i]
            if rng.random() * bound >= total:
                continue
            z_before = tables.zmarg[i]
            if total > 0 and rng.random() * total < lam_up[i]:
                cash += p_all[i] * tables.zpd[i]
                i += 1
                nsell += 1
            else:
                cash += m_all[i] * tables.zmd[i]
                i -= 1
                nbuy += 1
            qv += (tables.zmarg[i] - z_before) ** 2
        s += sig_dt * rng.standard_normal()
    return PathResult(cash, nsell, nbuy, qv, i - grid.center_index)


def simulate_path(cfg: SimConfig, path_id: int, strat: Strategy,
                  params: MarketParams, grid: AssetGrid) -> PathResult:
    """One path, fully determined by (seed, path_id)."""
    if not 0 <= path_id < cfg.n_paths:
        raise ContractError(f"path_id {path_id} outside [0, {cfg.n_paths})")
    strat.check_grid(grid)
    tables = _GridTables(grid)
    if cfg.jump_scheme == "thinning":
        return _run_path_thinning(path_id, cfg, strat, params, grid, tables)
    cash, nsell, nbuy, qv, term = _run_block(np.array([path_id]), cfg, strat,
                                             params, grid, tables)
    return PathResult(float(cash[0]), int(nsell[0]), int(nbuy[0]),
                      float(qv[0]), int(term[0]))


def _stat(values: np.ndarray) -> MetricStat:
    n = values.size
    mean = math.fsum(values) / n
    if n == 1:
        return MetricStat(mean, 0.0)
    var = math.fsum((values - mean) ** 2) / (n - 1)
    return MetricStat(mean, math.sqrt(var / n))


def run_batch(cfg: SimConfig, strat: Strategy, params: MarketParams,
              grid: AssetGrid) -> AggregateStats:
    """All paths of the batch, aggregated in path-id order with exact sums."""
    strat.check_grid(grid)
    tables = _GridTables(grid)
    fees = np.empty(cfg.n_paths)
    nsell = np.empty(cfg.n_paths)
    nbuy = np.empty(cfg.n_paths)
    qv = np.empty(cfg.n_paths)
    term = np.empty(cfg.n_paths, dtype=np.int64)
    if cfg.jump_scheme == "thinning":
        for pid in range(cfg.n_paths):
            r = _run_path_thinning(pid, cfg, strat, params, grid, tables)
            fees[pid], nsell[pid], nbuy[pid] = r.fees_collected, r.n_sell, r.n_buy
            qv[pid], term[pid] = r.qv, r.terminal_index
    else:
        for start in range(0, cfg.n_paths, cfg.block_size):
            ids = np.arange(start, min(start + cfg.block_size, cfg.n_paths))
            c, ns, nb, q, tm = _run_block(ids, cfg, strat, params, grid, tables)
            fees[ids], nsell[ids], nbuy[ids], qv[ids], term[ids] = c, ns, nb, q, tm
    per_path = None
    if cfg.record_paths:
        per_path = np.column_stack([np.arange(cfg.n_paths), fees, nsell, nbuy,
                                    qv, term])
    return AggregateStats(fees=_stat(fees), sells=_stat(nsell), buys=_stat(nbuy),
                          qv=_stat(qv), n_paths=cfg.n_paths, per_path=per_path)


def write_results_csv(rows: list[dict], path) -> None:
    """Strategy comparison table; one row per (strategy, parameter set)."""
    cols = ["strategy", "k", "lambda", "fees_mean", "fees_se", "sell_mean",
            "buy_mean", "qv_mean", "n_paths", "n_steps", "seed"]
    with open(path, "w", newline="") as fh:
        wr = csv.DictWriter(fh, fieldnames=cols)
        wr.writeheader()
        for row in rows:
            wr.writerow(row)


def write_paths_csv(stats: AggregateStats, path) -> None:
    if stats.per_path is None:
        raise ContractError("batch was run without record_paths")
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["path_id", "fees", "n_sell", "n_buy", "qv", "terminal_index"])
        for row in stats.per_path:
            wr.writerow([int(row[0]), repr(float(row[1])), int(row[2]),
                         int(row[3]), repr(float(row[4])), int(row[5])])
