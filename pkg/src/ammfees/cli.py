"""Command-line entry point: solvers, strategy comparison, figure data export.

Subcommands
-----------
solve-fa   closed-form surface and fees for the constant-oracle problem
solve-sa   coefficient ODEs and fees for the quadratic-expansion problem
limits     small-decay limits of both solvers across a list of k values
simulate   Monte Carlo table comparing the configured strategies
figures    one CSV per supported figure id (consumed by the figure renderer)

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from . import exact, quadratic, sim
from .config import RunConfig, apply_overrides, load_config
from .errors import ConfigError, ContractError, DomainError, NumericalError
from .market import MarketParams
from .pool import AssetGrid, PoolSpec, build_uniform_grid, write_grid_csv

__all__ = ["main", "run_command"]


def _write_rows(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(header)
        for row in rows:
            wr.writerow(["" if v is None else (repr(float(v)) if isinstance(v, float)
                                               else v) for v in row])


def _cellf(x: float):
    return None if np.isnan(x) else float(x)


def _solve_schedule(cfg: RunConfig, params: MarketParams, grid: AssetGrid):
    times = np.linspace(0.0, params.horizon, cfg["solver"]["time_points"])
    gen = exact.build_generator(params, grid, params.s0)
    surface = exact.solve_value(gen, params, times)
    return surface, exact.optimal_fees(surface, grid)


def _sa_pieces(cfg: RunConfig, spec: PoolSpec, params: MarketParams):
    delta = cfg["grid"]["delta"]
    lin = quadratic.linearize_rates(spec, spec.y0, delta, delta)
    psi = quadratic.derive_psi(params, lin)
    coeffs = quadratic.integrate_coeffs(psi, params, cfg["solver"]["ode_steps"])
    return lin, psi, coeffs


def _build_strategy(name: str, cfg: RunConfig, spec: PoolSpec,
                    params: MarketParams, grid: AssetGrid) -> sim.Strategy:
    if name == "optimal_sa":
        lin, _, coeffs = _sa_pieces(cfg, spec, params)
        return sim.QuadraticFees(coeffs, lin, params)
    _, schedule = _solve_schedule(cfg, params, grid)
    if name == "optimal_fa":
        return sim.ScheduleFees(schedule)
    if name == "linear_fa":
        return sim.LinearFees(exact.linearize_fees(schedule, grid))
    if name == "constant":
        level = sim.constant_fee_level(schedule, grid,
                                       t=cfg["sim"]["constant_fee_time"])
        return sim.ConstantFees(level)
    raise ConfigError(f"unknown strategy {name!r}")


# ---------------------------------------------------------------- commands


def cmd_solve_fa(cfg: RunConfig, out: Path) -> None:
    spec = cfg.pool_spec()
    grid = cfg.grid(spec)
    params = cfg.market_params()
    surface, schedule = _solve_schedule(cfg, params, grid)
    write_grid_csv(spec, grid, out / "grid.csv")
    exact.write_fee_csv(schedule, grid, out / "fees_fa.csv")
    exact.write_value_csv(surface, grid, out / "value_fa.csv")


def cmd_solve_sa(cfg: RunConfig, out: Path) -> None:
    spec = cfg.pool_spec()
    params = cfg.market_params()
    lin, _, coeffs = _sa_pieces(cfg, spec, params)
    quadratic.write_coeff_csv(coeffs, out / "coeffs_sa.csv")
    grid = build_uniform_grid(spec, cfg["grid"]["delta"], cfg["grid"]["n"])
    times = np.linspace(0.0, params.horizon, 101)
    quadratic.write_quadratic_fee_csv(coeffs, lin, params, times, grid.points,
                                      params.s0, out / "fees_sa.csv")


def cmd_limits(cfg: RunConfig, out: Path) -> None:
    spec = cfg.pool_spec()
    grid = cfg.grid(spec)
    t = cfg["limits"]["t"]
    rows = []
    lim = exact.limit_fees_k0(grid, cfg.market_params(), t)
    for kk in cfg["limits"]["fa_ks"]:
        params = cfg.market_params(k=float(kk))
        _, schedule = _solve_schedule(cfg, params, grid)
        r = schedule.time_index(t)
        for j in range(grid.size):
            rows.append(["fa", float(kk), float(grid.points[j]),
                         _cellf(kk * schedule.fee_sell[r, j]),
                         _cellf(kk * schedule.fee_buy[r, j]),
                         _cellf(lim.fee_sell[0, j]), _cellf(lim.fee_buy[0, j])])
    delta = cfg["grid"]["delta"]
    ugrid = build_uniform_grid(spec, delta, cfg["grid"]["n"])
    lin = quadratic.linearize_rates(spec, spec.y0, delta, delta)
    lim_sa = quadratic.limit_fees_k0_quadratic(lin, ugrid.points)
    for kk in cfg["limits"]["sa_ks"]:
        params = cfg.market_params(k=float(kk))
        psi = quadratic.derive_psi(params, lin)
        coeffs = quadratic.integrate_coeffs(psi, params, cfg["solver"]["ode_steps"])
        fees = quadratic.fees_quadratic(coeffs, lin, params, t, ugrid.points, params.s0)
        for j in range(ugrid.size):
            rows.append(["sa", float(kk), float(ugrid.points[j]),
                         float(kk * fees.fee_sell[j]), float(kk * fees.fee_buy[j]),
                         float(lim_sa.fee_sell[j]), float(lim_sa.fee_buy[j])])
    _write_rows(out / "limits.csv",
                ["kind", "k", "y", "k_scaled_fee_sell", "k_scaled_fee_buy",
                 "limit_fee_sell", "limit_fee_buy"], rows)


def cmd_simulate(cfg: RunConfig, out: Path) -> None:
    spec = cfg.pool_spec()
    grid = cfg.grid(spec)
    params = cfg.market_params()
    scfg = sim.SimConfig(n_paths=cfg["sim"]["n_paths"], n_steps=cfg["sim"]["n_steps"],
                         seed=cfg["sim"]["seed"], record_paths=cfg["sim"]["record_paths"],
                         block_size=cfg["sim"]["block_size"],
                         jump_scheme=cfg["sim"]["jump_scheme"],
                         fee_clamp=cfg.fee_clamp())
    rows = []
    for name in cfg.strategies():
        strat = _build_strategy(name, cfg, spec, params, grid)
        stats = sim.run_batch(scfg, strat, params, grid)
        rows.append({"strategy": name, "k": params.k, "lambda": params.lambda_sell,
                     "fees_mean": repr(stats.fees.mean), "fees_se": repr(stats.fees.stderr),
                     "sell_mean": repr(stats.sells.mean), "buy_mean": repr(stats.buys.mean),
                     "qv_mean": repr(stats.qv.mean), "n_paths": scfg.n_paths,
                     "n_steps": scfg.n_steps, "seed": scfg.seed})
        if scfg.record_paths:
            sim.write_paths_csv(stats, out / f"paths_{name}.csv")
    sim.write_results_csv(rows, out / "table.csv")


def _fee_rows_at(schedule: exact.FeeSchedule, grid: AssetGrid, t: float,
                 scale: float = 1.0):
    r = schedule.time_index(t)
    for j in range(grid.size):
        yield (float(grid.points[j]), _cellf(scale * schedule.fee_sell[r, j]),
               _cellf(scale * schedule.fee_buy[r, j]))


def cmd_figures(cfg: RunConfig, out: Path) -> None:
    spec = cfg.pool_spec()
    grid = cfg.grid(spec)
    base = cfg.market_params()
    t_mid = 0.5 * base.horizon

    # constant-oracle fee curves and their linearization
    _, schedule = _solve_schedule(cfg, base, grid)
    _write_rows(out / "fig_fees_fa_t05.csv", ["y", "fee_sell", "fee_buy"],
                _fee_rows_at(schedule, grid, t_mid))
    model = exact.linearize_fees(schedule, grid)
    r = schedule.time_index(t_mid)
    rows = []
    for j in range(grid.size):
        pair = model.at(t_mid, float(grid.points[j]))
        rows.append((float(grid.points[j]),
                     _cellf(schedule.fee_sell[r, j]), _cellf(schedule.fee_buy[r, j]),
                     float(pair.fee_sell), float(pair.fee_buy)))
    _write_rows(out / "fig_fees_fa_linear_t05.csv",
                ["y", "fee_sell", "fee_buy", "linear_fee_sell", "linear_fee_buy"], rows)

    rows = []
    for kk in (2.0, 1.0, 0.25, 0.1):
        _, sch = _solve_schedule(cfg, cfg.market_params(k=kk), grid)
        rows += [(kk, y, fs, fb) for y, fs, fb in _fee_rows_at(sch, grid, t_mid, scale=kk)]
    _write_rows(out / "fig_fees_fa_kscaled.csv",
                ["k", "y", "scaled_fee_sell", "scaled_fee_buy"], rows)

    lim = exact.limit_fees_k0(grid, base, t_mid)
    _write_rows(out / "fig_fees_fa_klimit.csv", ["y", "fee_sell", "fee_buy"],
                _fee_rows_at(lim, grid, t_mid))

    rows = []
    for kk in (2.0, 0.1):
        for phi in (0.0, 0.5, 1.0, 2.0, 5.0):
            _, sch = _solve_schedule(cfg, cfg.market_params(k=kk, phi=phi), grid)
            rows += [(kk, phi, y, fs, fb)
                     for y, fs, fb in _fee_rows_at(sch, grid, t_mid)]
    _write_rows(out / "fig_fees_fa_phi_sweep.csv",
                ["k", "phi", "y", "fee_sell", "fee_buy"], rows)

    rows = []
    for kk in (2.0, 0.1):
        _, sch = _solve_schedule(cfg, cfg.market_params(k=kk), grid)
        for t in np.linspace(0.0, base.horizon, 21):
            rt = sch.time_index(t)
            rows += [(kk, float(t), float(grid.points[j]),
                      _cellf(sch.fee_sell[rt, j]), _cellf(sch.fee_buy[rt, j]))
                     for j in range(grid.size)]
    _write_rows(out / "fig_fees_fa_time_sweep.csv",
                ["k", "t", "y", "fee_sell", "fee_buy"], rows)

    # quadratic-expansion curves on the wide uniform grid
    delta = cfg["grid"]["delta"]
    sa_grid = build_uniform_grid(spec, delta, 2 * cfg["grid"]["n"])
    lin = quadratic.linearize_rates(spec, spec.y0, delta, delta)

    def sa_fee_rows(params: MarketParams, s: float, scale: float = 1.0):
        psi = quadratic.derive_psi(params, lin)
        coeffs = quadratic.integrate_coeffs(psi, params, cfg["solver"]["ode_steps"])
        fees = quadratic.fees_quadratic(coeffs, lin, params, t_mid, sa_grid.points, s)
        return [(float(y), scale * float(fs), scale * float(fb))
                for y, fs, fb in zip(sa_grid.points, fees.fee_sell, fees.fee_buy)]

    _write_rows(out / "fig_fees_sa_t05.csv", ["y", "fee_sell", "fee_buy"],
                sa_fee_rows(base, base.s0))
    rows = [(0.25, y, fs, fb)
            for y, fs, fb in sa_fee_rows(cfg.market_params(k=0.25), base.s0, scale=0.25)]
    _write_rows(out / "fig_fees_sa_kscaled.csv",
                ["k", "y", "scaled_fee_sell", "scaled_fee_buy"], rows)
    lim_sa = quadratic.limit_fees_k0_quadratic(lin, sa_grid.points)
    _write_rows(out / "fig_fees_sa_klimit.csv", ["y", "fee_sell", "fee_buy"],
                [(float(y), float(fs), float(fb)) for y, fs, fb in
                 zip(sa_grid.points, lim_sa.fee_sell, lim_sa.fee_buy)])

    rows = []
    for phi in (0.0, 0.5, 1.0, 2.0, 5.0):
        rows += [(phi, y, fs, fb)
                 for y, fs, fb in sa_fee_rows(cfg.market_params(phi=phi), base.s0)]
    _write_rows(out / "fig_fees_sa_phi_sweep.csv",
                ["phi", "y", "fee_sell", "fee_buy"], rows)

    rows = []
    for ds in (-2.0, -1.0, 0.0, 1.0, 2.0):
        rows += [(base.s0 + ds, y, fs, fb)
                 for y, fs, fb in sa_fee_rows(base, base.s0 + ds)]
    _write_rows(out / "fig_fees_sa_s_sweep.csv",
                ["s", "y", "fee_sell", "fee_buy"], rows)

    # value surfaces on matching uniform grids with a frozen oracle
    vparams = cfg.market_params(sigma=0.0)
    vgrid = build_uniform_grid(spec, delta, cfg["grid"]["n"])
    vtimes = np.linspace(0.0, vparams.horizon, 51)
    surface = exact.solve_value(exact.build_generator(vparams, vgrid, vparams.s0),
                                vparams, vtimes)
    g_fa = surface.g
    psi = quadratic.derive_psi(vparams, lin)
    coeffs = quadratic.integrate_coeffs(psi, vparams, cfg["solver"]["ode_steps"])
    rows_fa, rows_sa, rows_diff = [], [], []
    for rt, t in enumerate(vtimes):
        g_sa = quadratic.eval_g(coeffs, float(t), vgrid.points, vparams.s0)
        for j in range(vgrid.size):
            y = float(vgrid.points[j])
            rows_fa.append((float(t), y, float(g_fa[rt, j])))
            rows_sa.append((float(t), y, float(g_sa[j])))
            rows_diff.append((float(t), y, float(g_sa[j] - g_fa[rt, j])))
    _write_rows(out / "fig_value_fa.csv", ["t", "y", "g"], rows_fa)
    _write_rows(out / "fig_value_sa.csv", ["t", "y", "g"], rows_sa)
    _write_rows(out / "fig_value_diff.csv", ["t", "y", "g_diff"], rows_diff)


_COMMANDS = {
    "solve-fa": cmd_solve_fa,
    "solve-sa": cmd_solve_sa,
    "limits": cmd_limits,
    "simulate": cmd_simulate,
    "figures": cmd_figures,
}


def run_command(argv: list[str]) -> int:
    parser = argparse.ArgumentParser(
        prog="ammfees",
        description="Optimal dynamic AMM fees: solvers, simulation, figure data.")
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--config", default=None, help="TOML config file")
    parser.add_argument("--out-dir", default=None, help="output directory override")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--paths", type=int, default=None)
    parser.add_argument("--steps", type=int, default=None)
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        apply_overrides(cfg, out_dir=args.out_dir, seed=args.seed,
                        paths=args.paths, steps=args.steps)
        out = cfg.out_dir()
        out.mkdir(parents=True, exist_ok=True)
        _COMMANDS[args.command](cfg, out)
    except (ConfigError, ContractError, DomainError) as exc:
        print(f"ammfees: config error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"ammfees: numerical failure: {exc}", file=sys.stderr)
        return 3
    return 0


def main() -> None:
    sys.exit(run_command(sys.argv[1:]))
