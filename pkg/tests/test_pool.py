import csv
import math

import numpy as np
import pytest

from ammfees import (BoundaryError, DomainError, PoolSpec, build_price_grid,
                     build_uniform_grid, level_value, rates_at)
from ammfees.pool import write_grid_csv


def test_level_value_direct(pool):
    assert level_value(pool, 1000.0) == 1e5
    assert level_value(pool, 1e8) == 1.0
    assert level_value(PoolSpec(4.0, 2.0), 2.0) == 2.0


def test_level_value_domain(pool):
    with pytest.raises(DomainError):
        level_value(pool, 0.0)
    with pytest.raises(DomainError):
        level_value(pool, -3.0)


def test_pool_spec_invariants():
    with pytest.raises(DomainError):
        PoolSpec(depth_sq=-1.0, y0=1.0)
    with pytest.raises(DomainError):
        PoolSpec(depth_sq=100.0, y0=100.0)  # y0 must stay below depth_sq
    with pytest.raises(DomainError):
        PoolSpec(depth_sq=100.0, y0=0.0)


class TestPriceGrid:
    def test_center_and_neighbours(self, pool, price_grid):
        assert price_grid.y_at(0) == 1000.0
        # independent evaluation: y^i = sqrt(p^2 / (Z(y0) - dz*i))
        assert price_grid.y_at(1) == pytest.approx(math.sqrt(1e8 / 99.9), rel=1e-13)
        assert price_grid.y_at(-20) == pytest.approx(math.sqrt(1e8 / 102.0), rel=1e-13)
        assert price_grid.y_at(20) == pytest.approx(math.sqrt(1e8 / 98.0), rel=1e-13)
        assert price_grid.y_at(1) == pytest.approx(1000.5004, abs=5e-5)
        assert price_grid.y_at(-20) == pytest.approx(990.148, abs=5e-4)
        assert price_grid.y_at(20) == pytest.approx(1010.153, abs=5e-4)

    def test_marginal_rate_steps_exactly(self, pool, price_grid):
        z = price_grid.marginal_rates()
        i = np.arange(-20, 21)
        assert np.max(np.abs(z - (100.0 - 0.1 * i))) <= 1e-9

    def test_crossing_zero_rate_rejected(self, pool):
        with pytest.raises(DomainError):
            build_price_grid(pool, dz=0.1, n=1000)

    def test_monotone_and_inside_pool(self, pool, price_grid):
        assert np.all(np.diff(price_grid.points) > 0)
        assert price_grid.points[0] > 0 and price_grid.points[-1] < pool.depth_sq


class TestUniformGrid:
    def test_spans(self, pool):
        wide = build_uniform_grid(pool, delta=0.5, n=40)
        assert wide.size == 81
        assert wide.points[0] == 980.0 and wide.points[-1] == 1020.0
        narrow = build_uniform_grid(pool, delta=0.5, n=20)
        assert narrow.points[0] == 990.0 and narrow.points[-1] == 1010.0

    def test_degenerate_single_point(self, pool):
        g = build_uniform_grid(pool, delta=1.0, n=0)
        assert g.size == 1 and g.points[0] == 1000.0

    def test_constant_trade_sizes(self, pool, uniform_grid):
        assert np.allclose(uniform_grid.delta_sell[:-1], 0.5)
        assert np.allclose(uniform_grid.delta_buy[1:], 0.5)
        assert math.isnan(uniform_grid.delta_sell[-1])
        assert math.isnan(uniform_grid.delta_buy[0])

    def test_nonpositive_endpoint_rejected(self, pool):
        with pytest.raises(DomainError):
            build_uniform_grid(pool, delta=1.0, n=1000)


class TestRates:
    def test_center_values(self, pool, price_grid):
        r = rates_at(pool, price_grid, 0)
        assert r.z_marginal == pytest.approx(100.0, rel=1e-12)
        # independent difference quotients of the level function
        y1 = math.sqrt(1e8 / 99.9)
        ym1 = math.sqrt(1e8 / 100.1)
        sell_quot = (1e8 / 1000.0 - 1e8 / y1) / (y1 - 1000.0)
        buy_quot = (1e8 / ym1 - 1e8 / 1000.0) / (1000.0 - ym1)
        assert r.z_sell == pytest.approx(sell_quot, rel=1e-12)
        assert r.z_buy == pytest.approx(buy_quot, rel=1e-12)
        assert r.z_sell == pytest.approx(99.95, abs=1e-4)
        assert r.z_buy == pytest.approx(100.05, abs=1e-4)

    def test_quotient_equals_closed_form_everywhere(self, pool, price_grid):
        lv = price_grid.level_values
        pts = price_grid.points
        for i in range(-20, 21):
            r = rates_at(pool, price_grid, i)
            j = i + 20
            if r.has_sell:
                quot = (lv[j] - lv[j + 1]) / (pts[j + 1] - pts[j])
                assert abs(r.z_sell - quot) <= 1e-12 * quot
            if r.has_buy:
                quot = (lv[j - 1] - lv[j]) / (pts[j] - pts[j - 1])
                assert abs(r.z_buy - quot) <= 1e-12 * quot

    def test_buy_equals_sell_one_below(self, pool, price_grid, uniform_grid):
        for grid in (price_grid, uniform_grid):
            for i in range(-19, 21):
                assert rates_at(pool, grid, i).z_buy == \
                    rates_at(pool, grid, i - 1).z_sell

    def test_sell_below_marginal_below_buy(self, pool, price_grid, uniform_grid):
        for grid in (price_grid, uniform_grid):
            for i in range(-19, 20):
                r = rates_at(pool, grid, i)
                assert r.z_sell < r.z_marginal < r.z_buy

    def test_boundary_sides(self, pool, price_grid):
        top = rates_at(pool, price_grid, 20)
        assert not top.has_sell and top.has_buy
        with pytest.raises(BoundaryError):
            top.sell_leg()
        bottom = rates_at(pool, price_grid, -20)
        assert not bottom.has_buy and bottom.has_sell
        with pytest.raises(BoundaryError):
            bottom.buy_leg()
        with pytest.raises(BoundaryError):
            rates_at(pool, price_grid, 21)

    def test_levels_recompute_from_points(self, pool, price_grid):
        assert np.array_equal(price_grid.level_values,
                              level_value(pool, price_grid.points))


def test_grid_csv_dump(pool, price_grid, tmp_path):
    path = tmp_path / "grid.csv"
    write_grid_csv(pool, price_grid, path)
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["i", "y", "phi_y", "z_marginal", "z_sell", "z_buy",
                       "delta_sell", "delta_buy"]
    assert len(rows) == 1 + price_grid.size
    header = {name: pos for pos, name in enumerate(rows[0])}
    assert rows[1][header["z_buy"]] == ""      # bottom row has no buy side
    assert rows[-1][header["z_sell"]] == ""    # top row has no sell side
    assert float(rows[1 + 20][header["z_marginal"]]) == pytest.approx(100.0)
