"""Reward centerings, confidence widths, and interval/centering selection."""

import math

import numpy as np
import pytest

from causalbid.core import HobParams, make_bid_grid
from causalbid.ucb_engine import (
    THEORY,
    Calibration,
    compute_table,
    perturbed_optimizer,
    select_interval,
    ucb_constant,
)

PARAMS = HobParams(omega=0.2, lam=0.2)  # perturbation 0.05, margin 0.1


def _uniform_grid_inputs(T=10_000):
    grid = make_bid_grid(T)
    cdf = grid.points.copy()
    integral = grid.spacing * np.cumsum(cdf)
    return grid, cdf, integral


class TestUcbConstant:
    def test_examples(self):
        assert ucb_constant(HobParams(0.2, 0.2)) == pytest.approx(0.0025)
        assert ucb_constant(HobParams(0.64, 0.5)) == pytest.approx(0.64 * 0.5 / 64)
        assert ucb_constant(HobParams(1e-9 + 1e-12, 0.5)) == pytest.approx(0.0, abs=1e-10)

    def test_limit_value(self):
        # omega = 0.64 with lam -> 0 approaches 0.01
        assert ucb_constant(HobParams(0.64, 1e-12)) == pytest.approx(0.01, rel=1e-9)


class TestComputeTable:
    def test_zero_cdf_widths(self):
        grid = make_bid_grid(4)
        cdf = np.zeros(3)
        integral = np.zeros(3)
        width = np.zeros(3)
        table = compute_table(0.3, 0.7, cdf, integral, width,
                              np.arange(3), grid, PARAMS)
        scale = 8.0 / (1 - PARAMS.lam)
        np.testing.assert_allclose(table.w0, scale * (0 + 0 + 1.0))  # 2/sqrt(4) = 1
        np.testing.assert_allclose(table.w1, scale * (0.7 + 1.0))

    def test_reward_example(self):
        # saturated CDF at the bid 0.5 with value estimate 0.5: the value
        # term cancels and only the integral remains
        grid = make_bid_grid(4)
        cdf = np.array([0.0, 1.0, 1.0])
        integral = np.array([0.0, 0.3, 0.55])
        table = compute_table(0.5, 0.0, cdf, integral, np.zeros(3),
                              np.arange(3), grid, PARAMS)
        assert table.r0[1] == pytest.approx(0.3)   # 1 * (0.5 - 0.5) + 0.3
        assert table.r1[1] == pytest.approx(-0.2)

    def test_centering_identity(self):
        rng = np.random.default_rng(0)
        grid = make_bid_grid(100)
        cdf = np.sort(rng.random(grid.J))
        integral = grid.spacing * np.cumsum(cdf)
        tdx = 0.37
        table = compute_table(tdx, 0.5, cdf, integral, rng.random(grid.J),
                              np.arange(grid.J), grid, PARAMS)
        np.testing.assert_allclose(table.r1, table.r0 - tdx, rtol=1e-12)

    def test_width_sum_identity(self):
        rng = np.random.default_rng(1)
        grid = make_bid_grid(64)
        cdf = np.sort(rng.random(grid.J))
        u = rng.random(grid.J)
        gn = 0.9
        table = compute_table(0.1, gn, cdf, grid.spacing * np.cumsum(cdf), u,
                              np.arange(grid.J), grid, PARAMS)
        expected = (8 / (1 - PARAMS.lam)) * (gn + 8 * u + 4 / math.sqrt(64))
        np.testing.assert_allclose(table.w0 + table.w1, expected, rtol=1e-12)

    def test_calibration_scales(self):
        grid = make_bid_grid(100)
        cdf = grid.points.copy()
        u = np.full(grid.J, 0.1)
        cal = Calibration(reward_width=0.5, width_floor=0.0)
        t1 = compute_table(0.0, 1.0, cdf, np.zeros(grid.J), u,
                           np.arange(grid.J), grid, PARAMS, THEORY)
        t2 = compute_table(0.0, 1.0, cdf, np.zeros(grid.J), u,
                           np.arange(grid.J), grid, PARAMS, cal)
        floorless = t1.w0 - (8 / (1 - PARAMS.lam)) * 2 / math.sqrt(100)
        np.testing.assert_allclose(t2.w0, 0.5 * floorless, rtol=1e-12)


class TestPerturbedOptimizer:
    def test_truthful_on_uniform(self):
        grid, cdf, integral = _uniform_grid_inputs()
        j = perturbed_optimizer(cdf, integral, 0.55, 0.05, grid)
        # brute-force oracle over the grid
        obj = cdf * (0.60 - grid.points) + integral
        assert j == int(np.argmax(obj))
        assert grid.points[j] == pytest.approx(0.60, abs=grid.spacing)

    def test_degenerate_cdf_ties_break_to_target(self):
        grid = make_bid_grid(400)
        cdf = np.zeros(grid.J)
        integral = np.zeros(grid.J)
        j = perturbed_optimizer(cdf, integral, 0.3, 0.05, grid)
        assert grid.points[j] == pytest.approx(0.35)

    def test_saturates_at_one(self):
        grid, cdf, integral = _uniform_grid_inputs()
        j = perturbed_optimizer(cdf, integral, 0.9, 0.2, grid)
        obj = cdf * (1.1 - grid.points) + integral
        assert j == int(np.argmax(obj))
        assert grid.points[j] == pytest.approx(1.0)

    def test_negative_offset(self):
        grid, cdf, integral = _uniform_grid_inputs()
        j = perturbed_optimizer(cdf, integral, 0.5, -0.05, grid)
        assert grid.points[j] == pytest.approx(0.45, abs=grid.spacing)


class TestSelectInterval:
    def test_uniform_window(self):
        grid, cdf, integral = _uniform_grid_inputs()
        lo, hi, q = select_interval(cdf, integral, 0.5, PARAMS, grid)
        assert grid.points[lo] == pytest.approx(0.40)
        assert grid.points[hi] == pytest.approx(0.60)
        assert q == 1

    def test_no_competition_below_one(self):
        grid = make_bid_grid(10_000)
        cdf = np.zeros(grid.J)
        integral = np.zeros(grid.J)
        lo, hi, q = select_interval(cdf, integral, 0.5, PARAMS, grid)
        assert q == 0

    def test_low_value_clamps_at_zero(self):
        grid, cdf, integral = _uniform_grid_inputs()
        lo, hi, q = select_interval(cdf, integral, 0.02, PARAMS, grid)
        assert lo == 0
        assert q == 0

    def test_interval_never_empty(self):
        rng = np.random.default_rng(3)
        grid = make_bid_grid(900)
        for _ in range(50):
            cdf = np.minimum(1.0, np.sort(rng.random(grid.J)) * rng.uniform(0.5, 1.5))
            integral = grid.spacing * np.cumsum(cdf)
            lo, hi, _ = select_interval(cdf, integral, float(rng.uniform(-0.5, 1.2)),
                                        PARAMS, grid)
            assert 0 <= lo <= hi < grid.J


def test_objective_unimodal_peak_near_value():
    """The optimizer's objective rises up to the value and falls after it,
    so the chosen bid is one step from the (perturbed) value for any
    monotone CDF estimate."""
    rng = np.random.default_rng(5)
    grid = make_bid_grid(2500)
    for _ in range(30):
        cdf = np.clip(np.maximum.accumulate(rng.random(grid.J)), 0, 1)
        cdf /= max(1.0, cdf[-1])
        integral = grid.spacing * np.cumsum(cdf)
        v = float(rng.uniform(0.05, 0.95))
        j = perturbed_optimizer(cdf, integral, v, 0.0, grid)
        assert abs(grid.points[j] - v) <= grid.spacing + 1e-12
