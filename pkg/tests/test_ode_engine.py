import math
import unittest

import numpy as np

from src.radial_burgers.errors import IntegrationError, PreconditionError
from src.radial_burgers.ode_engine import (
    COMPLETED,
    EVENT_TRIGGERED,
    DormandPrince54,
    EventSpec,
    OdeProblem,
    get_integrator,
    integrate,
    integrate_bidirectional,
    rk4_fixed,
)
from src.radial_burgers.radial_core import RadialGrid


class TestDormandPrince(unittest.TestCase):
    """测试自适应积分器"""

    def test_exponential_growth(self):
        """测试 y' = y 的正向积分"""
        outcome = integrate(OdeProblem(lambda r, y: y, 0.0, 1.0, 1.0))
        self.assertEqual(outcome.status, COMPLETED)
        self.assertEqual(outcome.r_last, 1.0)
        self.assertAlmostEqual(outcome.y_last, math.e, places=8)

    def test_backward_integration(self):
        """测试反向积分，轨迹按r升序给出"""
        outcome = integrate(OdeProblem(lambda r, y: -y, 2.0, 1.0, 0.0))
        self.assertTrue(outcome.completed)
        self.assertEqual(outcome.direction, -1.0)
        self.assertAlmostEqual(outcome.y_last, math.exp(2.0), places=7)
        trajectory = outcome.trajectory
        self.assertEqual(trajectory.grid.r0, 0.0)
        self.assertEqual(trajectory.grid.r_max, 2.0)

    def test_terminal_event_locates_blowup(self):
        """测试 y' = y² 的爆破事件定位"""
        event = EventSpec('blowup', lambda r, y: y - 1e6)
        outcome = integrate(OdeProblem(lambda r, y: y * y, 0.0, 1.0, 2.0), [event])
        self.assertEqual(outcome.status, EVENT_TRIGGERED)
        self.assertEqual(outcome.event.event_id, 'blowup')
        self.assertAlmostEqual(outcome.event.r_event, 1.0 - 1e-6, delta=1e-8)
        lo, hi = outcome.event.bracket
        self.assertLessEqual(lo, hi)

    def test_non_terminal_event(self):
        """测试非终止事件只记录不停止"""
        event = EventSpec('half', lambda r, y: y - 1.0, terminal=False)
        outcome = integrate(OdeProblem(lambda r, y: 1.0, 0.0, 0.0, 2.0), [event])
        self.assertTrue(outcome.completed)
        self.assertEqual(len(outcome.passed_events), 1)
        self.assertAlmostEqual(outcome.passed_events[0].r_event, 1.0, places=9)

    def test_invalid_tolerances(self):
        """测试非法容差"""
        with self.assertRaises(PreconditionError):
            DormandPrince54(rel_tol=0.0)
        with self.assertRaises(PreconditionError):
            get_integrator(abs_tol=0.1)

    def test_degenerate_interval(self):
        """测试空区间"""
        with self.assertRaises(PreconditionError):
            OdeProblem(lambda r, y: y, 1.0, 0.0, 1.0)

    def test_hermite_resample(self):
        """测试用存储导数的Hermite重采样"""
        outcome = integrate(OdeProblem(lambda r, y: math.cos(r), 0.0, 0.0, 3.0))
        grid = RadialGrid.uniform(0.0, 3.0, 301)
        profile = outcome.resample(grid, 'sin')
        np.testing.assert_allclose(profile.values, np.sin(grid.points), atol=1e-6)

    def test_resample_outside_trajectory(self):
        """测试重采样网格超出轨迹范围"""
        outcome = integrate(OdeProblem(lambda r, y: 1.0, 0.0, 0.0, 1.0))
        with self.assertRaises(PreconditionError):
            outcome.resample(RadialGrid.uniform(0.0, 2.0, 11))

    def test_stops_become_nodes(self):
        """测试停靠点落在接受步节点上且节点导数为右端项"""
        grid = RadialGrid.uniform(0.0, 3.0, 61)
        outcome = integrate(OdeProblem(lambda r, y: math.cos(r), 0.0, 0.0, 3.0), stops=grid.points)
        self.assertTrue(outcome.completed)
        self.assertTrue(np.all(np.isin(grid.points, outcome.r)))
        idx = np.searchsorted(outcome.r, grid.points)
        np.testing.assert_allclose(outcome.y[idx], np.sin(grid.points), atol=1e-9)
        np.testing.assert_allclose(outcome.dy[idx], np.cos(grid.points), atol=1e-14)

    def test_stops_backward(self):
        """测试反向积分时的停靠点"""
        stops = [0.5, 1.0, 1.5]
        outcome = integrate(OdeProblem(lambda r, y: -y, 2.0, 1.0, 0.0), stops=stops)
        for stop in stops:
            self.assertIn(stop, outcome.r)
        self.assertTrue(np.all(np.diff(outcome.r) < 0))

    def test_stops_outside_interval_ignored(self):
        """测试区间外的停靠点被忽略"""
        plain = integrate(OdeProblem(lambda r, y: y, 0.0, 1.0, 1.0))
        stopped = integrate(OdeProblem(lambda r, y: y, 0.0, 1.0, 1.0), stops=[-1.0, 0.0, 1.0, 5.0])
        np.testing.assert_array_equal(plain.r, stopped.r)

    def test_order_under_tolerance_tightening(self):
        """测试收紧容差时误差随步数按约五阶下降"""
        errors, steps = [], []
        for tol in (1e-5, 1e-7, 1e-9):
            outcome = get_integrator(tol, tol).integrate(OdeProblem(lambda r, y: y, 0.0, 1.0, 4.0))
            errors.append(abs(outcome.y_last - math.exp(4.0)))
            steps.append(outcome.n_steps)
        order = -np.polyfit(np.log(steps), np.log(errors), 1)[0]
        self.assertGreaterEqual(order, 4.5)
        self.assertTrue(errors[0] > errors[1] > errors[2])


class TestBidirectional(unittest.TestCase):
    """测试锚点双向积分"""

    def test_gaussian(self):
        """测试 y' = -2ry 从 r=1 向两侧积分"""
        profile = integrate_bidirectional(1.0, math.exp(-1.0), lambda r, y: -2.0 * r * y, 0.0, 2.0)
        self.assertTrue(np.all(np.diff(profile.r) > 0))
        self.assertEqual(np.count_nonzero(profile.r == 1.0), 1)
        self.assertAlmostEqual(profile.values[0], 1.0, places=8)
        self.assertAlmostEqual(profile.values[-1], math.exp(-4.0), places=8)

    def test_forward_failure_is_labelled(self):
        """测试正向爆破时的错误标签"""
        event = EventSpec('blowup', lambda r, y: y - 1e6)
        with self.assertRaises(IntegrationError) as ctx:
            integrate_bidirectional(0.5, 1.0, lambda r, y: y * y, 0.0, 3.0, [event])
        self.assertEqual(ctx.exception.direction, 'forward')
        self.assertTrue(str(ctx.exception).startswith('[forward]'))
        self.assertIsNotNone(ctx.exception.outcome)

    def test_anchor_outside_interval(self):
        """测试锚点不在区间内"""
        with self.assertRaises(PreconditionError):
            integrate_bidirectional(3.0, 0.0, lambda r, y: 0.0, 0.0, 2.0)


class TestRk4(unittest.TestCase):
    """测试定步长RK4参照解"""

    def test_matches_exponential(self):
        """测试 y' = y 的定步长解"""
        rs, ys = rk4_fixed(lambda r, y: y, 0.0, 1.0, 1.0, 0.01)
        self.assertAlmostEqual(rs[-1], 1.0, places=12)
        self.assertLess(abs(ys[-1] - math.e), 1e-8)

    def test_agrees_with_adaptive(self):
        """测试RK4与自适应积分器在非线性问题上一致"""
        rhs = lambda r, y: (y * y - 4.0 + 1.0 / (r * r)) / 2.0
        rs, ys = rk4_fixed(rhs, 4.0, math.sqrt(4.0 - 1.0 / 16.0), 1.0, 1e-3)
        outcome = integrate(OdeProblem(rhs, 4.0, math.sqrt(4.0 - 1.0 / 16.0), 1.0))
        self.assertLess(abs(ys[-1] - outcome.y_last), 1e-8)


if __name__ == '__main__':
    unittest.main()
