import math
import os
import tempfile
import unittest

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from src.radial_burgers.errors import GridMismatchError, PreconditionError
from src.radial_burgers.radial_core import (
    Params,
    Profile,
    RadialGrid,
    cumulative_integral,
    derivative,
    l2_weighted_algebraic,
    l2_weighted_exp,
    norms,
    require_same_grid,
    trapezoid_integral,
)


class TestParams(unittest.TestCase):
    """测试参数类型"""

    def test_shifted_boundary_value(self):
        """测试平移边界值 V- = v- - μ(n-1)/r0"""
        params = Params(mu=1.0, r0=1.0, n=2, v_plus=-2.0, v_minus=1.5)
        self.assertAlmostEqual(params.V_minus, 0.5)
        params3 = Params(mu=2.0, r0=1.0, n=3, v_plus=-1.0, v_minus=1.0)
        self.assertAlmostEqual(params3.V_minus, -3.0)

    def test_from_shifted_inverts_shift(self):
        """测试由V-构造参数"""
        params = Params.from_shifted(1.5, 2.0, 2, -1.0, 0.25)
        self.assertAlmostEqual(params.v_minus, 0.25 + 1.5 / 2.0)
        self.assertAlmostEqual(params.V_minus, 0.25)
        self.assertAlmostEqual(params.with_V_minus(-0.75).V_minus, -0.75)

    def test_invalid_params(self):
        """测试非法参数"""
        with self.assertRaises(PreconditionError):
            Params(mu=0.0, r0=1.0, n=2, v_plus=-1.0, v_minus=0.0)
        with self.assertRaises(PreconditionError):
            Params(mu=1.0, r0=-1.0, n=2, v_plus=-1.0, v_minus=0.0)
        with self.assertRaises(PreconditionError):
            Params(mu=1.0, r0=1.0, n=1, v_plus=-1.0, v_minus=0.0)
        with self.assertRaises(PreconditionError):
            Params(mu=1.0, r0=1.0, n=2, v_plus=float('nan'), v_minus=0.0)

    def test_dict_round_trip(self):
        """测试参数序列化"""
        params = Params(mu=1.0, r0=1.0, n=3, v_plus=-1.0, v_minus=2.0)
        data = params.to_dict()
        self.assertEqual(data['V_minus'], params.V_minus)
        self.assertEqual(Params.from_dict(data), params)


class TestRadialGrid(unittest.TestCase):
    """测试径向网格"""

    def test_uniform(self):
        """测试等距网格"""
        grid = RadialGrid.uniform(1.0, 3.0, 21)
        self.assertEqual(grid.size, 21)
        self.assertEqual(grid.r0, 1.0)
        self.assertEqual(grid.r_max, 3.0)
        self.assertAlmostEqual(grid.spacing, 0.1)

    def test_rejects_bad_points(self):
        """测试非递增或过短的节点"""
        with self.assertRaises(PreconditionError):
            RadialGrid(np.array([1.0, 2.0, 2.0]))
        with self.assertRaises(PreconditionError):
            RadialGrid(np.array([1.0, 2.0]))
        with self.assertRaises(PreconditionError):
            RadialGrid.uniform(2.0, 1.0, 11)

    def test_non_uniform_requires_graded(self):
        """测试非等距网格必须标记"""
        points = np.array([1.0, 1.1, 1.5, 3.0])
        with self.assertRaises(PreconditionError):
            RadialGrid(points)
        self.assertTrue(RadialGrid(points, graded=True).graded)

    def test_refined(self):
        """测试网格加密"""
        grid = RadialGrid.uniform(1.0, 2.0, 11)
        fine = grid.refined()
        self.assertEqual(fine.size, 21)
        np.testing.assert_allclose(fine.points[::2], grid.points)
        graded = RadialGrid(np.array([1.0, 1.5, 3.0]), graded=True).refined()
        np.testing.assert_allclose(graded.points, [1.0, 1.25, 1.5, 2.25, 3.0])


class TestProfile(unittest.TestCase):
    """测试剖面与积分算子"""

    def setUp(self):
        self.grid = RadialGrid.uniform(1.0, 5.0, 41)

    def test_shape_and_finiteness(self):
        """测试长度不一致或非有限值"""
        with self.assertRaises(PreconditionError):
            Profile(self.grid, np.zeros(5))
        values = np.zeros(self.grid.size)
        values[3] = np.inf
        with self.assertRaises(PreconditionError):
            Profile(self.grid, values)

    def test_trapezoid_exact_for_linear(self):
        """测试线性函数在非节点端点上的积分"""
        p = Profile.from_function(self.grid, lambda r: 2.0 * r + 1.0)
        self.assertAlmostEqual(trapezoid_integral(p, 1.3, 4.7), 23.8, places=10)
        self.assertEqual(trapezoid_integral(p, 2.0, 2.0), 0.0)

    def test_trapezoid_rejects_bad_interval(self):
        """测试超出网格或顺序错误的区间"""
        p = Profile.from_function(self.grid, np.sin)
        with self.assertRaises(PreconditionError):
            trapezoid_integral(p, 0.5, 2.0)
        with self.assertRaises(PreconditionError):
            trapezoid_integral(p, 3.0, 2.0)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(1.0, 5.0), st.floats(1.0, 5.0), st.floats(1.0, 5.0))
    def test_trapezoid_additivity(self, x, y, z):
        """测试积分对区间可加"""
        a, b, c = sorted((x, y, z))
        p = Profile.from_function(RadialGrid.uniform(1.0, 5.0, 41), lambda r: np.sin(3.0 * r) * r)
        total = trapezoid_integral(p, a, c)
        parts = trapezoid_integral(p, a, b) + trapezoid_integral(p, b, c)
        self.assertAlmostEqual(total, parts, places=10)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(-10.0, 10.0, allow_nan=False))
    def test_trapezoid_linearity(self, scale):
        """测试积分对被积函数线性"""
        p = Profile.from_function(RadialGrid.uniform(1.0, 5.0, 41), np.cos)
        q = p.with_values(scale * p.values)
        self.assertAlmostEqual(trapezoid_integral(q, 1.0, 5.0),
                               scale * trapezoid_integral(p, 1.0, 5.0), places=10)

    def test_cumulative_integral(self):
        """测试累积积分首值为0、末值为全区间积分"""
        p = Profile.from_function(self.grid, lambda r: 1.0 / r)
        running = cumulative_integral(p)
        self.assertEqual(running.values[0], 0.0)
        self.assertAlmostEqual(running.values[-1], trapezoid_integral(p, 1.0, 5.0), places=12)
        self.assertAlmostEqual(running.values[-1], math.log(5.0), places=2)

    def test_derivative_exact_for_quadratic(self):
        """测试二阶差分对二次函数精确"""
        p = Profile.from_function(self.grid, lambda r: r * r)
        np.testing.assert_allclose(derivative(p).values, 2.0 * self.grid.points, atol=1e-10)

    def test_require_same_grid(self):
        """测试网格一致性检查"""
        p = Profile.from_function(self.grid, np.sin, 'p')
        q = Profile.from_function(RadialGrid.uniform(1.0, 5.0, 21), np.sin, 'q')
        require_same_grid(p, p.with_values(p.values * 2))
        with self.assertRaises(GridMismatchError):
            require_same_grid(p, q)

    def test_norms(self):
        """测试上确界、L2与加权L2范数"""
        grid = RadialGrid.uniform(1.0, 3.0, 11)
        p = Profile(grid, np.ones(grid.size))
        weight = Profile(grid, np.full(grid.size, 4.0))
        result = norms(p, weight)
        self.assertAlmostEqual(result['sup_norm'], 1.0)
        self.assertAlmostEqual(result['l2_norm'], math.sqrt(2.0))
        self.assertAlmostEqual(result['weighted_l2'], math.sqrt(8.0))
        self.assertIsNone(norms(p)['weighted_l2'])
        with self.assertRaises(PreconditionError):
            norms(p, weight.with_values(np.zeros(grid.size)))

    def test_weighted_norms(self):
        """测试代数权与指数权范数"""
        p = Profile.from_function(self.grid, lambda r: np.exp(-r))
        self.assertAlmostEqual(l2_weighted_algebraic(p, 0.0), norms(p)['l2_norm'], places=12)
        grid = RadialGrid.uniform(1.0, 3.0, 11)
        q = Profile.from_function(grid, lambda r: np.exp(-r))
        self.assertAlmostEqual(l2_weighted_exp(q, 2.0), math.sqrt(2.0), places=12)

    def test_csv_round_trip(self):
        """测试CSV写出后按原值读回"""
        p = Profile.from_function(self.grid, lambda r: np.sin(r) / 3.0, 'p')
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'p.csv')
            p.to_csv(path)
            with open(path, encoding='utf-8') as f:
                self.assertEqual(f.readline().strip(), 'r,value')
            loaded = Profile.from_csv(path)
        np.testing.assert_array_equal(loaded.values, p.values)
        self.assertTrue(loaded.grid.same_as(p.grid))


if __name__ == '__main__':
    unittest.main()
