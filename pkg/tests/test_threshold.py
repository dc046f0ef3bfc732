import math
import unittest

import numpy as np

from src.radial_burgers.errors import PreconditionError
from src.radial_burgers.radial_core import Params
from src.radial_burgers.threshold import (
    Bracket,
    ComparisonInstance,
    a_of_r1,
    a_star_by_bisection,
    a_star_by_limit,
    aitken,
    anchor_value,
    bracket,
    comparison_check,
    compute_threshold,
    eta_lower_left,
    eta_sandwich_report,
    eta_upper_envelope,
    limit_profile,
    r1_floor,
    random_instances,
    run_comparison_campaign,
    solve_eta,
)


class TestBracket(unittest.TestCase):
    """测试 a* 的存在区间"""

    def test_strong_far_field(self):
        """测试 v+ <= -μ/r0 时的开区间"""
        b = bracket(Params.from_shifted(1.0, 1.0, 2, -2.0, 0.0))
        self.assertAlmostEqual(b.lo, math.sqrt(3.0))
        self.assertEqual(b.hi, 2.0)
        self.assertFalse(b.lo_closed)
        self.assertFalse(b.contains(b.lo))
        self.assertFalse(b.contains(2.0))
        self.assertTrue(b.contains(1.9))

    def test_weak_far_field(self):
        """测试 -μ/r0 < v+ < 0 时的半开区间"""
        b = bracket(Params.from_shifted(1.0, 1.0, 2, -0.5, 0.0))
        self.assertEqual(b.to_list(), [-1.0, 0.5])
        self.assertTrue(b.lo_closed)
        self.assertTrue(b.contains(-1.0))

    def test_preconditions(self):
        """测试 v+ >= 0 或 n != 2"""
        with self.assertRaises(PreconditionError):
            bracket(Params.from_shifted(1.0, 1.0, 2, 0.0, 0.0))
        with self.assertRaises(PreconditionError):
            bracket(Params.from_shifted(1.0, 1.0, 3, -1.0, 0.0))

    def test_bracket_type(self):
        """测试区间判定"""
        b = Bracket(0.0, 1.0, lo_closed=True)
        self.assertTrue(b.contains(0.0))
        self.assertFalse(b.contains(1.0))


class TestAuxiliaryProblem(unittest.TestCase):
    """测试辅助问题 η(r;r1) 与 a(r1)"""

    def setUp(self):
        self.params = Params.from_shifted(1.0, 1.0, 2, -2.0, 0.0)

    def test_floor_and_anchor(self):
        """测试锚点下限与锚点值"""
        self.assertEqual(r1_floor(self.params), 1.0)
        self.assertEqual(r1_floor(Params.from_shifted(1.0, 1.0, 2, -0.5, 0.0)), 2.0)
        self.assertAlmostEqual(anchor_value(1.0, self.params), math.sqrt(3.0))

    def test_a_at_floor_is_anchor(self):
        """测试 r1 = r0 时 a(r1) 即锚点值"""
        self.assertAlmostEqual(a_of_r1(1.0, self.params), math.sqrt(3.0))
        with self.assertRaises(PreconditionError):
            a_of_r1(0.5, self.params)

    def test_a_increasing_inside_bracket(self):
        """测试 a(r1) 随 r1 递增且在存在区间内"""
        b = bracket(self.params)
        values = [a_of_r1(r1, self.params) for r1 in (2.0, 4.0, 8.0)]
        for value in values:
            self.assertTrue(b.contains(value))
        self.assertLessEqual(values[0], values[1] + 1e-9)
        self.assertLessEqual(values[1], values[2] + 1e-9)

    def test_solve_eta_anchor(self):
        """测试 η 经过锚点并与 a(r1) 一致"""
        eta = solve_eta(4.0, self.params, nodes=801)
        self.assertAlmostEqual(eta.anchor, anchor_value(4.0, self.params), places=9)
        self.assertAlmostEqual(eta.a_of_r1, a_of_r1(4.0, self.params), places=8)
        self.assertIn(4.0, eta.profile.r)

    def test_eta_peak_at_anchor(self):
        """测试 η 在锚点处取最大值 sqrt(v+² - μ²/r1²)"""
        params = Params.from_shifted(1.0, 1.0, 2, -1.0, 0.0)
        eta = solve_eta(2.0, params, nodes=801)
        self.assertAlmostEqual(eta.max_value, math.sqrt(3.0) / 2.0, places=9)
        report = eta_sandwich_report(eta, params)
        self.assertEqual(report['peak_radius'], 2.0)
        self.assertGreaterEqual(eta.a_of_r1, -1.0)

    def test_sandwich_report(self):
        """测试单峰性、包络夹逼与一致界"""
        for r1 in (2.0, 4.0):
            report = eta_sandwich_report(solve_eta(r1, self.params, nodes=801), self.params)
            self.assertEqual(report['unimodal_violations'], 0)
            self.assertEqual(report['sandwich_violations'], 0)
            self.assertEqual(report['box_violations'], 0)
            self.assertTrue(report['passed'])

    def test_envelopes_at_anchor(self):
        """测试两个包络在锚点处取锚点值"""
        anchor = anchor_value(3.0, self.params)
        self.assertAlmostEqual(eta_upper_envelope(3.0, 3.0, self.params), anchor)
        self.assertAlmostEqual(eta_lower_left(3.0, 3.0, self.params), anchor)
        with self.assertRaises(PreconditionError):
            eta_upper_envelope(2.0, 3.0, self.params)
        with self.assertRaises(PreconditionError):
            eta_lower_left(4.0, 3.0, self.params)


class TestAitken(unittest.TestCase):
    """测试 Aitken 外推"""

    def test_geometric_sequence(self):
        """测试几何收敛序列精确外推"""
        self.assertAlmostEqual(aitken(0.5, 0.75, 0.875), 1.0, places=12)

    def test_degenerate(self):
        """测试分母退化时返回末项"""
        self.assertEqual(aitken(1.0, 1.0, 1.0), 1.0)
        self.assertEqual(aitken(0.0, 1.0, 2.0), 2.0)


class TestThresholdEstimates(unittest.TestCase):
    """测试 a* 的两种估计"""

    def test_limit_estimate_in_bracket(self):
        """测试极限估计落在存在区间内"""
        for v_plus in (-2.0, -0.5):
            params = Params.from_shifted(1.0, 1.0, 2, v_plus, 0.0)
            estimate = a_star_by_limit(params, tol_a=1e-8, max_workers=2)
            self.assertTrue(estimate.converged)
            self.assertTrue(estimate.monotone)
            self.assertTrue(bracket(params).contains(estimate.value))
            self.assertEqual(estimate.iterations, len(estimate.values))

    def test_cross_method_agreement(self):
        """测试极限估计与二分估计一致"""
        params = Params.from_shifted(1.0, 1.0, 2, -2.0, 0.0)
        result = compute_threshold(params, tol_a=1e-9, tol=1e-8, max_workers=2)
        self.assertTrue(result.converged)
        self.assertTrue(result.bracket_holds())
        self.assertLessEqual(result.discrepancy, 1e-6 * abs(params.v_plus))
        data = result.to_dict()
        self.assertIn('discrepancy', data)
        self.assertEqual(data['bracket'], [math.sqrt(3.0), 2.0])

    def test_bisection_interval(self):
        """测试二分区间包含估计值"""
        params = Params.from_shifted(1.0, 1.0, 2, -2.0, 0.0)
        estimate = a_star_by_bisection(params, tol=1e-4)
        lo, hi = estimate.interval
        self.assertLessEqual(hi - lo, 1e-4)
        self.assertTrue(lo <= estimate.value <= hi)

    def test_separatrix_consistency(self):
        """测试 a* 两侧的分类"""
        params = Params.from_shifted(1.0, 1.0, 2, -2.0, 0.0)
        a_star = a_star_by_limit(params, tol_a=1e-9, max_workers=2).value
        report = limit_profile(params, a_star, offset=1e-6)
        self.assertTrue(report['below_subcritical'])
        self.assertTrue(report['above_supercritical'])
        self.assertTrue(report['consistent'])
        self.assertLess(report['closest_approach'], 0.5)


class TestComparisonPrinciple(unittest.TestCase):
    """测试比较原理"""

    def test_single_instance(self):
        """测试一组手选数据"""
        instance = ComparisonInstance(mu=1.0, r0=1.0, v_plus=-1.0, r1=2.0, r2=3.0, y1=-1.0, y2=-0.5)
        report = comparison_check([instance], max_workers=1)
        self.assertTrue(report.passed)
        self.assertEqual(report.to_dict()['n_violations'], 0)

    def test_random_instances_deterministic(self):
        """测试相同种子得到相同数据"""
        first = random_instances(5, seed=3, max_workers=2)
        second = random_instances(5, seed=3, max_workers=2)
        self.assertEqual([i.to_dict() for i in first], [i.to_dict() for i in second])
        for instance in first:
            self.assertLessEqual(instance.r0, instance.r1)
            self.assertLessEqual(instance.r1, instance.r2)
            self.assertLess(instance.y1, instance.y2 + 1e-15)

    def test_campaign(self):
        """测试缩小规模的随机检验"""
        report = run_comparison_campaign(count=10, seed=0, max_workers=2)
        self.assertEqual(report.n_instances, 10)
        self.assertTrue(report.passed)
        self.assertTrue(np.isfinite(report.max_violation))


if __name__ == '__main__':
    unittest.main()
