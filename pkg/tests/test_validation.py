import unittest
from unittest.mock import patch

from src.radial_burgers.errors import IntegrationError
from src.radial_burgers.validation import CheckResult, InvariantSuite, ValidationReport, run_validation


def check_passing():
    return CheckResult('passing', True, {'value': 1.0})


def check_failing():
    return CheckResult('failing', False)


def check_broken():
    raise IntegrationError("步长下溢")


class TestValidationReport(unittest.TestCase):
    """测试检查报告"""

    def test_passed_and_failed(self):
        """测试汇总通过与失败项"""
        report = ValidationReport(seed=0, quick=True, checks=[check_passing(), check_failing()])
        self.assertFalse(report.passed)
        self.assertEqual(report.failed, ['failing'])
        data = report.to_dict()
        self.assertEqual(data['n_checks'], 2)
        self.assertEqual(data['checks'][0]['details'], {'value': 1.0})

    def test_empty_report_passes(self):
        """测试空报告"""
        self.assertTrue(ValidationReport(seed=1, quick=False).passed)


class TestInvariantSuite(unittest.TestCase):
    """测试检查套件"""

    def test_run_records_errors(self):
        """测试检查抛出领域异常时记为失败"""
        suite = InvariantSuite(seed=3, quick=True)
        with patch.object(InvariantSuite, 'checks', return_value=[check_passing, check_broken]):
            report = suite.run()
        self.assertEqual(report.seed, 3)
        self.assertEqual([c.name for c in report.checks], ['passing', 'broken'])
        self.assertFalse(report.checks[1].passed)
        self.assertIn('步长下溢', report.checks[1].details['error'])

    def test_run_validation_uses_suite(self):
        """测试入口函数"""
        with patch.object(InvariantSuite, 'checks', return_value=[check_passing]):
            report = run_validation(seed=5, quick=True)
        self.assertTrue(report.passed)
        self.assertTrue(report.quick)

    def test_check_list(self):
        """测试套件覆盖全部检查"""
        names = [check.__name__ for check in InvariantSuite().checks()]
        self.assertEqual(len(names), 13)
        self.assertIn('check_weight_residual', names)
        self.assertIn('check_determinism', names)

    def test_ode_engine_check(self):
        """测试积分器检查：收紧容差时的收敛阶"""
        result = InvariantSuite(quick=True).check_ode_engine()
        self.assertTrue(result.passed, result.details)
        self.assertGreaterEqual(result.details['order'], 4.5)
        self.assertEqual(len(result.details['steps']), 3)
        self.assertLess(result.details['steps'][0], result.details['steps'][-1])

    def test_closed_form_check(self):
        """测试 n=3 闭式解检查"""
        result = InvariantSuite(quick=True).check_closed_form_n3()
        self.assertTrue(result.passed, result.details)
        self.assertLessEqual(result.details['sup_error'], 1e-7)

    def test_closed_form_n2_check(self):
        """测试 n=2、v+=0 闭式解检查的相对误差不超过 1e-7"""
        result = InvariantSuite(quick=True).check_closed_form_n2()
        self.assertTrue(result.passed, result.details)
        self.assertLessEqual(result.details['sup_error'], 1e-7)

    def test_threshold_agreement_check(self):
        """测试 a* 两种估计一致且ψ残差在十倍积分容差以内"""
        result = InvariantSuite(quick=True).check_threshold_agreement()
        self.assertTrue(result.passed, result.details)
        for row in result.details['rows']:
            self.assertLessEqual(row['residual'], row['residual_limit'])
            self.assertLessEqual(row['residual_limit'], 1e-8)

    def test_weight_residual_check(self):
        """测试 4001 节点上 χ 残差不超过 1e-4，节点加倍后缩小至少 3.5 倍"""
        result = InvariantSuite(quick=False).check_weight_residual()
        self.assertTrue(result.passed, result.details)
        self.assertEqual(result.details['nodes'], 4001)
        self.assertLessEqual(result.details['residual_sup'], 1e-4)
        self.assertGreaterEqual(result.details['ratio'], 3.5)
        self.assertGreater(result.details['C_L'], 0.0)

    def test_energy_and_stability_check(self):
        """测试紧支扰动的能量不等式、稳定性与截断无关性"""
        result = InvariantSuite(quick=True).check_energy_and_stability()
        self.assertTrue(result.passed, result.details)
        details = result.details
        self.assertTrue(details['stable'])
        self.assertLessEqual(details['truncation_difference'], 1e-4)
        self.assertTrue(details['energy_32']['ok'])

    def test_exponential_rate_check(self):
        """测试指数局部化扰动的衰减率达到上限的一半"""
        result = InvariantSuite(quick=True).check_exponential_rate()
        self.assertTrue(result.passed, result.details)
        fit = result.details['fit']
        self.assertGreaterEqual(fit['rate'], result.details['target_rate'])
        self.assertGreaterEqual(fit['quality'], 0.95)
        self.assertGreaterEqual(fit['samples'], 3)
        self.assertGreater(result.details['caps']['gamma_max'], 0.1)

    def test_determinism_check(self):
        """测试从写出的 config.json 重新运行输出逐字节一致"""
        result = InvariantSuite(quick=True).check_determinism()
        self.assertTrue(result.passed, result.details)
        self.assertGreater(result.details['bytes'], 0)
        self.assertEqual(result.details['files'], ['classification', 'wave'])
        self.assertTrue(result.details['config_identical'])
        self.assertEqual(result.details['mismatched'], [])


if __name__ == '__main__':
    unittest.main()
