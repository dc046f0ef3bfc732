import json
import os
import tempfile
import unittest

import numpy as np

from src.radial_burgers.radial_core import Params, RadialGrid
from src.radial_burgers.report_generator import ReportGenerator, get_report_generator, to_builtin
from src.radial_burgers.validation import CheckResult, ValidationReport
from src.radial_burgers.weight import build_chi, synthetic_wave


class TestToBuiltin(unittest.TestCase):
    """测试JSON类型转换"""

    def test_numpy_values(self):
        """测试numpy标量、数组与元组"""
        data = to_builtin({'a': np.float64(1.5), 'b': np.array([1, 2]), 'c': (np.bool_(True), np.int64(3))})
        self.assertEqual(data, {'a': 1.5, 'b': [1, 2], 'c': [True, 3]})
        self.assertIsInstance(data['a'], float)

    def test_non_finite(self):
        """测试非有限浮点数写成字符串"""
        self.assertEqual(to_builtin([float('inf'), np.nan]), ['inf', 'nan'])


class TestReportGenerator(unittest.TestCase):
    """测试报告生成器类"""

    def setUp(self):
        """设置测试环境"""
        self.tmp = tempfile.TemporaryDirectory()
        self.output_dir = os.path.join(self.tmp.name, 'out')
        self.report_generator = ReportGenerator(self.output_dir)

    def tearDown(self):
        self.tmp.cleanup()

    def test_creates_directory(self):
        """测试初始化时创建输出目录"""
        self.assertTrue(os.path.isdir(self.output_dir))
        self.assertIsInstance(get_report_generator(self.output_dir), ReportGenerator)

    def test_save_json_sorted(self):
        """测试JSON键排序、缩进与结尾换行"""
        path = self.report_generator.save_json({'b': 1, 'a': {'d': 2, 'c': 3}}, 'x.json')
        with open(path, encoding='utf-8') as f:
            text = f.read()
        self.assertEqual(text, '{\n  "a": {\n    "c": 3,\n    "d": 2\n  },\n  "b": 1\n}\n')

    def test_save_wave_and_weight(self):
        """测试定常波与权函数文件"""
        params = Params.from_shifted(1.0, 1.0, 2, -2.0, 0.0)
        wave = synthetic_wave(params, RadialGrid.uniform(1.0, 30.0, 301))
        paths = self.report_generator.save_wave(wave)
        self.assertTrue(os.path.exists(paths['wave']))
        with open(paths['classification'], encoding='utf-8') as f:
            self.assertEqual(json.load(f)['kind'], 'Subcritical')
        paths = self.report_generator.save_weight(build_chi(wave), {'residual_sup': 0.0})
        with open(paths['weight'], encoding='utf-8') as f:
            data = json.load(f)
        self.assertEqual(data['residual_sup'], 0.0)
        self.assertGreater(data['C_L'], 0.0)

    def test_validation_report(self):
        """测试验证报告的JSON与HTML"""
        report = ValidationReport(11, True, [
            CheckResult('ode_engine', True, {'order': 5.01}),
            CheckResult('weight_residual', False, {'residual_sup': float('inf')}),
        ])
        paths = self.report_generator.save_validation(report)
        with open(paths['json'], encoding='utf-8') as f:
            data = json.load(f)
        self.assertFalse(data['passed'])
        self.assertEqual(data['failed'], ['weight_residual'])
        self.assertEqual(data['checks'][1]['details']['residual_sup'], 'inf')
        with open(paths['html'], encoding='utf-8') as f:
            html = f.read()
        self.assertIn('ode_engine', html)
        self.assertIn('weight_residual', html)
        self.assertIn('11', html)

    def test_validation_report_is_deterministic(self):
        """测试相同报告渲染结果一致"""
        report = ValidationReport(0, False, [CheckResult('determinism', True, {'bytes': 10})])
        first = self.report_generator.generate_html_report(report)
        with open(first, encoding='utf-8') as f:
            expected = f.read()
        second = self.report_generator.generate_html_report(report)
        with open(second, encoding='utf-8') as f:
            self.assertEqual(f.read(), expected)


if __name__ == '__main__':
    unittest.main()
