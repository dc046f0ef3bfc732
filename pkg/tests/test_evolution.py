import math
import os
import tempfile
import unittest

import numpy as np
import pandas as pd

from src.radial_burgers.errors import ClassificationError, CflViolationError, PreconditionError
from src.radial_burgers.evolution import (
    TRACE_COLUMNS,
    DtPolicy,
    EnergyTrace,
    PerturbationSpec,
    anti_derivative,
    check_smallness,
    decay_caps,
    evolve,
    fit_decay,
    get_evolver,
    make_initial_data,
    max_admissible_amplitude,
    minimum_r_max,
    step,
    support_radius,
    weighted_norms,
)
from src.radial_burgers.radial_core import Params
from src.radial_burgers.stationary import solve_psi
from src.radial_burgers.weight import build_chi


class TestPerturbationSpec(unittest.TestCase):
    """测试扰动描述"""

    def test_invalid_specs(self):
        """测试非法类型、宽度与缺失的beta"""
        with self.assertRaises(PreconditionError):
            PerturbationSpec('triangle')
        with self.assertRaises(PreconditionError):
            PerturbationSpec('gaussian', width=0.0)
        with self.assertRaises(PreconditionError):
            PerturbationSpec('exp_weighted')

    def test_vanishes_at_boundary(self):
        """测试 p(r0) = 0"""
        r = np.linspace(1.0, 30.0, 300)
        for spec in (PerturbationSpec('gaussian', 0.1, center=1.0, width=2.0),
                     PerturbationSpec('compact', 0.1, center=10.0, width=4.0),
                     PerturbationSpec('exp_weighted', 0.1, center=1.0, width=1.0, beta=0.5)):
            self.assertEqual(spec.values(r, 1.0)[0], 0.0)

    def test_compact_support(self):
        """测试紧支扰动的支集与越界"""
        r = np.linspace(1.0, 30.0, 291)
        p = PerturbationSpec('compact', 1.0, center=10.0, width=4.0).values(r, 1.0)
        self.assertTrue(np.all(p[r > 14.01] == 0.0))
        self.assertAlmostEqual(float(p.max()), 1.0)
        with self.assertRaises(PreconditionError):
            PerturbationSpec('compact', 1.0, center=2.0, width=4.0).values(r, 1.0)

    def test_scaled(self):
        """测试只替换振幅"""
        spec = PerturbationSpec('exp_weighted', 1.0, center=1.0, width=1.0, beta=0.3)
        scaled = spec.scaled(0.25)
        self.assertEqual(scaled.amplitude, 0.25)
        self.assertEqual(scaled.beta, 0.3)
        self.assertEqual(scaled.to_dict()['family'], 'exp_weighted')


class TestInitialData(unittest.TestCase):
    """测试初值、小性条件与衰减上限"""

    @classmethod
    def setUpClass(cls):
        cls.params = Params.from_shifted(1.0, 1.0, 2, -2.0, 0.0)
        cls.wave = solve_psi(cls.params, r_max=100.0, nodes=401)
        cls.chi = build_chi(cls.wave)
        cls.spec = PerturbationSpec('compact', 1.0, center=10.0, width=4.0)

    def test_anti_derivative(self):
        """测试 w(R) = 0 且 w_r = v - φ"""
        r = np.linspace(1.0, 2.0, 101)
        w = anti_derivative(r + 1.0, np.ones_like(r), r)
        self.assertEqual(w[-1], 0.0)
        np.testing.assert_allclose(w, 0.5 * (r * r - 4.0), atol=1e-12)

    def test_initial_state(self):
        """测试初值满足边界条件"""
        state = make_initial_data(self.wave, self.spec.scaled(0.01))
        self.assertEqual(state.t, 0.0)
        self.assertEqual(state.v.values[0], self.params.v_minus)
        self.assertEqual(state.w.values[-1], 0.0)

    def test_unsupported_tail(self):
        """测试扰动在右端未衰减"""
        spec = PerturbationSpec('gaussian', 0.1, center=95.0, width=10.0)
        with self.assertRaises(PreconditionError):
            make_initial_data(self.wave, spec)

    def test_support_radius_for_weighted_tail(self):
        """测试指数权扰动在有效支集之外已降到容差以下"""
        spec = PerturbationSpec('exp_weighted', 1.0, center=1.0, width=1.0, beta=0.9)
        edge = support_radius(spec, 1.0)
        r = np.linspace(1.0, 200.0, 20001)
        p = spec.values(r, 1.0)
        self.assertLessEqual(float(np.max(np.abs(p[r >= edge]))), 1e-12 * float(np.max(np.abs(p))))
        self.assertLess(edge, 60.0)

    def test_minimum_r_max_accepts_initial_data(self):
        """测试按 minimum_r_max 选取的截断半径能构造初值，小的 β 需要更大的区间"""
        spec = PerturbationSpec('exp_weighted', 0.01, center=1.0, width=1.0, beta=0.9)
        self.assertLessEqual(minimum_r_max(spec, 1.0), 100.0)
        state = make_initial_data(self.wave, spec)
        self.assertEqual(state.w.values[-1], 0.0)
        narrow = PerturbationSpec('exp_weighted', 0.01, center=1.0, width=1.0, beta=0.02)
        self.assertGreater(minimum_r_max(narrow, 1.0), 1000.0)
        with self.assertRaises(PreconditionError):
            make_initial_data(self.wave, narrow)
        compact = PerturbationSpec('compact', 0.01, center=10.0, width=4.0)
        self.assertAlmostEqual(support_radius(compact, 1.0), 14.0)

    def test_smallness_at_critical_amplitude(self):
        """测试临界振幅处左右两端相等，减半后成立"""
        a_max = max_admissible_amplitude(self.wave, self.spec, self.chi)
        self.assertTrue(math.isfinite(a_max))
        critical = check_smallness(make_initial_data(self.wave, self.spec.scaled(a_max)).w, self.chi, self.params)
        self.assertAlmostEqual(critical['lhs'] / critical['rhs'], 1.0, places=8)
        half = check_smallness(make_initial_data(self.wave, self.spec.scaled(0.5 * a_max)).w, self.chi, self.params)
        self.assertTrue(half['ok'])
        large = check_smallness(make_initial_data(self.wave, self.spec.scaled(2.0 * a_max)).w, self.chi, self.params)
        self.assertFalse(large['ok'])

    def test_zero_amplitude(self):
        """测试零扰动的临界振幅为无穷"""
        self.assertEqual(max_admissible_amplitude(self.wave, self.spec.scaled(0.0), self.chi), math.inf)

    def test_decay_caps(self):
        """测试 β 与 γ 的上限"""
        caps = decay_caps(self.params, self.chi)
        self.assertLessEqual(caps['beta_max'], 2.0 / self.params.r0)
        expected = 8.0 / ((8.0 * self.chi.C_U + 1.0) * self.params.r0)
        self.assertAlmostEqual(caps['beta_max'], min(2.0, expected))
        self.assertGreater(caps['gamma_max'], 0.0)

    def test_weighted_norms(self):
        """测试只报告给定的权"""
        spec = PerturbationSpec('exp_weighted', 0.01, center=1.0, width=1.0, beta=0.5, alpha=1.0)
        norms = weighted_norms(make_initial_data(self.wave, spec), spec)
        self.assertGreater(norms['algebraic'], 0.0)
        self.assertGreater(norms['exponential'], 0.0)
        self.assertIsNone(weighted_norms(make_initial_data(self.wave, self.spec.scaled(0.01)),
                                         self.spec)['exponential'])


class TestEvolver(unittest.TestCase):
    """测试时间推进与能量不等式"""

    @classmethod
    def setUpClass(cls):
        cls.params = Params.from_shifted(1.0, 1.0, 2, -2.0, 0.0)
        cls.wave = solve_psi(cls.params, r_max=100.0, nodes=401)
        cls.chi = build_chi(cls.wave)
        spec = PerturbationSpec('compact', 1.0, center=10.0, width=4.0)
        cls.spec = spec.scaled(0.5 * max_admissible_amplitude(cls.wave, spec, cls.chi))

    def test_stationary_wave_is_discrete_equilibrium(self):
        """测试零扰动保持在定常波上"""
        state = make_initial_data(self.wave, self.spec.scaled(0.0))
        trace = get_evolver(self.wave).evolve(state, self.chi, 1.0)
        self.assertLess(max(trace.sup_error), 1e-10)

    def test_energy_inequalities(self):
        """测试小扰动下的两条能量不等式"""
        state = make_initial_data(self.wave, self.spec)
        self.assertTrue(check_smallness(state.w, self.chi, self.params)['ok'])
        trace = evolve(state, self.wave, self.chi, t_end=2.0)
        self.assertAlmostEqual(trace.times[-1], 2.0)
        self.assertTrue(trace.energy_inequality_32()['ok'])
        self.assertTrue(trace.energy_inequality_33(self.params, self.chi)['ok'])
        self.assertTrue(all(np.diff(trace.diss_32) >= 0))

    def test_single_step(self):
        """测试单步推进保持边界值"""
        state = make_initial_data(self.wave, self.spec)
        evolver = get_evolver(self.wave)
        dt = 0.5 * evolver.max_stable_dt(state.v.values)
        new_state = step(state, dt, self.wave)
        self.assertAlmostEqual(new_state.t, dt)
        self.assertAlmostEqual(new_state.v.values[0], self.params.v_minus, places=12)
        self.assertEqual(new_state.w.values[-1], 0.0)
        with self.assertRaises(PreconditionError):
            step(state, dt, self.wave, self.params.with_V_minus(0.5))

    def test_cfl_violation(self):
        """测试超过对流CFL上限的时间步"""
        state = make_initial_data(self.wave, self.spec)
        with self.assertRaises(CflViolationError):
            get_evolver(self.wave).advance(state.v.values, 10.0)
        with self.assertRaises(PreconditionError):
            get_evolver(self.wave).advance(state.v.values, 0.0)

    def test_fixed_dt_policy(self):
        """测试固定时间步"""
        policy = DtPolicy(dt=0.01)
        self.assertEqual(policy.next_dt(0.1, np.array([5.0])), 0.01)
        self.assertAlmostEqual(DtPolicy(cfl=0.5).next_dt(0.1, np.array([-2.0, 1.0])), 0.025)

    def test_trace_csv(self):
        """测试能量序列CSV表头"""
        state = make_initial_data(self.wave, self.spec)
        trace = evolve(state, self.wave, self.chi, t_end=0.2, sample_every=1)
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'energy_trace.csv')
            trace.to_csv(path)
            frame = pd.read_csv(path)
        self.assertEqual(list(frame.columns), TRACE_COLUMNS)
        self.assertEqual(len(frame), len(trace))

    def test_requires_uniform_n2_wave(self):
        """测试 n=3 的定常波"""
        wave = solve_psi(Params.from_shifted(1.0, 1.0, 3, -1.0, 0.0), r_max=20.0, nodes=101)
        with self.assertRaises(PreconditionError):
            get_evolver(wave)


class TestFitDecay(unittest.TestCase):
    """测试衰减率拟合"""

    def _trace(self, times, values):
        trace = EnergyTrace()
        trace.times = list(times)
        trace.sup_error = list(values)
        return trace

    def test_exponential(self):
        """测试指数衰减"""
        t = np.linspace(0.0, 10.0, 101)
        fit = fit_decay(self._trace(t, np.exp(-0.5 * t)), 'exponential', floor=1e-12)
        self.assertAlmostEqual(fit['rate'], 0.5, places=6)
        self.assertGreater(fit['quality'], 0.999)

    def test_algebraic(self):
        """测试代数衰减"""
        t = np.linspace(0.0, 10.0, 101)
        fit = fit_decay(self._trace(t, (1.0 + t) ** -1.5), 'algebraic', floor=1e-12)
        self.assertAlmostEqual(fit['rate'], 1.5, places=6)

    def test_floor_truncates_window(self):
        """测试窗口止于底噪"""
        t = np.linspace(0.0, 10.0, 101)
        values = np.maximum(np.exp(-t), 1e-3)
        fit = fit_decay(self._trace(t, values), 'exponential', floor=1e-3)
        self.assertLess(fit['window'][1], 6.3)
        self.assertAlmostEqual(fit['rate'], 1.0, places=6)

    def test_too_few_samples(self):
        """测试采样不足与未知模型"""
        with self.assertRaises(ClassificationError):
            fit_decay(self._trace([0.0, 1.0, 2.0], [1.0, 0.5, 0.25]))
        with self.assertRaises(PreconditionError):
            fit_decay(self._trace([0.0], [1.0]), 'linear')


if __name__ == '__main__':
    unittest.main()
