"""
不变量检查套件

validate 子命令背后的全部性质检查：闭式解对照、存在区间、两种 a* 估计的一致性、
衰减指数、辅助问题的单峰性与包络、比较原理、权函数残差、能量不等式、稳定性、
指数衰减率以及输出的确定性。
"""

import logging
import math
import os
import tempfile
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List

import numpy as np

from ..config.default_config import EVOLUTION_CONFIG, ODE_CONFIG, OUTPUT_CONFIG, STATIONARY_CONFIG, THRESHOLD_CONFIG
from .config_manager import get_run_config
from .errors import RadialBurgersError
from .evolution import (
    DtPolicy,
    PerturbationSpec,
    check_smallness,
    decay_caps,
    fit_decay,
    get_evolver,
    make_initial_data,
    max_admissible_amplitude,
    minimum_r_max,
)
from .ode_engine import EventSpec, OdeProblem, get_integrator
from .radial_core import Params
from .stationary import (
    SUBCRITICAL,
    check_bounds,
    check_monotonicity,
    closed_form_check,
    psi_residual,
    residual_limit,
    solve_psi,
)
from .threshold import (
    bracket,
    compute_threshold,
    eta_sandwich_report,
    limit_profile,
    run_comparison_campaign,
    solve_eta,
)
from .weight import build_chi, chi_residual

logger = logging.getLogger(__name__)

ODE_ORDER_TOLERANCES = (1e-5, 1e-7, 1e-9)


@dataclass
class CheckResult:
    name: str
    passed: bool
    details: Dict = field(default_factory=dict)
    elapsed: float = 0.0

    def to_dict(self) -> Dict:
        return {'name': self.name, 'passed': self.passed, 'details': self.details}


@dataclass
class ValidationReport:
    seed: int
    quick: bool
    checks: List[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    @property
    def failed(self) -> List[str]:
        return [check.name for check in self.checks if not check.passed]

    def to_dict(self) -> Dict:
        return {
            'seed': self.seed,
            'quick': self.quick,
            'passed': self.passed,
            'n_checks': len(self.checks),
            'failed': self.failed,
            'checks': [check.to_dict() for check in self.checks],
        }


def _subcritical_V_minus(params: Params, a_star: float) -> float:
    """次临界的代表性边界值：存在区间下端与 a* 的中点"""
    return 0.5 * (bracket(params).lo + a_star)


class InvariantSuite:
    """
    不变量检查套件

    quick 模式缩小网格、参数组与随机样本数，供测试与快速回归使用
    """

    def __init__(self, seed: int = 0, quick: bool = False,
                 rel_tol: float = ODE_CONFIG['REL_TOL'],
                 abs_tol: float = ODE_CONFIG['ABS_TOL'],
                 max_workers: int = THRESHOLD_CONFIG['MAX_WORKERS']):
        self.seed = seed
        self.quick = quick
        self.rel_tol = rel_tol
        self.abs_tol = abs_tol
        self.max_workers = max_workers
        self._thresholds: Dict[tuple, float] = {}

    def _a_star(self, params: Params) -> float:
        key = (params.mu, params.r0, params.v_plus)
        if key not in self._thresholds:
            result = compute_threshold(params, rel_tol=self.rel_tol, abs_tol=self.abs_tol,
                                       max_workers=self.max_workers)
            self._thresholds[key] = result.a_star_bisect
        return self._thresholds[key]

    def checks(self) -> List[Callable[[], CheckResult]]:
        return [
            self.check_ode_engine,
            self.check_closed_form_n2,
            self.check_closed_form_n3,
            self.check_threshold_bracket,
            self.check_threshold_agreement,
            self.check_separatrix,
            self.check_monotonicity,
            self.check_eta_properties,
            self.check_comparison_principle,
            self.check_weight_residual,
            self.check_energy_and_stability,
            self.check_exponential_rate,
            self.check_determinism,
        ]

    def run(self) -> ValidationReport:
        report = ValidationReport(self.seed, self.quick)
        for check in self.checks():
            name = check.__name__.replace('check_', '')
            started = time.perf_counter()
            try:
                result = check()
            except RadialBurgersError as e:
                logger.error(f"检查 {name} 出错: {e}", exc_info=True)
                result = CheckResult(name, False, {'error': str(e)})
            result.elapsed = time.perf_counter() - started
            logger.info(f"[{'PASS' if result.passed else 'FAIL'}] {result.name} ({result.elapsed:.2f}s)")
            report.checks.append(result)
        return report

    def check_ode_engine(self) -> CheckResult:
        """收紧容差时的收敛阶、往返可逆性与爆破事件定位"""
        errors, steps = [], []
        for tol in ODE_ORDER_TOLERANCES:
            outcome = get_integrator(tol, tol).integrate(OdeProblem(lambda r, y: y, 0.0, 1.0, 4.0))
            errors.append(abs(outcome.y_last - math.exp(4.0)))
            steps.append(outcome.n_steps)
        # 误差对接受步数的双对数斜率
        order = float(-np.polyfit(np.log(steps), np.log(errors), 1)[0])

        integrator = get_integrator(self.rel_tol, self.abs_tol)
        forward = integrator.integrate(OdeProblem(lambda r, y: math.sin(r) * y, 0.0, 1.0, 3.0))
        back = integrator.integrate(OdeProblem(lambda r, y: math.sin(r) * y, 3.0, forward.y_last, 0.0))
        reversal = abs(back.y_last - 1.0)

        blowup = integrator.integrate(OdeProblem(lambda r, y: y * y, 0.0, 1.0, 2.0),
                                      [EventSpec('blowup', lambda r, y: y - 1e6)])
        event_error = abs(blowup.event.r_event - (1.0 - 1e-6)) if blowup.event else math.inf
        details = {'order': order, 'tolerances': list(ODE_ORDER_TOLERANCES), 'errors': errors, 'steps': steps,
                   'reversal_error': reversal, 'event_radius_error': event_error}
        peak = float(np.max(np.abs(forward.y)))
        passed = order >= 4.5 and reversal <= 10.0 * (self.rel_tol * peak + self.abs_tol) and event_error <= 1e-4
        return CheckResult('ode_engine', passed, details)

    def _oracle_tolerances(self):
        return (min(self.rel_tol, STATIONARY_CONFIG['ORACLE_REL_TOL']),
                min(self.abs_tol, STATIONARY_CONFIG['ORACLE_ABS_TOL']))

    def check_closed_form_n2(self) -> CheckResult:
        params = Params(mu=1.0, r0=1.0, n=2, v_plus=0.0, v_minus=-2.0)
        rel_tol, abs_tol = self._oracle_tolerances()
        result = closed_form_check(params, r_max=100.0, rel_tol=rel_tol, abs_tol=abs_tol)
        return CheckResult('closed_form_n2', result['sup_error'] <= 1e-7, result)

    def check_closed_form_n3(self) -> CheckResult:
        params = Params.from_shifted(mu=1.0, r0=1.0, n=3, v_plus=-1.0, V_minus=0.0)
        rel_tol, abs_tol = self._oracle_tolerances()
        result = closed_form_check(params, r_max=20.0, rel_tol=rel_tol, abs_tol=abs_tol)
        return CheckResult('closed_form_n3', result['sup_error'] <= 1e-7, result)

    def check_threshold_bracket(self) -> CheckResult:
        details = {}
        passed = True
        for v_plus in (-2.0, -0.5):
            params = Params.from_shifted(1.0, 1.0, 2, v_plus, 0.0)
            result = compute_threshold(params, rel_tol=self.rel_tol, abs_tol=self.abs_tol,
                                       max_workers=self.max_workers)
            self._thresholds[(params.mu, params.r0, params.v_plus)] = result.a_star_bisect
            details[f'v_plus={v_plus}'] = result.to_dict()
            passed = passed and result.bracket_holds()
        return CheckResult('threshold_bracket', passed, details)

    def _grid(self) -> List[Params]:
        mus = (1.0,) if self.quick else (0.5, 1.0, 2.0)
        v_pluses = (-1.0,) if self.quick else (-0.5, -1.0, -2.0)
        return [Params.from_shifted(mu, 1.0, 2, v_plus, 0.0) for mu in mus for v_plus in v_pluses]

    def check_threshold_agreement(self) -> CheckResult:
        """网格上两种估计的一致性，以及次临界波的衰减指数、上下界与残差"""
        rows = []
        passed = True
        for params in self._grid():
            result = compute_threshold(params, rel_tol=self.rel_tol, abs_tol=self.abs_tol,
                                       max_workers=self.max_workers)
            a_star = result.a_star_bisect
            self._thresholds[(params.mu, params.r0, params.v_plus)] = a_star
            agree = result.discrepancy <= 1e-6 * abs(params.v_plus)
            wave = solve_psi(params.with_V_minus(_subcritical_V_minus(params, a_star)),
                             rel_tol=self.rel_tol, abs_tol=self.abs_tol)
            sub = wave.classification.kind == SUBCRITICAL
            slope_ok = sub and wave.decay_slope is not None and -2.3 <= wave.decay_slope <= -1.7
            bounds = check_bounds(wave)
            residual = psi_residual(wave)
            limit = residual_limit(wave)
            consistency = float(np.max(np.abs(wave.phi.values - wave.psi.values
                                              - wave.params.shift(wave.grid.points))))
            row_ok = (agree and sub and slope_ok and bounds['lower_ok'] and bounds['upper_ok'] is not False
                      and residual <= limit and consistency <= 1e-13 * float(np.max(np.abs(wave.phi.values))))
            rows.append({
                'mu': params.mu, 'v_plus': params.v_plus,
                'a_star_limit': result.a_star_limit, 'a_star_bisect': a_star,
                'discrepancy': result.discrepancy, 'bracket_holds': result.bracket_holds(),
                'kind': wave.classification.kind, 'slope': wave.decay_slope,
                'lower_violation': bounds['lower_violation'], 'upper_violation': bounds['upper_violation'],
                'residual': residual, 'residual_limit': limit, 'phi_psi_consistency': consistency, 'passed': row_ok,
            })
            passed = passed and row_ok and result.bracket_holds()
        return CheckResult('threshold_agreement', passed, {'rows': rows})

    def check_separatrix(self) -> CheckResult:
        params = Params.from_shifted(1.0, 1.0, 2, -2.0, 0.0)
        report = limit_profile(params, self._a_star(params), rel_tol=self.rel_tol, abs_tol=self.abs_tol)
        return CheckResult('separatrix', report['consistent'], report)

    def check_monotonicity(self) -> CheckResult:
        params = Params.from_shifted(1.0, 1.0, 2, -2.0, 0.0)
        root = math.sqrt(params.v_plus ** 2 - 1.0)
        a_star = self._a_star(params)
        details = {}
        passed = True
        for label, V_minus in (('at_root', root), ('between', 0.5 * (root + a_star))):
            wave = solve_psi(params.with_V_minus(V_minus), rel_tol=self.rel_tol, abs_tol=self.abs_tol)
            shape = check_monotonicity(wave)
            details[label] = shape
            passed = passed and shape['matches'] is True
        return CheckResult('monotonicity', passed, details)

    def check_eta_properties(self) -> CheckResult:
        params = Params.from_shifted(1.0, 1.0, 2, -1.0, 0.0)
        anchors = (2.0, 4.0) if self.quick else (2.0, 4.0, 8.0, 16.0)
        reports = []
        for r1 in anchors:
            eta = solve_eta(r1, params, rel_tol=self.rel_tol, abs_tol=self.abs_tol)
            reports.append(eta_sandwich_report(eta, params))
        values = [report['a_of_r1'] for report in reports]
        increasing = all(b > a for a, b in zip(values, values[1:]))
        passed = increasing and all(report['passed'] for report in reports)
        return CheckResult('eta_properties', passed, {'anchors': reports, 'a_increasing': increasing})

    def check_comparison_principle(self) -> CheckResult:
        count = 10 if self.quick else THRESHOLD_CONFIG['CAMPAIGN_SIZE']
        report = run_comparison_campaign(count, self.seed, max_workers=self.max_workers)
        return CheckResult('comparison_principle', report.passed, report.to_dict())

    def _acceptance_wave(self, nodes: int, r_max: float):
        """n=2、v+=-2、V-=0 的次临界波，过渡层贴在 r0 处"""
        params = Params.from_shifted(1.0, 1.0, 2, -2.0, 0.0)
        return solve_psi(params, r_max=r_max, rel_tol=self.rel_tol, abs_tol=self.abs_tol, nodes=nodes)

    def check_weight_residual(self) -> CheckResult:
        nodes = 1001 if self.quick else 4001
        sups = []
        weights = []
        for count in (nodes, 2 * nodes - 1):
            wave = self._acceptance_wave(count, r_max=20.0)
            wf = build_chi(wave)
            weights.append(wf)
            sups.append(float(np.max(np.abs(chi_residual(wf, wave).values))))
        ratio = sups[0] / sups[1] if sups[1] > 0 else math.inf
        details = {'nodes': nodes, 'residual_sup': sups[0], 'residual_sup_refined': sups[1], 'ratio': ratio}
        details.update(weights[0].to_dict())
        limit = 1e-3 if self.quick else 1e-4
        passed = sups[0] <= limit and ratio >= 3.5 and weights[0].C_L > 0
        return CheckResult('weight_residual', passed, details)

    def _stability_setup(self, nodes: int, r_max: float):
        wave = self._acceptance_wave(nodes, r_max)
        chi = build_chi(wave)
        return wave, chi

    def check_energy_and_stability(self) -> CheckResult:
        """紧支扰动：能量不等式、稳定性以及截断半径加倍的影响"""
        nodes = 401 if self.quick else EVOLUTION_CONFIG['NODES']
        t_end = 20.0 if self.quick else EVOLUTION_CONFIG['T_END']
        r_max = 100.0
        wave, chi = self._stability_setup(nodes, r_max)
        spec = PerturbationSpec('compact', 1.0, center=10.0, width=4.0)
        amplitude = EVOLUTION_CONFIG['SMALLNESS_SAFETY'] * max_admissible_amplitude(wave, spec, chi)
        spec = spec.scaled(amplitude)
        state = make_initial_data(wave, spec)
        smallness = check_smallness(state.w, chi, wave.params)

        evolver = get_evolver(wave)
        dt = EVOLUTION_CONFIG['CFL'] * evolver.h / max(float(np.max(np.abs(state.v.values))), abs(wave.params.v_minus))
        policy = DtPolicy(dt=dt)
        trace = evolver.evolve(state, chi, t_end, policy)
        ineq32 = trace.energy_inequality_32()
        ineq33 = trace.energy_inequality_33(wave.params, chi)

        # 零扰动给出离散底噪
        zero = make_initial_data(wave, spec.scaled(0.0))
        floor_trace = evolver.evolve(zero, chi, t_end, policy)
        floor = max(floor_trace.sup_error)
        final, initial = trace.sup_error[-1], trace.sup_error[0]
        stable = final <= 0.01 * initial or final <= EVOLUTION_CONFIG['FLOOR_FACTOR'] * floor

        # 同一网格步长下把截断半径加倍
        wide_wave, wide_chi = self._stability_setup(2 * nodes - 1, 2.0 * r_max - wave.params.r0)
        wide_state = make_initial_data(wide_wave, spec)
        wide_trace = get_evolver(wide_wave).evolve(wide_state, wide_chi, t_end, policy)
        common = min(len(trace), len(wide_trace))
        truncation = float(np.max(np.abs(np.asarray(trace.sup_error[:common])
                                         - np.asarray(wide_trace.sup_error[:common]))))
        boundary_slope = max(trace.boundary_slope)

        details = {
            'spec': spec.to_dict(),
            't_end': t_end,
            'smallness': smallness,
            'energy_32': ineq32,
            'energy_33': ineq33,
            'initial_sup_error': initial,
            'final_sup_error': final,
            'final_ratio': final / initial if initial > 0 else None,
            'floor': floor,
            'stable': stable,
            'truncation_difference': truncation,
            'boundary_slope_max': boundary_slope,
            'w_sup_max': max(trace.w_sup),
            'diss_34_final': trace.diss_34[-1],
        }
        passed = (smallness['ok'] and ineq32['ok'] and ineq33['ok'] and stable and truncation <= 1e-4
                  and boundary_slope <= EVOLUTION_CONFIG['BOUNDARY_TOL'])
        return CheckResult('energy_and_stability', passed, details)

    def check_exponential_rate(self) -> CheckResult:
        """指数局部化扰动在 β 取上限时的衰减率；r_max 按 β 决定的有效支集选取"""
        nodes = 401 if self.quick else EVOLUTION_CONFIG['NODES']
        t_end = 15.0 if self.quick else EVOLUTION_CONFIG['T_END']
        base_wave, base_chi = self._stability_setup(nodes, 100.0)
        caps = decay_caps(base_wave.params, base_chi)
        beta = caps['beta_max']
        spec = PerturbationSpec('exp_weighted', 1.0, center=base_wave.params.r0, width=1.0, beta=beta)
        r_max = max(100.0, minimum_r_max(spec, base_wave.params.r0))
        if r_max > 100.0:
            wave, chi = self._stability_setup(int(round(nodes * (r_max - 1.0) / 99.0)) + 1, r_max)
            caps = decay_caps(wave.params, chi)
        else:
            wave, chi = base_wave, base_chi
        amplitude = EVOLUTION_CONFIG['SMALLNESS_SAFETY'] * max_admissible_amplitude(wave, spec, chi)
        spec = spec.scaled(amplitude)
        state = make_initial_data(wave, spec)
        trace = get_evolver(wave).evolve(state, chi, t_end, DtPolicy())
        # 拟合截止于舍入底噪之上
        floor = EVOLUTION_CONFIG['FIT_FLOOR_FRACTION'] * trace.sup_error[0]
        fit = fit_decay(trace, 'exponential', floor=floor)
        target = 0.5 * caps['gamma_max']
        passed = fit['rate'] >= target and fit['quality'] >= 0.95
        return CheckResult('exponential_rate', passed, {'caps': caps, 'fit': fit, 'target_rate': target,
                                                        'r_max': r_max, 't_end': t_end, 'spec': spec.to_dict()})

    def _solve_outputs(self, config, output_dir: str) -> Dict[str, bytes]:
        """按配置求解定常波并用与 solve 子命令相同的写出器写出，返回各文件内容"""
        from .report_generator import get_report_generator

        wave = solve_psi(config.params(), r_max=config.numeric('r_max'),
                         rel_tol=config.numeric('rel_tol'), abs_tol=config.numeric('abs_tol'),
                         nodes=config.numeric('nodes'))
        paths = get_report_generator(output_dir).save_wave(wave)
        contents = {}
        for key, path in sorted(paths.items()):
            with open(path, 'rb') as f:
                contents[key] = f.read()
        return contents

    def check_determinism(self) -> CheckResult:
        """写出 config.json 后从该文件重新运行，输出须逐字节一致"""
        with tempfile.TemporaryDirectory() as tmp:
            config = get_run_config(use_env=False)
            config.apply_overrides({
                'subcommand': 'solve',
                'seed': self.seed,
                'output_dir': os.path.join(tmp, 'first'),
                'params.v_plus': -1.0,
                'params.v_minus': 0.5,
                'numerics.nodes': 501,
                'numerics.rel_tol': self.rel_tol,
                'numerics.abs_tol': self.abs_tol,
            })
            config_path = os.path.join(config.resolve_output_dir(), OUTPUT_CONFIG['CONFIG_FILE'])
            config.save_config(config_path)
            first = self._solve_outputs(config, config.resolve_output_dir())

            rerun = get_run_config(config_path, use_env=False)
            rerun_dir = os.path.join(tmp, 'rerun')
            second = self._solve_outputs(rerun, rerun_dir)
            rerun_config = os.path.join(rerun_dir, OUTPUT_CONFIG['CONFIG_FILE'])
            rerun.save_config(rerun_config)
            with open(config_path, 'rb') as f_first, open(rerun_config, 'rb') as f_second:
                same_config = f_first.read() == f_second.read()

        mismatched = [key for key in first if first[key] != second.get(key)]
        details = {'files': sorted(first), 'mismatched': mismatched, 'config_identical': same_config,
                   'bytes': sum(len(content) for content in first.values())}
        return CheckResult('determinism', not mismatched and same_config and bool(first), details)


def run_validation(seed: int = 0, quick: bool = False,
                   rel_tol: float = ODE_CONFIG['REL_TOL'],
                   abs_tol: float = ODE_CONFIG['ABS_TOL'],
                   max_workers: int = THRESHOLD_CONFIG['MAX_WORKERS']) -> ValidationReport:
    """运行全部不变量检查"""
    logger.info(f"Running invariant suite (seed={seed}, quick={quick})")
    return InvariantSuite(seed, quick, rel_tol, abs_tol, max_workers).run()
