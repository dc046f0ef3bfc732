"""
定常波模块

闭式定常波、ψ方程的一般求解器、轨迹分类、上下界函数以及衰减率拟合。
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Tuple, Union

import numpy as np
from scipy.integrate import quad

from ..config.default_config import ODE_CONFIG, STATIONARY_CONFIG
from .errors import ClassificationError, IntegrationError, PreconditionError
from .ode_engine import EventSpec, IntegrationOutcome, OdeProblem, get_integrator
from .radial_core import Params, Profile, RadialGrid

logger = logging.getLogger(__name__)

SUBCRITICAL = 'Subcritical'
NEAR_CRITICAL = 'NearCritical'
SUPERCRITICAL = 'SupercriticalBlowup'

BLOWUP_EVENT = 'blowup'


@dataclass(frozen=True)
class WaveClassification:
    """轨迹分类结果"""
    kind: str
    r_decision: float
    details: str = ''

    @property
    def is_subcritical(self) -> bool:
        return self.kind == SUBCRITICAL

    def to_dict(self) -> Dict:
        return {'kind': self.kind, 'r_decision': self.r_decision, 'details': self.details}


@dataclass(frozen=True, eq=False)
class StationaryWave:
    """
    定常波

    psi 与 phi 在同一等距网格上，phi = psi + μ(n-1)/r；只有Subcritical的波
    才拟合衰减常数。rel_tol/abs_tol 记录生成该波所用的积分容差
    """
    psi: Profile
    phi: Profile
    classification: WaveClassification
    params: Params
    decay_constant: Optional[float] = None
    decay_slope: Optional[float] = None
    tube_tol: float = 0.0
    dpsi: Optional[Profile] = None
    rel_tol: float = ODE_CONFIG['REL_TOL']
    abs_tol: float = ODE_CONFIG['ABS_TOL']

    @property
    def grid(self) -> RadialGrid:
        return self.psi.grid

    def to_frame(self):
        frame = self.psi.to_frame().rename(columns={'value': 'psi'})
        frame['phi'] = self.phi.values
        return frame

    def to_csv(self, path: str) -> None:
        """写出 `r,psi,phi` CSV"""
        self.to_frame().to_csv(path, index=False, lineterminator='\n')

    def summary(self) -> Dict:
        data = self.classification.to_dict()
        data['slope'] = self.decay_slope
        data['constant'] = self.decay_constant
        data['tube_tol'] = self.tube_tol
        data['params'] = self.params.to_dict()
        data['r_max'] = self.grid.r_max
        data['nodes'] = self.grid.size
        return data


def psi_rhs(params: Params) -> Callable[[float, float], float]:
    """ψ方程右端项 (ψ² - v+² - μ²(n-1)(n-3)/r²)/(2μ)，n=2时为 (ψ² - v+² + μ²/r²)/(2μ)"""
    mu, v_plus = params.mu, params.v_plus
    geometric = mu * mu * (params.n - 1) * (params.n - 3)

    def rhs(r, psi):
        return (psi * psi - v_plus * v_plus - geometric / (r * r)) / (2.0 * mu)

    return rhs


def nullcline_root(r, params: Params):
    """右端项为零的稳定根 ν(r) = -sqrt(max(0, v+² + μ²(n-1)(n-3)/r²))"""
    r = np.asarray(r, dtype=float)
    square = params.v_plus ** 2 + params.mu ** 2 * (params.n - 1) * (params.n - 3) / (r * r)
    return -np.sqrt(np.maximum(square, 0.0))


def _lag_terms(r, params: Params) -> Tuple[np.ndarray, np.ndarray]:
    """
    慢流形展开 ψ ≈ ν + δ₁ + δ₂ 的两项修正

    δ₁ = μν'/ν，δ₂ = μδ₁'/ν - δ₁²/(2ν)；ν² <= v+²/4 处（含 v+=0）两项取零
    """
    r = np.atleast_1d(np.asarray(r, dtype=float))
    mu = params.mu
    g = mu * mu * (params.n - 1) * (params.n - 3)
    nu = nullcline_root(r, params)
    nu2 = nu * nu
    valid = nu2 > 0.25 * params.v_plus ** 2
    if params.v_plus == 0 or g == 0 or not np.any(valid):
        zero = np.zeros_like(r)
        return zero, zero
    nu_safe = np.where(valid, nu, -1.0)
    nu2_safe = nu_safe * nu_safe
    first = -mu * g / (r ** 3 * nu2_safe)
    first_slope = mu * g * (3.0 / (r ** 4 * nu2_safe) - 2.0 * g / (r ** 6 * nu2_safe * nu2_safe))
    second = mu * first_slope / nu_safe - first * first / (2.0 * nu_safe)
    return np.where(valid, first, 0.0), np.where(valid, second, 0.0)


def far_field_center(r, params: Params):
    """收敛管中心：ν(r) 加上ψ追随 ν 的滞后修正 δ₁ + δ₂"""
    first, second = _lag_terms(r, params)
    center = nullcline_root(r, params) + first + second
    return center if np.ndim(r) else float(center[0])


def eps_blow(params: Params) -> float:
    return STATIONARY_CONFIG['EPS_BLOW_FACTOR'] * abs(params.v_plus)


def tail_start(r0: float, r_max: float) -> float:
    return r_max - STATIONARY_CONFIG['TAIL_FRACTION'] * (r_max - r0)


def default_tube_tol(params: Params, r_max: Optional[float] = None,
                     rel_tol: float = ODE_CONFIG['REL_TOL'],
                     abs_tol: float = ODE_CONFIG['ABS_TOL']) -> float:
    """
    收敛管半宽

    1e-5·|v+ - V-| + 1e-10，再加上积分容差量级的余量以及尾部起点处
    滞后展开最后一项 |δ₂| 的大小
    """
    if r_max is None:
        r_max = default_r_max(params)
    width = STATIONARY_CONFIG['TUBE_FACTOR'] * abs(params.v_plus - params.V_minus) + STATIONARY_CONFIG['TUBE_FLOOR']
    width += STATIONARY_CONFIG['TUBE_TOL_FACTOR'] * (rel_tol * abs(params.v_plus) + abs_tol)
    _, second = _lag_terms(tail_start(params.r0, r_max), params)
    return float(width + abs(second[0]))


def length_scale(params: Params) -> float:
    """max(r0, μ/|v+|)，v+=0 时取 r0"""
    if params.v_plus == 0:
        return params.r0
    return max(params.r0, params.mu / abs(params.v_plus))


def default_r_max(params: Params) -> float:
    return STATIONARY_CONFIG['R_MAX_FACTOR'] * length_scale(params)


def phi12_exact(r, params: Params):
    """
    n=2、v+=0 时的闭式定常波

    φ = v- / (r [1/r0 - (v-/2μ) ln(r/r0)])

    Args:
        r: 半径（标量或数组）
        params: 参数，要求 n=2, v+=0, v-<0
    """
    if params.n != 2 or params.v_plus != 0:
        raise PreconditionError("phi12_exact 需要 n=2 且 v+=0")
    if not params.v_minus < 0:
        raise PreconditionError(f"v- >= 0 时不存在非平凡解: v-={params.v_minus}")
    return _phi12(r, params)


def _phi12(r, params: Params):
    r = np.asarray(r, dtype=float)
    mu, r0, vm = params.mu, params.r0, params.v_minus
    return vm / (r * (1.0 / r0 - vm / (2.0 * mu) * np.log(r / r0)))


def phi1n_exact(r, params: Params):
    """n>=3、v+=0 时的闭式定常波，要求 v- <= 2μ(n-2)/r0"""
    n, mu, r0, vm = params.n, params.mu, params.r0, params.v_minus
    if n < 3 or params.v_plus != 0:
        raise PreconditionError("phi1n_exact 需要 n>=3 且 v+=0")
    if vm > 2.0 * mu * (n - 2) / r0:
        raise PreconditionError(f"需要 v- <= 2μ(n-2)/r0: v-={vm}")
    r = np.asarray(r, dtype=float)
    k = r0 * vm / (2.0 * mu * (n - 2))
    x = r / r0
    return vm / ((1.0 - k) * x ** (n - 1) + k * x)


def psiS_exact_n3(r, params: Params):
    """n=3、v+<0、V-<|v+| 时的闭式解"""
    if params.n != 3:
        raise PreconditionError("psiS_exact_n3 需要 n=3")
    speed = abs(params.v_plus)
    Vm = params.V_minus
    if not params.v_plus < 0 or not Vm < speed:
        raise PreconditionError(f"需要 v+<0 且 V-<|v+|: v+={params.v_plus}, V-={Vm}")
    r = np.asarray(r, dtype=float)
    q = (speed + Vm) / (speed - Vm)
    decay = np.exp(-speed * (r - params.r0) / params.mu)
    return params.v_plus * (1.0 - q * decay) / (1.0 + q * decay)


def kernel_integral(r: float, start: float, speed: float, mu: float) -> float:
    """∫_start^r s^{-2} exp(-speed (r-s)/μ) ds，自适应求积"""
    if r <= start:
        return 0.0
    value, _ = quad(lambda s: math.exp(-speed * (r - s) / mu) / (s * s), start, r,
                    epsabs=1e-13, epsrel=1e-12, limit=200)
    return value


def lower_bound_psi_S(r, params: Params):
    """
    ψ 的下界函数

    v+ + (V- - v+) e^{-|v+|(r-r0)/μ} + (μ(n-1)(3-n)/2) ∫_{r0}^r s^{-2} e^{-|v+|(r-s)/μ} ds

    n=2 时末项系数为 +μ/2，n=3 时为 0
    """
    speed = abs(params.v_plus)
    coefficient = params.mu * (params.n - 1) * (3 - params.n) / 2.0
    rs = np.atleast_1d(np.asarray(r, dtype=float))
    if np.any(rs < params.r0 * (1 - 1e-12)):
        raise PreconditionError("lower_bound_psi_S 需要 r >= r0")
    out = params.v_plus + (params.V_minus - params.v_plus) * np.exp(-speed * (rs - params.r0) / params.mu)
    if coefficient != 0:
        out = out + coefficient * np.array(
            [kernel_integral(float(x), params.r0, speed, params.mu) for x in rs]
        )
    return out if np.ndim(r) else float(out[0])


def upper_bound_psi12(r, params: Params):
    """n=2、v-<0 时的上界 φ₁²(r) - μ/r"""
    if params.n != 2 or not params.v_minus < 0:
        raise PreconditionError("upper_bound_psi12 需要 n=2 且 v-<0")
    r = np.asarray(r, dtype=float)
    return _phi12(r, params) - params.mu / r


def classify(trajectory: Profile, params: Params, tube_tol: Optional[float] = None,
             blowup_radius: Optional[float] = None,
             rel_tol: float = ODE_CONFIG['REL_TOL'],
             abs_tol: float = ODE_CONFIG['ABS_TOL']) -> WaveClassification:
    """
    轨迹分类

    Args:
        trajectory: ψ 轨迹
        params: 参数
        tube_tol: 收敛管半宽，默认见 default_tube_tol
        blowup_radius: 积分器报告的爆破半径（事件或步长下溢）
        rel_tol: 生成轨迹时的相对容差，用于默认管宽
        abs_tol: 生成轨迹时的绝对容差

    Returns:
        WaveClassification；收敛管以滞后修正后的零斜率根为中心，该中心 -> v+
    """
    r = trajectory.r
    psi = trajectory.values
    if tube_tol is None:
        tube_tol = default_tube_tol(params, float(r[-1]), rel_tol, abs_tol)
    threshold = abs(params.v_plus) + eps_blow(params)

    if blowup_radius is not None:
        return WaveClassification(SUPERCRITICAL, float(blowup_radius),
                                  f"ψ escaped past |v+|+ε_blow = {threshold:.6g}")
    escaped = np.nonzero(psi > threshold)[0]
    if escaped.size:
        return WaveClassification(SUPERCRITICAL, float(r[escaped[0]]),
                                  f"ψ exceeded |v+|+ε_blow = {threshold:.6g}")

    start = tail_start(float(r[0]), float(r[-1]))
    tail = r >= start
    deviation = np.abs(psi[tail] - far_field_center(r[tail], params))
    if np.all(deviation <= tube_tol):
        return WaveClassification(SUBCRITICAL, float(start),
                                  f"ψ within tube {tube_tol:.3g} of its far-field state on the last "
                                  f"{STATIONARY_CONFIG['TAIL_FRACTION']:.0%} of the span")
    return WaveClassification(NEAR_CRITICAL, float(r[-1]),
                              f"undecided at r_max, max tail deviation {float(deviation.max()):.3g}")


def decay_fit(p: Profile, limit: float, window: Tuple[float, float]) -> Dict[str, float]:
    """
    在 (ln r, ln|p-limit|) 上做最小二乘直线拟合

    Returns:
        {'slope', 'constant'}，constant = exp(截距)
    """
    r_a, r_b = window
    if not r_b >= 10.0 * r_a * (1 - 1e-12):
        raise ClassificationError(f"拟合窗口需至少跨一个数量级: [{r_a}, {r_b}]")
    mask = (p.r >= r_a * (1 - 1e-12)) & (p.r <= r_b * (1 + 1e-12))
    if np.count_nonzero(mask) < 2:
        raise ClassificationError(f"拟合窗口 [{r_a}, {r_b}] 内节点不足")
    defect = p.values[mask] - limit
    if np.any(defect == 0) or np.any(np.sign(defect) != np.sign(defect[0])):
        raise ClassificationError("p - limit 在拟合窗口内变号或为零")
    slope, intercept = np.polyfit(np.log(p.r[mask]), np.log(np.abs(defect)), 1)
    return {'slope': float(slope), 'constant': float(math.exp(intercept))}


def _decay_window(params: Params, r_max: float) -> Optional[Tuple[float, float]]:
    scale = length_scale(params)
    lo, hi = STATIONARY_CONFIG['DECAY_WINDOW']
    window = (lo * scale, min(hi * scale, r_max))
    if window[1] < 10.0 * window[0] * (1 - 1e-12):
        return None
    return window


def integrate_psi(params: Params, r_max: float,
                  rel_tol: float = ODE_CONFIG['REL_TOL'],
                  abs_tol: float = ODE_CONFIG['ABS_TOL'],
                  stops: Optional[np.ndarray] = None) -> IntegrationOutcome:
    """从 (r0, V-) 积分ψ方程，终止事件为 ψ > |v+| + ε_blow；stops 中的半径落在接受步节点上"""
    threshold = abs(params.v_plus) + eps_blow(params)
    rhs = psi_rhs(params)
    event = EventSpec(BLOWUP_EVENT, lambda r, y: y - threshold, terminal=True)
    outcome = get_integrator(rel_tol, abs_tol).integrate(
        OdeProblem(rhs, params.r0, params.V_minus, r_max), [event], stops
    )
    if outcome.status == 'event_triggered':
        # 越过 |v+| 后右端项为正，轨迹单调上升不再返回
        r_e, y_e = outcome.event.r_event, outcome.event.y_event
        if not rhs(r_e, y_e) > 0:
            logger.warning(f"爆破事件处右端项非正: r={r_e}, ψ={y_e}")
    return outcome


def _node_values(outcome: IntegrationOutcome, grid: RadialGrid) -> Optional[Tuple[np.ndarray, np.ndarray]]:
    """网格点全部是接受步节点时直接取积分值与导数，否则返回None"""
    points = grid.points
    idx = np.searchsorted(outcome.r, points)
    if np.any(idx >= outcome.r.size) or not np.array_equal(outcome.r[idx], points):
        return None
    return outcome.y[idx], outcome.dy[idx]


def solve_psi(params: Params, r_max: Optional[float] = None,
              rel_tol: float = ODE_CONFIG['REL_TOL'],
              abs_tol: float = ODE_CONFIG['ABS_TOL'],
              nodes: int = STATIONARY_CONFIG['NODES'],
              tube_tol: Optional[float] = None) -> StationaryWave:
    """
    求解ψ方程的Cauchy问题并分类

    Args:
        params: 参数（v+ <= 0）
        r_max: 截断半径，默认 100·max(r0, μ/|v+|)
        rel_tol: 相对容差
        abs_tol: 绝对容差
        nodes: 等距网格节点数
        tube_tol: 分类收敛管宽度

    Returns:
        StationaryWave；完整积分时网格值取自积分节点，爆破时剖面只覆盖到
        爆破半径之前并用Hermite重采样
    """
    if params.v_plus > 0:
        raise PreconditionError(f"不处理 v+ > 0 的定常波: v+={params.v_plus}")
    if r_max is None:
        r_max = default_r_max(params)
    if params.v_plus < 0 and r_max < STATIONARY_CONFIG['R_MAX_MIN_FACTOR'] * length_scale(params) * (1 - 1e-12):
        raise PreconditionError(
            f"r_max 需不小于 {STATIONARY_CONFIG['R_MAX_MIN_FACTOR']}·max(r0, μ/|v+|): r_max={r_max}"
        )

    logger.info(f"Solving ψ equation: n={params.n}, μ={params.mu}, v+={params.v_plus}, V-={params.V_minus}, r_max={r_max}")
    full_grid = RadialGrid.uniform(params.r0, r_max, nodes)
    try:
        outcome = integrate_psi(params, r_max, rel_tol, abs_tol, stops=full_grid.points)
    except IntegrationError as e:
        logger.warning(f"积分失败，按爆破处理: {e}")
        outcome = e.outcome
        if outcome is None or outcome.r.size < 3:
            raise
        blowup_radius = outcome.r_last
    else:
        blowup_radius = None if outcome.completed else outcome.r_last

    if outcome.r.size < 2:
        raise IntegrationError(f"ψ在 r0 附近立即爆破，无法重采样: r={outcome.r_last}", outcome=outcome)
    end = r_max if blowup_radius is None else outcome.r_last
    if tube_tol is None:
        tube_tol = default_tube_tol(params, end, rel_tol, abs_tol)
    grid = full_grid if blowup_radius is None else RadialGrid.uniform(params.r0, end, nodes)
    exact = _node_values(outcome, grid) if blowup_radius is None else None
    if exact is not None:
        psi = Profile(grid, exact[0], 'psi')
        dpsi = Profile(grid, exact[1], 'dpsi')
    else:
        spline = outcome.spline()
        points = np.clip(grid.points, params.r0, end)
        psi = Profile(grid, spline(points), 'psi')
        dpsi = Profile(grid, spline.derivative()(points), 'dpsi')
    classification = classify(psi, params, tube_tol, blowup_radius)
    phi = psi.with_values(psi.values + params.shift(grid.points), 'phi')

    slope = constant = None
    if classification.is_subcritical:
        window = _decay_window(params, end)
        if window is not None:
            try:
                fit = decay_fit(psi, params.v_plus, window)
                slope, constant = fit['slope'], fit['constant']
            except ClassificationError as e:
                logger.debug(f"衰减拟合跳过: {e}")

    logger.info(f"Classification: {classification.kind} at r={classification.r_decision:.6g}")
    return StationaryWave(psi, phi, classification, params, constant, slope, tube_tol, dpsi, rel_tol, abs_tol)


def check_bounds(wave: StationaryWave, slack: float = 1e-8) -> Dict[str, Union[bool, float, None]]:
    """次临界波的上下界检查：ψ >= 下界 - slack；n=2且v-<0时 ψ <= φ₁² - μ/r + slack"""
    params = wave.params
    r = wave.psi.r
    lower = lower_bound_psi_S(r, params)
    lower_violation = float(np.max(lower - wave.psi.values))
    report = {'lower_ok': lower_violation <= slack, 'lower_violation': lower_violation,
              'upper_ok': None, 'upper_violation': None}
    if params.n == 2 and params.v_minus < 0:
        upper_violation = float(np.max(wave.psi.values - upper_bound_psi12(r, params)))
        report['upper_ok'] = upper_violation <= slack
        report['upper_violation'] = upper_violation
    return report


def psi_residual(wave: StationaryWave) -> float:
    """网格上ψ方程的上确界残差；有存储导数时用之，否则用二阶差分"""
    psi = wave.psi
    if wave.dpsi is not None:
        dpsi = wave.dpsi.values
    else:
        dpsi = np.gradient(psi.values, psi.r, edge_order=2)
    rhs = psi_rhs(wave.params)(psi.r, psi.values)
    return float(np.max(np.abs(dpsi - rhs)))


def residual_limit(wave: StationaryWave) -> float:
    """残差允许值：RESIDUAL_FACTOR 倍的积分容差 rel_tol·max|ψ| + abs_tol"""
    scale = float(np.max(np.abs(wave.psi.values)))
    return STATIONARY_CONFIG['RESIDUAL_FACTOR'] * (wave.rel_tol * scale + wave.abs_tol)


def check_monotonicity(wave: StationaryWave, tol: float = 1e-10) -> Dict[str, Union[str, bool, None]]:
    """
    检查波形单调性

    v+ <= -μ/r0 时：V- = sqrt(v+² - μ²/r0²) 应严格递减；
    sqrt(v+² - μ²/r0²) < V- < a* 时先增后减。其余情形不作断言。
    """
    params = wave.params
    diffs = np.diff(wave.psi.values)
    if np.all(diffs <= tol):
        observed = 'decreasing'
    elif np.all(diffs >= -tol):
        observed = 'increasing'
    else:
        peak = int(np.argmax(wave.psi.values))
        if np.all(diffs[:peak] >= -tol) and np.all(diffs[peak:] <= tol):
            observed = 'increasing_then_decreasing'
        else:
            observed = 'other'

    expected = 'unspecified'
    if params.n == 2 and params.v_plus <= -params.mu / params.r0:
        root = math.sqrt(params.v_plus ** 2 - (params.mu / params.r0) ** 2)
        if math.isclose(params.V_minus, root, rel_tol=1e-9, abs_tol=1e-12):
            expected = 'decreasing'
        elif params.V_minus > root and wave.classification.is_subcritical:
            expected = 'increasing_then_decreasing'
    matches = None if expected == 'unspecified' else observed == expected
    return {'observed': observed, 'expected': expected, 'matches': matches}


def closed_form_check(params: Params, r_max: Optional[float] = None,
                      rel_tol: float = STATIONARY_CONFIG['ORACLE_REL_TOL'],
                      abs_tol: float = STATIONARY_CONFIG['ORACLE_ABS_TOL'],
                      nodes: int = STATIONARY_CONFIG['NODES']) -> Dict[str, float]:
    """
    数值解与闭式解比较

    n=2、v+=0 时对照 φ₁²（相对误差，并给出 |φ|·r·ln r 的最大值）；
    n=3、v+<0 时对照 ψ^S（绝对误差）
    默认使用 ORACLE_REL_TOL/ORACLE_ABS_TOL 两档更紧的容差
    """
    if params.n == 2 and params.v_plus == 0:
        r_max = r_max or default_r_max(params)
        wave = solve_psi(params, r_max, rel_tol, abs_tol, nodes)
        exact = phi12_exact(wave.grid.points, params)
        error = float(np.max(np.abs(wave.phi.values - exact) / np.abs(exact)))
        r = wave.grid.points[1:]
        growth = float(np.max(np.abs(exact[1:]) * r * np.log(r / params.r0)))
        return {'sup_error': error, 'relative': True, 'decay_product_max': growth}
    if params.n == 3 and params.v_plus < 0:
        r_max = r_max or default_r_max(params)
        wave = solve_psi(params, r_max, rel_tol, abs_tol, nodes)
        exact = psiS_exact_n3(wave.grid.points, params)
        return {'sup_error': float(np.max(np.abs(wave.psi.values - exact))), 'relative': False,
                'decay_product_max': None}
    raise PreconditionError("closed_form_check 只支持 (n=2, v+=0) 或 (n=3, v+<0)")


def far_field_decay_check(params: Params, r_max: float, nodes: int = 2001) -> float:
    """φ₁ⁿ 的远场检查：返回 max |φ₁ⁿ(r)|·r^{n-1}（应有界）"""
    grid = RadialGrid.uniform(params.r0, r_max, nodes)
    values = phi1n_exact(grid.points, params)
    return float(np.max(np.abs(values) * grid.points ** (params.n - 1)))
