"""
径向Burgers方程的时间演化

截断区间上 v_t + (v²/2)_r = μ(v_rr + (v/r)_r) 的IMEX推进、反导数变换 w、
能量泛函、小性条件以及衰减率拟合。
"""

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional

import numpy as np
import pandas as pd
from scipy.integrate import cumulative_trapezoid, trapezoid
from scipy.linalg import solve_banded

from ..config.default_config import EVOLUTION_CONFIG
from .errors import ClassificationError, CflViolationError, PreconditionError
from .radial_core import Params, Profile, RadialGrid, l2_weighted_algebraic, l2_weighted_exp, require_same_grid
from .stationary import StationaryWave
from .weight import WeightFunction

logger = logging.getLogger(__name__)

FAMILIES = ('gaussian', 'compact', 'exp_weighted')
TRACE_COLUMNS = ['t', 'sup_error', 'w_chi_sq', 'w_r_sq', 'w_rr_sq', 'boundary_sq', 'diss_32', 'diss_33']


@dataclass(frozen=True)
class PerturbationSpec:
    """
    初始扰动

    family: gaussian | compact | exp_weighted；exp_weighted 需要 beta，
    alpha 只用于报告代数权范数
    """
    family: str = 'compact'
    amplitude: float = 1e-2
    center: float = 5.0
    width: float = 2.0
    alpha: Optional[float] = None
    beta: Optional[float] = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise PreconditionError(f"未知的扰动类型: {self.family}，可选 {FAMILIES}")
        if not self.width > 0:
            raise PreconditionError(f"width必须为正数: {self.width}")
        if self.family == 'exp_weighted' and not (self.beta is not None and self.beta > 0):
            raise PreconditionError("exp_weighted 扰动需要正的 beta")

    def scaled(self, amplitude: float) -> 'PerturbationSpec':
        return PerturbationSpec(self.family, amplitude, self.center, self.width, self.alpha, self.beta)

    def to_dict(self) -> Dict:
        return asdict(self)

    def values(self, r: np.ndarray, r0: float) -> np.ndarray:
        """扰动 p(r)，p(r0) = 0"""
        a, c, w = self.amplitude, self.center, self.width
        if self.family == 'gaussian':
            p = a * (1.0 - np.exp(-((r - r0) / w) ** 2)) * np.exp(-((r - c) / w) ** 2)
        elif self.family == 'compact':
            if c - w < r0:
                raise PreconditionError(f"紧支扰动的支集 [{c - w}, {c + w}] 不能越过 r0={r0}")
            x = (r - c) / w
            p = np.where(np.abs(x) < 1.0, a * (1.0 - x * x) ** 3, 0.0)
        else:
            s = r - r0
            p = -a * (2.0 * s - self.beta * s * s) * np.exp(-self.beta * s)
        p = np.array(p, dtype=float)
        p[0] = 0.0
        return p


@dataclass(frozen=True, eq=False)
class PdeState:
    """演化状态：v 满足 v(r0) = v-，w(r_max) = 0"""
    t: float
    v: Profile
    w: Profile

    @property
    def grid(self) -> RadialGrid:
        return self.v.grid


def anti_derivative(v: np.ndarray, phi: np.ndarray, r: np.ndarray) -> np.ndarray:
    """w(r) = -∫_r^R (v - φ)，自 R 反向梯形累积，w(R) = 0"""
    running = cumulative_trapezoid(v - phi, r, initial=0.0)
    return -(running[-1] - running)


def support_radius(spec: PerturbationSpec, r0: float) -> float:
    """
    扰动的有效支集右端：之外 |p| <= SUPPORT_TOL·max|p|

    exp_weighted 的尾部不超过 β s² e^{-βs}，取 x = βs 满足 x - 2 ln x >= ln(1/SUPPORT_TOL) + 2
    """
    tol = EVOLUTION_CONFIG['SUPPORT_TOL']
    if spec.family == 'compact':
        return spec.center + spec.width
    if spec.family == 'gaussian':
        return spec.center + spec.width * math.sqrt(math.log(1.0 / tol))
    level = math.log(1.0 / tol) + 2.0
    x = level
    for _ in range(20):
        x = level + 2.0 * math.log(x)
    return r0 + x / spec.beta


def minimum_r_max(spec: PerturbationSpec, r0: float) -> float:
    """使最后5%的区间落在有效支集之外的最小截断半径"""
    return (support_radius(spec, r0) - 0.05 * r0) / 0.95


def make_initial_data(wave: StationaryWave, spec: PerturbationSpec) -> PdeState:
    """
    初值 v0 = φ + p 及其反导数 w0

    Args:
        wave: 定常波
        spec: 扰动描述

    Returns:
        t=0 的 PdeState
    """
    r = wave.grid.points
    p = spec.values(r, wave.params.r0)
    scale = float(np.max(np.abs(p)))
    if scale > 0:
        edge = r >= r[-1] - 0.05 * (r[-1] - r[0])
        if np.max(np.abs(p[edge])) > EVOLUTION_CONFIG['SUPPORT_TOL'] * scale:
            raise PreconditionError(f"扰动在 r_max={r[-1]:g} 附近未衰减，反导数的尾部假设不成立，"
                                    f"r_max 至少取 {minimum_r_max(spec, wave.params.r0):.4g}")
    v0 = wave.phi.values + p
    v0[0] = wave.params.v_minus
    w0 = anti_derivative(v0, wave.phi.values, r)
    return PdeState(0.0, Profile(wave.grid, v0, 'v'), Profile(wave.grid, w0, 'w'))


def check_smallness(w0: Profile, chi: WeightFunction, params: Params) -> Dict:
    """
    小性条件 ‖w0‖²(‖w0_r‖² + C_U v+²/(C_L μ²) ‖w0‖²) <= μ⁴ C_L/(64 C_U)

    Returns:
        {'lhs', 'rhs', 'ok', 'w0_sup', 'apriori_bound', 'apriori_ok'}
    """
    r = w0.r
    w0_sq = float(trapezoid(w0.values ** 2, r))
    w0r = np.gradient(w0.values, r, edge_order=2)
    w0r_sq = float(trapezoid(w0r ** 2, r))
    mu = params.mu
    lhs = w0_sq * (w0r_sq + chi.C_U * params.v_plus ** 2 / (chi.C_L * mu * mu) * w0_sq)
    rhs = mu ** 4 * chi.C_L / (64.0 * chi.C_U)
    apriori = math.sqrt(2.0) * w0_sq ** 0.25 * w0r_sq ** 0.25
    return {
        'lhs': lhs,
        'rhs': rhs,
        'ok': bool(lhs <= rhs),
        'w0_sup': float(np.max(np.abs(w0.values))),
        'apriori_bound': apriori,
        'apriori_ok': bool(apriori <= 0.5 * mu),
    }


def max_admissible_amplitude(wave: StationaryWave, spec: PerturbationSpec, chi: WeightFunction) -> float:
    """左端关于振幅四次齐次，临界振幅 a_max = a (rhs/lhs)^{1/4}"""
    state = make_initial_data(wave, spec)
    report = check_smallness(state.w, chi, wave.params)
    if report['lhs'] == 0:
        return math.inf
    return abs(spec.amplitude) * (report['rhs'] / report['lhs']) ** 0.25


def decay_caps(params: Params, chi: WeightFunction) -> Dict[str, float]:
    """β_max = min(2/r0, 8/((8C_U+1) r0))，γ_max = 3μβ/(8 r0 C_U)"""
    r0 = params.r0
    beta_max = min(2.0 / r0, 8.0 / ((8.0 * chi.C_U + 1.0) * r0))
    return {'beta_max': beta_max, 'gamma_max': gamma_cap(params, chi, beta_max)}


def gamma_cap(params: Params, chi: WeightFunction, beta: float) -> float:
    return 3.0 * params.mu * beta / (8.0 * params.r0 * chi.C_U)


@dataclass
class EnergyTrace:
    """能量泛函的采样序列；耗散项为全部时间步上的时间梯形累积"""
    times: List[float] = field(default_factory=list)
    sup_error: List[float] = field(default_factory=list)
    w_sup: List[float] = field(default_factory=list)
    w_chi_sq: List[float] = field(default_factory=list)
    w_over_r_sq: List[float] = field(default_factory=list)
    w_r_chi_sq: List[float] = field(default_factory=list)
    boundary_sq: List[float] = field(default_factory=list)
    w_r_sq: List[float] = field(default_factory=list)
    w_rr_sq: List[float] = field(default_factory=list)
    w_rrr_sq: List[float] = field(default_factory=list)
    diss_32: List[float] = field(default_factory=list)
    diss_33: List[float] = field(default_factory=list)
    diss_34: List[float] = field(default_factory=list)
    boundary_slope: List[float] = field(default_factory=list)

    def record(self, t: float, terms: Dict[str, float], dissipation: Dict[str, float]) -> None:
        self.times.append(t)
        for key in ('sup_error', 'w_sup', 'w_chi_sq', 'w_over_r_sq', 'w_r_chi_sq', 'boundary_sq',
                    'w_r_sq', 'w_rr_sq', 'w_rrr_sq', 'boundary_slope'):
            getattr(self, key).append(terms[key])
        for key in ('diss_32', 'diss_33', 'diss_34'):
            getattr(self, key).append(dissipation[key])

    def __len__(self) -> int:
        return len(self.times)

    def D(self) -> np.ndarray:
        """D(t) = ‖w‖²_χ + μ∫(‖w/r‖² + ‖w_r‖²_χ + w(r0)²/r0)"""
        return np.asarray(self.w_chi_sq) + np.asarray(self.diss_32)

    def energy_inequality_32(self, slack: float = EVOLUTION_CONFIG['ENERGY_SLACK']) -> Dict:
        """D(t) <= ‖w0‖²_χ (1 + slack)"""
        bound = self.w_chi_sq[0] * (1.0 + slack)
        excess = float(np.max(self.D()) - bound)
        return {'bound': bound, 'max_D': float(np.max(self.D())), 'ok': excess <= 0.0}

    def energy_inequality_33(self, params: Params, chi: WeightFunction,
                             slack: float = EVOLUTION_CONFIG['ENERGY_SLACK']) -> Dict:
        """‖w_r‖² + μ∫‖w_rr‖² <= ‖w0_r‖² + v+²/(μ² C_L) ‖w0‖²_χ"""
        bound = self.w_r_sq[0] + params.v_plus ** 2 / (params.mu ** 2 * chi.C_L) * self.w_chi_sq[0]
        lhs = np.asarray(self.w_r_sq) + np.asarray(self.diss_33)
        return {'bound': bound, 'max_lhs': float(np.max(lhs)), 'ok': bool(np.max(lhs) <= bound * (1.0 + slack))}

    def to_frame(self) -> pd.DataFrame:
        data = {'t': self.times}
        for column in TRACE_COLUMNS[1:]:
            data[column] = getattr(self, column)
        return pd.DataFrame(data, columns=TRACE_COLUMNS)

    def to_csv(self, path: str) -> None:
        self.to_frame().to_csv(path, index=False, lineterminator='\n')


@dataclass(frozen=True)
class DtPolicy:
    """时间步策略：固定 dt，或 dt = cfl·h/max|v|"""
    cfl: float = EVOLUTION_CONFIG['CFL']
    dt: Optional[float] = None

    def next_dt(self, h: float, v: np.ndarray) -> float:
        if self.dt is not None:
            return self.dt
        return self.cfl * h / max(float(np.max(np.abs(v))), 1e-12)


class RadialBurgersEvolver:
    """
    定常波附近的IMEX推进器

    线性部分 μ(∂_rr + ∂_r(·/r)) 用Crank-Nicolson隐式处理（三对角），
    对流通量用中心重构的局部Lax-Friedrichs显式处理，两端Dirichlet
    """

    def __init__(self, wave: StationaryWave, well_balanced: bool = EVOLUTION_CONFIG['WELL_BALANCED']):
        """
        初始化推进器

        Args:
            wave: 定常波，其网格须为等距网格
            well_balanced: 是否扣除 φ 的离散残差
        """
        if wave.grid.graded:
            raise PreconditionError("演化需要等距网格")
        if wave.params.n != 2:
            raise PreconditionError(f"演化只针对 n=2: n={wave.params.n}")
        self.wave = wave
        self.params = wave.params
        self.r = wave.grid.points
        self.h = wave.grid.spacing
        self.phi = wave.phi.values
        self.left_value = self.params.v_minus
        self.right_value = float(self.phi[-1])
        mu, h, r = self.params.mu, self.h, self.r
        # L v_j = lower_j v_{j-1} + diag v_j + upper_j v_{j+1}
        self.lower = mu * (1.0 / h ** 2 - 1.0 / (2.0 * h * r[:-2]))
        self.diag = np.full(r.size - 2, -2.0 * mu / h ** 2)
        self.upper = mu * (1.0 / h ** 2 + 1.0 / (2.0 * h * r[2:]))
        self.defect = self.residual(self.phi)
        self.source = -self.defect if well_balanced else np.zeros_like(self.phi)

    def linear(self, v: np.ndarray) -> np.ndarray:
        out = np.zeros_like(v)
        out[1:-1] = self.lower * v[:-2] + self.diag * v[1:-1] + self.upper * v[2:]
        return out

    def convective(self, v: np.ndarray) -> np.ndarray:
        """-(v²/2)_r，局部Lax-Friedrichs通量；内部界面二阶中心重构，紧邻边界处一阶"""
        left = v[:-1].copy()
        right = v[1:].copy()
        left[1:-1] += 0.25 * (v[2:-1] - v[:-3])
        right[1:-1] -= 0.25 * (v[3:] - v[1:-2])
        speed = np.maximum(np.abs(left), np.abs(right))
        flux = 0.25 * (left ** 2 + right ** 2) - 0.5 * speed * (right - left)
        out = np.zeros_like(v)
        out[1:-1] = -(flux[1:] - flux[:-1]) / self.h
        return out

    def residual(self, v: np.ndarray) -> np.ndarray:
        """离散右端 A(v) + L v"""
        return self.convective(v) + self.linear(v)

    def _implicit_solve(self, dt: float, rhs: np.ndarray) -> np.ndarray:
        n = self.r.size
        ab = np.zeros((3, n))
        ab[1, 0] = ab[1, -1] = 1.0
        ab[1, 1:-1] = 1.0 - 0.5 * dt * self.diag
        ab[0, 2:] = -0.5 * dt * self.upper
        ab[2, :-2] = -0.5 * dt * self.lower
        rhs = rhs.copy()
        rhs[0] = self.left_value
        rhs[-1] = self.right_value
        solution = solve_banded((1, 1), ab, rhs)
        if not np.all(np.isfinite(solution)):
            raise PreconditionError("三对角求解失败")
        return solution

    def max_stable_dt(self, v: np.ndarray) -> float:
        return self.h / max(float(np.max(np.abs(v))), 1e-12)

    def advance(self, v: np.ndarray, dt: float) -> np.ndarray:
        """一步IMEX：半步预估后以中点通量做Crank-Nicolson校正"""
        if not dt > 0:
            raise PreconditionError(f"dt必须为正数: {dt}")
        limit = self.max_stable_dt(v)
        if dt > limit * (1.0 + 1e-12):
            raise CflViolationError(f"dt={dt:.6g} 超过对流CFL上限 h/max|v|={limit:.6g}")
        half = self._implicit_solve(dt, v + 0.5 * dt * (self.convective(v) + self.source))
        explicit = v + 0.5 * dt * self.linear(v) + dt * (self.convective(half) + self.source)
        return self._implicit_solve(dt, explicit)

    def step(self, state: PdeState, dt: float) -> PdeState:
        v_new = self.advance(state.v.values, dt)
        w_new = anti_derivative(v_new, self.phi, self.r)
        return PdeState(state.t + dt, state.v.with_values(v_new), state.w.with_values(w_new))

    def energy_terms(self, v: np.ndarray, chi: np.ndarray) -> Dict[str, float]:
        """单时刻的能量量；w_r = v - φ 精确成立，高阶导数用二阶差分"""
        r = self.r
        e = v - self.phi
        w = anti_derivative(v, self.phi, r)
        w_rr = np.gradient(e, r, edge_order=2)
        w_rrr = np.gradient(w_rr, r, edge_order=2)
        return {
            'sup_error': float(np.max(np.abs(e))),
            'w_sup': float(np.max(np.abs(w))),
            'w_chi_sq': float(trapezoid(chi * w * w, r)),
            'w_over_r_sq': float(trapezoid((w / r) ** 2, r)),
            'w_r_chi_sq': float(trapezoid(chi * e * e, r)),
            'boundary_sq': float(w[0] ** 2),
            'w_r_sq': float(trapezoid(e * e, r)),
            'w_rr_sq': float(trapezoid(w_rr * w_rr, r)),
            'w_rrr_sq': float(trapezoid(w_rrr * w_rrr, r)),
            'boundary_slope': float(abs(e[0])),
        }

    def dissipation_rates(self, terms: Dict[str, float]) -> Dict[str, float]:
        mu, r0 = self.params.mu, self.params.r0
        return {
            'diss_32': mu * (terms['w_over_r_sq'] + terms['w_r_chi_sq'] + terms['boundary_sq'] / r0),
            'diss_33': mu * terms['w_rr_sq'],
            'diss_34': mu * terms['w_rrr_sq'],
        }

    def evolve(self, state: PdeState, chi: WeightFunction, t_end: float,
               dt_policy: Optional[DtPolicy] = None,
               sample_every: int = EVOLUTION_CONFIG['SAMPLE_EVERY']) -> EnergyTrace:
        """
        推进到 t_end 并按步数间隔采样能量

        Args:
            state: 初始状态
            chi: 权函数，须与定常波同网格
            t_end: 终止时刻
            dt_policy: 时间步策略
            sample_every: 采样间隔（步数）

        Returns:
            EnergyTrace
        """
        require_same_grid(chi.chi, state.v)
        if dt_policy is None:
            dt_policy = DtPolicy()
        weights = chi.chi.values
        trace = EnergyTrace()
        v = state.v.values.copy()
        t = state.t
        terms = self.energy_terms(v, weights)
        rates = self.dissipation_rates(terms)
        accumulated = {key: 0.0 for key in rates}
        trace.record(t, terms, accumulated)

        n_steps = 0
        while t < t_end * (1.0 - 1e-14):
            dt = min(dt_policy.next_dt(self.h, v), t_end - t)
            v = self.advance(v, dt)
            t += dt
            n_steps += 1
            new_terms = self.energy_terms(v, weights)
            new_rates = self.dissipation_rates(new_terms)
            for key in accumulated:
                accumulated[key] += 0.5 * dt * (rates[key] + new_rates[key])
            rates = new_rates
            if n_steps % sample_every == 0 or t >= t_end * (1.0 - 1e-14):
                trace.record(t, new_terms, dict(accumulated))
                logger.debug(f"t={t:.4f} sup_error={new_terms['sup_error']:.3e}")
        logger.info(f"Evolution finished: {n_steps} steps, t={t:.6g}, sup_error={trace.sup_error[-1]:.3e}")
        return trace


def get_evolver(wave: StationaryWave, well_balanced: bool = EVOLUTION_CONFIG['WELL_BALANCED']) -> RadialBurgersEvolver:
    """工厂函数，返回绑定到定常波的推进器"""
    return RadialBurgersEvolver(wave, well_balanced)


def step(state: PdeState, dt: float, wave: StationaryWave, params: Optional[Params] = None) -> PdeState:
    """单步推进"""
    if params is not None and params != wave.params:
        raise PreconditionError("params 与定常波的参数不一致")
    return get_evolver(wave).step(state, dt)


def evolve(state: PdeState, wave: StationaryWave, chi: WeightFunction,
           t_end: float = EVOLUTION_CONFIG['T_END'],
           dt_policy: Optional[DtPolicy] = None,
           sample_every: int = EVOLUTION_CONFIG['SAMPLE_EVERY']) -> EnergyTrace:
    """推进到 t_end；小性条件不满足时只警告"""
    smallness = check_smallness(state.w, chi, wave.params)
    if not smallness['ok']:
        logger.warning(f"初值不满足小性条件: lhs={smallness['lhs']:.3e} > rhs={smallness['rhs']:.3e}")
    return get_evolver(wave).evolve(state, chi, t_end, dt_policy, sample_every)


def fit_decay(trace: EnergyTrace, model: str = 'exponential', floor: Optional[float] = None) -> Dict:
    """
    sup_error 的衰减率拟合

    丢弃前20%的采样；窗口截止于第一次进入 2 倍底噪之内的采样

    Args:
        trace: 能量序列
        model: 'algebraic'（对 ln(1+t)）或 'exponential'（对 t）
        floor: 离散底噪，默认取序列最小值

    Returns:
        {'model', 'rate', 'quality', 'window', 'samples'}
    """
    if model not in ('algebraic', 'exponential'):
        raise PreconditionError(f"未知的衰减模型: {model}")
    t = np.asarray(trace.times)
    y = np.asarray(trace.sup_error)
    start = int(math.ceil(EVOLUTION_CONFIG['TRANSIENT_FRACTION'] * t.size))
    t, y = t[start:], y[start:]
    positive = y > 0
    if floor is None:
        floor = float(np.min(y[positive])) if np.any(positive) else 0.0
    near_floor = np.nonzero(y <= EVOLUTION_CONFIG['FLOOR_FACTOR'] * floor)[0]
    end = int(near_floor[0]) if near_floor.size else t.size
    t, y = t[:end], y[:end]
    if t.size < 3 or np.any(y <= 0):
        raise ClassificationError(f"底噪之前的采样不足以拟合: {t.size} 个")
    x = np.log1p(t) if model == 'algebraic' else t
    log_y = np.log(y)
    slope, intercept = np.polyfit(x, log_y, 1)
    fitted = slope * x + intercept
    total = float(np.sum((log_y - log_y.mean()) ** 2))
    quality = 1.0 - float(np.sum((log_y - fitted) ** 2)) / total if total > 0 else 1.0
    return {'model': model, 'rate': float(-slope), 'quality': quality,
            'window': [float(t[0]), float(t[-1])], 'samples': int(t.size)}


def weighted_norms(state: PdeState, spec: PerturbationSpec) -> Dict[str, Optional[float]]:
    """初始反导数的代数权或指数权范数"""
    return {
        'algebraic': l2_weighted_algebraic(state.w, spec.alpha) if spec.alpha is not None else None,
        'exponential': l2_weighted_exp(state.w, spec.beta) if spec.beta is not None else None,
    }
