"""
权函数 χ

χ(r) = e^{-Ψ(r)} ∫_r^∞ (2/r0 - 1/s) e^{Ψ(s)} ds，Ψ(r) = (1/μ) ∫_{r0}^r ψ
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict

import numpy as np
from scipy.integrate import quad

from ..config.default_config import STATIONARY_CONFIG, WEIGHT_CONFIG
from .errors import PreconditionError
from .radial_core import Params, Profile, RadialGrid, cumulative_integral, derivative, require_same_grid
from .stationary import SUBCRITICAL, StationaryWave, WaveClassification

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class WeightFunction:
    """
    权函数及其上下界

    tail_bound 为截断误差相对 χ 的逐点上界的最大值，tail_bound_abs 为对应的绝对量
    """
    chi: Profile
    C_L: float
    C_U: float
    tail_cutoff: float
    tail_bound: float
    tail_bound_abs: float = 0.0

    @property
    def argmin(self) -> float:
        return float(self.chi.r[int(np.argmin(self.chi.values))])

    @property
    def argmax(self) -> float:
        return float(self.chi.r[int(np.argmax(self.chi.values))])

    def to_csv(self, path: str) -> None:
        frame = self.chi.to_frame().rename(columns={'value': 'chi'})
        frame.to_csv(path, index=False, lineterminator='\n')

    def to_dict(self) -> Dict[str, float]:
        return {
            'C_L': self.C_L,
            'C_U': self.C_U,
            'tail_cutoff': self.tail_cutoff,
            'tail_bound': self.tail_bound,
            'tail_bound_abs': self.tail_bound_abs,
            'argmin': self.argmin,
            'argmax': self.argmax,
        }


def chi_constant_psi(r, params: Params):
    """
    ψ ≡ v+ 时的 χ：∫_r^∞ (2/r0 - 1/s) e^{v+(s-r)/μ} ds

    自适应求积，积分变量取 s - r 以避免指数溢出
    """
    if not params.v_plus < 0:
        raise PreconditionError(f"需要 v+ < 0: v+={params.v_plus}")
    rate = params.v_plus / params.mu
    rs = np.atleast_1d(np.asarray(r, dtype=float))
    out = np.empty_like(rs)
    for i, x in enumerate(rs):
        out[i], _ = quad(lambda t: (2.0 / params.r0 - 1.0 / (x + t)) * math.exp(rate * t),
                         0.0, np.inf, epsabs=1e-14, epsrel=1e-13, limit=200)
    return out if np.ndim(r) else float(out[0])


def synthetic_wave(params: Params, grid: RadialGrid) -> StationaryWave:
    """ψ ≡ v+ 的参照波"""
    psi = Profile(grid, np.full(grid.size, float(params.v_plus)), 'psi')
    phi = psi.with_values(psi.values + params.shift(grid.points), 'phi')
    classification = WaveClassification(SUBCRITICAL, grid.r0, 'synthetic constant profile')
    return StationaryWave(psi, phi, classification, params, decay_constant=0.0, decay_slope=None)


def _far_field_constant(wave: StationaryWave) -> float:
    """|ψ - v+| <= C r^{-2} 的常数，取尾部节点的最大值与拟合值中较大者"""
    r = wave.psi.r
    tail = r >= r[-1] - STATIONARY_CONFIG['TAIL_FRACTION'] * (r[-1] - r[0])
    measured = float(np.max(np.abs(wave.psi.values[tail] - wave.params.v_plus) * r[tail] ** 2))
    return max(measured, wave.decay_constant or 0.0)


def build_chi(wave: StationaryWave, tol: float = WEIGHT_CONFIG['TAIL_TOL']) -> WeightFunction:
    """
    在定常波网格上构造 χ

    从 S = r_max 向 r0 单次反向扫描累积内层积分；S 以外用 ψ ≡ v+ 的尾部近似，
    其误差由 |ψ - v+| <= C s^{-2} 给出的因子 e^{C/(μS)} 控制

    Args:
        wave: 次临界定常波（n=2）
        tol: 截断误差相对容差

    Returns:
        WeightFunction
    """
    params = wave.params
    if wave.classification.kind != SUBCRITICAL:
        raise PreconditionError(f"χ 需要次临界波，当前为 {wave.classification.kind}")
    if params.n != 2:
        raise PreconditionError(f"χ 只针对 n=2: n={params.n}")
    if not params.v_plus < 0:
        raise PreconditionError(f"χ 需要 v+ < 0: v+={params.v_plus}")

    mu, r0 = params.mu, params.r0
    r = wave.psi.r
    big_psi = cumulative_integral(wave.psi).values / mu
    source = 2.0 / r0 - 1.0 / r

    S = float(r[-1])
    tail = chi_constant_psi(S, params)
    chi = np.empty_like(r)
    chi[-1] = tail
    for i in range(r.size - 2, -1, -1):
        growth = math.exp(big_psi[i + 1] - big_psi[i])
        h = r[i + 1] - r[i]
        chi[i] = growth * chi[i + 1] + 0.5 * h * (source[i] + source[i + 1] * growth)

    C = _far_field_constant(wave)
    error_at_S = tail * math.expm1(C / (mu * S))
    nodal_bound = error_at_S * np.exp(big_psi[-1] - big_psi)
    relative = nodal_bound / chi
    tail_bound = float(np.max(relative))
    if tail_bound > tol:
        raise PreconditionError(
            f"截断误差 {tail_bound:.3g} 超过容差 {tol}，需先扩大 r_max（当前 {S:g}）"
        )

    profile = Profile(wave.psi.grid, chi, 'chi')
    if np.any(profile.values <= 0):
        raise PreconditionError("χ 出现非正值")
    wf = WeightFunction(profile, float(chi.min()), float(chi.max()), S, tail_bound, float(np.max(nodal_bound)))
    logger.info(f"Weight function: C_L={wf.C_L:.6g}, C_U={wf.C_U:.6g}, tail_bound={tail_bound:.3g}")
    return wf


def chi_residual(wf: WeightFunction, wave: StationaryWave) -> Profile:
    """逐点残差 μχ' + ψχ + μ(2/r0 - 1/r)，χ' 用二阶差分"""
    require_same_grid(wf.chi, wave.psi)
    params = wave.params
    r = wf.chi.r
    dchi = derivative(wf.chi).values
    residual = params.mu * dchi + wave.psi.values * wf.chi.values + params.mu * (2.0 / params.r0 - 1.0 / r)
    return Profile(wf.chi.grid, residual, 'chi_residual')
