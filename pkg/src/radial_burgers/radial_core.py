"""径向网格、剖面、求积、差分与范数"""

import logging
from dataclasses import dataclass
from typing import Callable, Dict, Optional

import numpy as np
import pandas as pd
from scipy.integrate import cumulative_trapezoid, trapezoid

from .errors import GridMismatchError, PreconditionError

logger = logging.getLogger(__name__)

# 区间端点比较的相对容差
_ENDPOINT_RTOL = 1e-12


@dataclass(frozen=True)
class Params:
    """
    物理/问题参数

    V_minus 总是由其余字段计算，不单独存储：V- = v- - μ(n-1)/r0
    """
    mu: float
    r0: float
    n: int
    v_plus: float
    v_minus: float

    def __post_init__(self):
        if not self.mu > 0:
            raise PreconditionError(f"mu必须为正数: {self.mu}")
        if not self.r0 > 0:
            raise PreconditionError(f"r0必须为正数: {self.r0}")
        if int(self.n) != self.n or self.n < 2:
            raise PreconditionError(f"n必须是不小于2的整数: {self.n}")
        if not (np.isfinite(self.v_plus) and np.isfinite(self.v_minus)):
            raise PreconditionError("v_plus 与 v_minus 必须是有限数")
        object.__setattr__(self, 'n', int(self.n))

    @property
    def V_minus(self) -> float:
        """平移后的边界值 V- = v- - μ(n-1)/r0"""
        return self.v_minus - self.mu * (self.n - 1) / self.r0

    def shift(self, r):
        """几何平移项 μ(n-1)/r，φ = ψ + shift(r)"""
        return self.mu * (self.n - 1) / np.asarray(r, dtype=float)

    @classmethod
    def from_shifted(cls, mu: float, r0: float, n: int, v_plus: float, V_minus: float) -> 'Params':
        """由平移边界值V-构造参数"""
        return cls(mu=mu, r0=r0, n=n, v_plus=v_plus, v_minus=V_minus + mu * (n - 1) / r0)

    def with_V_minus(self, V_minus: float) -> 'Params':
        """返回只改变V-的新参数"""
        return Params.from_shifted(self.mu, self.r0, self.n, self.v_plus, V_minus)

    def to_dict(self) -> Dict[str, float]:
        return {
            'mu': self.mu,
            'r0': self.r0,
            'n': self.n,
            'v_plus': self.v_plus,
            'v_minus': self.v_minus,
            'V_minus': self.V_minus,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> 'Params':
        return cls(mu=float(data['mu']), r0=float(data['r0']), n=int(data['n']),
                   v_plus=float(data['v_plus']), v_minus=float(data['v_minus']))


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """严格递增的径向节点，points[0]=r0，points[-1]=r_max"""
    points: np.ndarray
    graded: bool = False

    def __post_init__(self):
        points = np.array(self.points, dtype=float)
        if points.ndim != 1 or points.size < 3:
            raise PreconditionError(f"网格至少需要3个节点，当前: {points.size}")
        if not np.all(np.isfinite(points)):
            raise PreconditionError("网格节点必须是有限数")
        if np.any(np.diff(points) <= 0):
            raise PreconditionError("网格节点必须严格递增")
        if not self.graded:
            h = np.diff(points)
            if np.max(np.abs(h - h.mean())) > 1e-9 * h.mean() * points.size:
                raise PreconditionError("非等距网格必须标记为graded")
        points.setflags(write=False)
        object.__setattr__(self, 'points', points)

    @classmethod
    def uniform(cls, r0: float, r_max: float, nodes: int) -> 'RadialGrid':
        if not r_max > r0:
            raise PreconditionError(f"r_max必须大于r0: r0={r0}, r_max={r_max}")
        return cls(np.linspace(r0, r_max, int(nodes)))

    @property
    def r0(self) -> float:
        return float(self.points[0])

    @property
    def r_max(self) -> float:
        return float(self.points[-1])

    @property
    def size(self) -> int:
        return int(self.points.size)

    @property
    def spacing(self) -> float:
        """等距网格的步长"""
        return (self.r_max - self.r0) / (self.size - 1)

    def refined(self) -> 'RadialGrid':
        """区间数加倍"""
        if self.graded:
            mids = 0.5 * (self.points[1:] + self.points[:-1])
            pts = np.empty(2 * self.size - 1)
            pts[0::2] = self.points
            pts[1::2] = mids
            return RadialGrid(pts, graded=True)
        return RadialGrid.uniform(self.r0, self.r_max, 2 * self.size - 1)

    def same_as(self, other: 'RadialGrid') -> bool:
        return self is other or (self.size == other.size and np.array_equal(self.points, other.points))


@dataclass(frozen=True, eq=False)
class Profile:
    """网格上的采样函数（ψ, φ, η, χ, v(t,·), w(t,·) ...）"""
    grid: RadialGrid
    values: np.ndarray
    label: str = ''

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != self.grid.points.shape:
            raise PreconditionError(
                f"剖面长度 {values.shape} 与网格长度 {self.grid.points.shape} 不一致"
            )
        if not np.all(np.isfinite(values)):
            raise PreconditionError(f"剖面 '{self.label}' 含有非有限值")
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)

    @classmethod
    def from_function(cls, grid: RadialGrid, func: Callable, label: str = '') -> 'Profile':
        return cls(grid, np.asarray(func(grid.points), dtype=float) * np.ones(grid.size), label)

    @property
    def r(self) -> np.ndarray:
        return self.grid.points

    def with_values(self, values, label: Optional[str] = None) -> 'Profile':
        return Profile(self.grid, values, self.label if label is None else label)

    def __call__(self, r):
        """分段线性插值求值"""
        return np.interp(r, self.grid.points, self.values)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({'r': self.grid.points, 'value': self.values})

    def to_csv(self, path: str) -> None:
        """以 `r,value` 表头写出，浮点使用最短往返表示"""
        self.to_frame().to_csv(path, index=False, lineterminator='\n')

    @classmethod
    def from_csv(cls, path: str, label: str = '') -> 'Profile':
        frame = pd.read_csv(path, float_precision='round_trip')
        if list(frame.columns[:2]) != ['r', 'value']:
            raise PreconditionError(f"CSV表头必须为 r,value: {path}")
        points = frame['r'].to_numpy()
        h = np.diff(points)
        graded = bool(np.max(np.abs(h - h.mean())) > 1e-9 * h.mean() * points.size)
        return cls(RadialGrid(points, graded=graded), frame['value'].to_numpy(), label)


def require_same_grid(p: Profile, q: Profile) -> None:
    if not p.grid.same_as(q.grid):
        raise GridMismatchError(f"剖面 '{p.label}' 与 '{q.label}' 不在同一网格上")


def trapezoid_integral(p: Profile, a: float, b: float) -> float:
    """
    复合梯形公式计算 ∫_a^b p，非节点端点用线性插值

    Args:
        p: 被积剖面
        a: 下限，r0 <= a <= b
        b: 上限，b <= r_max

    Returns:
        积分近似值
    """
    x = p.grid.points
    slack = _ENDPOINT_RTOL * max(abs(x[0]), abs(x[-1]), 1.0)
    if a < x[0] - slack or b > x[-1] + slack or a > b:
        raise PreconditionError(f"积分区间 [{a}, {b}] 超出网格 [{x[0]}, {x[-1]}] 或顺序错误")
    a = min(max(a, x[0]), x[-1])
    b = min(max(b, x[0]), x[-1])
    if a == b:
        return 0.0
    inside = (x > a) & (x < b)
    xs = np.concatenate(([a], x[inside], [b]))
    ys = np.concatenate(([np.interp(a, x, p.values)], p.values[inside], [np.interp(b, x, p.values)]))
    return float(trapezoid(ys, xs))


def cumulative_integral(p: Profile) -> Profile:
    """节点对齐的累积梯形积分，首值为0"""
    running = cumulative_trapezoid(p.values, p.grid.points, initial=0.0)
    return Profile(p.grid, running, f"int({p.label})")


def derivative(p: Profile) -> Profile:
    """内部二阶中心差分，端点二阶单侧差分"""
    if p.grid.size < 3:
        raise PreconditionError("求导至少需要3个节点")
    return Profile(p.grid, np.gradient(p.values, p.grid.points, edge_order=2), f"d({p.label})")


def squared_l2(values: np.ndarray, points: np.ndarray, weight: Optional[np.ndarray] = None) -> float:
    """梯形公式计算 ∫ weight * values^2，供热循环直接使用数组"""
    integrand = values * values if weight is None else weight * values * values
    return float(trapezoid(integrand, points))


def norms(p: Profile, weight: Optional[Profile] = None) -> Dict[str, Optional[float]]:
    """
    计算剖面的上确界范数、L2范数和χ加权L2范数

    Args:
        p: 剖面
        weight: 权函数剖面（可选），须与p同网格且为正

    Returns:
        {'sup_norm', 'l2_norm', 'weighted_l2'}，无权函数时weighted_l2为None
    """
    result = {
        'sup_norm': float(np.max(np.abs(p.values))),
        'l2_norm': float(np.sqrt(squared_l2(p.values, p.grid.points))),
        'weighted_l2': None,
    }
    if weight is not None:
        require_same_grid(p, weight)
        if np.any(weight.values <= 0):
            raise PreconditionError(f"权函数 '{weight.label}' 必须处处为正")
        result['weighted_l2'] = float(np.sqrt(squared_l2(p.values, p.grid.points, weight.values)))
    return result


def l2_weighted_algebraic(p: Profile, alpha: float) -> float:
    """代数权范数 ‖r^{α/2} p‖"""
    return float(np.sqrt(squared_l2(p.values, p.grid.points, p.grid.points ** alpha)))


def l2_weighted_exp(p: Profile, beta: float) -> float:
    """指数权范数 ‖e^{βr/2} p‖"""
    return float(np.sqrt(squared_l2(p.values, p.grid.points, np.exp(beta * p.grid.points))))
