"""
径向变量上的标量ODE自适应积分器

Dormand-Prince 5(4) 嵌入式Runge-Kutta对，PI步长控制，支持正向/反向积分、
事件（符号变化）二分定位以及基于存储导数的三次Hermite重采样。
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from ..config.default_config import ODE_CONFIG
from .errors import IntegrationError, PreconditionError
from .radial_core import Profile, RadialGrid

logger = logging.getLogger(__name__)

Rhs = Callable[[float, float], float]

COMPLETED = 'completed'
EVENT_TRIGGERED = 'event_triggered'
STEP_SIZE_UNDERFLOW = 'step_size_underflow'


@dataclass(frozen=True)
class OdeProblem:
    """y' = rhs(r, y)，从 (r_start, y_start) 积分到 r_end（可小于r_start）"""
    rhs: Rhs
    r_start: float
    y_start: float
    r_end: float

    def __post_init__(self):
        if self.r_start == self.r_end:
            raise PreconditionError("r_start 与 r_end 不能相同")
        if not (math.isfinite(self.r_start) and math.isfinite(self.r_end) and math.isfinite(self.y_start)):
            raise PreconditionError("初值与区间端点必须是有限数")

    @property
    def direction(self) -> float:
        return 1.0 if self.r_end > self.r_start else -1.0


@dataclass(frozen=True)
class EventSpec:
    """事件：predicate(r, y) 的符号变化；terminal为True时停止积分"""
    event_id: str
    predicate: Rhs
    terminal: bool = True


@dataclass(frozen=True)
class EventRecord:
    event_id: str
    r_event: float
    y_event: float
    bracket: Tuple[float, float]


@dataclass(frozen=True, eq=False)
class IntegrationOutcome:
    """
    积分结果

    r, y, dy 按积分方向存放在接受步的节点上；status 为 completed /
    event_triggered / step_size_underflow 之一
    """
    status: str
    r: np.ndarray
    y: np.ndarray
    dy: np.ndarray
    event: Optional[EventRecord] = None
    passed_events: Tuple[EventRecord, ...] = ()
    n_steps: int = 0
    n_rejected: int = 0
    direction: float = 1.0

    @property
    def completed(self) -> bool:
        return self.status == COMPLETED

    @property
    def r_last(self) -> float:
        return float(self.r[-1])

    @property
    def y_last(self) -> float:
        return float(self.y[-1])

    def _ascending(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        if self.direction > 0:
            return self.r, self.y, self.dy
        return self.r[::-1], self.y[::-1], self.dy[::-1]

    @property
    def trajectory(self) -> Profile:
        """接受步节点上的轨迹（按r升序的非等距网格）"""
        r, y, _ = self._ascending()
        return Profile(RadialGrid(r, graded=True), y, 'trajectory')

    def spline(self) -> CubicHermiteSpline:
        """以存储导数构造的三次Hermite插值"""
        r, y, dy = self._ascending()
        return CubicHermiteSpline(r, y, dy)

    def resample(self, grid: RadialGrid, label: str = '') -> Profile:
        """用存储的导数做三次Hermite插值，重采样到给定网格"""
        r, y, dy = self._ascending()
        return hermite_resample(r, y, dy, grid, label)


def hermite_resample(r: np.ndarray, y: np.ndarray, dy: np.ndarray,
                     grid: RadialGrid, label: str = '') -> Profile:
    """三次Hermite重采样；网格须落在节点范围内"""
    span = max(abs(r[0]), abs(r[-1]), 1.0)
    if grid.r0 < r[0] - 1e-12 * span or grid.r_max > r[-1] + 1e-12 * span:
        raise PreconditionError(
            f"重采样网格 [{grid.r0}, {grid.r_max}] 超出轨迹范围 [{r[0]}, {r[-1]}]"
        )
    spline = CubicHermiteSpline(r, y, dy)
    points = np.clip(grid.points, r[0], r[-1])
    return Profile(grid, spline(points), label)


class DormandPrince54:
    """
    Dormand-Prince 5(4) 积分器

    七级，五阶推进、四阶嵌入误差估计，FSAL（第七级导数即新节点导数，
    直接作为Hermite重采样的导数存储）
    """

    C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
    A = (
        (),
        (1 / 5,),
        (3 / 40, 9 / 40),
        (44 / 45, -56 / 15, 32 / 9),
        (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
        (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
        (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
    )
    B = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0)
    # 五阶与四阶权重之差，用于局部误差估计
    E = (71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)

    def __init__(self, rel_tol: float = ODE_CONFIG['REL_TOL'], abs_tol: float = ODE_CONFIG['ABS_TOL']):
        """
        初始化积分器

        Args:
            rel_tol: 相对容差，取值 (0, 1e-2]
            abs_tol: 绝对容差，取值 (0, 1e-2]
        """
        for name, tol in (('rel_tol', rel_tol), ('abs_tol', abs_tol)):
            if not 0 < tol <= ODE_CONFIG['MAX_TOL']:
                raise PreconditionError(f"{name} 必须在 (0, {ODE_CONFIG['MAX_TOL']}] 内: {tol}")
        self.rel_tol = rel_tol
        self.abs_tol = abs_tol
        self.safety = ODE_CONFIG['SAFETY']
        self.min_factor = ODE_CONFIG['MIN_FACTOR']
        self.max_factor = ODE_CONFIG['MAX_FACTOR']
        self.alpha = ODE_CONFIG['PI_ALPHA']
        self.beta = ODE_CONFIG['PI_BETA']
        self.max_steps = ODE_CONFIG['MAX_STEPS']

    def _stages(self, f: Rhs, r: float, y: float, h: float, k1: float) -> Tuple[float, float, float]:
        """单步：返回 (五阶新值, 新节点导数k7, 误差估计)"""
        k = [k1]
        for i in range(1, 7):
            yi = y + h * sum(a * kj for a, kj in zip(self.A[i], k))
            k.append(f(r + self.C[i] * h, yi))
        y_new = y + h * sum(b * kj for b, kj in zip(self.B, k))
        err = h * sum(e * kj for e, kj in zip(self.E, k))
        return y_new, k[6], err

    def _locate_event(self, f: Rhs, event: EventSpec, r: float, y: float, h: float,
                      k1: float, g_start: float) -> EventRecord:
        """在 [r, r+h] 内二分定位事件，子步用同一Runge-Kutta公式重新推进"""
        lo, hi = 0.0, 1.0
        y_hi = y
        target = ODE_CONFIG['EVENT_ACCURACY']
        while True:
            r_hi = r + hi * h
            if abs(hi - lo) * abs(h) <= target * max(abs(r_hi), np.finfo(float).tiny):
                break
            mid = 0.5 * (lo + hi)
            y_mid = self._stages(f, r, y, mid * h, k1)[0]
            g_mid = event.predicate(r + mid * h, y_mid)
            if (g_mid > 0) == (g_start > 0) and g_mid != 0:
                lo = mid
            else:
                hi, y_hi = mid, y_mid
            if mid in (lo, hi) and hi - lo <= np.finfo(float).eps:
                break
        if hi == 1.0:
            y_hi = self._stages(f, r, y, h, k1)[0]
        r_lo, r_hi = r + lo * h, r + hi * h
        return EventRecord(event.event_id, r_hi, float(y_hi), (min(r_lo, r_hi), max(r_lo, r_hi)))

    def integrate(self, problem: OdeProblem, events: Sequence[EventSpec] = (),
                  stops: Optional[Sequence[float]] = None) -> IntegrationOutcome:
        """
        积分ODE问题

        Args:
            problem: ODE问题
            events: 事件列表
            stops: 必须落在接受步节点上的半径（按积分方向截短步长），
                   使这些点上的 y 与 dy 是积分值而非插值

        Returns:
            IntegrationOutcome，终止事件或步长下溢都不抛异常，由status表示
        """
        f = problem.rhs
        direction = problem.direction
        r, y = float(problem.r_start), float(problem.y_start)
        r_end = float(problem.r_end)
        k1 = f(r, y)
        if not math.isfinite(k1):
            raise IntegrationError(f"右端项在初始点 r={r} 处非有限", outcome=None)

        rs: List[float] = [r]
        ys: List[float] = [y]
        dys: List[float] = [k1]
        passed: List[EventRecord] = []
        g_prev = [ev.predicate(r, y) for ev in events]
        pending = self._pending_stops(stops, r, r_end, direction)
        next_stop = 0

        h = direction * ODE_CONFIG['INITIAL_STEP_FRACTION'] * abs(r_end - r)
        err_prev = 1.0
        n_steps = n_rejected = 0
        status = COMPLETED
        terminal_event: Optional[EventRecord] = None
        underflow = ODE_CONFIG['UNDERFLOW_FACTOR']

        while (r_end - r) * direction > 0:
            if n_steps >= self.max_steps:
                raise IntegrationError(f"超过最大步数 {self.max_steps}，停在 r={r}",
                                       outcome=self._outcome(status, rs, ys, dys, None, passed,
                                                             n_steps, n_rejected, direction))
            if abs(h) < underflow * max(abs(r), np.finfo(float).tiny):
                status = STEP_SIZE_UNDERFLOW
                logger.debug(f"步长下溢: r={r}, h={h}, y={y}")
                break
            while next_stop < len(pending) and (pending[next_stop] - r) * direction <= 0:
                next_stop += 1
            target = None
            step = h
            if (r + step - r_end) * direction >= 0:
                step, target = r_end - r, r_end
            if next_stop < len(pending) and (r + step - pending[next_stop]) * direction >= 0:
                step, target = pending[next_stop] - r, pending[next_stop]

            y_new, k_new, err = self._stages(f, r, y, step, k1)
            scale = self.abs_tol + self.rel_tol * max(abs(y), abs(y_new))
            err_norm = abs(err) / scale if math.isfinite(err) and math.isfinite(y_new) else math.inf

            if err_norm > 1.0 or not math.isfinite(k_new):
                n_rejected += 1
                if math.isfinite(err_norm):
                    factor = max(self.min_factor, self.safety * err_norm ** -0.2)
                else:
                    factor = self.min_factor
                h = step * factor
                continue

            # 接受该步
            r_new = target if target is not None else r + step
            fired = None
            for idx, ev in enumerate(events):
                g_new = ev.predicate(r_new, y_new)
                if g_prev[idx] != 0 and (g_new == 0 or (g_new > 0) != (g_prev[idx] > 0)):
                    record = self._locate_event(f, ev, r, y, step, k1, g_prev[idx])
                    if ev.terminal:
                        if fired is None or abs(record.r_event - r) < abs(fired.r_event - r):
                            fired = record
                    else:
                        passed.append(record)
                g_prev[idx] = g_new

            if fired is not None:
                rs.append(fired.r_event)
                ys.append(fired.y_event)
                dys.append(f(fired.r_event, fired.y_event))
                terminal_event = fired
                status = EVENT_TRIGGERED
                n_steps += 1
                break

            r, y, k1 = r_new, y_new, k_new
            rs.append(r)
            ys.append(y)
            dys.append(k1)
            n_steps += 1

            err_norm = max(err_norm, 1e-10)
            factor = self.safety * err_norm ** -self.alpha * err_prev ** self.beta
            proposal = step * min(self.max_factor, max(self.min_factor, factor))
            # 被截短的步不缩小后续步长
            h = proposal if target is None else direction * max(abs(proposal), abs(h))
            err_prev = err_norm

        return self._outcome(status, rs, ys, dys, terminal_event, passed, n_steps, n_rejected, direction)

    @staticmethod
    def _pending_stops(stops: Optional[Sequence[float]], r_start: float, r_end: float,
                       direction: float) -> np.ndarray:
        """严格位于 (r_start, r_end) 内的停靠点，按积分方向排序"""
        if stops is None:
            return np.empty(0)
        points = np.unique(np.asarray(stops, dtype=float))
        lo, hi = min(r_start, r_end), max(r_start, r_end)
        points = points[(points > lo) & (points < hi)]
        return points if direction > 0 else points[::-1]

    @staticmethod
    def _outcome(status, rs, ys, dys, event, passed, n_steps, n_rejected, direction) -> IntegrationOutcome:
        return IntegrationOutcome(
            status=status,
            r=np.asarray(rs),
            y=np.asarray(ys),
            dy=np.asarray(dys),
            event=event,
            passed_events=tuple(passed),
            n_steps=n_steps,
            n_rejected=n_rejected,
            direction=direction,
        )


def get_integrator(rel_tol: float = ODE_CONFIG['REL_TOL'],
                   abs_tol: float = ODE_CONFIG['ABS_TOL']) -> DormandPrince54:
    """工厂函数，返回配置好的积分器实例"""
    return DormandPrince54(rel_tol=rel_tol, abs_tol=abs_tol)


def integrate(problem: OdeProblem, events: Sequence[EventSpec] = (),
              rel_tol: float = ODE_CONFIG['REL_TOL'],
              abs_tol: float = ODE_CONFIG['ABS_TOL'],
              stops: Optional[Sequence[float]] = None) -> IntegrationOutcome:
    """积分单个ODE问题"""
    return get_integrator(rel_tol, abs_tol).integrate(problem, events, stops)


@dataclass(frozen=True, eq=False)
class BidirectionalOutcome:
    """锚点两侧积分合并后的结果，节点升序且锚点只出现一次"""
    r: np.ndarray
    y: np.ndarray
    dy: np.ndarray
    backward: Optional[IntegrationOutcome] = None
    forward: Optional[IntegrationOutcome] = None
    anchor_index: int = 0

    @property
    def profile(self) -> Profile:
        return Profile(RadialGrid(self.r, graded=True), self.y, 'bidirectional')

    def resample(self, grid: RadialGrid, label: str = '') -> Profile:
        return hermite_resample(self.r, self.y, self.dy, grid, label)


def integrate_bidirectional_outcome(anchor_r: float, anchor_y: float, rhs: Rhs,
                                    left_end: float, right_end: float,
                                    events: Sequence[EventSpec] = (),
                                    rel_tol: float = ODE_CONFIG['REL_TOL'],
                                    abs_tol: float = ODE_CONFIG['ABS_TOL']) -> BidirectionalOutcome:
    """从内部锚点分别向左、向右积分并合并，保留导数以便重采样"""
    if not left_end <= anchor_r <= right_end or left_end == right_end:
        raise PreconditionError(
            f"需要 left_end <= anchor_r <= right_end 且区间非空: {left_end}, {anchor_r}, {right_end}"
        )
    integrator = get_integrator(rel_tol, abs_tol)
    backward = forward = None
    r_parts, y_parts, dy_parts = [], [], []

    if left_end < anchor_r:
        backward = integrator.integrate(OdeProblem(rhs, anchor_r, anchor_y, left_end), events)
        if not backward.completed:
            raise IntegrationError(f"反向积分未到达 r={left_end}，状态 {backward.status}，停在 r={backward.r_last}",
                                   direction='backward', outcome=backward)
        r_parts.append(backward.r[::-1])
        y_parts.append(backward.y[::-1])
        dy_parts.append(backward.dy[::-1])

    if anchor_r < right_end:
        forward = integrator.integrate(OdeProblem(rhs, anchor_r, anchor_y, right_end), events)
        if not forward.completed:
            raise IntegrationError(f"正向积分未到达 r={right_end}，状态 {forward.status}，停在 r={forward.r_last}",
                                   direction='forward', outcome=forward)
        # 锚点已包含在反向结果中时去掉重复
        start = 1 if backward is not None else 0
        r_parts.append(forward.r[start:])
        y_parts.append(forward.y[start:])
        dy_parts.append(forward.dy[start:])

    anchor_index = backward.r.size - 1 if backward is not None else 0
    return BidirectionalOutcome(
        r=np.concatenate(r_parts),
        y=np.concatenate(y_parts),
        dy=np.concatenate(dy_parts),
        backward=backward,
        forward=forward,
        anchor_index=anchor_index,
    )


def integrate_bidirectional(anchor_r: float, anchor_y: float, rhs: Rhs,
                            left_end: float, right_end: float,
                            events: Sequence[EventSpec] = (),
                            rel_tol: float = ODE_CONFIG['REL_TOL'],
                            abs_tol: float = ODE_CONFIG['ABS_TOL']) -> Profile:
    """
    锚点双向积分

    Args:
        anchor_r: 锚点半径
        anchor_y: 锚点处的值
        rhs: 右端项 f(r, y)
        left_end: 左端点
        right_end: 右端点
        events: 事件列表
        rel_tol: 相对容差
        abs_tol: 绝对容差

    Returns:
        节点升序的合并剖面，锚点只出现一次
    """
    return integrate_bidirectional_outcome(anchor_r, anchor_y, rhs, left_end, right_end,
                                           events, rel_tol, abs_tol).profile


def rk4_fixed(rhs: Rhs, r_start: float, y_start: float, r_end: float, h: float) -> Tuple[np.ndarray, np.ndarray]:
    """定步长经典RK4，作为独立参照解"""
    steps = max(1, int(math.ceil(abs(r_end - r_start) / h)))
    step = (r_end - r_start) / steps
    rs = np.empty(steps + 1)
    ys = np.empty(steps + 1)
    r, y = r_start, y_start
    rs[0], ys[0] = r, y
    for i in range(1, steps + 1):
        k1 = rhs(r, y)
        k2 = rhs(r + step / 2, y + step / 2 * k1)
        k3 = rhs(r + step / 2, y + step / 2 * k2)
        k4 = rhs(r + step, y + step * k3)
        y = y + step / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        r = r_start + i * step
        rs[i], ys[i] = r, y
    return rs, ys
