"""异常类型定义"""

from typing import Any, Optional


class RadialBurgersError(Exception):
    """所有数值流程异常的基类"""


class PreconditionError(RadialBurgersError, ValueError):
    """操作的前置条件不满足（参数区间、存在性条件等）"""


class GridMismatchError(RadialBurgersError, ValueError):
    """两个剖面不在同一网格上"""


class ClassificationError(RadialBurgersError):
    """拟合或分类的输入数据无意义，例如窗口内符号改变"""


class CflViolationError(RadialBurgersError):
    """时间步长违反对流CFL条件"""


class IntegrationError(RadialBurgersError):
    """
    ODE积分失败

    Args:
        message: 错误描述
        direction: 积分方向标签，'forward' 或 'backward'
        outcome: 失败前的部分积分结果
    """

    def __init__(self, message: str, direction: Optional[str] = None, outcome: Any = None):
        if direction:
            message = f"[{direction}] {message}"
        super().__init__(message)
        self.direction = direction
        self.outcome = outcome
