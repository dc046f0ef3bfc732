"""数值配置模块"""

# 导出默认配置
from .default_config import (
    PARAMS_CONFIG,
    ODE_CONFIG,
    STATIONARY_CONFIG,
    THRESHOLD_CONFIG,
    WEIGHT_CONFIG,
    EVOLUTION_CONFIG,
    OUTPUT_CONFIG,
    LOG_CONFIG,
    EXIT_CODES,
)

__all__ = [
    'PARAMS_CONFIG',
    'ODE_CONFIG',
    'STATIONARY_CONFIG',
    'THRESHOLD_CONFIG',
    'WEIGHT_CONFIG',
    'EVOLUTION_CONFIG',
    'OUTPUT_CONFIG',
    'LOG_CONFIG',
    'EXIT_CODES',
]
