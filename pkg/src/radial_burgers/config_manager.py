"""运行配置管理器，负责合并默认值、环境变量、配置文件与命令行参数"""

import copy
import json
import logging
import os
from typing import Any, Dict, List, Optional

from dotenv import load_dotenv

from ..config.default_config import (
    EVOLUTION_CONFIG,
    LOG_CONFIG,
    ODE_CONFIG,
    OUTPUT_CONFIG,
    PARAMS_CONFIG,
    THRESHOLD_CONFIG,
    WEIGHT_CONFIG,
)
from .evolution import FAMILIES, DtPolicy, PerturbationSpec
from .radial_core import Params

logger = logging.getLogger(__name__)

ENV_OUTPUT_DIR = 'RADIAL_BURGERS_OUT'
ENV_LOG_LEVEL = 'RADIAL_BURGERS_LOG_LEVEL'


class RunConfig:
    """单次运行的完整配置，可序列化并用于复现"""

    # 默认配置
    DEFAULT_CONFIG = {
        'subcommand': None,
        'seed': 0,
        'output_dir': None,  # None 时为 DEFAULT_OUTPUT_DIR/<子命令>
        'log_level': LOG_CONFIG['LEVEL'],

        # 问题参数，v_minus 为 None 时取 V- = 0
        'params': {
            'mu': PARAMS_CONFIG['MU'],
            'r0': PARAMS_CONFIG['R0'],
            'n': PARAMS_CONFIG['N'],
            'v_plus': PARAMS_CONFIG['V_PLUS'],
            'v_minus': PARAMS_CONFIG['V_MINUS'],
        },

        # 数值参数，r_max/nodes 为 None 时由各子命令决定
        'numerics': {
            'r_max': None,
            'nodes': None,
            'rel_tol': ODE_CONFIG['REL_TOL'],
            'abs_tol': ODE_CONFIG['ABS_TOL'],
            'tol_a': THRESHOLD_CONFIG['TOL_A'],
            'bisection_tol': THRESHOLD_CONFIG['BISECTION_TOL'],
            'tail_tol': WEIGHT_CONFIG['TAIL_TOL'],
            't_end': EVOLUTION_CONFIG['T_END'],
            'cfl': EVOLUTION_CONFIG['CFL'],
            'dt': None,
            'sample_every': EVOLUTION_CONFIG['SAMPLE_EVERY'],
            'max_workers': THRESHOLD_CONFIG['MAX_WORKERS'],
        },

        # 初始扰动，amplitude 为 None 时按小性条件自动选取
        'perturbation': {
            'family': 'compact',
            'amplitude': None,
            'center': 10.0,
            'width': 4.0,
            'alpha': None,
            'beta': None,
        },
    }

    def __init__(self, config_path: Optional[str] = None, use_env: bool = True):
        """
        初始化运行配置

        Args:
            config_path: 先前运行写出的 config.json，None 表示只用默认值
            use_env: 是否读取 .env 与环境变量覆盖
        """
        self.config_path = config_path
        self.config = copy.deepcopy(self.DEFAULT_CONFIG)

        if use_env:
            self._apply_env()

        if config_path:
            self.load_config(config_path)

    def _apply_env(self) -> None:
        """读取 .env 后应用环境变量覆盖"""
        load_dotenv()
        output_dir = os.getenv(ENV_OUTPUT_DIR)
        if output_dir:
            self.config['output_dir'] = output_dir
            logger.debug(f"输出目录来自环境变量: {output_dir}")
        log_level = os.getenv(ENV_LOG_LEVEL)
        if log_level:
            self.config['log_level'] = log_level.lower()

    def load_config(self, config_path: str) -> bool:
        """
        从文件加载配置

        Args:
            config_path: 配置文件路径

        Returns:
            bool: 加载是否成功
        """
        try:
            if not os.path.exists(config_path):
                logger.warning(f"配置文件不存在: {config_path}，将使用默认配置")
                return False

            with open(config_path, 'r', encoding='utf-8') as f:
                user_config = json.load(f)

            self._merge_config(self.config, user_config)
            logger.info(f"成功加载配置文件: {config_path}")
            return True
        except (OSError, ValueError) as e:
            logger.error(f"加载配置文件失败: {str(e)}")
            return False

    def save_config(self, config_path: Optional[str] = None) -> bool:
        """
        保存配置到文件，键排序以保证重复运行逐字节一致

        Args:
            config_path: 配置文件路径，如果为None则使用初始化时的路径

        Returns:
            bool: 保存是否成功
        """
        try:
            target_path = config_path or self.config_path
            if not target_path:
                logger.error("未指定保存路径")
                return False

            directory = os.path.dirname(target_path)
            if directory:
                os.makedirs(directory, exist_ok=True)

            with open(target_path, 'w', encoding='utf-8', newline='\n') as f:
                json.dump(self.config, f, indent=2, sort_keys=True, ensure_ascii=False)
                f.write('\n')

            logger.info(f"成功保存配置到: {target_path}")
            return True
        except OSError as e:
            logger.error(f"保存配置失败: {str(e)}")
            return False

    def get_config(self, key_path: Optional[str] = None) -> Any:
        """
        获取配置值

        Args:
            key_path: 配置键路径，支持点表示法，如 'numerics.rel_tol'

        Returns:
            Any: 配置值，键不存在时为None
        """
        if key_path is None:
            return self.config

        value = self.config
        for key in key_path.split('.'):
            if isinstance(value, dict) and key in value:
                value = value[key]
            else:
                logger.warning(f"配置键不存在: {key_path}")
                return None
        return value

    def set_config(self, key_path: str, value: Any) -> bool:
        """
        设置配置值

        Args:
            key_path: 配置键路径，支持点表示法
            value: 配置值，必须可JSON序列化

        Returns:
            bool: 设置是否成功
        """
        try:
            json.dumps(value)
        except (TypeError, ValueError):
            logger.error(f"配置值不可序列化: {key_path} = {value!r}")
            return False

        keys = key_path.split('.')
        config = self.config
        for key in keys[:-1]:
            if not isinstance(config.get(key), dict):
                config[key] = {}
            config = config[key]
        config[keys[-1]] = value
        logger.debug(f"设置配置: {key_path} = {value}")
        return True

    def apply_overrides(self, overrides: Dict[str, Any]) -> None:
        """应用命令行覆盖，值为None的项表示未指定"""
        for key_path, value in overrides.items():
            if value is not None:
                self.set_config(key_path, value)

    def validate_config(self) -> List[str]:
        """
        验证配置的有效性

        Returns:
            List[str]: 问题列表，为空表示有效
        """
        problems = []
        p = self.config['params']
        if not _is_positive(p.get('mu')):
            problems.append(f"mu 必须为正数: {p.get('mu')}")
        if not _is_positive(p.get('r0')):
            problems.append(f"r0 必须为正数: {p.get('r0')}")
        n = p.get('n')
        if not isinstance(n, int) or isinstance(n, bool) or n < 2:
            problems.append(f"n 必须是不小于2的整数: {n}")

        num = self.config['numerics']
        for key in ('rel_tol', 'abs_tol'):
            value = num.get(key)
            if not _is_positive(value) or value > ODE_CONFIG['MAX_TOL']:
                problems.append(f"{key} 必须在 (0, {ODE_CONFIG['MAX_TOL']}] 内: {value}")
        for key in ('tol_a', 'bisection_tol', 'tail_tol', 't_end', 'cfl'):
            if not _is_positive(num.get(key)):
                problems.append(f"{key} 必须为正数: {num.get(key)}")
        for key in ('r_max', 'dt'):
            if num.get(key) is not None and not _is_positive(num.get(key)):
                problems.append(f"{key} 必须为正数: {num.get(key)}")
        nodes = num.get('nodes')
        if nodes is not None and (not isinstance(nodes, int) or nodes < 3):
            problems.append(f"nodes 必须是不小于3的整数: {nodes}")

        family = self.config['perturbation'].get('family')
        if family not in FAMILIES:
            problems.append(f"未知的扰动类型: {family}")
        if not isinstance(self.config.get('seed'), int):
            problems.append(f"seed 必须是整数: {self.config.get('seed')}")

        for problem in problems:
            logger.error(f"配置无效: {problem}")
        return problems

    def params(self) -> Params:
        """构造问题参数；未给出 v_minus 时取 V- = 0"""
        p = self.config['params']
        if p.get('v_minus') is None:
            return Params.from_shifted(float(p['mu']), float(p['r0']), int(p['n']), float(p['v_plus']), 0.0)
        return Params(mu=float(p['mu']), r0=float(p['r0']), n=int(p['n']),
                      v_plus=float(p['v_plus']), v_minus=float(p['v_minus']))

    def perturbation(self, amplitude: Optional[float] = None) -> PerturbationSpec:
        """构造扰动描述，amplitude 参数优先于配置值"""
        spec = dict(self.config['perturbation'])
        if amplitude is not None:
            spec['amplitude'] = amplitude
        if spec.get('amplitude') is None:
            spec['amplitude'] = 1.0
        return PerturbationSpec(**spec)

    def resolve_output_dir(self) -> str:
        """确定输出目录并写回配置，使 config.json 记录实际位置"""
        if not self.config.get('output_dir'):
            subcommand = self.config.get('subcommand') or 'run'
            self.config['output_dir'] = os.path.join(OUTPUT_CONFIG['DEFAULT_OUTPUT_DIR'], subcommand)
        return self.config['output_dir']

    def dt_policy(self) -> DtPolicy:
        num = self.config['numerics']
        return DtPolicy(cfl=float(num['cfl']), dt=num.get('dt'))

    def numeric(self, key: str, default: Any = None) -> Any:
        """数值参数，未设置时返回 default"""
        value = self.config['numerics'].get(key)
        return default if value is None else value

    def _merge_config(self, base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
        """
        递归合并配置字典

        Args:
            base: 基础配置
            override: 覆盖配置

        Returns:
            Dict: 合并后的配置
        """
        for key, value in override.items():
            if key in base and isinstance(base[key], dict) and isinstance(value, dict):
                self._merge_config(base[key], value)
            else:
                base[key] = value
        return base


def _is_positive(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool) and value > 0


def get_run_config(config_path: Optional[str] = None, use_env: bool = True) -> RunConfig:
    """工厂函数，返回运行配置实例"""
    return RunConfig(config_path, use_env)
