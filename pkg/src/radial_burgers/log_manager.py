"""日志管理器，为每次运行配置控制台与文件日志"""

import logging
import os
from typing import Optional

from ..config.default_config import LOG_CONFIG, OUTPUT_CONFIG

# 包级日志器名称，各模块的 logging.getLogger(__name__) 都会传播到这里
PACKAGE_LOGGER = __name__.rsplit('.', 1)[0]


class LogManager:
    """
    日志管理器类

    控制台处理器写 stderr；文件处理器写输出目录下的 run.log，每次运行覆盖。
    日志不属于确定性输出，可以带时间戳。
    """

    # 日志级别映射
    LOG_LEVELS = {
        'debug': logging.DEBUG,
        'info': logging.INFO,
        'warning': logging.WARNING,
        'error': logging.ERROR,
        'critical': logging.CRITICAL
    }

    DEFAULT_FORMAT = LOG_CONFIG['FORMAT']

    def __init__(self, name: str = PACKAGE_LOGGER, log_dir: Optional[str] = None,
                 log_level: str = LOG_CONFIG['LEVEL'], console: bool = True):
        """
        初始化日志管理器

        Args:
            name: 日志器名称
            log_dir: 日志文件目录，None 表示不写文件
            log_level: 日志级别，可选值: debug, info, warning, error, critical
            console: 是否输出到控制台
        """
        self.name = name
        self.log_dir = log_dir
        self.log_level = self.LOG_LEVELS.get(str(log_level).lower(), logging.INFO)
        self.log_file: Optional[str] = None

        self.logger = self._create_logger()
        if console:
            self._add_console_handler()
        if log_dir:
            self._add_file_handler()

    def _create_logger(self) -> logging.Logger:
        logger = logging.getLogger(self.name)
        logger.setLevel(self.log_level)

        # 避免重复添加处理器
        for handler in list(logger.handlers):
            logger.removeHandler(handler)
            handler.close()

        return logger

    def _add_console_handler(self) -> None:
        console_handler = logging.StreamHandler()
        console_handler.setLevel(self.log_level)
        console_handler.setFormatter(logging.Formatter(self.DEFAULT_FORMAT))
        self.logger.addHandler(console_handler)

    def _add_file_handler(self) -> None:
        """添加文件日志处理器"""
        os.makedirs(self.log_dir, exist_ok=True)
        self.log_file = os.path.join(self.log_dir, f"{OUTPUT_CONFIG['LOG_FILE']}.log")
        file_handler = logging.FileHandler(self.log_file, mode='w', encoding='utf-8')
        file_handler.setLevel(self.log_level)
        file_handler.setFormatter(logging.Formatter(self.DEFAULT_FORMAT))
        self.logger.addHandler(file_handler)

    def set_level(self, level: str) -> None:
        """
        设置日志级别

        Args:
            level: 日志级别，可选值: debug, info, warning, error, critical
        """
        new_level = self.LOG_LEVELS.get(str(level).lower(), logging.INFO)
        self.logger.setLevel(new_level)
        for handler in self.logger.handlers:
            handler.setLevel(new_level)
        self.log_level = new_level
        self.logger.debug(f"Log level changed to {level}")

    def close(self) -> None:
        """关闭并移除全部处理器，释放 run.log"""
        for handler in list(self.logger.handlers):
            handler.flush()
            self.logger.removeHandler(handler)
            handler.close()

    def get_logger(self) -> logging.Logger:
        return self.logger


def get_log_manager(log_dir: Optional[str] = None, log_level: str = LOG_CONFIG['LEVEL'],
                    console: bool = True) -> LogManager:
    """工厂函数，返回挂在包级日志器上的日志管理器"""
    return LogManager(PACKAGE_LOGGER, log_dir, log_level, console)
