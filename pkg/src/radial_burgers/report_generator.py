"""结果输出：CSV、JSON 以及验证报告的 HTML"""

import json
import logging
import math
import os
from typing import Any, Dict

import numpy as np
from jinja2 import Environment, PackageLoader, select_autoescape

from ..config.default_config import OUTPUT_CONFIG
from .evolution import EnergyTrace
from .stationary import StationaryWave
from .validation import ValidationReport
from .weight import WeightFunction

logger = logging.getLogger(__name__)


def ensure_directory(directory: str) -> None:
    """确保目录存在，如果不存在则创建"""
    if not os.path.exists(directory):
        os.makedirs(directory)
        logger.info(f"创建目录: {directory}")


def to_builtin(value: Any) -> Any:
    """把 numpy 标量、数组和元组递归转成可JSON序列化的内置类型"""
    if isinstance(value, dict):
        return {str(k): to_builtin(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_builtin(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_builtin(v) for v in value.tolist()]
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        value = float(value)
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    return value


class ReportGenerator:
    """
    运行结果写出器

    所有输出都写在 output_dir 下，内容不含时间戳与绝对路径，
    相同配置重复运行逐字节一致
    """

    def __init__(self, output_dir: str = OUTPUT_CONFIG['DEFAULT_OUTPUT_DIR']):
        self.output_dir = output_dir
        ensure_directory(output_dir)

        self.env = Environment(
            loader=PackageLoader('src.radial_burgers', 'templates'),
            autoescape=select_autoescape(['html', 'xml'])
        )

    def path(self, filename: str) -> str:
        return os.path.join(self.output_dir, filename)

    def save_json(self, data: Dict, filename: str) -> str:
        """写 JSON：UTF-8、键排序、缩进2"""
        output_path = self.path(filename)
        try:
            with open(output_path, 'w', encoding='utf-8', newline='\n') as f:
                json.dump(to_builtin(data), f, ensure_ascii=False, indent=2, sort_keys=True)
                f.write('\n')
        except OSError as e:
            logger.error(f"保存JSON失败: {str(e)}")
            raise
        logger.info(f"JSON已保存: {output_path}")
        return output_path

    def save_wave(self, wave: StationaryWave) -> Dict[str, str]:
        """定常波 CSV（r,psi,phi）与分类 JSON"""
        csv_path = self.path(OUTPUT_CONFIG['WAVE_CSV'])
        wave.to_csv(csv_path)
        logger.info(f"定常波已保存: {csv_path}")
        json_path = self.save_json(wave.summary(), OUTPUT_CONFIG['CLASSIFICATION_JSON'])
        return {'wave': csv_path, 'classification': json_path}

    def save_weight(self, wf: WeightFunction, extra: Dict) -> Dict[str, str]:
        csv_path = self.path(OUTPUT_CONFIG['CHI_CSV'])
        wf.to_csv(csv_path)
        data = dict(wf.to_dict())
        data.update(extra)
        json_path = self.save_json(data, OUTPUT_CONFIG['WEIGHT_JSON'])
        return {'chi': csv_path, 'weight': json_path}

    def save_trace(self, trace: EnergyTrace) -> str:
        csv_path = self.path(OUTPUT_CONFIG['TRACE_CSV'])
        trace.to_csv(csv_path)
        logger.info(f"能量序列已保存: {csv_path} ({len(trace)} 个采样)")
        return csv_path

    def generate_html_report(self, report: ValidationReport) -> str:
        """渲染验证报告 HTML"""
        data = to_builtin(report.to_dict())
        try:
            template = self.env.get_template('validation_report.html')
            html_content = template.render(
                report=data,
                details_json={check['name']: json.dumps(check['details'], ensure_ascii=False,
                                                        indent=2, sort_keys=True)
                              for check in data['checks']},
            )
        except Exception as e:
            logger.error(f"渲染HTML报告失败: {str(e)}")
            raise

        output_path = self.path(OUTPUT_CONFIG['VALIDATION_HTML'])
        with open(output_path, 'w', encoding='utf-8', newline='\n') as f:
            f.write(html_content)
        logger.info(f"HTML报告已生成: {output_path}")
        return output_path

    def save_validation(self, report: ValidationReport) -> Dict[str, str]:
        json_path = self.save_json(report.to_dict(), OUTPUT_CONFIG['VALIDATION_JSON'])
        html_path = self.generate_html_report(report)
        return {'json': json_path, 'html': html_path}


def get_report_generator(output_dir: str = OUTPUT_CONFIG['DEFAULT_OUTPUT_DIR']) -> ReportGenerator:
    """工厂函数，返回报告生成器实例"""
    return ReportGenerator(output_dir)
