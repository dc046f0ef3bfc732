"""
命令行入口

每个子命令是一次可复现的运行：解析后的配置写入输出目录的 config.json，
结果写成 CSV/JSON，退出码同时表示分类结果。
"""

import functools
import logging
import os
import sys
from typing import Any, Callable, Dict, Optional

import click

from ..config.default_config import EVOLUTION_CONFIG, EXIT_CODES, OUTPUT_CONFIG, STATIONARY_CONFIG
from .config_manager import RunConfig
from .errors import ClassificationError, PreconditionError, RadialBurgersError
from .evolution import (
    check_smallness,
    decay_caps,
    evolve,
    fit_decay,
    make_initial_data,
    max_admissible_amplitude,
    weighted_norms,
)
from .log_manager import get_log_manager
from .report_generator import get_report_generator
from .stationary import NEAR_CRITICAL, SUBCRITICAL, SUPERCRITICAL, solve_psi
from .threshold import compute_threshold, limit_profile
from .validation import run_validation
from .weight import build_chi, chi_residual

logger = logging.getLogger(__name__)

CLASSIFICATION_EXIT = {
    SUBCRITICAL: EXIT_CODES['OK'],
    SUPERCRITICAL: EXIT_CODES['SUPERCRITICAL'],
    NEAR_CRITICAL: EXIT_CODES['NEAR_CRITICAL'],
}

# 命令行参数名 -> 配置键路径
OPTION_KEYS = {
    'mu': 'params.mu',
    'r0': 'params.r0',
    'n': 'params.n',
    'v_plus': 'params.v_plus',
    'v_minus': 'params.v_minus',
    'rmax': 'numerics.r_max',
    'nodes': 'numerics.nodes',
    'rel_tol': 'numerics.rel_tol',
    'abs_tol': 'numerics.abs_tol',
    'tol_a': 'numerics.tol_a',
    't_end': 'numerics.t_end',
    'out': 'output_dir',
    'seed': 'seed',
    'log_level': 'log_level',
    'dt': 'numerics.dt',
    'cfl': 'numerics.cfl',
    'family': 'perturbation.family',
    'amplitude': 'perturbation.amplitude',
    'center': 'perturbation.center',
    'width': 'perturbation.width',
    'alpha': 'perturbation.alpha',
    'beta': 'perturbation.beta',
}


class ExitCodeGroup(click.Group):
    """
    把子命令的返回值作为进程退出码

    用法错误统一映射为 64
    """

    def main(self, args=None, prog_name=None, complete_var=None, standalone_mode=True, **extra):
        try:
            rv = super().main(args=args, prog_name=prog_name, complete_var=complete_var,
                              standalone_mode=False, **extra)
        except click.UsageError as e:
            e.show()
            code = EXIT_CODES['USAGE']
        except click.ClickException as e:
            e.show()
            code = e.exit_code
        except click.Abort:
            click.echo('Aborted!', err=True)
            code = EXIT_CODES['CHECK_FAILED']
        else:
            code = rv if isinstance(rv, int) else EXIT_CODES['OK']
        if standalone_mode:
            sys.exit(code)
        return code


def run_options(func: Callable) -> Callable:
    """所有运行类子命令共享的参数"""
    options = [
        click.option('--config', 'config_path', type=click.Path(exists=True, dir_okay=False),
                     default=None, help='从先前运行的 config.json 重新加载配置'),
        click.option('--mu', type=float, default=None, help='粘性系数 μ > 0'),
        click.option('--r0', type=float, default=None, help='内半径 r0 > 0'),
        click.option('--n', type=int, default=None, help='空间维数 n >= 2'),
        click.option('--v-plus', 'v_plus', type=float, default=None, help='远场状态 v+'),
        click.option('--v-minus', 'v_minus', type=float, default=None, help='边界状态 v-，缺省时取 V- = 0'),
        click.option('--rmax', type=float, default=None, help='截断半径'),
        click.option('--nodes', type=int, default=None, help='输出网格节点数'),
        click.option('--rel-tol', 'rel_tol', type=float, default=None, help='ODE相对容差'),
        click.option('--abs-tol', 'abs_tol', type=float, default=None, help='ODE绝对容差'),
        click.option('--tol-a', 'tol_a', type=float, default=None, help='a(r1) 序列停止容差'),
        click.option('--t-end', 't_end', type=float, default=None, help='演化终止时刻'),
        click.option('--out', type=click.Path(file_okay=False), default=None, help='输出目录'),
        click.option('--seed', type=int, default=None, help='随机性质检查的种子'),
        click.option('--log-level', 'log_level',
                     type=click.Choice(['debug', 'info', 'warning', 'error', 'critical']),
                     default=None, help='日志级别'),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def _prepare(subcommand: str, config_path: Optional[str], options: Dict[str, Any]) -> RunConfig:
    """合并默认值、环境变量、配置文件与命令行参数"""
    cfg = RunConfig(config_path)
    cfg.set_config('subcommand', subcommand)
    cfg.apply_overrides({OPTION_KEYS[name]: value for name, value in options.items() if name in OPTION_KEYS})
    problems = cfg.validate_config()
    if problems:
        raise click.UsageError('; '.join(problems))
    return cfg


def guarded(subcommand: str) -> Callable:
    """
    子命令包装：准备配置与日志，写出 config.json，并把库异常映射为退出码

    被包装的函数签名为 f(cfg, out_dir, **其余参数)，返回退出码
    """
    def decorator(func: Callable) -> Callable:
        @functools.wraps(func)
        def wrapper(config_path: Optional[str] = None, **options) -> int:
            cfg = _prepare(subcommand, config_path, options)
            out_dir = cfg.resolve_output_dir()
            log_manager = get_log_manager(out_dir, cfg.get_config('log_level'))
            try:
                cfg.save_config(os.path.join(out_dir, OUTPUT_CONFIG['CONFIG_FILE']))
                extra = {name: value for name, value in options.items() if name not in OPTION_KEYS}
                return func(cfg, out_dir, **extra)
            except PreconditionError as e:
                click.echo(f"前置条件不满足: {e}", err=True)
                logger.error(f"Precondition error: {e}", exc_info=True)
                return EXIT_CODES['PRECONDITION']
            except RadialBurgersError as e:
                click.echo(f"错误: {e}", err=True)
                logger.error(f"{subcommand} failed: {e}", exc_info=True)
                return EXIT_CODES['CHECK_FAILED']
            finally:
                log_manager.close()
        return wrapper
    return decorator


@click.group(cls=ExitCodeGroup)
def main():
    """径向Burgers方程定常波数值工具"""


@main.command()
@run_options
@guarded('stationary')
def stationary(cfg: RunConfig, out_dir: str) -> int:
    """求解定常波并分类；退出码 0 次临界，2 超临界，3 近临界"""
    params = cfg.params()
    wave = solve_psi(params, cfg.numeric('r_max'), cfg.numeric('rel_tol'), cfg.numeric('abs_tol'),
                     cfg.numeric('nodes', STATIONARY_CONFIG['NODES']))
    get_report_generator(out_dir).save_wave(wave)

    kind = wave.classification.kind
    click.echo(f"分类: {kind} (r={wave.classification.r_decision:.6g})")
    if wave.decay_slope is not None:
        click.echo(f"远场衰减斜率: {wave.decay_slope:.4f}")
    return CLASSIFICATION_EXIT[kind]


@main.command()
@run_options
@guarded('threshold')
def threshold(cfg: RunConfig, out_dir: str) -> int:
    """计算临界值 a*；退出码 0 表示落在存在区间内且两种估计一致，3 表示未收敛"""
    params = cfg.params()
    result = compute_threshold(params, cfg.numeric('tol_a'), cfg.numeric('bisection_tol'),
                               cfg.numeric('r_max'), cfg.numeric('rel_tol'), cfg.numeric('abs_tol'),
                               cfg.numeric('max_workers'))
    tolerance = 1e-6 * abs(params.v_plus)
    data = result.to_dict()
    data['params'] = params.to_dict()
    data['tolerance'] = tolerance
    data['separatrix'] = limit_profile(params, result.a_star_bisect, cfg.numeric('r_max'),
                                       rel_tol=cfg.numeric('rel_tol'), abs_tol=cfg.numeric('abs_tol'))
    get_report_generator(out_dir).save_json(data, OUTPUT_CONFIG['THRESHOLD_JSON'])

    click.echo(f"存在区间: {result.bracket.to_list()}")
    click.echo(f"a* (极限)  = {result.a_star_limit:.12g}")
    click.echo(f"a* (二分)  = {result.a_star_bisect:.12g}")
    click.echo(f"差异: {result.discrepancy:.3e}")
    if not result.converged:
        return EXIT_CODES['NEAR_CRITICAL']
    if result.bracket_holds() and result.discrepancy <= tolerance:
        return EXIT_CODES['OK']
    return EXIT_CODES['CHECK_FAILED']


@main.command()
@run_options
@guarded('weight')
def weight(cfg: RunConfig, out_dir: str) -> int:
    """构造权函数 χ；定常波不是次临界时退出码 65"""
    params = cfg.params()
    wave = solve_psi(params, cfg.numeric('r_max'), cfg.numeric('rel_tol'), cfg.numeric('abs_tol'),
                     cfg.numeric('nodes', STATIONARY_CONFIG['NODES']))
    wf = build_chi(wave, cfg.numeric('tail_tol'))
    residual = chi_residual(wf, wave)
    generator = get_report_generator(out_dir)
    generator.save_wave(wave)
    generator.save_weight(wf, {
        'params': params.to_dict(),
        'residual_sup': float(abs(residual.values).max()),
        'nodes': wave.grid.size,
        'r_max': wave.grid.r_max,
    })
    click.echo(f"C_L = {wf.C_L:.6g}, C_U = {wf.C_U:.6g}")
    return EXIT_CODES['OK']


@main.command('evolve')
@run_options
@click.option('--family', type=click.Choice(['gaussian', 'compact', 'exp_weighted']), default=None,
              help='初始扰动类型')
@click.option('--amplitude', type=float, default=None, help='扰动振幅，缺省时按小性条件自动选取')
@click.option('--center', type=float, default=None, help='扰动中心')
@click.option('--width', type=float, default=None, help='扰动宽度')
@click.option('--alpha', type=float, default=None, help='代数权指数')
@click.option('--beta', type=float, default=None, help='指数权系数')
@click.option('--dt', type=float, default=None, help='固定时间步长，缺省按CFL选取')
@click.option('--cfl', type=float, default=None, help='CFL数')
@guarded('evolve')
def evolve_command(cfg: RunConfig, out_dir: str) -> int:
    """在定常波附近推进扰动并记录能量"""
    params = cfg.params()
    wave = solve_psi(params, cfg.numeric('r_max'), cfg.numeric('rel_tol'), cfg.numeric('abs_tol'),
                     cfg.numeric('nodes', EVOLUTION_CONFIG['NODES']))
    chi = build_chi(wave, cfg.numeric('tail_tol'))

    warnings = []
    spec = cfg.perturbation()
    if cfg.get_config('perturbation.amplitude') is None:
        a_max = max_admissible_amplitude(wave, spec, chi)
        spec = spec.scaled(EVOLUTION_CONFIG['SMALLNESS_SAFETY'] * a_max)
        logger.info(f"Amplitude chosen from smallness condition: {spec.amplitude:.6g} (a_max={a_max:.6g})")
    state = make_initial_data(wave, spec)
    smallness = check_smallness(state.w, chi, params)
    if not smallness['ok']:
        warnings.append(f"smallness condition violated: lhs={smallness['lhs']:.6g} > rhs={smallness['rhs']:.6g}")
        click.echo(f"警告: {warnings[-1]}", err=True)

    trace = evolve(state, wave, chi, cfg.numeric('t_end'), cfg.dt_policy(), cfg.numeric('sample_every'))
    if max(trace.w_sup) > params.mu:
        warnings.append(f"a-priori bound |w| <= mu exceeded: max |w| = {max(trace.w_sup):.6g}")

    fits = {}
    for model in ('exponential', 'algebraic'):
        try:
            fits[model] = fit_decay(trace, model)
        except ClassificationError as e:
            fits[model] = None
            logger.info(f"{model} 衰减拟合跳过: {e}")

    energy_32 = trace.energy_inequality_32()
    summary = {
        'params': params.to_dict(),
        'perturbation': spec.to_dict(),
        'smallness': smallness,
        'weighted_norms': weighted_norms(state, spec),
        'decay_caps': decay_caps(params, chi),
        'weight': chi.to_dict(),
        'energy_inequality_32': energy_32,
        'energy_inequality_33': trace.energy_inequality_33(params, chi),
        'initial_sup_error': trace.sup_error[0],
        'final_sup_error': trace.sup_error[-1],
        'max_w_sup': max(trace.w_sup),
        't_end': trace.times[-1],
        'samples': len(trace),
        'decay_fit': fits,
        'warnings': warnings,
    }
    generator = get_report_generator(out_dir)
    generator.save_trace(trace)
    generator.save_json(summary, OUTPUT_CONFIG['EVOLVE_JSON'])

    click.echo(f"sup|v-φ|: {trace.sup_error[0]:.3e} -> {trace.sup_error[-1]:.3e}")
    if smallness['ok'] and not energy_32['ok']:
        click.echo("能量不等式不成立", err=True)
        return EXIT_CODES['CHECK_FAILED']
    return EXIT_CODES['OK']


@main.command()
@run_options
@click.option('--quick', is_flag=True, help='缩小规模的快速检查')
@guarded('validate')
def validate(cfg: RunConfig, out_dir: str, quick: bool = False) -> int:
    """运行不变量检查套件并生成报告；全部通过时退出码 0"""
    report = run_validation(cfg.get_config('seed'), quick, cfg.numeric('rel_tol'), cfg.numeric('abs_tol'),
                            cfg.numeric('max_workers'))
    paths = get_report_generator(out_dir).save_validation(report)
    for check in report.checks:
        click.echo(f"[{'PASS' if check.passed else 'FAIL'}] {check.name}")
    click.echo(f"报告: {paths['html']}")
    return EXIT_CODES['OK'] if report.passed else EXIT_CODES['CHECK_FAILED']


@main.command()
def info():
    """显示工具信息"""
    from . import __version__

    click.echo("=== 径向Burgers定常波工具 ===")
    click.echo(f"版本: {__version__}")
    click.echo("\n子命令:")
    click.echo("  stationary  求解定常波并分类")
    click.echo("  threshold   计算临界边界值 a*")
    click.echo("  weight      构造权函数 χ")
    click.echo("  evolve      扰动的时间演化与能量记录")
    click.echo("  validate    不变量检查套件")
    click.echo("\n退出码: 0 成功，1 检查失败，2 超临界，3 近临界/未收敛，64 用法错误，65 前置条件不满足")
    click.echo("\n使用示例:")
    click.echo("  radial-burgers stationary --mu 1 --r0 1 --v-plus -2 --out runs/demo")
    click.echo("  radial-burgers validate --quick --seed 7")
    return EXIT_CODES['OK']


def run():
    """console_scripts 入口"""
    main()


if __name__ == '__main__':
    run()
