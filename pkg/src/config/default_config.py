# 默认配置文件

# 物理参数默认值
PARAMS_CONFIG = {
    'MU': 1.0,        # 粘性系数
    'R0': 1.0,        # 内半径
    'N': 2,           # 空间维数
    'V_PLUS': -2.0,   # 远场状态
    'V_MINUS': None,  # 边界状态，None表示由V_-=0反推
}

# ODE积分器配置
ODE_CONFIG = {
    'REL_TOL': 1e-10,
    'ABS_TOL': 1e-12,
    'MAX_TOL': 1e-2,             # 允许的最大容差
    'INITIAL_STEP_FRACTION': 1e-3,  # 初始步长 = 区间长度 * 该系数
    'UNDERFLOW_FACTOR': 1e-14,   # 步长 < 该系数*|r| 视为步长下溢
    'EVENT_ACCURACY': 1e-12,     # 事件定位精度（相对半径）
    'SAFETY': 0.9,
    'MIN_FACTOR': 0.2,
    'MAX_FACTOR': 5.0,
    'PI_ALPHA': 0.17,            # PI控制器参数
    'PI_BETA': 0.04,
    'MAX_STEPS': 200000,
}

# 定常波配置
STATIONARY_CONFIG = {
    'EPS_BLOW_FACTOR': 1e-6,     # ε_blow = 系数 * |v+|
    'TUBE_FACTOR': 1e-5,         # tube_tol = 系数 * |v+ - V-| + 下限
    'TUBE_FLOOR': 1e-10,
    'TUBE_TOL_FACTOR': 100,      # 管宽另加 系数*(rel_tol*|v+| + abs_tol)
    'RESIDUAL_FACTOR': 10,       # ψ残差上限 = 系数*(rel_tol*max|ψ| + abs_tol)
    'ORACLE_REL_TOL': 1e-12,     # 与闭式解比较时的积分容差
    'ORACLE_ABS_TOL': 1e-14,
    'R_MAX_FACTOR': 100,         # r_max = 系数 * max(r0, μ/|v+|)
    'R_MAX_MIN_FACTOR': 10,
    'NODES': 4001,
    'TAIL_FRACTION': 0.2,        # 分类时检查的尾部比例
    'DECAY_WINDOW': (10.0, 100.0),
}

# 临界值a*配置
THRESHOLD_CONFIG = {
    'TOL_A': 1e-9,               # a(r1)序列停止容差
    'MAX_SCHEDULE': 40,          # r1 = floor * 2^k 的最大k
    'BISECTION_TOL': 1e-9,
    'R_MAX_DOUBLINGS': 3,        # 近临界时扩展r_max的次数
    'COMPARISON_SLACK': 1e-8,
    'CAMPAIGN_SIZE': 100,
    'ETA_NODES': 2001,
    'MAX_WORKERS': 4,
}

# 权函数配置
WEIGHT_CONFIG = {
    'TAIL_TOL': 0.05,            # 截断误差相对容差
}

# 时间演化配置
EVOLUTION_CONFIG = {
    'CFL': 0.5,
    'T_END': 50.0,
    'SAMPLE_EVERY': 10,          # 每隔多少步记录一次能量
    'SMALLNESS_SAFETY': 0.5,     # 振幅 = 系数 * 临界振幅
    'TRANSIENT_FRACTION': 0.2,
    'FLOOR_FACTOR': 2.0,
    'ENERGY_SLACK': 1e-6,
    'NODES': 2001,
    'WELL_BALANCED': True,       # 扣除定常波的离散残差，使φ成为离散平衡态
    'BOUNDARY_TOL': 1e-8,
    'SUPPORT_TOL': 1e-12,        # 扰动在右端附近须小于该相对量
    'FIT_FLOOR_FRACTION': 1e-9,  # 指数拟合在 sup 误差降到初值的该比例处截止
}

# 输出配置
OUTPUT_CONFIG = {
    'DEFAULT_OUTPUT_DIR': './runs',
    'CONFIG_FILE': 'config.json',
    'LOG_FILE': 'run',
    'WAVE_CSV': 'wave.csv',
    'CLASSIFICATION_JSON': 'classification.json',
    'THRESHOLD_JSON': 'threshold.json',
    'CHI_CSV': 'chi.csv',
    'WEIGHT_JSON': 'weight.json',
    'TRACE_CSV': 'energy_trace.csv',
    'EVOLVE_JSON': 'evolve.json',
    'VALIDATION_JSON': 'validation_report.json',
    'VALIDATION_HTML': 'validation_report.html',
}

# 日志配置
LOG_CONFIG = {
    'LEVEL': 'info',
    'FORMAT': '%(asctime)s - %(name)s - %(levelname)s - %(message)s',
}

# 退出码
EXIT_CODES = {
    'OK': 0,
    'CHECK_FAILED': 1,
    'SUPERCRITICAL': 2,
    'NEAR_CRITICAL': 3,
    'USAGE': 64,
    'PRECONDITION': 65,
}
