"""径向Burgers定常波项目主模块"""

__version__ = '1.0.0'
