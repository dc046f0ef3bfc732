#!/usr/bin/env python
# 验证项目所有依赖是否正确安装

import importlib
import sys

print(f"Python版本: {sys.version}")
print("\n开始验证依赖安装...")

# 包名 -> 导入名
required_packages = {
    'numpy': 'numpy',
    'scipy': 'scipy',
    'pandas': 'pandas',
    'jinja2': 'jinja2',
    'click': 'click',
    'python-dotenv': 'dotenv',
    'pytest': 'pytest',
    'hypothesis': 'hypothesis',
}

success_count = 0
failed_packages = []

print("\n依赖验证结果:")
print("=" * 50)

for package, module_name in required_packages.items():
    try:
        module = importlib.import_module(module_name)
        version = getattr(module, '__version__', '未知版本')
        print(f"✅ {package}: {version}")
        success_count += 1
    except ImportError:
        print(f"❌ {package}: 导入失败")
        failed_packages.append(package)

print("=" * 50)
print(f"\n验证统计: 成功 {success_count}, 失败 {len(failed_packages)}")

if failed_packages:
    print("\n以下包安装失败:")
    for pkg in failed_packages:
        print(f"  - {pkg}")
    print("\n安装建议:")
    print(f"   pip install {' '.join(failed_packages)}")
    sys.exit(1)
else:
    print("\n🎉 所有依赖验证成功!")
    print("\n然后测试项目功能:")
    print("python -m src.radial_burgers.cli info")
