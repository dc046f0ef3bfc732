from setuptools import setup, find_packages

with open("README.md", "r", encoding="utf-8") as f:
    long_description = f.read()

setup(
    name="radial_burgers",
    version="1.0.0",
    author="Your Name",
    author_email="your.email@example.com",
    description="Stationary waves and their stability for the radially symmetric exterior Burgers problem",
    long_description=long_description,
    long_description_content_type="text/markdown",
    packages=find_packages(exclude=["tests", "tests.*"]),
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: MIT License",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "Topic :: Scientific/Engineering :: Mathematics",
    ],
    python_requires='>=3.9',
    install_requires=[
        "numpy>=1.24",
        "scipy>=1.11",
        "pandas>=2.0.3",
        "jinja2>=3.1.2",
        "click>=8.1.3",
        "python-dotenv>=1.0.0",
    ],
    extras_require={
        "test": ["pytest>=7.4.0", "hypothesis>=6.80"],
    },
    entry_points={
        "console_scripts": [
            "radial-burgers=src.radial_burgers.cli:run",
        ],
    },
    include_package_data=True,
    package_data={
        "src.radial_burgers": ["templates/*"],
    },
)
