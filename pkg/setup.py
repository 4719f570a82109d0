"""Setup configuration for the matching cache simulator."""

from setuptools import setup, find_packages

with open("README.md", "r", encoding="utf-8") as fh:
    long_description = fh.read()

setup(
    name="matching-cache-sim",
    version="0.1.0",
    description="Many-to-many matching of videos to small base stations for proactive caching",
    long_description=long_description,
    long_description_content_type="text/markdown",
    packages=find_packages(include=["matching_cache", "matching_cache.*"]),
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Intended Audience :: Science/Research",
        "Topic :: Scientific/Engineering",
        "License :: OSI Approved :: MIT License",
        "Programming Language :: Python :: 3",
        "Operating System :: OS Independent",
    ],
    keywords="matching deferred-acceptance caching small-cells simulation",
    python_requires=">=3.9",
    install_requires=[
        "numpy>=1.20.0",
        "pyyaml>=6.0",
        "networkx>=2.6",
        "pandas>=1.3",
    ],
    extras_require={
        "dev": [
            "pytest>=7.0",
            "pytest-cov>=4.0",
            "hypothesis>=6.0",
            "black>=23.0",
            "isort>=5.12",
            "flake8>=6.0",
            "mypy>=1.0",
        ],
    },
    entry_points={
        "console_scripts": [
            "matching-cache=matching_cache.cli:main",
        ],
    },
)
