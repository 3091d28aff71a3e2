"""Q-determinant construction and parallelism-resource analysis."""

__version__ = '0.1.0'
