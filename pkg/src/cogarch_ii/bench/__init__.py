"""Replication-study harness, parameter grids and the command line."""
from .grid import ParameterGrid, build_grid, default_bounds, load_grid
from .study import StudyConfig, StudyReport, metrics, qq_table, run_study, write_outputs

__all__ = [
    "ParameterGrid",
    "build_grid",
    "default_bounds",
    "load_grid",
    "StudyConfig",
    "StudyReport",
    "metrics",
    "qq_table",
    "run_study",
    "write_outputs",
]
