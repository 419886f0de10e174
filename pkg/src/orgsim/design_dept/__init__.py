"""Design-department scenario: teams of designers working on contracts."""

from .metrics import METRIC_NAMES, RunTrace, collect_metrics, flatten_outputs
from .model import DepartmentModel, simulate

__all__ = ["METRIC_NAMES", "DepartmentModel", "RunTrace", "collect_metrics", "flatten_outputs", "simulate"]
