"""Multi-step experiment workflows."""

from refined_clt.workflows.compare import CompareParams, CompareResult, CompareWorkflow
from refined_clt.workflows.sweep import SweepParams, SweepResult, SweepWorkflow

__all__ = [
    "CompareParams",
    "CompareResult",
    "CompareWorkflow",
    "SweepParams",
    "SweepResult",
    "SweepWorkflow",
]
