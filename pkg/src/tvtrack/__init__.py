"""Simulation and analysis of distributed time-varying optimization.

Agents estimate a Newton-like descent direction with a discrete-time
weighted-average consensus and feed it, sampled and held, into
continuous-time consensus dynamics that track the moving optimum.
"""

from .costs import (
    CostBounds,
    CostModel,
    Problem,
    QuadraticCost,
    QuadraticSinusoidalCost,
)
from .dynamics import OrchestratorConfig, TimeSeries, central_baseline, orchestrate
from .graph import Graph
from .stability import StabilityReport, analyze

__all__ = [
    "CostBounds",
    "CostModel",
    "Graph",
    "OrchestratorConfig",
    "Problem",
    "QuadraticCost",
    "QuadraticSinusoidalCost",
    "StabilityReport",
    "TimeSeries",
    "analyze",
    "central_baseline",
    "orchestrate",
]
__version__ = "0.1.0"
