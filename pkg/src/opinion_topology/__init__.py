"""Coupled opinion/action dynamics on social graphs, stability certificates
and minimum-change topology redesign."""

from .designer import DesignProblem, DesignResult, GaConfig, InitializationError, exhaustive_search, run_ga
from .dynamics import ActionMap, AgentParams, build_system_matrices, sample_agents, simulate
from .netgraph import EdgeBitVector, Graph
from .stability import DesignOracleParams, StabilityReport, analyze, feasibility_oracle

__all__ = [
    "ActionMap",
    "AgentParams",
    "DesignOracleParams",
    "DesignProblem",
    "DesignResult",
    "EdgeBitVector",
    "GaConfig",
    "Graph",
    "InitializationError",
    "StabilityReport",
    "analyze",
    "build_system_matrices",
    "exhaustive_search",
    "feasibility_oracle",
    "run_ga",
    "sample_agents",
    "simulate",
]
