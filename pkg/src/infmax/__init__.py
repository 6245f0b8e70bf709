"""Multi-round and self-activation influence maximization."""

from .graph import DirectedGraph, from_edge_list, read_edge_list, random_graph
from .mrt import SeedSchedule, SpreadEstimate, estimate_rho, simulate_schedule, simulation_count
from .rng import Streams

__version__ = "0.1.0"

__all__ = [
    "DirectedGraph", "from_edge_list", "read_edge_list", "random_graph",
    "SeedSchedule", "SpreadEstimate", "estimate_rho", "simulate_schedule", "simulation_count",
    "Streams", "__version__",
]
