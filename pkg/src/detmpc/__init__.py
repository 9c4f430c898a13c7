"""Deterministic MPC algorithms for maximal matching, MIS and list colouring on a simulated cluster."""

from .bench import ExperimentConfig, generate_graph, run_experiment
from .coloring import PaletteMap, color_reduce, mis_reduction_color
from .config import RunConfig
from .errors import DetMPCError
from .graph import Graph, build_graph, read_edge_list
from .hashing import HashFamily, Seed
from .lowdeg import dispatch_matching, dispatch_mis, mis_lowdeg
from .matching import maximal_matching
from .mis import maximal_independent_set
from .oracles import verify_coloring, verify_matching, verify_mis

__version__ = "0.1.0"

__all__ = [
    "DetMPCError", "ExperimentConfig", "Graph", "HashFamily", "PaletteMap", "RunConfig", "Seed",
    "build_graph", "color_reduce", "dispatch_matching", "dispatch_mis", "generate_graph",
    "maximal_independent_set", "maximal_matching", "mis_lowdeg", "mis_reduction_color",
    "read_edge_list", "run_experiment", "verify_coloring", "verify_matching", "verify_mis",
]
