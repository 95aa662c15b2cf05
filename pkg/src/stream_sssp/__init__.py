"""Streaming single-source shortest paths with multiplicative-weight sampling."""

from .derand import (SmoothnessSparsifier, WeightedImportanceGraph, derandomized_sssp,
                     sample_sparsifier, verify_sparsifier)
from .dynamic import FAIL, L1Sampler, SamplerBank, dynamic_sssp
from .graph import Graph, ShortestPathTree, shortest_path_tree, union
from .spanner import Spanner, streaming_spanner, verify_stretch
from .sssp import Config, Metrics, RoundState, approx_sssp, explicit_sssp
from .stream_core import (EdgeStream, EdgeUpdate, SpaceLedger, StreamError,
                          StreamMode, materialize_final_graph, open_stream)

__version__ = "0.1.0"

__all__ = [
    "FAIL", "L1Sampler", "SamplerBank", "SmoothnessSparsifier", "WeightedImportanceGraph",
    "derandomized_sssp", "dynamic_sssp", "sample_sparsifier", "verify_sparsifier",
    "Config", "EdgeStream", "EdgeUpdate", "Graph", "Metrics", "RoundState",
    "ShortestPathTree", "SpaceLedger", "Spanner", "StreamError", "StreamMode",
    "approx_sssp", "explicit_sssp", "materialize_final_graph", "open_stream",
    "shortest_path_tree", "streaming_spanner", "union", "verify_stretch",
]
