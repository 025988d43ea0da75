"""Spectral balanced-separator toolkit built on accelerated heat-kernel embeddings."""

from .graph import Cut, Graph, cut_stats, from_edges, generate, laplacian_apply, load_edge_list

__all__ = [
    "Cut",
    "Graph",
    "cut_stats",
    "from_edges",
    "generate",
    "laplacian_apply",
    "load_edge_list",
]

__version__ = "0.1.0"
