"""Superpixel segmentation with covariance descriptors.

Two similarity back-ends are provided for the superpixel graph: a
Log-Euclidean RBF kernel and a low-rank representation of the descriptor
stack. Partitioning uses a transfer cut on the pixel/superpixel bipartite
graph.
"""

__version__ = "0.1.0"
