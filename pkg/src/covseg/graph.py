"""Pixel/superpixel bipartite graph and its superpixel edge weights.

Nodes on the X side are all pixels plus all superpixels; the Y side holds
the superpixels again. E1 links each pixel to its containing superpixel in
every layer with a constant weight; E2 links superpixels of the same layer.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .spd import log_stack


class GraphError(ValueError):
    pass


@dataclass(frozen=True)
class BipartiteGraph:
    shape: tuple[int, int]
    layer_labels: tuple[np.ndarray, ...]
    descriptors: tuple[np.ndarray, ...]
    layer_offsets: np.ndarray  # first global node id of each layer, plus total
    alpha: float
    e2_src: np.ndarray
    e2_dst: np.ndarray
    e2_weight: np.ndarray
    self_link: float = 0.0  # weight tying each X-side superpixel to its Y-side copy

    @property
    def n_pixels(self) -> int:
        return self.shape[0] * self.shape[1]

    @property
    def n_layers(self) -> int:
        return len(self.layer_labels)

    @property
    def n_superpixels(self) -> int:
        return int(self.layer_offsets[-1])

    @property
    def node_layer(self) -> np.ndarray:
        sizes = np.diff(self.layer_offsets)
        return np.repeat(np.arange(self.n_layers), sizes)

    def e1_nodes(self) -> np.ndarray:
        """(n_pixels, n_layers) global node id of each pixel's superpixel."""
        return np.stack([lab.ravel() + off for lab, off
                         in zip(self.layer_labels, self.layer_offsets[:-1])], axis=1)

    def e2_matrix(self) -> np.ndarray:
        """Dense symmetric superpixel weight matrix with a zero diagonal."""
        n = self.n_superpixels
        m = np.zeros((n, n))
        m[self.e2_src, self.e2_dst] = self.e2_weight
        m[self.e2_dst, self.e2_src] = self.e2_weight
        return m

    def with_weights(self, weight: np.ndarray) -> "BipartiteGraph":
        return dataclasses.replace(self, e2_weight=np.asarray(weight, dtype=np.float64))

    def edge_list_text(self) -> str:
        """Debug dump: one ``node_a node_b weight`` line per edge.

        Pixels are ``p<index>``; superpixels are ``s<layer>:<region>``.
        """
        offs = self.layer_offsets
        layer = self.node_layer

        def name(node):
            lay = layer[node]
            return f"s{lay}:{node - offs[lay]}"

        lines = []
        for p, nodes in enumerate(self.e1_nodes()):
            for node in nodes:
                lines.append(f"p{p} {name(node)} {self.alpha:.10g}")
        for a, b, w in zip(self.e2_src, self.e2_dst, self.e2_weight):
            lines.append(f"{name(a)} {name(b)} {w:.10g}")
        return "\n".join(lines) + "\n"


def adjacent_pairs(labels: np.ndarray) -> np.ndarray:
    """Unique (a, b), a < b, of labels sharing a 4-neighbour boundary."""
    a = np.concatenate([labels[:, :-1].ravel(), labels[:-1, :].ravel()])
    b = np.concatenate([labels[:, 1:].ravel(), labels[1:, :].ravel()])
    diff = a != b
    pairs = np.stack([np.minimum(a[diff], b[diff]), np.maximum(a[diff], b[diff])], axis=1)
    if len(pairs) == 0:
        return np.zeros((0, 2), dtype=np.int64)
    return np.unique(pairs, axis=0)


def all_pairs(n: int) -> np.ndarray:
    a, b = np.triu_indices(n, k=1)
    return np.stack([a, b], axis=1)


def build_skeleton(layers, descriptors, alpha: float = 1e-3,
                   support: str = "adjacent", self_link: float = 0.0) -> BipartiteGraph:
    """Graph topology with E1 weighted by ``alpha`` and unweighted E2 slots.

    ``layers`` are label maps (or objects with ``.labels``); ``descriptors``
    holds one list of SPD matrices per layer. ``support`` selects the E2
    slots: spatially adjacent regions or all pairs within a layer.

    ``self_link`` > 0 joins every superpixel's X and Y copies. Without it a
    layer whose adjacency graph is bipartite (a regular grid, say) splits
    the X/Y graph by parity when all E2 weights are equal.
    """
    if support not in ("adjacent", "all"):
        raise ValueError("support must be 'adjacent' or 'all'")
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if self_link < 0:
        raise ValueError("self_link must be non-negative")
    labels = [np.asarray(getattr(l, "labels", l), dtype=np.int64) for l in layers]
    if not labels:
        raise GraphError("need at least one layer")
    if len(descriptors) != len(labels):
        raise GraphError(f"{len(labels)} layers but {len(descriptors)} descriptor lists")
    shape = labels[0].shape
    offsets = [0]
    src, dst, flat_desc = [], [], []
    for i, (lab, desc) in enumerate(zip(labels, descriptors)):
        if lab.shape != shape:
            raise GraphError(f"layer {i} has shape {lab.shape}, expected {shape}")
        n = int(lab.max()) + 1
        if len(desc) != n:
            raise GraphError(f"layer {i}: {n} regions but {len(desc)} descriptors")
        pairs = adjacent_pairs(lab) if support == "adjacent" else all_pairs(n)
        src.append(pairs[:, 0] + offsets[-1])
        dst.append(pairs[:, 1] + offsets[-1])
        flat_desc.extend(np.asarray(d, dtype=np.float64) for d in desc)
        offsets.append(offsets[-1] + n)
    src = np.concatenate(src).astype(np.int64)
    dst = np.concatenate(dst).astype(np.int64)
    return BipartiteGraph(
        shape=tuple(shape),
        layer_labels=tuple(labels),
        descriptors=tuple(flat_desc),
        layer_offsets=np.asarray(offsets, dtype=np.int64),
        alpha=float(alpha),
        e2_src=src,
        e2_dst=dst,
        e2_weight=np.full(len(src), np.nan),
        self_link=float(self_link),
    )


def weight_rbf(g: BipartiteGraph, sigma: float = 20.0) -> BipartiteGraph:
    """Weight every E2 slot with the Log-Euclidean RBF kernel."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    if g.n_superpixels == 0:
        return g
    logs = log_stack(g.descriptors).reshape(g.n_superpixels, -1)
    diff = logs[g.e2_src] - logs[g.e2_dst]
    d2 = np.sum(diff * diff, axis=1)
    return g.with_weights(np.exp(-sigma * d2))


def weight_from_affinities(g: BipartiteGraph, affinities) -> BipartiteGraph:
    """Fill E2 slots from one dense per-layer affinity matrix per layer."""
    if len(affinities) != g.n_layers:
        raise GraphError("need one affinity matrix per layer")
    w = np.empty(len(g.e2_src))
    layer = g.node_layer[g.e2_src]
    for i, aff in enumerate(affinities):
        sel = layer == i
        off = g.layer_offsets[i]
        w[sel] = np.asarray(aff)[g.e2_src[sel] - off, g.e2_dst[sel] - off]
    return g.with_weights(w)


def knn_refine(g: BipartiteGraph, k: int = 1) -> BipartiteGraph:
    """Keep each node's ``k`` heaviest E2 edges (symmetric union).

    Ties prefer the lower-indexed neighbour. Zero-weight edges are dropped
    afterwards.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if np.isnan(g.e2_weight).any():
        raise GraphError("E2 edges must be weighted before refinement")
    m = len(g.e2_src)
    node = np.concatenate([g.e2_src, g.e2_dst])
    other = np.concatenate([g.e2_dst, g.e2_src])
    w = np.concatenate([g.e2_weight, g.e2_weight])
    eid = np.concatenate([np.arange(m), np.arange(m)])
    order = np.lexsort((other, -w, node))
    node_s = node[order]
    start = np.searchsorted(node_s, node_s, side="left")
    rank = np.arange(len(order)) - start
    keep = np.zeros(m, dtype=bool)
    keep[eid[order][rank < k]] = True
    keep &= g.e2_weight > 0
    return dataclasses.replace(g, e2_src=g.e2_src[keep], e2_dst=g.e2_dst[keep],
                               e2_weight=g.e2_weight[keep])
