"""Transfer cut on the bipartite graph, and k-way discretisation.

The generalised eigenproblem of the full (X + Y) bipartite graph is solved
on the superpixel side only. With ``W_Y = W^T D_X^-1 W`` and
``L_Y = D_Y - W_Y``, a pair ``L_Y v = lam D_Y v`` corresponds to a
full-graph pair with eigenvalue ``gamma = 1 - sqrt(1 - lam)`` whose X part
is ``D_X^-1 W v / (1 - gamma)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .graph import BipartiteGraph, GraphError
from .superpixels import relabel_scan_order

NULL_TOL = 1e-9


@dataclass(frozen=True)
class SpectralEmbedding:
    shape: tuple[int, int]
    eigenvalues: np.ndarray  # full-graph eigenvalues, ascending, trivial one first
    raw_vectors: np.ndarray  # transferred pixel vectors, trivial one dropped
    groups: np.ndarray | None = None  # pixels with equal rows share a group id

    @property
    def k(self) -> int:
        return len(self.eigenvalues)

    @property
    def pixel_vectors(self) -> np.ndarray:
        return row_normalize(self.raw_vectors)

    def truncate(self, k: int) -> "SpectralEmbedding":
        if k > self.k:
            raise ValueError(f"embedding holds {self.k} eigenpairs, asked for {k}")
        return SpectralEmbedding(self.shape, self.eigenvalues[:k], self.raw_vectors[:, :k - 1],
                                 self.groups)


def row_normalize(v: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(v, axis=1, keepdims=True)
    return np.divide(v, norms, out=np.zeros_like(v), where=norms > 0)


def cross_incidence(g: BipartiteGraph) -> sp.csr_matrix:
    """W with rows = X side (pixels, then superpixels), columns = Y side."""
    n_p, n_s = g.n_pixels, g.n_superpixels
    nodes = g.e1_nodes()
    sup = np.arange(n_s)
    rows = [np.repeat(np.arange(n_p), g.n_layers), n_p + g.e2_src, n_p + g.e2_dst]
    cols = [nodes.ravel(), g.e2_dst, g.e2_src]
    vals = [np.full(nodes.size, g.alpha), g.e2_weight, g.e2_weight]
    if g.self_link > 0:
        rows.append(n_p + sup)
        cols.append(sup)
        vals.append(np.full(n_s, g.self_link))
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                         shape=(n_p + n_s, n_s))


def _rotate_null_space(vals, vecs, d_y):
    """Within the near-null eigenspace make the first vector constant.

    Disconnected graphs have a degenerate null space and the solver may
    return any basis of it; dropping its first vector must remove the
    constant direction and nothing else.
    """
    m = int(np.sum(vals < NULL_TOL))
    if m < 2:
        return vecs
    block = vecs[:, :m]
    const = np.ones(len(d_y)) / np.sqrt(d_y.sum())
    coef = block.T @ (d_y * const)
    q, _ = np.linalg.qr(np.column_stack([coef, np.eye(m)]))
    q = q[:, :m]
    if q[:, 0] @ coef < 0:
        q[:, 0] = -q[:, 0]
    out = vecs.copy()
    out[:, :m] = block @ q
    return out


def transfer_eigenpairs(w, k: int):
    """Smallest ``k`` full-graph eigenpairs of the bipartite graph with
    cross-incidence ``w`` (X rows, Y columns), via the Y-side problem.

    Returns ``(gamma, u, v)``: eigenvalues, X-side and Y-side vectors.
    Y-side pairs with ``lam >= 1 - 1e-9`` are skipped. X rows of zero degree
    get zero entries.
    """
    w = sp.csr_matrix(w)
    d_x = np.asarray(w.sum(axis=1)).ravel()
    d_y = np.asarray(w.sum(axis=0)).ravel()
    if np.any(d_y <= 0):
        raise GraphError("a Y-side node has zero degree")
    inv_x = np.divide(1.0, d_x, out=np.zeros_like(d_x), where=d_x > 0)
    w_y = (w.T @ sp.diags(inv_x) @ w).toarray()
    w_y = 0.5 * (w_y + w_y.T)
    l_y = np.diag(d_y) - w_y
    s = 1.0 / np.sqrt(d_y)
    lam, y = scipy.linalg.eigh(s[:, None] * l_y * s[None, :])
    lam = np.clip(lam, 0.0, None)
    v = s[:, None] * y
    keep = lam < 1.0 - NULL_TOL
    lam, v = lam[keep][:k], v[:, keep][:, :k]
    v = _rotate_null_space(lam, v, d_y)
    gamma = 1.0 - np.sqrt(1.0 - lam)
    u = (inv_x[:, None] * (w @ v)) / (1.0 - gamma)
    return gamma, u, v


def transfer_cut(g: BipartiteGraph, k: int) -> SpectralEmbedding:
    if k < 2:
        raise ValueError("k must be >= 2")
    w = cross_incidence(g)
    d_x = np.asarray(w[: g.n_pixels].sum(axis=1)).ravel()
    if np.any(d_x <= 0):
        raise GraphError("isolated pixel node")
    try:
        gamma, u, _ = transfer_eigenpairs(w, k)
    except np.linalg.LinAlgError as exc:
        raise FloatingPointError(f"eigen-solver failed: {exc}") from exc
    if len(gamma) < 2:
        raise GraphError("graph has fewer than two transferable eigenpairs")
    pix = u[: g.n_pixels, 1:]
    if not np.all(np.isfinite(pix)):
        raise FloatingPointError("non-finite spectral embedding")
    # a pixel's row depends only on the superpixels containing it
    _, groups = np.unique(g.e1_nodes(), axis=0, return_inverse=True)
    return SpectralEmbedding(tuple(g.shape), gamma, pix, groups.ravel())


def _farthest_first(points, weights, k, rng):
    n = len(points)
    first = int(rng.integers(n))
    centers = [first]
    d = np.sum((points - points[first]) ** 2, axis=1)
    for _ in range(1, k):
        nxt = int(np.argmax(d))
        centers.append(nxt)
        d = np.minimum(d, np.sum((points - points[nxt]) ** 2, axis=1))
    return points[centers].copy()


def kmeans(points, k: int, seed: int = 0, weights=None, max_iter: int = 100):
    """Weighted Lloyd iterations from a seeded farthest-first start.

    Returns per-point labels in [0, k). Empty clusters are refilled by
    splitting the largest cluster.
    """
    points = np.asarray(points, dtype=np.float64)
    n = len(points)
    weights = np.ones(n) if weights is None else np.asarray(weights, dtype=np.float64)
    rng = np.random.default_rng(seed)
    centers = _farthest_first(points, weights, k, rng)
    labels = None
    for _ in range(max_iter):
        d = (np.sum(points ** 2, axis=1)[:, None] - 2.0 * points @ centers.T
             + np.sum(centers ** 2, axis=1)[None, :])
        new = np.argmin(d, axis=1)
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        mass = np.bincount(labels, weights=weights, minlength=k)
        for c in range(k):
            if mass[c] > 0:
                sel = labels == c
                centers[c] = weights[sel] @ points[sel] / mass[c]
    return _fill_empty(labels, points, weights, k)


def _fill_empty(labels, points, weights, k):
    """Split the heaviest cluster until every label in [0, k) is used."""
    labels = labels.copy()
    while True:
        mass = np.bincount(labels, weights=weights, minlength=k)
        empty = np.flatnonzero(mass == 0)
        if empty.size == 0:
            return labels
        counts = np.bincount(labels, minlength=k)
        big = int(np.argmax(np.where(counts > 1, mass, -1)))
        if counts[big] < 2:
            raise ValueError(f"cannot form {k} clusters from {len(points)} points")
        members = np.flatnonzero(labels == big)
        c = points[members].mean(axis=0)
        far = members[np.argmax(np.sum((points[members] - c) ** 2, axis=1))]
        d_far = np.sum((points[members] - points[far]) ** 2, axis=1)
        d_c = np.sum((points[members] - c) ** 2, axis=1)
        move = members[d_far < d_c]
        if move.size == 0 or move.size == members.size:
            move = members[: members.size // 2]
        labels[move] = empty[0]


def cluster_embedding(e: SpectralEmbedding, k: int, seed: int = 0) -> np.ndarray:
    """k-means on the row-normalised pixel embedding; returns a label map.

    Identical embedding rows are clustered once with multiplicity weights.
    """
    vecs = e.pixel_vectors
    if not np.all(np.isfinite(vecs)):
        raise FloatingPointError("non-finite embedding")
    if e.groups is not None:
        inv = e.groups
        counts = np.bincount(inv)
        first = np.zeros(len(counts), dtype=np.int64)
        first[inv[::-1]] = np.arange(len(inv))[::-1]
        uniq = vecs[first]
    else:
        uniq, inv, counts = np.unique(vecs, axis=0, return_inverse=True, return_counts=True)
        inv = inv.ravel()
    if len(uniq) >= k:
        lab_u = kmeans(uniq, k, seed=seed, weights=counts)
        labels = lab_u[inv]
    else:
        labels = _fill_empty(
            kmeans(uniq, len(uniq), seed=seed, weights=counts)[inv], vecs,
            np.ones(len(vecs)), k)
    return relabel_scan_order(labels.reshape(e.shape))


def segment(g: BipartiteGraph, k: int, seed: int = 0) -> np.ndarray:
    return cluster_embedding(transfer_cut(g, k), k, seed)


def spectral_clustering(affinity, k: int, seed: int = 0) -> np.ndarray:
    """Normalised spectral clustering of a dense affinity matrix."""
    a = np.asarray(affinity, dtype=np.float64)
    a = 0.5 * (a + a.T)
    d = a.sum(axis=1)
    s = np.divide(1.0, np.sqrt(d), out=np.zeros_like(d), where=d > 0)
    m = s[:, None] * a * s[None, :]
    _, vecs = scipy.linalg.eigh(m)
    emb = row_normalize(vecs[:, ::-1][:, :k])
    return kmeans(emb, k, seed=seed)
