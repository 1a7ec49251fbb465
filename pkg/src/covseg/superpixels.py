"""Multi-layer over-segmentation: Felzenszwalb-Huttenlocher and grid clustering.

Every layer is a partition of the pixel grid into 4-connected regions with
at least two regions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import ndimage
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .descriptors import normalize_image


@dataclass(frozen=True)
class SuperpixelLayer:
    layer_id: int
    labels: np.ndarray
    generator_tag: str = ""

    @property
    def shape(self) -> tuple[int, int]:
        return self.labels.shape

    @property
    def n_regions(self) -> int:
        return int(self.labels.max()) + 1

    @cached_property
    def regions(self) -> list[np.ndarray]:
        lab = self.labels.ravel()
        order = np.argsort(lab, kind="stable")
        return np.split(order, np.cumsum(np.bincount(lab))[:-1])


class UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, a: int) -> int:
        parent = self.parent
        root = a
        while parent[root] != root:
            root = parent[root]
        while parent[a] != root:
            parent[a], a = root, parent[a]
        return root

    def union(self, a: int, b: int) -> int:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return ra
        if self.size[ra] < self.size[rb] or (self.size[ra] == self.size[rb] and rb < ra):
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        return ra


def relabel_scan_order(labels: np.ndarray) -> np.ndarray:
    """Map label ids to 0..n-1 in order of first occurrence (row-major)."""
    flat = np.asarray(labels).ravel()
    _, first, inv = np.unique(flat, return_index=True, return_inverse=True)
    rank = np.empty(len(first), dtype=np.int64)
    rank[np.argsort(first, kind="stable")] = np.arange(len(first))
    return rank[inv.ravel()].reshape(np.shape(labels))


def _neighbor_pairs(h: int, w: int):
    """Flat index pairs of horizontal and vertical 4-neighbours."""
    idx = np.arange(h * w).reshape(h, w)
    a = np.concatenate([idx[:, :-1].ravel(), idx[:-1, :].ravel()])
    b = np.concatenate([idx[:, 1:].ravel(), idx[1:, :].ravel()])
    return a, b


def connected_pieces(labels: np.ndarray) -> np.ndarray:
    """Split every label into its 4-connected components; ids are arbitrary."""
    h, w = labels.shape
    flat = labels.ravel()
    a, b = _neighbor_pairs(h, w)
    same = flat[a] == flat[b]
    g = coo_matrix((np.ones(int(same.sum())), (a[same], b[same])), shape=(h * w, h * w))
    _, comp = connected_components(g, directed=False)
    return comp.reshape(h, w)


def is_partition_connected(labels: np.ndarray) -> bool:
    """True if every label forms one 4-connected region."""
    pieces = connected_pieces(labels)
    return len(np.unique(pieces)) == len(np.unique(labels))


def enforce_connectivity(labels: np.ndarray, min_size: int = 1) -> np.ndarray:
    """Make every region 4-connected and at least ``min_size`` pixels.

    A label's largest connected piece keeps the label; its other pieces
    (orphans) and any piece smaller than ``min_size`` are merged, smallest
    first, into the largest adjacent region.
    """
    h, w = labels.shape
    pieces = relabel_scan_order(connected_pieces(labels))
    flat_p = pieces.ravel()
    n = int(flat_p.max()) + 1
    sizes = np.bincount(flat_p, minlength=n)
    owner = np.zeros(n, dtype=np.int64)
    owner[flat_p] = labels.ravel()

    kept = np.zeros(n, dtype=bool)
    best: dict[int, int] = {}
    for p in range(n):
        o = int(owner[p])
        if o not in best or sizes[p] > sizes[best[o]]:
            best[o] = p
    kept[list(best.values())] = True

    a, b = _neighbor_pairs(h, w)
    pa, pb = flat_p[a], flat_p[b]
    diff = pa != pb
    pairs = np.unique(np.stack([np.minimum(pa[diff], pb[diff]),
                                np.maximum(pa[diff], pb[diff])], axis=1), axis=0)
    adj: list[set[int]] = [set() for _ in range(n)]
    for u, v in pairs.tolist():
        adj[u].add(v)
        adj[v].add(u)

    uf = UnionFind(n)
    uf.size = sizes.tolist()
    has_kept = kept.copy()
    for p in sorted(range(n), key=lambda q: (sizes[q], q)):
        r = uf.find(p)
        if has_kept[r] and uf.size[r] >= min_size:
            continue
        nbrs = {uf.find(q) for q in adj[r]} - {r}
        adj[r] = nbrs
        if not nbrs:
            continue
        target = max(nbrs, key=lambda s: (uf.size[s], -s))
        flag = has_kept[r] or has_kept[target]
        root = uf.union(r, target)
        other = target if root == r else r
        adj[root] = adj[root] | adj[other]
        has_kept[root] = flag
    roots = np.array([uf.find(p) for p in range(n)])
    return relabel_scan_order(roots[pieces])


def force_two_regions(labels: np.ndarray) -> np.ndarray:
    """Degenerate single-region output becomes a 2-way grid split."""
    if int(labels.max()) > 0:
        return labels
    h, w = labels.shape
    if h * w < 2:
        raise ValueError("cannot split a single-pixel image into two regions")
    out = np.zeros((h, w), dtype=np.int64)
    if w >= 2:
        out[:, w // 2:] = 1
    else:
        out[h // 2:, :] = 1
    return out


def finalize_labels(labels: np.ndarray, min_size: int = 1) -> np.ndarray:
    out = enforce_connectivity(np.asarray(labels, dtype=np.int64), min_size)
    return force_two_regions(out)


def felzenszwalb(image, k_param: float = 1.0, min_size: int = 20,
                 sigma_blur: float = 0.5, layer_id: int = 0) -> SuperpixelLayer:
    """Graph-based segmentation on the 8-neighbour grid.

    Colours are normalised to [0, 1]; ``k_param`` is on that scale. Edges
    are sorted by RGB distance with ties broken by edge index.
    """
    if k_param <= 0:
        raise ValueError("k_param must be positive")
    if min_size < 1:
        raise ValueError("min_size must be >= 1")
    rgb = normalize_image(image)
    h, w = rgb.shape[:2]
    if h * w == 0:
        raise ValueError("image is empty")
    if sigma_blur > 0:
        rgb = np.stack([ndimage.gaussian_filter(rgb[:, :, c], sigma_blur, mode="nearest")
                        for c in range(3)], axis=2)

    idx = np.arange(h * w).reshape(h, w)
    src = [idx[:, :-1], idx[:-1, :], idx[:-1, :-1], idx[:-1, 1:]]
    dst = [idx[:, 1:], idx[1:, :], idx[1:, 1:], idx[1:, :-1]]
    a = np.concatenate([s.ravel() for s in src])
    b = np.concatenate([d.ravel() for d in dst])
    flat = rgb.reshape(-1, 3)
    weight = np.sqrt(np.sum((flat[a] - flat[b]) ** 2, axis=1))
    order = np.argsort(weight, kind="stable")

    uf = UnionFind(h * w)
    internal = [0.0] * (h * w)
    a_l, b_l, w_l = a[order].tolist(), b[order].tolist(), weight[order].tolist()
    for u, v, wt in zip(a_l, b_l, w_l):
        ru, rv = uf.find(u), uf.find(v)
        if ru == rv:
            continue
        if wt <= min(internal[ru] + k_param / uf.size[ru],
                     internal[rv] + k_param / uf.size[rv]):
            r = uf.union(ru, rv)
            internal[r] = wt
    for u, v in zip(a_l, b_l):
        ru, rv = uf.find(u), uf.find(v)
        if ru != rv and (uf.size[ru] < min_size or uf.size[rv] < min_size):
            uf.union(ru, rv)

    roots = np.array([uf.find(p) for p in range(h * w)]).reshape(h, w)
    labels = finalize_labels(roots, min_size=1)
    tag = f"fh(k={k_param:g},min_size={min_size},sigma={sigma_blur:g})"
    return SuperpixelLayer(layer_id, labels, tag)


def _grid_shape(h: int, w: int, target: int) -> tuple[int, int]:
    rows = int(max(1, min(h, round(np.sqrt(target * h / w)))))
    cols = int(max(1, min(w, round(target / rows))))
    if rows * cols < 2:
        if w >= 2:
            cols = 2
        else:
            rows = 2
    return rows, cols


def grid_local_cluster(image, target_count: int, compactness: float = 0.1,
                       max_iter: int = 10, layer_id: int = 0) -> SuperpixelLayer:
    """Grid-seeded local k-means in (colour, position) space.

    Distance is ``sqrt(dc**2 + (compactness * ds / step)**2)`` with ``dc``
    on [0, 1] RGB and ``step`` the seed spacing. Each centre searches a
    window of twice the spacing.
    """
    if target_count < 2:
        raise ValueError("target_count must be >= 2")
    rgb = normalize_image(image)
    h, w = rgb.shape[:2]
    if target_count > h * w:
        raise ValueError(f"target_count {target_count} exceeds pixel count {h * w}")
    rows, cols = _grid_shape(h, w, target_count)
    step = np.sqrt(h * w / (rows * cols))

    gy = np.hypot(*np.gradient(rgb.mean(axis=2))) if min(h, w) > 1 else np.zeros((h, w))
    cy = (np.arange(rows) + 0.5) * h / rows - 0.5
    cx = (np.arange(cols) + 0.5) * w / cols - 0.5
    centers = []
    for y in cy:
        for x in cx:
            yi, xi = int(round(y)), int(round(x))
            y0, y1 = max(yi - 1, 0), min(yi + 2, h)
            x0, x1 = max(xi - 1, 0), min(xi + 2, w)
            win = gy[y0:y1, x0:x1]
            py, px = np.unravel_index(np.argmin(win), win.shape)
            if win[py, px] < gy[yi, xi]:
                y, x = float(y0 + py), float(x0 + px)
                yi, xi = int(y), int(x)
            centers.append([y, x, *rgb[yi, xi]])
    centers = np.array(centers)

    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    spatial = (compactness / step) ** 2
    radius = 2.0 * step
    feats = np.column_stack([yy.ravel(), xx.ravel(), rgb.reshape(-1, 3)])
    labels = -np.ones((h, w), dtype=np.int64)
    for _ in range(max_iter):
        best = np.full((h, w), np.inf)
        new = -np.ones((h, w), dtype=np.int64)
        for c, (y, x, *col) in enumerate(centers):
            y0, y1 = max(int(np.floor(y - radius)), 0), min(int(np.ceil(y + radius)) + 1, h)
            x0, x1 = max(int(np.floor(x - radius)), 0), min(int(np.ceil(x + radius)) + 1, w)
            sub = rgb[y0:y1, x0:x1]
            dc = np.sum((sub - np.asarray(col)) ** 2, axis=2)
            ds = (yy[y0:y1, x0:x1] - y) ** 2 + (xx[y0:y1, x0:x1] - x) ** 2
            d = dc + spatial * ds
            region = best[y0:y1, x0:x1]
            upd = d < region
            region[upd] = d[upd]
            new[y0:y1, x0:x1][upd] = c
        missing = new < 0
        if missing.any():
            d = (yy[missing][:, None] - centers[:, 0]) ** 2 + (xx[missing][:, None] - centers[:, 1]) ** 2
            new[missing] = np.argmin(d, axis=1)
        if np.array_equal(new, labels):
            break
        labels = new
        flat = labels.ravel()
        counts = np.bincount(flat, minlength=len(centers)).astype(np.float64)
        sums = np.zeros_like(centers)
        for j in range(feats.shape[1]):
            sums[:, j] = np.bincount(flat, weights=feats[:, j], minlength=len(centers))
        ok = counts > 0
        centers[ok] = sums[ok] / counts[ok, None]

    min_size = max(1, int(step * step / 16))
    out = finalize_labels(labels, min_size=min_size)
    tag = f"grid(target={target_count},compactness={compactness:g})"
    return SuperpixelLayer(layer_id, out, tag)


@dataclass(frozen=True)
class GeneratorSpec:
    """One superpixel generator invocation.

    ``kind`` is ``"fh"`` or ``"grid"``. A grid spec may give ``target_count``
    directly or ``area`` (pixels per superpixel), resolved against the image.
    """

    kind: str
    params: dict = field(default_factory=dict)

    def run(self, image, layer_id: int) -> SuperpixelLayer:
        p = dict(self.params)
        if self.kind == "fh":
            return felzenszwalb(image, layer_id=layer_id, **p)
        if self.kind == "grid":
            if "area" in p:
                area = p.pop("area")
                h, w = np.asarray(image).shape[:2]
                p["target_count"] = int(max(2, min(h * w, round(h * w / area))))
            return grid_local_cluster(image, layer_id=layer_id, **p)
        raise ValueError(f"unknown superpixel generator {self.kind!r}")


DEFAULT_GENERATORS: tuple[GeneratorSpec, ...] = (
    GeneratorSpec("grid", {"area": 100, "compactness": 0.3}),
    GeneratorSpec("grid", {"area": 200, "compactness": 0.3}),
    GeneratorSpec("grid", {"area": 400, "compactness": 0.3}),
    GeneratorSpec("fh", {"k_param": 0.2, "min_size": 30, "sigma_blur": 0.5}),
    GeneratorSpec("fh", {"k_param": 0.5, "min_size": 60, "sigma_blur": 0.5}),
)


def generate_multiscale(image, generators=DEFAULT_GENERATORS) -> list[SuperpixelLayer]:
    generators = list(generators)
    if not generators:
        raise ValueError("at least one superpixel generator is required")
    return [g.run(image, layer_id=i) for i, g in enumerate(generators)]


def layer_from_labels(labels, layer_id: int = 0, tag: str = "import") -> SuperpixelLayer:
    """Wrap an externally computed label map.

    Disconnected labels are split into their 4-connected pieces so the
    layer invariants hold without altering any boundary.
    """
    lab = np.asarray(labels, dtype=np.int64)
    if lab.ndim != 2 or lab.size == 0:
        raise ValueError("label map must be a non-empty 2-D array")
    lab = relabel_scan_order(connected_pieces(lab))
    if lab.max() < 1:
        raise ValueError("imported label map must contain at least two regions")
    return SuperpixelLayer(layer_id, lab, tag)
