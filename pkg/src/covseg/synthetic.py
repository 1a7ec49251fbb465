"""Seeded synthetic images with known region masks."""

from __future__ import annotations

import itertools

import numpy as np


def _colors(rng, n: int, gap: float, lo: float = 0.15, hi: float = 0.85):
    for _ in range(10_000):
        c = rng.uniform(lo, hi, size=(n, 3))
        if all(np.linalg.norm(c[i] - c[j]) >= gap for i, j in itertools.combinations(range(n), 2)):
            return c
    raise RuntimeError("could not draw well-separated colours")


def region_mask(rng, n_regions: int, size: int = 64) -> np.ndarray:
    """Random 2- or 3-region layout: straight cuts, a disc, or stripes."""
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    kind = int(rng.integers(2))
    if n_regions == 2:
        if kind == 0:
            theta = rng.uniform(0, np.pi)
            off = rng.uniform(-0.15, 0.15) * size
            proj = (xx - size / 2) * np.cos(theta) + (yy - size / 2) * np.sin(theta)
            return (proj > off).astype(np.int64)
        cy, cx = rng.uniform(0.35, 0.65, 2) * size
        r = rng.uniform(0.2, 0.3) * size
        return ((yy - cy) ** 2 + (xx - cx) ** 2 < r * r).astype(np.int64)
    if n_regions == 3:
        if kind == 0:
            theta = rng.uniform(0, np.pi)
            proj = (xx - size / 2) * np.cos(theta) + (yy - size / 2) * np.sin(theta)
            cuts = np.array([-1, 1]) * size / 6 + rng.uniform(-0.05, 0.05) * size
            return np.digitize(proj, cuts).astype(np.int64)
        mask = (xx > size / 2 + rng.uniform(-0.1, 0.1) * size).astype(np.int64)
        cy, cx = rng.uniform(0.4, 0.6, 2) * size
        r = rng.uniform(0.15, 0.22) * size
        mask[(yy - cy) ** 2 + (xx - cx) ** 2 < r * r] = 2
        return mask
    raise ValueError("n_regions must be 2 or 3")


def synthetic_image(seed: int, n_regions: int = 2, size: int = 64,
                    noise: float = 0.05, gap: float = 0.3):
    """Returns ``(rgb image in [0, 1], ground-truth label map)``."""
    rng = np.random.default_rng(seed)
    mask = region_mask(rng, n_regions, size)
    colors = _colors(rng, n_regions, gap)
    img = colors[mask] + rng.normal(0.0, noise, size=(size, size, 3))
    return np.clip(img, 0.0, 1.0), mask


def synthetic_corpus(n: int = 20, seed: int = 0, size: int = 64, noise: float = 0.05):
    """Alternating two- and three-region images."""
    return [synthetic_image(seed + i, 2 + i % 2, size, noise) for i in range(n)]


def half_image(size: int = 64, left=(1.0, 0.0, 0.0), right=(0.0, 0.0, 1.0)):
    img = np.zeros((size, size, 3))
    img[:, : size // 2] = left
    img[:, size // 2:] = right
    mask = np.zeros((size, size), dtype=np.int64)
    mask[:, size // 2:] = 1
    return img, mask
