from collections import deque

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from covseg.superpixels import (DEFAULT_GENERATORS, GeneratorSpec, SuperpixelLayer,
                                enforce_connectivity, felzenszwalb, generate_multiscale,
                                grid_local_cluster, is_partition_connected, layer_from_labels,
                                relabel_scan_order)
from covseg.synthetic import half_image


def bfs_components(labels):
    """Independent 4-connected component labelling."""
    h, w = labels.shape
    comp = -np.ones((h, w), dtype=int)
    n = 0
    for r in range(h):
        for c in range(w):
            if comp[r, c] >= 0:
                continue
            comp[r, c] = n
            q = deque([(r, c)])
            while q:
                y, x = q.popleft()
                for dy, dx in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                    yy, xx = y + dy, x + dx
                    if 0 <= yy < h and 0 <= xx < w and comp[yy, xx] < 0 \
                            and labels[yy, xx] == labels[y, x]:
                        comp[yy, xx] = n
                        q.append((yy, xx))
            n += 1
    return comp, n


def same_partition(a, b):
    pairs = set(zip(a.ravel().tolist(), b.ravel().tolist()))
    return len(pairs) == len(np.unique(a)) == len(np.unique(b))


def assert_valid_layer(layer):
    lab = layer.labels
    comp, n = bfs_components(lab)
    assert n == lab.max() + 1, "every label must be one 4-connected piece"
    assert set(np.unique(lab)) == set(range(n))
    assert n >= 2


def test_fh_two_halves():
    img, _ = half_image(32)
    comp, _ = bfs_components((img[:, :, 0] > 0.5).astype(int))
    # blur would turn the one-pixel transition columns into their own strips
    for k in (0.05, 0.3, 1.0, 5.0):
        layer = felzenszwalb(img, k_param=k, min_size=1, sigma_blur=0.0)
        assert layer.n_regions == 2
        assert same_partition(layer.labels, comp)


def test_fh_constant_image_falls_back_to_split():
    layer = felzenszwalb(np.full((10, 10, 3), 0.5))
    assert layer.n_regions == 2
    assert_valid_layer(layer)


def test_fh_deterministic():
    r = np.random.default_rng(0)
    img = r.uniform(size=(20, 20, 3))
    a = felzenszwalb(img, 0.5, 5)
    b = felzenszwalb(img, 0.5, 5)
    np.testing.assert_array_equal(a.labels, b.labels)
    assert_valid_layer(a)


def test_fh_rejects_bad_params():
    with pytest.raises(ValueError):
        felzenszwalb(np.zeros((4, 4, 3)), k_param=0.0)
    with pytest.raises(ValueError):
        felzenszwalb(np.zeros((4, 4, 3)), min_size=0)


def test_grid_two_halves():
    img, _ = half_image(16)
    layer = grid_local_cluster(img, 2)
    half = (img[:, :, 0] > 0.5).astype(int)
    assert layer.n_regions == 2
    assert same_partition(layer.labels, half)


def test_grid_constant_quadrants():
    layer = grid_local_cluster(np.full((8, 8, 3), 0.3), 4)
    expect = np.zeros((8, 8), dtype=int)
    expect[:4, 4:] = 1
    expect[4:, :4] = 2
    expect[4:, 4:] = 3
    np.testing.assert_array_equal(layer.labels, expect)


def test_grid_rejects_too_many_seeds():
    with pytest.raises(ValueError):
        grid_local_cluster(np.zeros((3, 3, 3)), 10)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), target=st.integers(2, 30))
def test_grid_always_valid(seed, target):
    img = np.random.default_rng(seed).uniform(size=(16, 20, 3))
    assert_valid_layer(grid_local_cluster(img, target))


def test_enforce_connectivity_random_partitions():
    r = np.random.default_rng(11)
    for _ in range(50):
        h, w = int(r.integers(2, 12)), int(r.integers(2, 12))
        lab = r.integers(0, int(r.integers(1, 6)), (h, w))
        min_size = int(r.integers(1, 6))
        out = enforce_connectivity(lab, min_size)
        comp, n = bfs_components(out)
        assert n == out.max() + 1
        assert is_partition_connected(out)
        sizes = np.bincount(out.ravel())
        assert n == 1 or sizes.min() >= min(min_size, h * w)
        # merging only coarsens the connected pieces of the input
        pieces, _ = bfs_components(lab)
        assert all(len(set(out[pieces == p])) == 1 for p in np.unique(pieces))


def test_relabel_scan_order():
    lab = np.array([[5, 5, 2], [7, 2, 2]])
    np.testing.assert_array_equal(relabel_scan_order(lab), [[0, 0, 1], [2, 1, 1]])


def test_is_partition_connected():
    assert is_partition_connected(np.array([[0, 0], [1, 1]]))
    assert not is_partition_connected(np.array([[0, 1], [1, 0]]))


def test_default_generators_give_five_layers():
    img = np.random.default_rng(2).uniform(size=(40, 48, 3))
    layers = generate_multiscale(img)
    assert len(layers) == len(DEFAULT_GENERATORS) == 5
    assert [l.layer_id for l in layers] == list(range(5))
    for layer in layers:
        assert_valid_layer(layer)
    assert len(generate_multiscale(img, [GeneratorSpec("grid", {"target_count": 6})])) == 1
    with pytest.raises(ValueError):
        generate_multiscale(img, [])
    with pytest.raises(ValueError):
        GeneratorSpec("meanshift").run(img, 0)


def test_layer_from_labels_splits_pieces():
    layer = layer_from_labels(np.array([[0, 1, 0], [0, 1, 0]]))
    assert layer.n_regions == 3
    assert len(layer.regions) == 3 and layer.shape == (2, 3)
    with pytest.raises(ValueError):
        layer_from_labels(np.zeros((3, 3)))
