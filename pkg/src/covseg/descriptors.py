"""Per-pixel feature planes and region covariance descriptors."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .spd import regularize


class FeatureSet(str, enum.Enum):
    COV_I = "CovI"
    COV_II = "CovII"
    COV_III = "CovIII"


# Column order of each feature set. "_xx"/"_yy" are second partials.
FEATURE_NAMES: dict[FeatureSet, tuple[str, ...]] = {
    FeatureSet.COV_I: ("R", "G", "B"),
    FeatureSet.COV_II: ("R", "G", "B", "I", "I_x", "I_y", "I_xx", "I_yy"),
    FeatureSet.COV_III: (
        "R", "G", "B",
        "R_x", "R_y", "G_x", "G_y", "B_x", "B_y",
        "R_xx", "R_yy", "G_xx", "G_yy", "B_xx", "B_yy",
    ),
}


def as_feature_set(value) -> FeatureSet:
    if isinstance(value, FeatureSet):
        return value
    for fs in FeatureSet:
        if fs.value.lower() == str(value).lower():
            return fs
    raise ValueError(f"unknown feature set {value!r}; expected CovI, CovII or CovIII")


@dataclass(frozen=True)
class PixelFeaturePlanes:
    width: int
    height: int
    planes: dict[str, np.ndarray]

    def stack(self, names) -> np.ndarray:
        """(height*width, len(names)) matrix, pixels in row-major order."""
        return np.stack([self.planes[n].ravel() for n in names], axis=1)


@dataclass(frozen=True)
class FeatureArray:
    values: np.ndarray
    feature_set: FeatureSet | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise ValueError("feature array must be 2-D (samples x features)")
        if self.feature_set is not None:
            want = len(FEATURE_NAMES[self.feature_set])
            if v.shape[1] != want:
                raise ValueError(
                    f"{self.feature_set.value} needs {want} features, got {v.shape[1]}"
                )
        object.__setattr__(self, "values", v)

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    @property
    def n_features(self) -> int:
        return self.values.shape[1]


def normalize_image(image: np.ndarray) -> np.ndarray:
    """Float RGB in [0, 1]. Integer input is divided by its dtype max."""
    img = np.asarray(image)
    if img.ndim == 2:
        img = np.repeat(img[:, :, None], 3, axis=2)
    if img.ndim != 3 or img.shape[2] < 3:
        raise ValueError(f"expected an RGB raster, got shape {img.shape}")
    img = img[:, :, :3]
    if np.issubdtype(img.dtype, np.integer):
        return img.astype(np.float64) / np.iinfo(img.dtype).max
    img = img.astype(np.float64)
    if img.size and (img.min() < 0 or img.max() > 1):
        raise ValueError("float images must already lie in [0, 1]")
    return img


def first_derivative(plane: np.ndarray, axis: int) -> np.ndarray:
    """Central difference with replicated borders."""
    p = np.pad(plane, [(1, 1) if a == axis else (0, 0) for a in range(2)], mode="edge")
    hi = [slice(None)] * 2
    lo = [slice(None)] * 2
    hi[axis] = slice(2, None)
    lo[axis] = slice(None, -2)
    return 0.5 * (p[tuple(hi)] - p[tuple(lo)])


def second_derivative(plane: np.ndarray, axis: int) -> np.ndarray:
    """[1, -2, 1] stencil with replicated borders."""
    p = np.pad(plane, [(1, 1) if a == axis else (0, 0) for a in range(2)], mode="edge")
    hi = [slice(None)] * 2
    mid = [slice(None)] * 2
    lo = [slice(None)] * 2
    hi[axis] = slice(2, None)
    mid[axis] = slice(1, -1)
    lo[axis] = slice(None, -2)
    return p[tuple(hi)] - 2.0 * p[tuple(mid)] + p[tuple(lo)]


def intensity(rgb: np.ndarray) -> np.ndarray:
    return rgb.mean(axis=2)


def compute_planes(image: np.ndarray, feature_set, intensity_fn=intensity) -> PixelFeaturePlanes:
    """Feature planes required by ``feature_set``.

    ``x`` runs along columns and ``y`` along rows. Only the planes named in
    the feature set are produced.
    """
    fs = as_feature_set(feature_set)
    img = np.asarray(image)
    if img.size == 0 or img.shape[0] == 0 or img.shape[1] == 0:
        raise ValueError("image is empty")
    rgb = normalize_image(img)
    h, w = rgb.shape[:2]
    base = {"R": rgb[:, :, 0], "G": rgb[:, :, 1], "B": rgb[:, :, 2]}
    if fs is not FeatureSet.COV_I:
        base["I"] = intensity_fn(rgb)
    planes = {}
    for name in FEATURE_NAMES[fs]:
        if name in base:
            planes[name] = base[name]
            continue
        src, op = name.split("_")
        axis = 1 if op[0] == "x" else 0
        fn = first_derivative if len(op) == 1 else second_derivative
        planes[name] = fn(base[src], axis)
    return PixelFeaturePlanes(width=w, height=h, planes=planes)


def region_feature_array(planes: PixelFeaturePlanes, region, feature_set) -> FeatureArray:
    fs = as_feature_set(feature_set)
    idx = np.asarray(region, dtype=np.intp).ravel()
    if idx.size == 0:
        raise ValueError("region is empty")
    n = planes.width * planes.height
    if idx.min() < 0 or idx.max() >= n:
        raise IndexError("region pixel index out of bounds")
    cols = [planes.planes[name].ravel()[idx] for name in FEATURE_NAMES[fs]]
    return FeatureArray(np.stack(cols, axis=1), fs)


def raw_covariance(f) -> np.ndarray:
    """Population (1/n) covariance of the columns of a feature array."""
    values = f.values if isinstance(f, FeatureArray) else np.asarray(f, dtype=np.float64)
    if values.shape[0] < 1:
        raise ValueError("need at least one sample")
    if not np.all(np.isfinite(values)):
        raise ValueError("feature array contains non-finite values")
    centered = values - values.mean(axis=0)
    cov = centered.T @ centered / values.shape[0]
    return 0.5 * (cov + cov.T)


def covariance_descriptor(f, eps: float = 1e-6) -> np.ndarray:
    return regularize(raw_covariance(f), eps)


def layer_regions(labels: np.ndarray) -> list[np.ndarray]:
    """Flat pixel indices of each label, ordered by label id."""
    lab = np.asarray(labels).ravel()
    order = np.argsort(lab, kind="stable")
    counts = np.bincount(lab)
    return np.split(order, np.cumsum(counts)[:-1])


def layer_descriptors(planes: PixelFeaturePlanes, labels: np.ndarray, feature_set,
                      eps: float = 1e-6) -> list[np.ndarray]:
    """Descriptors of every region in a label map, ordered by label id."""
    fs = as_feature_set(feature_set)
    feats = planes.stack(FEATURE_NAMES[fs])
    out = []
    for idx in layer_regions(labels):
        if idx.size == 0:
            raise ValueError("label map has empty labels")
        out.append(covariance_descriptor(feats[idx], eps))
    return out


def make_collinear_fixture(n_samples: int, sigma_u: float, seed: int = 0) -> FeatureArray:
    """Three features with ``f3 = f1 + f2 + u``, ``u ~ N(0, sigma_u)``."""
    if n_samples < 3:
        raise ValueError("n_samples must be at least 3")
    rng = np.random.default_rng(seed)
    f1 = rng.standard_normal(n_samples)
    f2 = rng.standard_normal(n_samples)
    u = rng.normal(0.0, sigma_u, n_samples) if sigma_u > 0 else np.zeros(n_samples)
    return FeatureArray(np.stack([f1, f2, f1 + f2 + u], axis=1))
