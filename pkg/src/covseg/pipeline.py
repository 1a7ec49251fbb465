"""End-to-end superpixel segmentation and benchmarking."""

from __future__ import annotations

import concurrent.futures
import dataclasses
import hashlib
import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .descriptors import as_feature_set, compute_planes, layer_descriptors, normalize_image
from .graph import BipartiteGraph, build_skeleton, knn_refine, weight_from_affinities, weight_rbf
from .io import InputError, ingest_groundtruth, read_image
from .lrr import layer_affinity
from .metrics import (EvalReport, METRICS, best_over_groundtruths, best_per_metric,
                      format_table)
from .spectral import cluster_embedding, transfer_cut
from .superpixels import DEFAULT_GENERATORS, GeneratorSpec, SuperpixelLayer, generate_multiscale

log = logging.getLogger(__name__)

BACKENDS = {"rbf": "RBFLE", "lrr": "LRR"}
IMAGE_SUFFIXES = (".png", ".ppm", ".pnm", ".jpg", ".jpeg")
TRUTH_SUFFIXES = (".seg", ".txt", ".pgm")


@dataclass(frozen=True)
class PipelineConfig:
    feature_set: str = "CovII"
    backend: str = "rbf"
    sigma: float = 20.0
    alpha: float = 1e-3
    self_link: float = 0.01
    lambda_grid: tuple = (1.0, 0.1, 0.01, 0.001)
    default_lambda: float = 0.1
    k_min: int = 2
    k_max: int = 40
    fixed_k: int | None = None
    knn: int = 1
    seed: int = 0
    eps_spd: float = 1e-6
    superpixels: tuple = DEFAULT_GENERATORS
    rank_tol: float = 1e-8
    lrr_max_iters: int = 500
    lrr_normalize: bool = True
    voi_base: float = 2.0
    truth_aggregate: str = "mean"
    best_k: str = "per_metric"

    def __post_init__(self):
        object.__setattr__(self, "feature_set", as_feature_set(self.feature_set).value)
        if self.backend not in BACKENDS:
            raise ValueError(f"backend must be one of {sorted(BACKENDS)}")
        if not 2 <= self.k_min <= self.k_max <= 40:
            raise ValueError("k range must satisfy 2 <= k_min <= k_max <= 40")
        if self.fixed_k is not None and not 2 <= self.fixed_k <= 40:
            raise ValueError("fixed_k must lie in [2, 40]")
        if self.sigma <= 0 or self.alpha <= 0 or self.eps_spd <= 0:
            raise ValueError("sigma, alpha and eps_spd must be positive")
        if self.self_link < 0:
            raise ValueError("self_link must be non-negative")
        if self.knn < 1:
            raise ValueError("knn must be >= 1")
        if not self.lambda_grid or any(l <= 0 for l in self.lambda_grid):
            raise ValueError("lambda_grid must hold positive values")
        if self.best_k not in ("per_metric", "joint"):
            raise ValueError("best_k must be 'per_metric' or 'joint'")
        if self.truth_aggregate not in ("mean", "best"):
            raise ValueError("truth_aggregate must be 'mean' or 'best'")
        specs = tuple(s if isinstance(s, GeneratorSpec) else GeneratorSpec(**s)
                      for s in self.superpixels)
        object.__setattr__(self, "superpixels", specs)
        object.__setattr__(self, "lambda_grid", tuple(float(l) for l in self.lambda_grid))

    @property
    def ks(self) -> list[int]:
        if self.fixed_k is not None:
            return [self.fixed_k]
        return list(range(self.k_min, self.k_max + 1))

    @property
    def label(self) -> str:
        return f"{self.feature_set}+{BACKENDS[self.backend]}"

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["lambda_grid"] = list(self.lambda_grid)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        d = dict(d)
        if "lambda_grid" in d:
            d["lambda_grid"] = tuple(d["lambda_grid"])
        if "superpixels" in d:
            d["superpixels"] = tuple(GeneratorSpec(**s) if isinstance(s, dict) else s
                                     for s in d["superpixels"])
        return cls(**d)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()


@dataclass
class Prepared:
    image: np.ndarray
    layers: list[SuperpixelLayer]
    descriptors: list[list[np.ndarray]]


@dataclass
class ImageResult:
    labels: dict  # K -> label map
    reports: dict = field(default_factory=dict)  # K -> EvalReport
    best: EvalReport | None = None
    lam: float | None = None
    per_lambda_pri: dict = field(default_factory=dict)
    n_superpixels: int = 0


def prepare(image, config: PipelineConfig, layers=None) -> Prepared:
    """Superpixel layers and per-region descriptors for one image.

    ``layers`` may supply precomputed label maps instead of running the
    configured generators.
    """
    img = normalize_image(image)
    if layers is None:
        layers = generate_multiscale(img, config.superpixels)
    planes = compute_planes(img, config.feature_set)
    descs = [layer_descriptors(planes, l.labels, config.feature_set, config.eps_spd)
             for l in layers]
    return Prepared(img, list(layers), descs)


def rbf_graph(prep: Prepared, config: PipelineConfig) -> BipartiteGraph:
    g = build_skeleton(prep.layers, prep.descriptors, config.alpha, support="adjacent",
                       self_link=config.self_link)
    return knn_refine(weight_rbf(g, config.sigma), config.knn)


def lrr_graph(prep: Prepared, config: PipelineConfig, lam: float) -> BipartiteGraph:
    g = build_skeleton(prep.layers, prep.descriptors, config.alpha, support="all",
                       self_link=config.self_link)
    affs = []
    for i, desc in enumerate(prep.descriptors):
        aff, sol = layer_affinity(desc, lam, rank_tol=config.rank_tol,
                                  normalize=config.lrr_normalize,
                                  max_iters=config.lrr_max_iters)
        if not sol.converged:
            log.warning("LRR on layer %d did not converge in %d iterations (lam=%g)",
                        i, sol.iterations, lam)
        affs.append(aff)
    return knn_refine(weight_from_affinities(g, affs), config.knn)


def sweep_k(g: BipartiteGraph, ks, seed: int = 0) -> dict:
    """Label maps for every K in ``ks`` from a single eigen-decomposition.

    K values beyond the number of transferable eigenpairs are skipped.
    """
    ks = sorted(ks)
    emb = transfer_cut(g, min(ks[-1], g.n_superpixels))
    return {k: cluster_embedding(emb.truncate(k), k, seed) for k in ks if k <= emb.k}


def _evaluate_sweep(labels: dict, truths, config: PipelineConfig) -> dict:
    return {k: best_over_groundtruths(lab, truths, config.truth_aggregate,
                                      config.voi_base, k_used=k)
            for k, lab in labels.items()}


def _summarize(reports: dict, config: PipelineConfig) -> EvalReport:
    if config.best_k == "per_metric":
        return best_per_metric(reports.values())
    return max(reports.values(), key=lambda r: r.pri)


def run_image(image, config: PipelineConfig, truths=None, layers=None) -> ImageResult:
    """Segment one image for every K; score against ``truths`` if given.

    ``image`` is a path or an RGB array. For the LRR back-end with truths,
    the balance parameter is chosen from ``lambda_grid`` by best PRI over K;
    without truths ``default_lambda`` is used.
    """
    if isinstance(image, (str, Path)):
        image = read_image(image)
    prep = prepare(image, config, layers)
    truths = None if truths is None else list(truths)
    if truths is not None:
        for t in truths:
            if np.shape(t) != prep.image.shape[:2]:
                raise InputError(f"ground truth shape {np.shape(t)} does not match "
                                 f"image shape {prep.image.shape[:2]}")

    if config.backend == "rbf":
        g = rbf_graph(prep, config)
        labels = sweep_k(g, config.ks, config.seed)
        res = ImageResult(labels, n_superpixels=g.n_superpixels)
        if truths:
            res.reports = _evaluate_sweep(labels, truths, config)
            res.best = _summarize(res.reports, config)
        return res

    lams = config.lambda_grid if truths else (config.default_lambda,)
    best = None
    scores = {}
    for lam in lams:
        g = lrr_graph(prep, config, lam)
        labels = sweep_k(g, config.ks, config.seed)
        res = ImageResult(labels, lam=lam, n_superpixels=g.n_superpixels)
        if truths:
            res.reports = _evaluate_sweep(labels, truths, config)
            res.best = _summarize(res.reports, config)
            score = max(r.pri for r in res.reports.values())
        else:
            score = 0.0
        scores[lam] = score
        if best is None or score > best[0]:
            best = (score, res)
    best[1].per_lambda_pri = scores
    return best[1]


# -- benchmark ---------------------------------------------------------------

def find_images(image_dir) -> list[Path]:
    image_dir = Path(image_dir)
    if not image_dir.is_dir():
        raise InputError(f"{image_dir}: not a directory")
    return sorted(p for p in image_dir.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)


def match_truths(stem: str, truth_dir) -> list[Path]:
    """Annotation files for an image stem: ``stem.ext``, ``stem_*.ext`` or
    ``stem-*.ext`` anywhere below ``truth_dir``."""
    pat = re.compile(rf"^{re.escape(stem)}([_-].*)?$")
    return sorted(p for p in Path(truth_dir).rglob("*")
                  if p.is_file() and p.suffix.lower() in TRUTH_SUFFIXES and pat.match(p.stem))


def _cache_key(image_path: Path, truth_paths, config: PipelineConfig) -> str:
    h = hashlib.sha256()
    h.update(image_path.read_bytes())
    for t in truth_paths:
        h.update(t.read_bytes())
    h.update(config.digest().encode())
    return h.hexdigest()[:20]


def _bench_one(args):
    image_path, truth_paths, config, cache_dir = args
    key = _cache_key(image_path, truth_paths, config)
    cache_file = None
    if cache_dir is not None:
        cache_file = Path(cache_dir) / f"{image_path.stem}.{key}.json"
        if cache_file.exists():
            data = json.loads(cache_file.read_text())
            return image_path.stem, EvalReport(**data["report"]), data.get("lam"), True
    image = read_image(image_path)
    try:
        truths = ingest_groundtruth(truth_paths, image.shape[:2])
    except InputError as exc:
        log.warning("%s; skipped", exc)
        return image_path.stem, None, None, False
    res = run_image(image, config, truths)
    if cache_file is not None:
        tmp = cache_file.with_suffix(".tmp")
        tmp.write_text(json.dumps({"report": res.best.as_dict(), "lam": res.lam,
                                   "config": config.to_dict()}, default=str))
        tmp.replace(cache_file)
    return image_path.stem, res.best, res.lam, False


@dataclass
class BenchResult:
    per_image: dict  # label -> {stem: EvalReport}
    means: dict  # label -> EvalReport
    lambdas: dict  # label -> {stem: lam}
    skipped: list
    cached: int = 0

    def table(self, reference: dict | None = None, delimiter: str = "\t") -> str:
        rows = dict(reference or {})
        rows.update(self.means)
        return format_table(rows, delimiter)


def mean_report(reports) -> EvalReport:
    reports = list(reports)
    return EvalReport(**{m: float(np.mean([getattr(r, m) for r in reports])) for m in METRICS})


def run_benchmark(image_dir, truth_dir, configs, cache_dir=None, workers: int = 1) -> BenchResult:
    """Best-K reports per image and dataset means for each configuration."""
    if isinstance(configs, PipelineConfig):
        configs = [configs]
    images = find_images(image_dir)
    if not images:
        raise InputError(f"{image_dir}: no images found")
    if not Path(truth_dir).is_dir():
        raise InputError(f"{truth_dir}: not a directory")
    if cache_dir is not None:
        Path(cache_dir).mkdir(parents=True, exist_ok=True)
    jobs, skipped = [], []
    for img in images:
        truths = match_truths(img.stem, truth_dir)
        if not truths:
            log.warning("no ground truth for %s; skipped", img.name)
            skipped.append(img.name)
            continue
        jobs.append((img, truths))
    per_image, lambdas, means = {}, {}, {}
    cached = 0
    for config in configs:
        args = [(img, truths, config, cache_dir) for img, truths in jobs]
        if workers > 1:
            with concurrent.futures.ProcessPoolExecutor(workers) as ex:
                results = list(ex.map(_bench_one, args))
        else:
            results = [_bench_one(a) for a in args]
        for stem, rep, _, _ in results:
            if rep is None and stem not in skipped:
                skipped.append(stem)
        results = [r for r in results if r[1] is not None]
        per_image[config.label] = {stem: rep for stem, rep, _, _ in results}
        lambdas[config.label] = {stem: lam for stem, _, lam, _ in results}
        cached += sum(1 for *_, hit in results if hit)
        if results:
            means[config.label] = mean_report(per_image[config.label].values())
    return BenchResult(per_image, means, lambdas, skipped, cached)
