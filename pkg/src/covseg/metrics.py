"""Segmentation quality metrics: PRI, VoI, GCE, BDE and average rank."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import ndimage
from scipy.stats import rankdata


@dataclass(frozen=True)
class EvalReport:
    pri: float
    voi: float
    gce: float
    bde: float
    k_used: int | None = None

    def as_dict(self) -> dict:
        return asdict(self)


METRICS = ("pri", "voi", "gce", "bde")
HIGHER_IS_BETTER = {"pri": True, "voi": False, "gce": False, "bde": False}


def _pair(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"label maps differ in shape: {a.shape} vs {b.shape}")
    return a.ravel(), b.ravel()


def contingency(a, b) -> np.ndarray:
    """Joint label histogram; rows index labels of ``a``, columns of ``b``."""
    a, b = _pair(a, b)
    _, ia = np.unique(a, return_inverse=True)
    _, ib = np.unique(b, return_inverse=True)
    ia, ib = ia.ravel(), ib.ravel()
    table = np.zeros((ia.max() + 1, ib.max() + 1), dtype=np.int64)
    np.add.at(table, (ia, ib), 1)
    return table


def _pairs(x):
    x = np.asarray(x, dtype=np.float64)
    return x * (x - 1) / 2.0


def pri(a, b) -> float:
    """Rand index: share of unordered pixel pairs labelled consistently."""
    t = contingency(a, b)
    n = t.sum()
    total = n * (n - 1) / 2.0
    if total == 0:
        return 1.0
    both = _pairs(t).sum()
    same_a = _pairs(t.sum(axis=1)).sum()
    same_b = _pairs(t.sum(axis=0)).sum()
    disagree = same_a + same_b - 2.0 * both
    return float(1.0 - disagree / total)


def voi(a, b, base: float = 2.0) -> float:
    """Variation of information ``H(a|b) + H(b|a)``; bits by default."""
    t = contingency(a, b).astype(np.float64)
    n = t.sum()
    p = t / n
    pa = p.sum(axis=1)
    pb = p.sum(axis=0)
    nz = p > 0
    h_ab = -np.sum(p[nz] * np.log(p[nz]))
    h_a = -np.sum(pa[pa > 0] * np.log(pa[pa > 0]))
    h_b = -np.sum(pb[pb > 0] * np.log(pb[pb > 0]))
    # H(a|b) + H(b|a) = 2 H(a,b) - H(a) - H(b)
    return float(max(2.0 * h_ab - h_a - h_b, 0.0) / math.log(base))


def gce(a, b) -> float:
    """Global consistency error, min over the two refinement directions."""
    t = contingency(a, b).astype(np.float64)
    n = t.sum()
    ra = t.sum(axis=1, keepdims=True)
    rb = t.sum(axis=0, keepdims=True)
    e_ab = np.sum(t * (ra - t) / ra)
    e_ba = np.sum(t * (rb - t) / rb)
    return float(min(e_ab, e_ba) / n)


def boundary_mask(labels) -> np.ndarray:
    """Pixels whose left or upper 4-neighbour carries a different label.

    One-sided so that a straight cut yields a single-pixel-wide boundary.
    """
    lab = np.asarray(labels)
    m = np.zeros(lab.shape, dtype=bool)
    m[:, 1:] |= lab[:, 1:] != lab[:, :-1]
    m[1:, :] |= lab[1:, :] != lab[:-1, :]
    return m


def _directed_bde(src: np.ndarray, dst: np.ndarray) -> float:
    dist = ndimage.distance_transform_edt(~dst)
    return float(dist[src].mean())


def bde(a, b) -> float:
    """Boundary displacement error in pixels (symmetric mean)."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"label maps differ in shape: {a.shape} vs {b.shape}")
    ba, bb = boundary_mask(a), boundary_mask(b)
    has_a, has_b = ba.any(), bb.any()
    if not has_a and not has_b:
        return 0.0
    if not has_a or not has_b:
        return _frame_distance(ba if has_a else bb)
    return 0.5 * (_directed_bde(ba, bb) + _directed_bde(bb, ba))


def _frame_distance(src: np.ndarray) -> float:
    """Directed mean from ``src`` when the other map has no boundary.

    The single-segment map is taken to be bounded by the image frame.
    """
    h, w = src.shape
    yy, xx = np.nonzero(src)
    d = np.minimum.reduce([yy, h - 1 - yy, xx, w - 1 - xx]).astype(np.float64)
    return float(d.mean())


def evaluate(candidate, truth, voi_base: float = 2.0, k_used=None) -> EvalReport:
    return EvalReport(pri(candidate, truth), voi(candidate, truth, voi_base),
                      gce(candidate, truth), bde(candidate, truth), k_used)


def best_over_groundtruths(candidate, truths, aggregate: str = "mean",
                           voi_base: float = 2.0, k_used=None) -> EvalReport:
    """Score one candidate against several human annotations.

    ``aggregate="mean"`` averages each metric over truths; ``"best"`` keeps
    the best truth per metric.
    """
    truths = list(truths)
    if not truths:
        raise ValueError("need at least one ground truth")
    reps = [evaluate(candidate, t, voi_base) for t in truths]
    vals = {m: np.array([getattr(r, m) for r in reps]) for m in METRICS}
    if aggregate == "mean":
        out = {m: float(v.mean()) for m, v in vals.items()}
    elif aggregate == "best":
        out = {m: float(v.max() if HIGHER_IS_BETTER[m] else v.min()) for m, v in vals.items()}
    else:
        raise ValueError("aggregate must be 'mean' or 'best'")
    return EvalReport(**out, k_used=k_used)


def best_per_metric(reports) -> EvalReport:
    """Best value of each metric over a sweep (e.g. over K), independently."""
    reports = list(reports)
    if not reports:
        raise ValueError("no reports")
    out = {}
    for m in METRICS:
        vals = [getattr(r, m) for r in reports]
        out[m] = max(vals) if HIGHER_IS_BETTER[m] else min(vals)
    best_pri = max(reports, key=lambda r: r.pri)
    return EvalReport(**out, k_used=best_pri.k_used)


def average_rank(reports: dict) -> dict:
    """Mean of per-metric ranks (1 = best; ties share the average rank)."""
    names = list(reports)
    if len(names) < 2:
        raise ValueError("need at least two algorithms to rank")
    ranks = np.zeros(len(names))
    for m in METRICS:
        vals = np.array([getattr(reports[n], m) for n in names], dtype=np.float64)
        ranks += rankdata(-vals if HIGHER_IS_BETTER[m] else vals, method="average")
    return {n: float(r / len(METRICS)) for n, r in zip(names, ranks)}


def format_table(reports: dict, delimiter: str = "\t", digits: int = 4) -> str:
    """Delimited rows: algorithm, PRI, VoI, GCE, BDE, Avg.R."""
    ar = average_rank(reports) if len(reports) >= 2 else {}
    lines = [delimiter.join(["algorithm", "PRI", "VoI", "GCE", "BDE", "Avg.R"])]
    for name, r in reports.items():
        rank = f"{ar[name]:.2f}" if name in ar else "-"
        cells = [name] + [f"{getattr(r, m):.{digits}f}" for m in METRICS] + [rank]
        lines.append(delimiter.join(cells))
    return "\n".join(lines) + "\n"
