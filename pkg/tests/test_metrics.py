import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from covseg.metrics import (EvalReport, average_rank, bde, best_over_groundtruths, best_per_metric,
                            boundary_mask, evaluate, format_table, gce, pri, voi)

TABLE1 = {
    "SAS": EvalReport(0.8319, 1.6849, 0.1779, 11.2900),
    "l0-sparse": EvalReport(0.8355, 1.9935, 0.2297, 11.1955),
    "Col+CovI": EvalReport(0.8495, 1.6260, 0.1785, 12.3034),
    "CovII+LRR": EvalReport(0.8499, 1.7418, 0.1915, 12.7635),
    "CovIII+RBFLE": EvalReport(0.8397, 1.9026, 0.2103, 11.5557),
}
TABLE1_AVG_R = {"SAS": 2.5, "l0-sparse": 3.75, "Col+CovI": 2.25, "CovII+LRR": 3.0,
                "CovIII+RBFLE": 3.5}


# brute-force references, written from the definitions

def pri_brute(a, b):
    a, b = a.ravel(), b.ravel()
    agree = total = 0
    for i, j in itertools.combinations(range(a.size), 2):
        agree += (a[i] == a[j]) == (b[i] == b[j])
        total += 1
    return agree / total if total else 1.0


def voi_brute(a, b):
    a, b = a.ravel(), b.ravel()
    n = a.size
    h = 0.0
    for x in set(a):
        for y in set(b):
            pxy = np.sum((a == x) & (b == y)) / n
            if pxy > 0:
                px, py = np.sum(a == x) / n, np.sum(b == y) / n
                h -= pxy * (math.log2(pxy / py) + math.log2(pxy / px))
    return h


def gce_brute(a, b):
    a, b = a.ravel(), b.ravel()
    n = a.size

    def lre(s, t, p):
        rs = set(np.flatnonzero(s == s[p]))
        rt = set(np.flatnonzero(t == t[p]))
        return len(rs - rt) / len(rs)

    e1 = sum(lre(a, b, p) for p in range(n))
    e2 = sum(lre(b, a, p) for p in range(n))
    return min(e1, e2) / n


def boundary_brute(lab):
    h, w = lab.shape
    return [(r, c) for r in range(h) for c in range(w)
            if (c > 0 and lab[r, c - 1] != lab[r, c]) or (r > 0 and lab[r - 1, c] != lab[r, c])]


def bde_brute(a, b):
    pa, pb = boundary_brute(a), boundary_brute(b)
    if not pa and not pb:
        return 0.0
    h, w = a.shape

    def directed(src, dst):
        return np.mean([min(math.hypot(r - s, c - t) for s, t in dst) for r, c in src])

    if not pb or not pa:
        src = pa or pb
        return float(np.mean([min(r, h - 1 - r, c, w - 1 - c) for r, c in src]))
    return 0.5 * (directed(pa, pb) + directed(pb, pa))


def random_pair(r):
    h, w = int(r.integers(1, 7)), int(r.integers(1, 7))
    ka, kb = int(r.integers(1, 5)), int(r.integers(1, 5))
    return r.integers(0, ka, (h, w)), r.integers(0, kb, (h, w))


def test_metric_examples():
    a = np.array([[0], [0]])
    assert pri(a, np.array([[0], [1]])) == 0.0
    one = np.zeros((4, 4), dtype=int)
    halves = np.zeros((4, 4), dtype=int)
    halves[:, 2:] = 1
    assert voi(one, halves) == pytest.approx(1.0, abs=1e-15)
    assert voi(one, halves, base=math.e) == pytest.approx(math.log(2))
    quarters = halves + 2 * (np.arange(4)[:, None] >= 2)
    assert gce(quarters, halves) == 0.0
    a = np.zeros((10, 10), dtype=int)
    a[:, 3:] = 1
    b = np.zeros((10, 10), dtype=int)
    b[:, 5:] = 1
    assert bde(a, b) == pytest.approx(2.0, abs=1e-12)
    assert bde(a, a) == 0.0
    assert bde(one, one) == 0.0


def test_identical_maps_are_perfect():
    r = np.random.default_rng(0)
    lab = r.integers(0, 4, (6, 6))
    rep = evaluate(lab, lab)
    assert (rep.pri, rep.voi, rep.gce, rep.bde) == (1.0, 0.0, 0.0, 0.0)


def test_dimension_mismatch():
    for f in (pri, voi, gce, bde):
        with pytest.raises(ValueError):
            f(np.zeros((2, 2)), np.zeros((2, 3)))


def test_against_brute_force():
    r = np.random.default_rng(77)
    for _ in range(60):
        a, b = random_pair(r)
        assert pri(a, b) == pytest.approx(pri_brute(a, b), abs=1e-12)
        assert voi(a, b) == pytest.approx(voi_brute(a, b), abs=1e-12)
        assert gce(a, b) == pytest.approx(gce_brute(a, b), abs=1e-12)
        assert bde(a, b) == pytest.approx(bde_brute(a, b), abs=1e-9)


def test_boundary_mask_matches_brute():
    r = np.random.default_rng(1)
    lab = r.integers(0, 3, (6, 5))
    m = boundary_mask(lab)
    assert sorted(zip(*np.nonzero(m))) == boundary_brute(lab)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_symmetry_ranges_and_permutation(seed):
    r = np.random.default_rng(seed)
    a, b = random_pair(r)
    n = a.size
    for f in (pri, voi, gce, bde):
        assert f(a, b) == pytest.approx(f(b, a), abs=1e-12)
    assert 0.0 <= pri(a, b) <= 1.0 and 0.0 <= gce(a, b) <= 1.0 and bde(a, b) >= 0.0
    assert voi(a, b) <= 2 * math.log2(max(n, 2)) + 1e-12
    perm = r.permutation(10)
    rep1, rep2 = evaluate(a, b), evaluate(perm[a], b)
    for m in ("pri", "voi", "gce", "bde"):
        assert getattr(rep1, m) == pytest.approx(getattr(rep2, m), abs=1e-12)


def test_best_over_groundtruths():
    r = np.random.default_rng(3)
    c = r.integers(0, 3, (6, 6))
    assert best_over_groundtruths(c, [c]) == EvalReport(1.0, 0.0, 0.0, 0.0)
    t2 = r.integers(0, 3, (6, 6))
    assert best_over_groundtruths(c, [c, t2]).pri == pytest.approx((1 + pri(c, t2)) / 2)
    truths = [r.integers(0, k, (6, 6)) for k in (2, 3, 4)]
    rep = best_over_groundtruths(c, truths)
    assert rep.voi == pytest.approx(np.mean([voi_brute(c, t) for t in truths]))
    assert rep.bde == pytest.approx(np.mean([bde_brute(c, t) for t in truths]))
    best = best_over_groundtruths(c, truths, aggregate="best")
    assert best.pri == pytest.approx(max(pri_brute(c, t) for t in truths))
    assert best.gce == pytest.approx(min(gce_brute(c, t) for t in truths))
    with pytest.raises(ValueError):
        best_over_groundtruths(c, [])


def test_best_per_metric_is_independent():
    reps = [EvalReport(0.9, 2.0, 0.1, 5.0, 2), EvalReport(0.8, 1.0, 0.2, 4.0, 3)]
    assert best_per_metric(reps) == EvalReport(0.9, 1.0, 0.1, 4.0, 2)


def test_table1_average_rank():
    assert average_rank(TABLE1) == TABLE1_AVG_R


def test_average_rank_small_cases():
    good, bad = EvalReport(0.9, 1.0, 0.1, 1.0), EvalReport(0.5, 2.0, 0.2, 2.0)
    assert average_rank({"a": good, "b": bad}) == {"a": 1.0, "b": 2.0}
    tied = EvalReport(0.9, 2.0, 0.2, 2.0)
    assert average_rank({"a": good, "b": tied}) == {"a": 1.125, "b": 1.875}
    with pytest.raises(ValueError):
        average_rank({"a": good})


def test_format_table_shape():
    text = format_table(TABLE1, delimiter=",")
    lines = text.strip().split("\n")
    assert lines[0] == "algorithm,PRI,VoI,GCE,BDE,Avg.R"
    assert lines[3] == "Col+CovI,0.8495,1.6260,0.1785,12.3034,2.25"
    assert format_table({"x": TABLE1["SAS"]}).strip().endswith("\t-")
