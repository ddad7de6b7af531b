import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from citylayout.errors import AlignmentError, EmptyDistribution
from citylayout.geometry import Polygon
from citylayout.metrics import (
    LayoutSample,
    evaluate,
    layout_similarity,
    out_of_block_ratio,
    overlap_ratio,
    wd_1d,
    wd_bbx,
    wd_count,
)

from helpers import rotate_scale_translate


def rect(cx, cy, w, h):
    return Polygon([(cx - w / 2, cy - h / 2), (cx + w / 2, cy - h / 2),
                    (cx + w / 2, cy + h / 2), (cx - w / 2, cy + h / 2)])


def transport_lp_oracle(xs, ys) -> float:
    """Minimum-cost transport between empirical distributions via an LP."""
    n, m = len(xs), len(ys)
    cost = np.abs(np.subtract.outer(xs, ys)).ravel()
    a_eq = []
    b_eq = []
    for i in range(n):
        row = np.zeros(n * m)
        row[i * m : (i + 1) * m] = 1
        a_eq.append(row)
        b_eq.append(1 / n)
    for j in range(m):
        row = np.zeros(n * m)
        row[j::m] = 1
        a_eq.append(row)
        b_eq.append(1 / m)
    res = linprog(cost, A_eq=np.array(a_eq), b_eq=np.array(b_eq), method="highs")
    assert res.success
    return float(res.fun)


def permutation_oracle(xs, ys) -> float:
    """Equal-size case: exhaustive minимum over assignments."""
    n = len(xs)
    best = math.inf
    for perm in itertools.permutations(range(n)):
        best = min(best, sum(abs(xs[i] - ys[p]) for i, p in enumerate(perm)) / n)
    return best


@pytest.fixture
def sample_block():
    return Polygon([(0, 0), (60, 0), (60, 40), (0, 40)])


class TestOverlapRatio:
    def test_disjoint(self, sample_block):
        s = LayoutSample.of(sample_block, [(rect(10, 10, 6, 6), 5), (rect(30, 10, 6, 6), 5)])
        assert overlap_ratio(s) == 0.0

    def test_two_identical_squares(self, sample_block):
        b = rect(20, 20, 10, 10)
        s = LayoutSample.of(sample_block, [(b, 5), (b, 7)])
        assert overlap_ratio(s) == pytest.approx(0.5)

    def test_empty(self, sample_block):
        assert overlap_ratio(LayoutSample.of(sample_block, [])) == 0.0

    def test_monte_carlo_multicoverage(self, rng):
        """Sum of pairwise intersections equals the C(C-1)/2 coverage integral."""
        block = Polygon([(0, 0), (40, 0), (40, 40), (0, 40)])
        buildings = []
        for _ in range(8):
            cx, cy = rng.uniform(8, 32, 2)
            w, h = rng.uniform(4, 14, 2)
            buildings.append((rect(cx, cy, w, h), 5.0))
        s = LayoutSample.of(block, buildings)
        n = 1_000_000
        pts = rng.uniform(0, 40, size=(n, 2))
        coverage = np.zeros(n)
        import shapely

        for poly, _h in buildings:
            coverage += shapely.contains_xy(poly.shapely, pts[:, 0], pts[:, 1])
        pair_area = float((coverage * (coverage - 1) / 2).mean() * 1600.0)
        total = sum(p.area for p, _h in buildings)
        assert overlap_ratio(s) == pytest.approx(pair_area / total, abs=1e-2)


class TestOutOfBlock:
    def test_all_inside(self, sample_block):
        s = LayoutSample.of(sample_block, [(rect(20, 20, 8, 8), 5)])
        assert out_of_block_ratio(s) == 0.0

    def test_one_of_four_outside(self, sample_block):
        buildings = [(rect(10, 10, 6, 6), 5), (rect(30, 10, 6, 6), 5),
                     (rect(50, 10, 6, 6), 5), (rect(100, 100, 6, 6), 5)]
        assert out_of_block_ratio(LayoutSample.of(sample_block, buildings)) == 0.25

    def test_half_outside_counts(self, sample_block):
        s = LayoutSample.of(sample_block, [(rect(60, 20, 10, 10), 5)])  # straddles x=60
        assert out_of_block_ratio(s, eps=0.01) == 1.0

    def test_tolerance_eps(self, sample_block):
        # 2% of the building pokes out: counted at eps=0.01, ignored at eps=0.05
        b = rect(55.2, 20, 10, 10)  # right edge at 60.2, strip 0.2 x 10 outside
        s = LayoutSample.of(sample_block, [(b, 5)])
        assert out_of_block_ratio(s, eps=0.01) == 1.0
        assert out_of_block_ratio(s, eps=0.05) == 0.0


class TestWd1d:
    def test_identical(self):
        assert wd_1d([1, 2, 3], [3, 1, 2]) == 0.0

    def test_unit_shift(self):
        assert wd_1d([0], [1]) == 1.0

    def test_empty_raises(self):
        with pytest.raises(EmptyDistribution):
            wd_1d([], [1.0])

    def test_equal_size_equals_sorted_mean_abs(self, rng):
        for _ in range(20):
            n = int(rng.integers(1, 7))
            xs = rng.uniform(-5, 5, n)
            ys = rng.uniform(-5, 5, n)
            expected = np.abs(np.sort(xs) - np.sort(ys)).mean()
            assert wd_1d(xs, ys) == pytest.approx(expected, abs=1e-12)

    def test_matches_brute_force_transport(self, rng):
        for trial in range(60):
            n = int(rng.integers(1, 7))
            m = int(rng.integers(1, 7))
            xs = rng.uniform(-10, 10, n)
            ys = rng.uniform(-10, 10, m)
            got = wd_1d(xs, ys)
            lp = transport_lp_oracle(xs, ys)
            assert got == pytest.approx(lp, abs=1e-9)
            if n == m:
                assert got == pytest.approx(permutation_oracle(xs, ys), abs=1e-9)

    @settings(max_examples=100, deadline=None)
    @given(
        xs=st.lists(st.floats(-100, 100), min_size=1, max_size=6),
        ys=st.lists(st.floats(-100, 100), min_size=1, max_size=6),
        zs=st.lists(st.floats(-100, 100), min_size=1, max_size=6),
    )
    def test_metric_properties(self, xs, ys, zs):
        assert wd_1d(xs, ys) >= 0
        assert wd_1d(xs, ys) == pytest.approx(wd_1d(ys, xs), abs=1e-9)
        assert wd_1d(xs, xs) == pytest.approx(0, abs=1e-12)
        # triangle inequality on equal-size samples (true metric case)
        if len(xs) == len(ys) == len(zs):
            assert wd_1d(xs, zs) <= wd_1d(xs, ys) + wd_1d(ys, zs) + 1e-9


class TestWdCount:
    def test_identical(self, sample_block):
        s = [LayoutSample.of(sample_block, [(rect(20, 20, 8, 8), 5)])] * 3
        assert wd_count(s, s) == 0.0

    def test_analytic(self, sample_block):
        two = LayoutSample.of(sample_block, [(rect(15, 20, 6, 6), 5), (rect(35, 20, 6, 6), 5)])
        three = LayoutSample.of(
            sample_block,
            [(rect(15, 20, 6, 6), 5), (rect(30, 20, 6, 6), 5), (rect(45, 20, 6, 6), 5)],
        )
        assert wd_count([two, two], [three, three]) == 1.0


class TestWdBbx:
    def test_identical(self, sample_block):
        s = [LayoutSample.of(sample_block, [(rect(20, 20, 8, 8), 5), (rect(40, 20, 8, 8), 5)])]
        assert wd_bbx(s, s) == 0.0

    def test_pure_x_shift(self, sample_block):
        # canonical x spans 60 m over [0,1]; +6 m -> +0.1 canonical
        a = [LayoutSample.of(sample_block, [(rect(20, 20, 8, 8), 5)])]
        b = [LayoutSample.of(sample_block, [(rect(26, 20, 8, 8), 5)])]
        assert wd_bbx(b, a) == pytest.approx(0.1 / 4, abs=1e-9)

    def test_empty_side_raises(self, sample_block):
        empty = [LayoutSample.of(sample_block, [])]
        full = [LayoutSample.of(sample_block, [(rect(20, 20, 8, 8), 5)])]
        with pytest.raises(EmptyDistribution):
            wd_bbx(empty, full)


class TestLayoutSimilarity:
    def test_self_similarity(self, sample_block):
        s = LayoutSample.of(sample_block, [(rect(20, 20, 8, 8), 5), (rect(40, 25, 10, 6), 7)])
        assert layout_similarity(s, s) == pytest.approx(1.0)

    def test_nonempty_vs_empty(self, sample_block):
        s = LayoutSample.of(sample_block, [(rect(20, 20, 8, 8), 5)])
        e = LayoutSample.of(sample_block, [])
        assert layout_similarity(s, e) == 0.0
        assert layout_similarity(e, e) == 1.0

    def test_symmetry(self, sample_block, rng):
        def random_sample():
            buildings = []
            for _ in range(int(rng.integers(1, 6))):
                cx, cy = rng.uniform(10, 50), rng.uniform(8, 32)
                buildings.append((rect(cx, cy, rng.uniform(4, 10), rng.uniform(4, 8)), 5.0))
            return LayoutSample.of(sample_block, buildings)

        for _ in range(10):
            a, b = random_sample(), random_sample()
            assert layout_similarity(a, b) == pytest.approx(layout_similarity(b, a), abs=1e-12)

    def test_jitter_monotonicity(self, sample_block, rng):
        base = [
            (rect(10 + 12 * c, 10 + 10 * r, 8, 6), 5.0) for r in range(3) for c in range(4)
        ]
        ref = LayoutSample.of(sample_block, base)
        scores = []
        for jitter in (0.0, 0.02, 0.05, 0.1):
            moved = []
            for poly, h in base:
                d = rng.uniform(-1, 1, 2) * jitter * np.array([60, 40]) / 2
                moved.append((Polygon(poly.array + d), h))
            scores.append(layout_similarity(ref, LayoutSample.of(sample_block, moved)))
        assert scores[0] == pytest.approx(1.0)
        assert all(a >= b - 1e-9 for a, b in zip(scores, scores[1:]))
        assert scores[-1] < scores[0]

    def test_rigid_motion_invariance(self, sample_block):
        buildings = [(rect(20, 20, 8, 8), 5.0), (rect(40, 25, 10, 6), 7.0)]
        a = LayoutSample.of(sample_block, buildings)
        angle, off = math.radians(30), (500, -200)
        blk2 = Polygon(rotate_scale_translate(sample_block.array, angle, (1, 1), off))
        moved = [
            (Polygon(rotate_scale_translate(p.array, angle, (1, 1), off)), h) for p, h in buildings
        ]
        b = LayoutSample.of(blk2, moved)
        assert layout_similarity(a, b) == pytest.approx(1.0, abs=1e-9)


class TestEvaluate:
    def _samples(self, sample_block, rng, n=4):
        out = []
        for _ in range(n):
            buildings = [
                (rect(rng.uniform(10, 50), rng.uniform(8, 32), 8, 6), 5.0)
                for _ in range(int(rng.integers(1, 5)))
            ]
            out.append(LayoutSample.of(sample_block, buildings))
        return out

    def test_self_evaluation(self, sample_block, rng):
        xs = self._samples(sample_block, rng)
        rep = evaluate(xs, xs)
        assert rep.l_sim == pytest.approx(1.0)
        assert rep.wd_bbx == 0.0
        assert rep.wd_count == 0.0
        assert rep.obr == 0.0

    def test_length_mismatch(self, sample_block, rng):
        xs = self._samples(sample_block, rng)
        with pytest.raises(AlignmentError):
            evaluate(xs, xs[:-1])

    def test_perturbation_monotonicity(self, sample_block, rng):
        ref = self._samples(sample_block, rng, n=6)
        lsims = []
        for jitter in (0.0, 2.0, 6.0):
            gen = [
                LayoutSample.of(
                    s.block,
                    [(Polygon(p.array + rng.uniform(-1, 1, 2) * jitter), h) for p, h in s.buildings],
                )
                for s in ref
            ]
            lsims.append(evaluate(gen, ref).l_sim)
        assert lsims[0] == pytest.approx(1.0)
        assert lsims[0] >= lsims[1] >= lsims[2] - 1e-9

    def test_report_serialization(self, sample_block, rng):
        xs = self._samples(sample_block, rng)
        rep = evaluate(xs, xs)
        doc = rep.to_json()
        import json

        loaded = json.loads(doc)
        assert set(loaded) == {
            "l_sim", "opr", "obr", "wd_bbx", "wd_count", "n_gen_blocks", "n_ref_blocks",
        }
