import math
import unittest

import numpy as np
from numpy.testing import assert_allclose

from retiming.lp2d import (
    EMPTY, UNBOUNDED, Halfplane2, Interval, clamp_1d, extremize_x, extremize_y,
)


class TestInterval(unittest.TestCase):

    def test_intersect(self):
        """Test overlapping and disjoint intersections
        """
        self.assertEqual(Interval(0.0, 2.0).intersect((1.0, 3.0)), Interval(1.0, 2.0))
        self.assertTrue(Interval(0.0, 1.0).intersect((2.0, 3.0)).is_empty)

    def test_properties(self):
        self.assertTrue(EMPTY.is_empty)
        self.assertFalse(UNBOUNDED.is_bounded)
        self.assertEqual(EMPTY.width, 0.0)
        self.assertEqual(Interval(1.0, 3.0).width, 2.0)
        self.assertEqual(Interval.point(2), Interval(2.0, 2.0))

    def test_contains_with_tolerance(self):
        interval = Interval(0.0, 1.0)
        self.assertFalse(interval.contains(1.0 + 1e-9))
        self.assertTrue(interval.contains(1.0 + 1e-9, tol=1e-8))
        self.assertEqual(interval.clamp(-3.0), 0.0)


class TestClamp1d(unittest.TestCase):

    def test_two_sided(self):
        """Test ``x <= 2`` and ``-x <= 1``
        """
        self.assertEqual(clamp_1d([(1.0, 2.0), (-1.0, 1.0)]), Interval(-1.0, 2.0))

    def test_box(self):
        self.assertEqual(clamp_1d([(2.0, 1.0)], Interval(0.0, math.inf)), Interval(0.0, 0.5))

    def test_constant_rows(self):
        """Test rows with a zero coefficient act as feasibility checks
        """
        self.assertTrue(clamp_1d([(0.0, -1.0)]).is_empty)
        self.assertEqual(clamp_1d([(0.0, 1.0)], Interval(0.0, 1.0)), Interval(0.0, 1.0))

    def test_constant_row_tolerance_is_relative(self):
        """Test a constant row is judged against the size of the other offsets
        """
        self.assertEqual(clamp_1d([(1.0, 1e6), (0.0, -1e-9)]), Interval(-math.inf, 1e6))
        self.assertTrue(clamp_1d([(1.0, 1e6), (0.0, -1e-3)]).is_empty)
        self.assertTrue(clamp_1d([(1.0, 1.0), (0.0, -1e-9)]).is_empty)

    def test_roundoff_crossing_collapses(self):
        interval = clamp_1d([(1.0, 0.5), (-1.0, -0.5 - 1e-15)])
        self.assertFalse(interval.is_empty)
        self.assertAlmostEqual(interval.lo, 0.5)
        self.assertEqual(interval.lo, interval.hi)

    def test_contradiction(self):
        self.assertTrue(clamp_1d([(1.0, 0.0), (-1.0, -1.0)]).is_empty)
        self.assertTrue(clamp_1d([], EMPTY).is_empty)


class TestExtremize(unittest.TestCase):

    def setUp(self):
        # x >= 0, y >= 0, x + y <= 1
        self.triangle = [Halfplane2(-1.0, 0.0, 0.0), Halfplane2(0.0, -1.0, 0.0), Halfplane2(1.0, 1.0, 1.0)]

    def test_triangle(self):
        y = extremize_y(self.triangle)
        self.assertAlmostEqual(y.lo, 0.0)
        self.assertAlmostEqual(y.hi, 1.0)
        x = extremize_x(self.triangle)
        self.assertAlmostEqual(x.lo, 0.0)
        self.assertAlmostEqual(x.hi, 1.0)

    def test_boxes(self):
        """Test the x box narrows the projection onto y
        """
        y = extremize_y(self.triangle, x_box=Interval(0.25, 0.5))
        self.assertAlmostEqual(y.lo, 0.0)
        self.assertAlmostEqual(y.hi, 0.75)
        y = extremize_y(self.triangle, y_box=Interval(0.5, math.inf))
        self.assertAlmostEqual(y.lo, 0.5)
        self.assertAlmostEqual(y.hi, 1.0)

    def test_unbounded(self):
        y = extremize_y([Halfplane2(-1.0, 0.0, 0.0), Halfplane2(0.0, -1.0, 0.0)])
        self.assertEqual(y.lo, 0.0)
        self.assertEqual(y.hi, math.inf)

    def test_strip_without_vertices(self):
        """Test a strip ``0 <= x - y <= 1`` with x fixed
        """
        strip = [Halfplane2(1.0, -1.0, 1.0), Halfplane2(-1.0, 1.0, 0.0)]
        y = extremize_y(strip, x_box=Interval(2.0, 2.0))
        self.assertAlmostEqual(y.lo, 1.0)
        self.assertAlmostEqual(y.hi, 2.0)

    def test_empty(self):
        self.assertTrue(extremize_y([Halfplane2(1.0, 0.0, -1.0)], x_box=Interval(0.0, math.inf)).is_empty)
        self.assertTrue(extremize_y(self.triangle, y_box=Interval(2.0, 3.0)).is_empty)
        self.assertTrue(extremize_y(self.triangle, x_box=EMPTY).is_empty)

    def test_parallel_pair_tolerance_is_relative(self):
        """Test the line ``x + y = 1e6`` survives a relative roundoff but not a real gap
        """
        box = Interval(0.0, 2e6)
        line = [Halfplane2(1.0, 1.0, 1e6), Halfplane2(-1.0, -1.0, -1e6 - 1e-7)]
        self.assertEqual(extremize_y(line, y_box=box), box)
        gap = [Halfplane2(1.0, 1.0, 1e6), Halfplane2(-1.0, -1.0, -1e6 - 1.0)]
        self.assertTrue(extremize_y(gap, y_box=box).is_empty)

    def test_zero_row(self):
        self.assertTrue(extremize_y([Halfplane2(0.0, 0.0, -1.0)]).is_empty)
        self.assertEqual(extremize_y([Halfplane2(0.0, 0.0, 1.0)]), UNBOUNDED)

BOX = 10.0


def vertex_range(halfplanes, axis, slack):
    """Range of one coordinate over the vertices of the polygon clipped to ``[-BOX, BOX]^2``

    Returns None when no vertex satisfies every row within ``slack``.
    """
    rows = np.array([tuple(plane) for plane in halfplanes]
                    + [(-1.0, 0.0, BOX), (1.0, 0.0, BOX), (0.0, -1.0, BOX), (0.0, 1.0, BOX)])
    first, second = np.triu_indices(rows.shape[0], k=1)
    det = rows[first, 0] * rows[second, 1] - rows[second, 0] * rows[first, 1]
    keep = np.abs(det) > 1e-12
    first, second, det = first[keep], second[keep], det[keep]
    points = np.column_stack((
        (rows[first, 2] * rows[second, 1] - rows[second, 2] * rows[first, 1]) / det,
        (rows[first, 0] * rows[second, 2] - rows[second, 0] * rows[first, 2]) / det,
    ))
    feasible = np.all(points @ rows[:, :2].T <= rows[:, 2] + slack, axis=1)
    if not np.any(feasible):
        return None
    values = points[feasible, axis]
    return values.min(), values.max()


def random_halfplanes(rng, count):
    return [Halfplane2(*rng.uniform(-1.0, 1.0, 2), rng.uniform(-0.5, 1.0)) for _ in range(count)]


class TestRandomPolygons(unittest.TestCase):

    def setUp(self):
        self.rng = np.random.default_rng(17)
        self.box = Interval(-BOX, BOX)

    def test_matches_vertex_enumeration(self):
        checked = 0
        for _ in range(1000):
            planes = random_halfplanes(self.rng, int(self.rng.integers(1, 21)))
            loose, tight = vertex_range(planes, 1, 1e-9), vertex_range(planes, 1, -1e-9)
            if (loose is None) != (tight is None):
                # within roundoff of empty
                continue
            y = extremize_y(planes, self.box, self.box)
            if loose is None:
                self.assertTrue(y.is_empty)
            else:
                assert_allclose([y.lo, y.hi], loose, atol=1e-7)
                x = extremize_x(planes, self.box, self.box)
                assert_allclose([x.lo, x.hi], vertex_range(planes, 0, 1e-9), atol=1e-7)
            checked += 1
        self.assertGreater(checked, 900)

    def test_extra_row_only_shrinks(self):
        for _ in range(300):
            planes = random_halfplanes(self.rng, int(self.rng.integers(1, 20)))
            before = extremize_y(planes, self.box, self.box)
            after = extremize_y(planes + random_halfplanes(self.rng, 1), self.box, self.box)
            if after.is_empty:
                continue
            self.assertFalse(before.is_empty)
            self.assertGreaterEqual(after.lo, before.lo - 1e-9)
            self.assertLessEqual(after.hi, before.hi + 1e-9)

    def test_transpose(self):
        for _ in range(300):
            planes = random_halfplanes(self.rng, int(self.rng.integers(1, 21)))
            x_box = Interval(*sorted(self.rng.uniform(-BOX, BOX, 2)))
            swapped = [Halfplane2(beta, alpha, gamma) for alpha, beta, gamma in planes]
            self.assertEqual(extremize_x(swapped, self.box, x_box), extremize_y(planes, x_box, self.box))



if __name__ == "__main__":
    unittest.main()
