import math
import unittest

import numpy as np
from scipy.optimize import minimize_scalar

from retiming import pwq
from retiming.errors import EmptyDomain, Infeasible, NonConvex, Unbounded
from retiming.lp2d import Halfplane2, Interval, clamp_1d
from retiming.pwq import BivariateQuadratic, PiecewiseLinear, PiecewiseQuadratic


class TestPiecewiseLinear(unittest.TestCase):

    def test_maximum(self):
        """Test max(z, 0) over [-1, 1] splits at the crossing
        """
        envelope = PiecewiseLinear.line(1.0, 0.0, (-1.0, 1.0)).maximum(PiecewiseLinear.constant(0.0, (-1.0, 1.0)))
        self.assertEqual(envelope.num_segments, 2)
        self.assertEqual(envelope(-0.5), 0.0)
        self.assertEqual(envelope(0.5), 0.5)

    def test_minimum_keeps_domain_intersection(self):
        first = PiecewiseLinear.constant(1.0, (0.0, 3.0))
        second = PiecewiseLinear.line(1.0, 0.0, (1.0, 4.0))
        envelope = first.minimum(second)
        self.assertEqual(envelope.domain, Interval(1.0, 3.0))
        self.assertEqual(envelope(2.0), 1.0)

    def test_disjoint_domains(self):
        with self.assertRaises(EmptyDomain):
            PiecewiseLinear.constant(0.0, (0.0, 1.0)).maximum(PiecewiseLinear.constant(0.0, (2.0, 3.0)))

    def test_pruned_merges_equal_lines(self):
        f = PiecewiseLinear((0.0, 1.0, 2.0), (1.0, 1.0), (0.0, 0.0))
        self.assertEqual(f.pruned().num_segments, 1)


class TestPiecewiseQuadratic(unittest.TestCase):

    def test_call_outside_domain(self):
        f = PiecewiseQuadratic.quadratic(1.0, 0.0, 0.0, (0.0, 1.0))
        self.assertEqual(f(0.5), 0.25)
        self.assertEqual(f(2.0), math.inf)

    def test_restrict(self):
        f = PiecewiseQuadratic((0.0, 1.0, 2.0), (0.0, 0.0), (1.0, -1.0), (0.0, 2.0))
        g = f.restrict((0.5, 1.5))
        self.assertEqual(g.num_segments, 2)
        self.assertEqual(g.domain, Interval(0.5, 1.5))
        self.assertAlmostEqual(g(1.25), 0.75)
        with self.assertRaises(EmptyDomain):
            f.restrict((3.0, 4.0))

    def test_restrict_to_point(self):
        f = PiecewiseQuadratic((0.0, 1.0, 2.0), (0.0, 1.0), (1.0, 0.0), (0.0, 0.0))
        g = f.restrict((1.0, 1.0))
        self.assertEqual(g.domain, Interval(1.0, 1.0))
        self.assertAlmostEqual(g(1.0), 1.0)

    def test_convexity(self):
        """Test a concave kink is detected
        """
        tent = PiecewiseQuadratic((0.0, 1.0, 2.0), (0.0, 0.0), (1.0, -1.0), (0.0, 2.0))
        self.assertEqual(tent.derivative_gaps(), [-2.0])
        self.assertFalse(tent.is_convex())
        vee = PiecewiseQuadratic((0.0, 1.0, 2.0), (0.0, 0.0), (-1.0, 1.0), (0.0, -2.0))
        self.assertTrue(vee.is_convex())
        self.assertFalse(PiecewiseQuadratic.quadratic(-1.0, 0.0, 0.0, (0.0, 1.0)).is_convex())

    def test_add(self):
        f = PiecewiseQuadratic.quadratic(1.0, 0.0, 0.0, (0.0, 2.0))
        g = PiecewiseQuadratic((1.0, 1.5, 3.0), (0.0, 0.0), (1.0, 2.0), (0.0, -1.5))
        total = pwq.add(f, g)
        self.assertEqual(total.domain, Interval(1.0, 2.0))
        self.assertEqual(total.num_segments, 2)
        self.assertAlmostEqual(total(1.25), 1.5625 + 1.25)
        self.assertAlmostEqual(total(1.75), 3.0625 + 2.0)
        with self.assertRaises(EmptyDomain):
            pwq.add(f, PiecewiseQuadratic.zero((5.0, 6.0)))

    def test_prune(self):
        """Test equal neighbours merge and near-empty segments fold away
        """
        f = PiecewiseQuadratic((0.0, 1.0, 2.0), (1.0, 1.0), (0.0, 0.0), (0.0, 0.0))
        self.assertEqual(pwq.prune(f).num_segments, 1)
        g = PiecewiseQuadratic((0.0, 1e-15, 1.0), (5.0, 1.0), (0.0, 0.0), (0.0, 0.0))
        pruned = pwq.prune(g)
        self.assertEqual(pruned.num_segments, 1)
        self.assertEqual(pruned.domain, Interval(0.0, 1.0))
        self.assertEqual(pruned.a, (1.0,))


class TestMinimize(unittest.TestCase):

    def test_interior(self):
        z, value = pwq.minimize(PiecewiseQuadratic.quadratic(1.0, -2.0, 0.0, (0.0, 5.0)))
        self.assertAlmostEqual(z, 1.0)
        self.assertAlmostEqual(value, -1.0)

    def test_boundary_and_ties(self):
        """Test a flat function resolves to the leftmost point
        """
        z, _ = pwq.minimize(PiecewiseQuadratic.quadratic(1.0, -2.0, 0.0, (2.0, 5.0)))
        self.assertEqual(z, 2.0)
        z, value = pwq.minimize(PiecewiseQuadratic.zero((-1.0, 1.0)))
        self.assertEqual((z, value), (-1.0, 0.0))

    def test_across_segments(self):
        f = PiecewiseQuadratic((0.0, 1.0, 3.0), (0.0, 1.0), (-1.0, -4.0), (0.0, 2.0))
        z, value = pwq.minimize(f)
        self.assertAlmostEqual(z, 2.0)
        self.assertAlmostEqual(value, -2.0)

    def test_unbounded(self):
        with self.assertRaises(Unbounded):
            pwq.minimize(PiecewiseQuadratic.quadratic(0.0, -1.0, 0.0, (0.0, math.inf)))

    def test_empty(self):
        with self.assertRaises(EmptyDomain):
            pwq.minimize(PiecewiseQuadratic((1.0, 0.0), (0.0,), (0.0,), (0.0,)))


class TestBivariateQuadratic(unittest.TestCase):

    def test_call_and_weights(self):
        q = BivariateQuadratic(p=2.0, r=2.0, n=-2.0)
        self.assertEqual(q(1.0, 3.0), 4.0)
        self.assertEqual(q.weights(), (1.0, 1.0, -2.0))

    def test_is_psd(self):
        self.assertTrue(BivariateQuadratic(p=2.0, r=2.0, n=-2.0).is_psd())
        self.assertFalse(BivariateQuadratic(p=2.0, r=2.0, n=3.0).is_psd())
        self.assertFalse(BivariateQuadratic(p=-1.0).is_psd())


class TestEliminateMin(unittest.TestCase):

    def setUp(self):
        # (x - y)^2 with x in [0, 1]
        self.q = BivariateQuadratic(p=2.0, r=2.0, n=-2.0)
        self.prior = PiecewiseQuadratic.zero((0.0, 1.0))

    def test_clamped_tracking(self):
        """Test x*(y) = clamp(y, 0, 1) and the value is the squared distance
        """
        conditional, value = pwq.eliminate_min(self.q, [], (0.0, 1.0), self.prior)
        self.assertEqual(conditional(-1.0), 0.0)
        self.assertAlmostEqual(conditional(0.5), 0.5)
        self.assertEqual(conditional(2.0), 1.0)
        self.assertAlmostEqual(value(-1.0), 1.0)
        self.assertAlmostEqual(value(0.5), 0.0)
        self.assertAlmostEqual(value(3.0), 4.0)
        self.assertTrue(value.is_convex())

    def test_coupling_rows(self):
        """Test the row ``x <= y / 2`` caps the minimizer
        """
        rows = [Halfplane2(1.0, -0.5, 0.0)]
        conditional, value = pwq.eliminate_min(self.q, rows, (0.0, 1.0), self.prior,
                                               y_box=Interval(0.0, math.inf))
        self.assertEqual(value.domain, Interval(0.0, math.inf))
        self.assertAlmostEqual(conditional(1.0), 0.5)
        self.assertAlmostEqual(value(1.0), 0.25)
        self.assertAlmostEqual(conditional(4.0), 1.0)
        self.assertAlmostEqual(value(4.0), 9.0)

    def test_prior_kink(self):
        """Test the minimizer sticks to a kink of the prior
        """
        prior = PiecewiseQuadratic((-2.0, 0.0, 2.0), (0.0, 0.0), (-1.0, 1.0), (0.0, 0.0))
        conditional, _ = pwq.eliminate_min(self.q, [], (-2.0, 2.0), prior)
        self.assertAlmostEqual(conditional(0.25), 0.0)
        self.assertAlmostEqual(conditional(-0.25), 0.0)
        self.assertAlmostEqual(conditional(1.0), 0.5)
        self.assertAlmostEqual(conditional(-1.0), -0.5)

    def test_pinned(self):
        conditional, value = pwq.eliminate_min(self.q, [], (0.5, 0.5), PiecewiseQuadratic.zero((0.5, 0.5)))
        self.assertEqual(conditional(3.0), 0.5)
        self.assertAlmostEqual(value(3.0), 6.25)

    def test_infeasible(self):
        with self.assertRaises(Infeasible):
            pwq.eliminate_min(self.q, [Halfplane2(1.0, 0.0, -1.0)], (0.0, 1.0), self.prior)

    def test_nonconvex(self):
        with self.assertRaises(NonConvex):
            pwq.eliminate_min(BivariateQuadratic(p=-2.0, n=1.0), [], (0.0, 1.0), self.prior)

def random_convex_prior(rng, domain=(0.0, 2.0)):
    """Continuous convex piecewise quadratic with up to five segments
    """
    segments = int(rng.integers(1, 6))
    knots = [domain[0]] + sorted(rng.uniform(domain[0], domain[1], segments - 1)) + [domain[1]]
    a = list(rng.uniform(0.0, 1.0, segments))
    b, c = [rng.uniform(-2.0, 2.0)], [rng.uniform(-1.0, 1.0)]
    for i in range(1, segments):
        t = knots[i]
        # non-negative derivative jump keeps the function convex
        b.append(2.0 * (a[i - 1] - a[i]) * t + b[i - 1] + rng.uniform(0.0, 1.0))
        c.append((a[i - 1] - a[i]) * t * t + (b[i - 1] - b[i]) * t + c[i - 1])
    return PiecewiseQuadratic(knots, a, b, c)


class TestRandomElimination(unittest.TestCase):

    def setUp(self):
        self.rng = np.random.default_rng(23)

    def random_problem(self):
        p, r = self.rng.uniform(0.5, 2.0, 2)
        q = BivariateQuadratic(p=p, r=r, n=self.rng.uniform(-0.9, 0.9) * math.sqrt(p * r),
                               g=self.rng.uniform(-1.0, 1.0), h=self.rng.uniform(-1.0, 1.0))
        rows = []
        for _ in range(int(self.rng.integers(0, 4))):
            alpha, beta = self.rng.uniform(-1.0, 1.0, 2)
            # (1, 1) stays strictly feasible
            rows.append(Halfplane2(alpha, beta, alpha + beta + self.rng.uniform(0.05, 0.5)))
        return q, rows, random_convex_prior(self.rng)

    def test_matches_brute_force(self):
        for _ in range(100):
            q, rows, prior = self.random_problem()
            conditional, value = pwq.eliminate_min(q, rows, (0.0, 2.0), prior, y_box=Interval(0.0, 2.0))
            self.assertTrue(value.is_convex())
            lo, hi = value.domain
            for y in lo + (hi - lo) * self.rng.uniform(0.02, 0.98, 10):
                feasible = clamp_1d([(alpha, gamma - beta * y) for alpha, beta, gamma in rows], (0.0, 2.0))
                x = conditional(y)
                self.assertTrue(feasible.contains(x, 1e-9))
                # the value function is the objective at the conditional
                v = value(y)
                inside = min(max(x, 0.0), 2.0)
                self.assertLessEqual(abs(v - (q(x, y) + prior(inside))), 1e-9 * (1.0 + abs(v)))
                best = minimize_scalar(lambda z: q(z, y) + prior(z), bounds=(feasible.lo, feasible.hi),
                                       method="bounded", options={"xatol": 1e-10})
                self.assertLessEqual(v, best.fun + 1e-8 * (1.0 + abs(best.fun)))
                self.assertLessEqual(best.fun - v, 1e-5 * (1.0 + abs(v)))

    def test_prune_is_idempotent(self):
        for _ in range(50):
            f = random_convex_prior(self.rng)
            # split every segment in two halves with the same coefficients
            knots = [f.breakpoints[0]]
            for lo, hi in zip(f.breakpoints[:-1], f.breakpoints[1:]):
                knots += [0.5 * (lo + hi), hi]
            split = PiecewiseQuadratic(knots, np.repeat(f.a, 2), np.repeat(f.b, 2), np.repeat(f.c, 2))
            once = pwq.prune(split)
            twice = pwq.prune(once)
            self.assertEqual(once.num_segments, f.num_segments)
            self.assertEqual((twice.breakpoints, twice.a, twice.b, twice.c), (once.breakpoints, once.a, once.b, once.c))
            for z in self.rng.uniform(0.0, 2.0, 100):
                self.assertAlmostEqual(once(z), f(z), places=12)



if __name__ == "__main__":
    unittest.main()
