import os
import json
import math
import tempfile
import unittest

import numpy as np
from numpy.testing import assert_allclose, assert_array_equal

from retiming.errors import (
    DimensionMismatch, EmptyVelocityInterval, InvalidProblem, NonFiniteCoefficient,
)
from retiming.generators import simple_benchmark
from retiming.lp2d import Interval
from retiming.problem import (
    BoundaryConditions, DiscretizedProblem, DiscretizedStep, PathSamples, QuadraticStepCost,
    TaskConstraintSet, discretize, dump_problem, load_problem, problem_from_dict, problem_to_dict,
    reparameterize, square_velocity_limits, validate,
)


def line_path():
    """One joint moving q = 2 s on three samples
    """
    return PathSamples(grid=[0.0, 0.5, 1.0], q=[0.0, 1.0, 2.0], dq_ds=[2.0, 2.0, 2.0], d2q_ds2=[0.0, 0.0, 0.0])


class TestPathSamples(unittest.TestCase):

    def test_one_joint_reshaped(self):
        path = line_path()
        self.assertEqual(path.q.shape, (3, 1))
        self.assertEqual(path.dof, 1)
        self.assertEqual(path.num_samples, 3)

    def test_invalid_grid(self):
        with self.assertRaises(InvalidProblem):
            PathSamples(grid=[0.0, 0.7, 0.5], q=[0, 0, 0], dq_ds=[1, 1, 1], d2q_ds2=[0, 0, 0])
        with self.assertRaises(InvalidProblem):
            PathSamples(grid=[0.0, 0.5, 0.9], q=[0, 0, 0], dq_ds=[1, 1, 1], d2q_ds2=[0, 0, 0])

    def test_shape_and_finiteness(self):
        with self.assertRaises(DimensionMismatch):
            PathSamples(grid=[0.0, 1.0], q=[0, 0, 0], dq_ds=[1, 1], d2q_ds2=[0, 0])
        with self.assertRaises(NonFiniteCoefficient):
            PathSamples(grid=[0.0, 1.0], q=[0, math.nan], dq_ds=[1, 1], d2q_ds2=[0, 0])


class TestSquareVelocityLimits(unittest.TestCase):

    def test_symmetric_box(self):
        """Test ``|2 sdot| <= 1`` gives x in [0, 0.25]
        """
        bounds = square_velocity_limits([2.0], [0.0], [-1.0], [1.0])
        self.assertEqual(bounds, Interval(0.0, 0.25))

    def test_lower_speed(self):
        bounds = square_velocity_limits([1.0], [0.0], [0.5], [math.inf])
        self.assertEqual(bounds, Interval(0.25, math.inf))

    def test_empty(self):
        with self.assertRaises(EmptyVelocityInterval) as ctx:
            square_velocity_limits([1.0], [2.0], [-math.inf], [1.0], sample=4)
        self.assertEqual(ctx.exception.sample, 4)


class TestReparameterize(unittest.TestCase):

    def setUp(self):
        ones = np.ones((3, 1, 1))
        self.task = TaskConstraintSet(A=ones, lo=-np.ones((3, 1)), hi=np.ones((3, 1)),
                                      A_v=ones, lo_v=-np.ones((3, 1)), hi_v=np.ones((3, 1)))

    def test_rows(self):
        """Test ``|qdd| <= 1`` and ``|qd| <= 1`` on q = 2 s
        """
        steps = reparameterize(line_path(), self.task)
        self.assertEqual(len(steps), 3)
        for step in steps:
            assert_array_equal(step.a, [2.0, 0.0])
            assert_array_equal(step.b, [0.0, 1.0])
            assert_array_equal(step.hi, [1.0, 0.25])
            assert_array_equal(step.lo, [-1.0, 0.0])

    def test_velocity_dependent_term(self):
        task = TaskConstraintSet(A=np.zeros((3, 1, 1)), B=np.full((3, 1, 1, 1), 0.5),
                                 lo=-np.ones((3, 1)), hi=np.ones((3, 1)))
        steps = reparameterize(line_path(), task)
        assert_array_equal(steps[1].b, [2.0])

    def test_matches_joint_space_substitution(self):
        """Test the rows against ``qd = q' sdot`` and ``qdd = q'' sdot^2 + q' sdd`` on a random 3-joint path
        """
        rng = np.random.default_rng(3)
        samples, rows = 6, 4
        path = PathSamples(grid=np.linspace(0.0, 1.0, samples), q=rng.normal(size=(samples, 3)),
                           dq_ds=rng.normal(size=(samples, 3)), d2q_ds2=rng.normal(size=(samples, 3)))
        hi_v = rng.uniform(0.5, 2.0, (samples, 2))
        task = TaskConstraintSet(A=rng.normal(size=(samples, rows, 3)), B=rng.normal(size=(samples, rows, 3, 3)),
                                 f=rng.normal(size=(samples, rows)),
                                 lo=np.full((samples, rows), -math.inf), hi=np.full((samples, rows), math.inf),
                                 A_v=rng.normal(size=(samples, 2, 3)), lo_v=-hi_v, hi_v=hi_v)
        steps = reparameterize(path, task)
        for k, step in enumerate(steps):
            for _ in range(20):
                sdot, sdd = rng.uniform(0.0, 2.0), rng.uniform(-3.0, 3.0)
                qd = path.dq_ds[k] * sdot
                qdd = path.d2q_ds2[k] * sdot ** 2 + path.dq_ds[k] * sdd
                direct = task.A[k] @ qdd + np.einsum("mij,i,j->m", task.B[k], qd, qd) + task.f[k]
                rows_xu = step.a * sdd + step.b * sdot ** 2 + step.c
                assert_allclose(rows_xu[:rows], direct, rtol=1e-12, atol=1e-12)

                velocity = task.A_v[k] @ qd
                slack = np.concatenate((hi_v[k] - velocity, velocity + hi_v[k]))
                if np.min(np.abs(slack)) < 1e-9:
                    continue
                x = sdot ** 2
                self.assertEqual(bool(np.all(slack > 0.0)), bool(step.lo[rows] <= x <= step.hi[rows]))

    def test_mismatched_task(self):
        task = TaskConstraintSet(A=np.ones((2, 1, 1)), lo=-np.ones((2, 1)), hi=np.ones((2, 1)))
        with self.assertRaises(DimensionMismatch):
            reparameterize(line_path(), task)

    def test_discretize(self):
        problem = discretize(line_path(), self.task)
        self.assertEqual(problem.N, 2)
        assert_allclose(problem.spacing, [0.5, 0.5])
        assert_allclose(problem.grid, [0.0, 0.5, 1.0])
        self.assertIsNotNone(problem.path)
        self.assertEqual(validate(problem), [])


class TestQuadraticStepCost(unittest.TestCase):

    def setUp(self):
        self.cost = QuadraticStepCost(Q=1.5, R=0.5, N=0.4, x_des=0.3, u_des=-0.2, g_x=0.1, g_u=-0.3, offset=0.7)

    def test_general_form(self):
        p, r, n, g, h, const = self.cost.general_form()
        for x, u in ((0.0, 0.0), (1.0, -2.0), (0.4, 0.9)):
            expected = self.cost.evaluate(x, u)
            self.assertAlmostEqual(0.5 * p * x * x + 0.5 * r * u * u + n * x * u + g * x + h * u + const, expected)

    def test_substitute_control(self):
        """Test the cost in (x_k, x_{k+1}) matches the cost at ``u = (y - x) / (2 ds)``
        """
        delta_s = 0.2
        q = self.cost.substitute_control(delta_s)
        for x, y in ((0.0, 0.0), (1.0, 0.5), (0.3, 2.0)):
            self.assertAlmostEqual(q(x, y), self.cost.evaluate(x, (y - x) / (2.0 * delta_s)))

    def test_terminal(self):
        terminal = self.cost.terminal()
        for x in (0.0, 0.5, 3.0):
            self.assertAlmostEqual(terminal(x), self.cost.evaluate(x, 0.0))

    def test_is_psd(self):
        self.assertTrue(self.cost.is_psd())
        self.assertFalse(QuadraticStepCost(Q=1.0, R=1.0, N=3.0).is_psd())


class TestDiscretizedProblem(unittest.TestCase):

    def test_spacing_built_once(self):
        problem = simple_benchmark(1000)
        self.assertIs(problem.spacing, problem.spacing)
        self.assertIs(problem.grid, problem.grid)
        self.assertEqual(problem.spacing.shape, (1000,))
        self.assertAlmostEqual(problem.grid[-1], 250.0)

    def test_spacing_per_interval(self):
        problem = DiscretizedProblem(steps=[DiscretizedStep.empty()] * 3, delta_s=[0.25, 0.75])
        assert_allclose(problem.spacing, [0.25, 0.75])
        assert_allclose(problem.grid, [0.0, 0.25, 1.0])


class TestValidate(unittest.TestCase):

    def test_benchmark_is_valid(self):
        self.assertEqual(validate(simple_benchmark(10, quadratic=True)), [])

    def test_reports_every_violation(self):
        step = DiscretizedStep([1.0], [math.nan], [0.0], [1.0], [0.0])
        problem = DiscretizedProblem(steps=[step, step], delta_s=-1.0,
                                     boundary=BoundaryConditions(x0=(-1.0, 0.0)),
                                     costs=[QuadraticStepCost(Q=-1.0)])
        diagnostics = validate(problem)
        # delta_s, 2 x (NaN coefficient, lo > hi), x0 below floor, cost count, cost not PSD
        self.assertEqual(len(diagnostics), 8)
        self.assertIn("delta_s must be strictly positive", diagnostics)

    def test_single_sample(self):
        problem = DiscretizedProblem(steps=[DiscretizedStep.empty()], delta_s=1.0)
        self.assertTrue(validate(problem))


class TestProblemFiles(unittest.TestCase):

    def setUp(self):
        self.document = {
            "delta_s": 0.25,
            "steps": [{"a": [1.0], "b": [1.0], "c": [0.0], "lo": [None], "hi": [0.1]}] * 3,
            "boundary": {"x0": [0.0, 0.0], "xN": [0.0, None]},
        }

    def test_null_bounds(self):
        problem = problem_from_dict(self.document)
        self.assertEqual(problem.N, 2)
        self.assertEqual(problem.steps[0].lo[0], -math.inf)
        self.assertEqual(problem.boundary.xN, Interval(0.0, math.inf))
        self.assertIsNone(problem.costs)

    def test_default_floor(self):
        self.assertEqual(problem_from_dict(self.document, default_x_floor=0.5).x_floor, 0.5)
        self.document["x_floor"] = 0.0
        self.assertEqual(problem_from_dict(self.document, default_x_floor=0.5).x_floor, 0.0)

    def test_unknown_fields(self):
        self.document["solver"] = "fast"
        with self.assertRaises(InvalidProblem):
            problem_from_dict(self.document)
        del self.document["solver"]
        self.document["steps"] = [{"a": [1.0], "b": [1.0], "c": [0.0], "lo": [None]}]
        with self.assertRaises(InvalidProblem):
            problem_from_dict(self.document)

    def test_malformed_values(self):
        self.document["delta_s"] = "wide"
        with self.assertRaises(InvalidProblem):
            problem_from_dict(self.document)

    def test_file_round_trip(self):
        problem = simple_benchmark(3, quadratic=True, target=0.2)
        with tempfile.TemporaryDirectory() as tmpdir:
            filepath = dump_problem(problem, os.path.join(tmpdir, "problem.json"))
            with open(filepath) as fp:
                document = json.load(fp)
            loaded = load_problem(filepath)
        self.assertEqual(document["boundary"]["xN"], [0.0, None])
        self.assertEqual(document, problem_to_dict(loaded))
        self.assertEqual(loaded.costs[0].x_des, 0.2)

    def test_missing_and_invalid_files(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            with self.assertRaises(FileNotFoundError):
                load_problem(os.path.join(tmpdir, "missing.json"))
            filepath = os.path.join(tmpdir, "broken.json")
            with open(filepath, "w") as fp:
                fp.write("{not json")
            with self.assertRaises(InvalidProblem):
                load_problem(filepath)


if __name__ == "__main__":
    unittest.main()
