import os
import tempfile
import unittest

import numpy as np
from numpy.testing import assert_allclose
from scipy.integrate import quad

from retiming import retime
from retiming.elimination import solve
from retiming.errors import DimensionMismatch, Untraversable
from retiming.generators import simple_benchmark
from retiming.problem import PathSamples


class TestDuration(unittest.TestCase):

    def test_benchmark_profile(self):
        """Test the hand-derived benchmark profile takes about 3.2412 s
        """
        self.assertAlmostEqual(retime.duration([0.0, 0.05, 0.075], 0.25), 3.2412, places=4)
        profile = solve(simple_benchmark(2))
        self.assertAlmostEqual(retime.duration(profile, 0.25), 3.241158, places=5)

    def test_unit_speed(self):
        self.assertAlmostEqual(retime.duration(np.ones(11), 0.1), 1.0)
        self.assertAlmostEqual(retime.duration(np.ones(3), [0.25, 0.75]), 1.0)

    def test_matches_quadrature(self):
        """Test random profiles against integrating ``ds / sqrt(x(s))`` with x linear on every interval
        """
        rng = np.random.default_rng(13)
        for _ in range(50):
            N = int(rng.integers(1, 40))
            x = rng.uniform(0.01, 1.0, N + 1)
            spacing = rng.uniform(0.05, 0.5, N)
            expected = 0.0
            for k in range(N):
                slope = (x[k + 1] - x[k]) / spacing[k]
                expected += quad(lambda s: 1.0 / np.sqrt(x[k] + slope * s), 0.0, spacing[k],
                                 epsabs=1e-13, epsrel=1e-12)[0]
            self.assertAlmostEqual(retime.duration(x, spacing) / expected, 1.0, delta=1e-6)

    def test_untraversable(self):
        with self.assertRaises(Untraversable) as ctx:
            retime.duration([0.0, 0.0, 1.0], 0.5)
        self.assertEqual(ctx.exception.interval, 0)

    def test_spacing_mismatch(self):
        with self.assertRaises(DimensionMismatch):
            retime.interval_times([1.0, 1.0, 1.0], [0.5])
        with self.assertRaises(DimensionMismatch):
            retime.interval_times([1.0], 0.5)


class TestTiming(unittest.TestCase):

    def setUp(self):
        self.result = retime.timing([0.0, 0.05, 0.075], 0.25)

    def test_knots(self):
        assert_allclose(self.result.t[:2], [0.0, 2.0 * 0.25 / np.sqrt(0.05)])
        self.assertEqual(self.result.duration, self.result.t[-1])
        assert_allclose(self.result.s, [0.0, 0.25, 0.5])
        assert_allclose(self.result.u, [0.1, 0.05])

    def test_s_of_t(self):
        """Test s(t) passes through every knot and ends at the path end
        """
        s, sdot, sddot = self.result.s_of_t(self.result.t)
        assert_allclose(s, [0.0, 0.25, 0.5], atol=1e-12)
        assert_allclose(sdot * sdot, [0.0, 0.05, 0.075], atol=1e-12)
        assert_allclose(sddot, [0.1, 0.05, 0.05])

    def test_interior_stop_warns(self):
        with self.assertLogs("retiming.retime", level="WARNING"):
            retime.timing([1.0, 0.0, 1.0], 0.5)


class TestSampling(unittest.TestCase):

    def setUp(self):
        # q = s on a one-joint path traversed at unit speed
        self.path = PathSamples(grid=[0.0, 0.5, 1.0], q=[0.0, 0.5, 1.0],
                                dq_ds=[1.0, 1.0, 1.0], d2q_ds2=[0.0, 0.0, 0.0])
        self.profile = np.ones(3)

    def test_sample_times(self):
        assert_allclose(retime.sample_times(1.0, 0.25), [0.0, 0.25, 0.5, 0.75, 1.0])
        assert_allclose(retime.sample_times(0.9, 0.25), [0.0, 0.25, 0.5, 0.75, 0.9])
        with self.assertRaises(ValueError):
            retime.sample_times(1.0, 0.0)

    def test_sample_trajectory(self):
        trajectory = retime.sample_trajectory(self.path, self.profile, 0.25)
        assert_allclose(trajectory.t, [0.0, 0.25, 0.5, 0.75, 1.0])
        assert_allclose(trajectory.s, trajectory.t, atol=1e-12)
        assert_allclose(trajectory.q[:, 0], trajectory.t, atol=1e-12)
        assert_allclose(trajectory.qd[:, 0], 1.0, atol=1e-12)
        assert_allclose(trajectory.qdd[:, 0], 0.0, atol=1e-12)

    def test_evaluate_trajectory(self):
        trajectory = retime.evaluate_trajectory(self.path, self.profile, [0.1, 0.6])
        assert_allclose(trajectory.q[:, 0], [0.1, 0.6], atol=1e-12)

    def test_sample_count_mismatch(self):
        with self.assertRaises(DimensionMismatch):
            retime.sample_trajectory(self.path, np.ones(4), 0.25)

    def test_sample_profile(self):
        trajectory = retime.sample_profile([0.0, 0.05, 0.075], 0.25, 0.5)
        self.assertEqual(trajectory.q.shape, (trajectory.t.shape[0], 0))
        self.assertAlmostEqual(trajectory.s[-1], 0.5)
        self.assertEqual(trajectory.s[0], 0.0)

    def test_export_csv(self):
        trajectory = retime.sample_trajectory(self.path, self.profile, 0.25)
        with tempfile.TemporaryDirectory() as tmpdir:
            filepath = retime.export_csv(trajectory, os.path.join(tmpdir, "trajectory.csv"))
            with open(filepath) as fp:
                header = fp.readline().strip()
            table = np.loadtxt(filepath, delimiter=",", skiprows=1)
        self.assertEqual(header, "t,s,sdot,x,u,q_0,qd_0")
        self.assertEqual(table.shape, (5, 7))
        assert_allclose(table[:, 0], trajectory.t)


if __name__ == "__main__":
    unittest.main()
