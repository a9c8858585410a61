"""Time parameterization of a squared-velocity profile

Within interval k the path acceleration is held at u_k, so s(t) is
quadratic and sdot(t) linear in the elapsed time, and the interval takes
exactly ``2 ds_k / (sqrt(x_k) + sqrt(x_{k+1}))``.
"""
import logging
from dataclasses import dataclass
from typing import Sequence, Tuple, Union

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import DimensionMismatch, Untraversable
from .problem import PathSamples

logger = logging.getLogger(__name__)


def _squared_velocities(profile) -> np.ndarray:
    x = np.asarray(getattr(profile, "x", profile), dtype=float)
    if x.ndim != 1 or x.shape[0] < 2:
        raise DimensionMismatch("A profile needs at least 2 squared velocities")
    # roundoff below zero
    return np.maximum(x, 0.0)


def _spacing(delta_s: Union[float, Sequence[float]], intervals: int) -> np.ndarray:
    if np.ndim(delta_s) == 0:
        return np.full(intervals, float(delta_s))
    spacing = np.asarray(delta_s, dtype=float)
    if spacing.shape != (intervals,):
        raise DimensionMismatch("Expected {} spacings, got {}".format(intervals, spacing.shape))
    return spacing


def interval_times(profile, delta_s: Union[float, Sequence[float]]) -> np.ndarray:
    """Traversal time of every interval

    Raises
    ------
    Untraversable
        Raised when both ends of an interval have zero velocity
    """
    x = _squared_velocities(profile)
    spacing = _spacing(delta_s, x.shape[0] - 1)
    speed = np.sqrt(x)
    total = speed[:-1] + speed[1:]
    stalled = np.flatnonzero(total == 0.0)
    if stalled.size:
        k = int(stalled[0])
        raise Untraversable("Zero velocity at both ends of interval {}".format(k), interval=k)
    return 2.0 * spacing / total


def duration(profile, delta_s: Union[float, Sequence[float]]) -> float:
    """Total traversal time ``T = sum_k 2 ds_k / (sqrt(x_k) + sqrt(x_{k+1}))``

    Parameters
    ----------
    profile : SolutionProfile or Sequence
        Profile (or its squared velocities)
    delta_s : float or Sequence
        Uniform spacing or one spacing per interval

    Raises
    ------
    Untraversable
        Raised when both ends of some interval have zero velocity
    """
    return float(np.sum(interval_times(profile, delta_s)))


@dataclass(frozen=True)
class TimingResult:

    """Knot times of a profile and the resulting s(t)

    Attributes
    ----------
    t : np.ndarray
        ``(N+1,)`` knot times, first 0
    duration : float
        Total time, equal to ``t[-1]``
    s : np.ndarray
        ``(N+1,)`` path parameters at the knots
    x : np.ndarray
        ``(N+1,)`` squared velocities at the knots
    u : np.ndarray
        ``(N,)`` path acceleration held over each interval
    """

    t: np.ndarray
    duration: float
    s: np.ndarray
    x: np.ndarray
    u: np.ndarray

    def interval_index(self, times: np.ndarray) -> np.ndarray:
        index = np.searchsorted(self.t, times, side="right") - 1
        return np.clip(index, 0, self.u.shape[0] - 1)

    def s_of_t(self, times) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Evaluate ``(s, sdot, sddot)`` at arbitrary times in ``[0, T]``
        """
        times = np.clip(np.asarray(times, dtype=float), 0.0, self.duration)
        k = self.interval_index(times)
        tau = times - self.t[k]
        start = np.sqrt(self.x[k])
        sdot = np.maximum(start + self.u[k] * tau, 0.0)
        s = np.clip(self.s[k] + start * tau + 0.5 * self.u[k] * tau * tau, self.s[k], self.s[k + 1])
        return s, sdot, self.u[k].copy()


def timing(profile, delta_s: Union[float, Sequence[float]]) -> TimingResult:
    """Knot times of a profile

    Raises
    ------
    Untraversable
        Raised when both ends of some interval have zero velocity
    """
    x = _squared_velocities(profile)
    spacing = _spacing(delta_s, x.shape[0] - 1)
    durations = interval_times(x, spacing)
    interior_stops = np.flatnonzero(x[1:-1] == 0.0) + 1
    if interior_stops.size:
        logger.warning("Profile stops at interior samples %s", interior_stops.tolist())
    t = np.concatenate(([0.0], np.cumsum(durations)))
    u = (x[1:] - x[:-1]) / (2.0 * spacing)
    return TimingResult(t=t, duration=float(t[-1]), s=np.concatenate(([0.0], np.cumsum(spacing))), x=x, u=u)


@dataclass(frozen=True)
class TimedTrajectory:

    """Uniformly sampled trajectory ``q(t) = q(s(t))``

    Attributes
    ----------
    t : np.ndarray
        ``(M,)`` sample times with step dt; the last sample is at T
    s, sdot, x, u : np.ndarray
        ``(M,)`` path parameter, its rate, squared rate and acceleration
    q, qd, qdd : np.ndarray
        ``(M, n)`` configuration and its first two time derivatives
    """

    t: np.ndarray
    s: np.ndarray
    sdot: np.ndarray
    x: np.ndarray
    u: np.ndarray
    q: np.ndarray
    qd: np.ndarray
    qdd: np.ndarray


def sample_times(total: float, dt: float) -> np.ndarray:
    """Times ``0, dt, 2 dt, ...`` closed by the final time
    """
    if not dt > 0.0:
        raise ValueError("Sampling step dt must be positive, got {}".format(dt))
    times = np.arange(0.0, total, dt)
    if times.size == 0 or total - times[-1] > 1e-9 * max(1.0, total):
        times = np.append(times, total)
    else:
        times[-1] = total
    return times


def _evaluate(path: PathSamples, result: TimingResult, times: np.ndarray) -> TimedTrajectory:
    s, sdot, sddot = result.s_of_t(times)
    q = PchipInterpolator(path.grid, path.q, axis=0)(s)
    dq_ds = PchipInterpolator(path.grid, path.dq_ds, axis=0)(s)
    d2q_ds2 = PchipInterpolator(path.grid, path.d2q_ds2, axis=0)(s)
    qd = dq_ds * sdot[:, None]
    qdd = d2q_ds2 * (sdot * sdot)[:, None] + dq_ds * sddot[:, None]
    return TimedTrajectory(t=times, s=s, sdot=sdot, x=sdot * sdot, u=sddot, q=q, qd=qd, qdd=qdd)


def _path_timing(path: PathSamples, profile) -> TimingResult:
    x = _squared_velocities(profile)
    if x.shape[0] != path.num_samples:
        raise DimensionMismatch("Profile has {} samples but the path has {}".format(x.shape[0], path.num_samples))
    return timing(x, np.diff(path.grid))


def sample_trajectory(path: PathSamples, profile, dt: float) -> TimedTrajectory:
    """Sample the timed trajectory every ``dt`` seconds

    The path spacing is taken from ``path.grid``. Path derivatives between
    samples come from monotone cubic interpolation of the given samples.

    Raises
    ------
    Untraversable
        Raised when the profile's duration is infinite
    DimensionMismatch
        Raised when the profile and path sample counts differ
    """
    result = _path_timing(path, profile)
    times = sample_times(result.duration, dt)
    logger.debug("Sampling %d points over %.6g s", times.shape[0], result.duration)
    return _evaluate(path, result, times)


def evaluate_trajectory(path: PathSamples, profile, times: Sequence[float]) -> TimedTrajectory:
    """Same as ``sample_trajectory`` at caller-chosen times
    """
    return _evaluate(path, _path_timing(path, profile), np.asarray(times, dtype=float))


def sample_profile(profile, delta_s: Union[float, Sequence[float]], dt: float) -> TimedTrajectory:
    """Sample s(t) alone, for problems that carry no path (empty q columns)
    """
    result = timing(profile, delta_s)
    times = sample_times(result.duration, dt)
    s, sdot, sddot = result.s_of_t(times)
    empty = np.zeros((times.shape[0], 0))
    return TimedTrajectory(t=times, s=s, sdot=sdot, x=sdot * sdot, u=sddot, q=empty, qd=empty, qdd=empty)


def export_csv(trajectory: TimedTrajectory, csv_path: str) -> str:
    """Write the trajectory as CSV with header ``t,s,sdot,x,u,q_i...,qd_i...``
    """
    dof = trajectory.q.shape[1]
    header = ",".join(["t", "s", "sdot", "x", "u"]
                      + ["q_{}".format(i) for i in range(dof)]
                      + ["qd_{}".format(i) for i in range(dof)])
    table = np.column_stack((trajectory.t, trajectory.s, trajectory.sdot, trajectory.x, trajectory.u,
                             trajectory.q, trajectory.qd))
    np.savetxt(csv_path, table, delimiter=",", header=header, comments="", fmt="%.17g")
    logger.info("Trajectory saved successfully (filepath: %s)", csv_path)
    return csv_path
