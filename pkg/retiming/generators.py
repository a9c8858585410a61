"""Built-in retiming problems

Includes the one-row benchmark used for scaling measurements, joint
velocity/acceleration boxes on a sampled path, analytic planar paths and a
planar cable-driven robot whose feasible wrench set is a zonogon.
"""
import math
import logging
from dataclasses import dataclass
from typing import List, NamedTuple, Sequence, Tuple

import numpy as np
from scipy.optimize import linprog

from . import lp2d
from .errors import DegeneratePath, EmptyFeasible, InvalidProblem, RankDeficient, UnsupportedDimension
from .lp2d import Halfplane2, Interval
from .problem import (
    BoundaryConditions, DiscretizedProblem, DiscretizedStep, PathSamples, QuadraticStepCost,
    TaskConstraintSet, discretize,
)

logger = logging.getLogger(__name__)

BENCHMARK_SPACING = 0.25
BENCHMARK_LIMIT = 0.1
GRAVITY = (0.0, -9.81)
# Square frame of side 2 centred on the origin
DEFAULT_ANCHORS = ((-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0))
# Tensions, weights and speed of the cable robot are placeholders, not measured values
DEFAULT_TENSION_BOUNDS = (5.0, 100.0)
DEFAULT_SPEED = 2.0
DEFAULT_SPEED_WEIGHT = 1.0
DEFAULT_MARGIN_WEIGHT = 0.1
# Normals closer than this (radians) describe the same zonogon edge
ANGLE_TOLERANCE = 1e-12


def simple_benchmark(N: int, quadratic: bool = False, target: float = 0.0) -> DiscretizedProblem:
    """The scaling benchmark: ``x_{k+1} = x_k + 0.5 u_k`` with ``x_k + u_k <= 0.1``

    Parameters
    ----------
    N : int
        Number of intervals
    quadratic : bool, optional
        Add the costs ``x_N^2 + sum_k (x_k - target)^2 + u_k^2``
    target : float, optional
        Squared velocity target of the quadratic costs

    Returns
    -------
    DiscretizedProblem
        Starts at rest, final state free above the floor
    """
    if N < 1:
        raise InvalidProblem("The benchmark needs N >= 1, got {}".format(N))
    row = DiscretizedStep((1.0,), (1.0,), (0.0,), (-math.inf,), (BENCHMARK_LIMIT,))
    costs = None
    if quadratic:
        costs = [QuadraticStepCost(Q=1.0, R=1.0, N=0.0, x_des=target) for _ in range(N)]
        costs.append(QuadraticStepCost(Q=1.0, R=1.0, N=0.0))
    return DiscretizedProblem(steps=[row] * (N + 1), delta_s=BENCHMARK_SPACING,
                              boundary=BoundaryConditions(x0=(0.0, 0.0), xN=(0.0, math.inf)),
                              costs=costs)


def kinematic_limits(path: PathSamples, vmax: Sequence[float], amax: Sequence[float],
                     boundary: BoundaryConditions = None) -> DiscretizedProblem:
    """Per-joint velocity and acceleration boxes along a path

    Raises
    ------
    DegeneratePath
        Raised when the path never moves, which leaves the speed unbounded
    EmptyVelocityInterval
        Raised when some sample admits no positive path velocity
    """
    samples, dof = path.num_samples, path.dof
    vmax = np.broadcast_to(np.asarray(vmax, dtype=float), (dof,))
    amax = np.broadcast_to(np.asarray(amax, dtype=float), (dof,))
    if np.any(vmax < 0) or np.any(amax < 0):
        raise InvalidProblem("Velocity and acceleration limits must be non-negative")
    if not np.any(path.dq_ds):
        raise DegeneratePath("dq/ds vanishes along the whole path")

    identity = np.broadcast_to(np.eye(dof), (samples, dof, dof))
    task = TaskConstraintSet(A=identity, B=np.zeros((samples, dof, dof, dof)), f=np.zeros((samples, dof)),
                             lo=np.broadcast_to(-amax, (samples, dof)), hi=np.broadcast_to(amax, (samples, dof)),
                             A_v=identity, f_v=np.zeros((samples, dof)),
                             lo_v=np.broadcast_to(-vmax, (samples, dof)), hi_v=np.broadcast_to(vmax, (samples, dof)))
    return discretize(path, task, boundary=boundary)


def _angles(N: int) -> np.ndarray:
    return 2.0 * math.pi * np.linspace(0.0, 1.0, N + 1)


def circle_path(N: int, radius: float = 1.0, center: Sequence[float] = (0.0, 0.0)) -> PathSamples:
    """One counter-clockwise lap of a circle, starting on the positive x axis
    """
    theta = _angles(N)
    w = 2.0 * math.pi
    unit = np.column_stack((np.cos(theta), np.sin(theta)))
    tangent = np.column_stack((-np.sin(theta), np.cos(theta)))
    return PathSamples(grid=np.linspace(0.0, 1.0, N + 1),
                       q=np.asarray(center, dtype=float) + radius * unit,
                       dq_ds=w * radius * tangent,
                       d2q_ds2=-w * w * radius * unit)


def star_path(N: int, points: int = 5, radius: float = 0.5, depth: float = 0.3,
              center: Sequence[float] = (0.0, 0.0)) -> PathSamples:
    """Smooth star ``r(theta) = radius (1 + depth cos(points theta))``

    Parameters
    ----------
    N : int
        Number of intervals
    points : int, optional
        Number of star tips
    radius : float, optional
        Mean radius
    depth : float, optional
        Relative tip height, in ``[0, 1)``
    center : Sequence, optional
        Centre of the star
    """
    if not 0.0 <= depth < 1.0:
        raise ValueError("Star depth must lie in [0, 1), got {}".format(depth))
    theta = _angles(N)
    k, w = points, 2.0 * math.pi
    r = radius * (1.0 + depth * np.cos(k * theta))
    dr = -radius * depth * k * np.sin(k * theta)
    d2r = -radius * depth * k * k * np.cos(k * theta)
    cos, sin = np.cos(theta), np.sin(theta)
    q = np.column_stack((r * cos, r * sin)) + np.asarray(center, dtype=float)
    dq = np.column_stack((dr * cos - r * sin, dr * sin + r * cos))
    d2q = np.column_stack((d2r * cos - 2.0 * dr * sin - r * cos,
                           d2r * sin + 2.0 * dr * cos - r * sin))
    return PathSamples(grid=np.linspace(0.0, 1.0, N + 1), q=q, dq_ds=w * dq, d2q_ds2=w * w * d2q)


def tension_polytope(W: np.ndarray, t_lo: Sequence[float], t_hi: Sequence[float]) -> List[Halfplane2]:
    """Halfplanes of the wrench zonogon ``{W t : t_lo <= t <= t_hi}``

    Every edge of the zonogon is parallel to a column of W, so its outward
    normals are the two perpendiculars of every column; the offset is the
    support function of the zonogon along that normal.

    Parameters
    ----------
    W : np.ndarray
        ``(2, m)`` wrench matrix
    t_lo, t_hi : Sequence
        Tension bounds per cable

    Returns
    -------
    list
        ``Halfplane2`` rows ``alpha F_x + beta F_y <= gamma`` sorted by the
        angle of their unit normal

    Raises
    ------
    UnsupportedDimension
        Raised when W does not map into the plane
    RankDeficient
        Raised when W does not have rank 2
    """
    W = np.atleast_2d(np.asarray(W, dtype=float))
    if W.shape[0] != 2:
        raise UnsupportedDimension("Only planar wrench sets are supported, got dimension {}".format(W.shape[0]))
    if np.linalg.matrix_rank(W) < 2:
        raise RankDeficient("Wrench matrix must have full row rank")
    t_lo, t_hi = np.asarray(t_lo, dtype=float), np.asarray(t_hi, dtype=float)
    center = W @ (0.5 * (t_lo + t_hi))
    generators = W * (0.5 * (t_hi - t_lo))

    normals = []
    for g in generators.T:
        length = math.hypot(g[0], g[1])
        if length == 0.0:
            continue
        normals.append((-g[1] / length, g[0] / length))
        normals.append((g[1] / length, -g[0] / length))
    normals.sort(key=lambda n: math.atan2(n[1], n[0]))

    halfplanes, last_angle = [], None
    for nx, ny in normals:
        angle = math.atan2(ny, nx)
        if last_angle is not None and angle - last_angle <= ANGLE_TOLERANCE:
            continue
        last_angle = angle
        support = nx * center[0] + ny * center[1] + float(np.sum(np.abs(nx * generators[0] + ny * generators[1])))
        halfplanes.append(Halfplane2(nx, ny, support))
    # first and last normals can coincide across the angle wrap
    if len(halfplanes) > 1:
        first = math.atan2(halfplanes[0].beta, halfplanes[0].alpha)
        last = math.atan2(halfplanes[-1].beta, halfplanes[-1].alpha)
        if last - first >= 2.0 * math.pi - ANGLE_TOLERANCE:
            halfplanes.pop()
    return halfplanes


def zonogon_vertices(halfplanes: Sequence[Halfplane2]) -> np.ndarray:
    """Vertices of a zonogon from its angle-sorted halfplanes, counter-clockwise
    """
    vertices = []
    for (a1, b1, g1), (a2, b2, g2) in zip(halfplanes, list(halfplanes[1:]) + [halfplanes[0]]):
        vertices.append(np.linalg.solve(np.array([[a1, b1], [a2, b2]]), np.array([g1, g2])))
    return np.array(vertices)


def wrench_matrix(anchors: Sequence[Sequence[float]], position: Sequence[float]) -> np.ndarray:
    """Unit cable directions from the end effector towards every anchor, as columns
    """
    cables = np.asarray(anchors, dtype=float) - np.asarray(position, dtype=float)
    lengths = np.linalg.norm(cables, axis=1)
    if np.any(lengths == 0.0):
        raise DegeneratePath("End effector coincides with an anchor at {}".format(list(position)))
    return (cables / lengths[:, np.newaxis]).T


@dataclass(frozen=True)
class CableRobotSpec:

    """Planar point-mass cable robot following a task-space path

    The cable force is ``F = W t`` and the point mass obeys
    ``m (x' u + x'' x) - m g = F``, i.e. ``A = m I``, ``B = 0`` and
    ``f = -m g`` in the task constraint form.

    Attributes
    ----------
    path : PathSamples
        End effector path in the plane
    wrench : np.ndarray
        ``(N+1, 2, m)`` wrench matrix per sample
    t_lo, t_hi : np.ndarray
        ``(m,)`` tension bounds
    mass : float
        End effector mass
    gravity : np.ndarray
        ``(2,)`` gravity acceleration
    speed : float
        Desired task-space speed v_d
    speed_weight : float
        Weight q' of the speed matching objective
    margin_weight : float
        Weight r of the tension margin objective
    """

    path: PathSamples
    wrench: np.ndarray
    t_lo: np.ndarray
    t_hi: np.ndarray
    mass: float
    gravity: np.ndarray
    speed: float = DEFAULT_SPEED
    speed_weight: float = DEFAULT_SPEED_WEIGHT
    margin_weight: float = DEFAULT_MARGIN_WEIGHT

    @property
    def t_mean(self) -> np.ndarray:
        return 0.5 * (self.t_lo + self.t_hi)

    @property
    def num_cables(self):
        return self.t_lo.shape[0]

    def force_coefficients(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Per-sample ``(a, b, c)`` with ``F = a u + b x + c``, each ``(N+1, 2)``
        """
        return (self.mass * self.path.dq_ds,
                self.mass * self.path.d2q_ds2,
                np.broadcast_to(-self.mass * self.gravity, self.path.dq_ds.shape))

    def task_constraints(self) -> TaskConstraintSet:
        samples = self.path.num_samples
        identity = np.broadcast_to(self.mass * np.eye(2), (samples, 2, 2))
        return TaskConstraintSet(A=identity, B=np.zeros((samples, 2, 2, 2)),
                                 f=np.broadcast_to(-self.mass * self.gravity, (samples, 2)),
                                 lo=np.full((samples, 2), -math.inf), hi=np.full((samples, 2), math.inf))


def planar_cable_robot(path: PathSamples,
                       anchors: Sequence[Sequence[float]] = DEFAULT_ANCHORS,
                       mass: float = 1.0,
                       gravity: Sequence[float] = GRAVITY,
                       t_lo: float = DEFAULT_TENSION_BOUNDS[0],
                       t_hi: float = DEFAULT_TENSION_BOUNDS[1],
                       speed: float = DEFAULT_SPEED,
                       speed_weight: float = DEFAULT_SPEED_WEIGHT,
                       margin_weight: float = DEFAULT_MARGIN_WEIGHT) -> CableRobotSpec:
    """Build a planar cable robot around a task-space path

    The default frame, tension bounds and weights are placeholders.
    """
    if path.dof != 2:
        raise UnsupportedDimension("Cable robot paths must be planar, got {} coordinates".format(path.dof))
    anchors = np.asarray(anchors, dtype=float)
    t_lo = np.broadcast_to(np.asarray(t_lo, dtype=float), (anchors.shape[0],)).copy()
    t_hi = np.broadcast_to(np.asarray(t_hi, dtype=float), (anchors.shape[0],)).copy()
    if np.any(t_lo > t_hi):
        raise InvalidProblem("Tension bounds must satisfy t_lo <= t_hi")
    if mass <= 0.0:
        raise InvalidProblem("Mass must be positive, got {}".format(mass))
    wrench = np.stack([wrench_matrix(anchors, position) for position in path.q])
    logger.debug("Built cable robot with %d cables over %d samples", anchors.shape[0], path.num_samples)
    return CableRobotSpec(path=path, wrench=wrench, t_lo=t_lo, t_hi=t_hi, mass=float(mass),
                          gravity=np.asarray(gravity, dtype=float), speed=float(speed),
                          speed_weight=float(speed_weight), margin_weight=float(margin_weight))


def cable_robot_problem(spec: CableRobotSpec, boundary: BoundaryConditions = None,
                        x_floor: float = 0.0) -> DiscretizedProblem:
    """Quadratic-objective problem keeping the tensions inside their bounds

    Every zonogon halfplane ``n . F <= gamma`` becomes the row
    ``(n . a) u + (n . b) x + n . c <= gamma``. The cost per step is
    ``q' (|x'|^2 x - v_d^2)^2 + r |F - W t_m|^2`` expanded exactly.

    Raises
    ------
    DegeneratePath
        Raised when the path stops, ``|x'| = 0``, at some sample
    EmptyFeasible
        Raised when some sample admits no (x, u) at all
    """
    a, b, c = spec.force_coefficients()
    speed_squared = np.sum(spec.path.dq_ds ** 2, axis=1)
    stopped = np.flatnonzero(speed_squared == 0.0)
    if stopped.size:
        raise DegeneratePath("Path velocity vanishes at samples {}".format(stopped.tolist()))

    steps, costs = [], []
    for k in range(spec.path.num_samples):
        planes = tension_polytope(spec.wrench[k], spec.t_lo, spec.t_hi)
        normals = np.array([[alpha, beta] for alpha, beta, _ in planes])
        gammas = np.array([gamma for _, _, gamma in planes])
        step = DiscretizedStep(normals @ a[k], normals @ b[k], normals @ c[k],
                               np.full(len(planes), -math.inf), gammas)
        rows_xu = [(step.a[i], step.b[i], step.hi[i] - step.c[i]) for i in range(step.num_rows)]
        if lp2d.extremize_y(rows_xu, lp2d.UNBOUNDED, Interval(x_floor, math.inf)).is_empty:
            raise EmptyFeasible("No feasible (x, u) at sample {}".format(k), step=k)
        steps.append(step)

        q = spec.speed_weight * speed_squared[k] ** 2
        x_target = spec.speed ** 2 / speed_squared[k]
        r = spec.margin_weight
        shifted = c[k] - spec.wrench[k] @ spec.t_mean
        costs.append(QuadraticStepCost(
            Q=q + r * float(b[k] @ b[k]), R=r * float(a[k] @ a[k]), N=2.0 * r * float(a[k] @ b[k]),
            g_x=-2.0 * q * x_target + 2.0 * r * float(b[k] @ shifted),
            g_u=2.0 * r * float(a[k] @ shifted),
            offset=q * x_target ** 2 + r * float(shifted @ shifted)))

    return DiscretizedProblem(steps=steps, delta_s=np.diff(spec.path.grid),
                              boundary=boundary or BoundaryConditions(), costs=costs,
                              x_floor=x_floor, path=spec.path)


class TensionProfile(NamedTuple):

    """Cable tensions along a solved profile

    Attributes
    ----------
    tensions : np.ndarray
        ``(N+1, m)`` tension distribution at every sample
    margins : np.ndarray
        ``(N+1,)`` smallest distance of a tension to its bounds; negative
        when the required force lies outside the wrench set
    """

    tensions: np.ndarray
    margins: np.ndarray


def tension_profile(spec: CableRobotSpec, profile) -> TensionProfile:
    """Most centred tension distribution at every sample of a profile

    Each sample solves ``maximize tau`` subject to ``W t = F`` and
    ``t_lo + tau <= t <= t_hi - tau``.
    """
    x = np.asarray(profile.x, dtype=float)
    u = np.append(np.asarray(profile.u, dtype=float), 0.0)
    a, b, c = spec.force_coefficients()
    m = spec.num_cables
    identity = np.eye(m)
    A_ub = np.vstack((np.hstack((-identity, np.ones((m, 1)))), np.hstack((identity, np.ones((m, 1))))))
    b_ub = np.concatenate((-spec.t_lo, spec.t_hi))
    objective = np.append(np.zeros(m), -1.0)

    tensions, margins = np.empty((x.shape[0], m)), np.empty(x.shape[0])
    for k in range(x.shape[0]):
        force = a[k] * u[k] + b[k] * x[k] + c[k]
        result = linprog(objective, A_ub=A_ub, b_ub=b_ub,
                         A_eq=np.hstack((spec.wrench[k], np.zeros((2, 1)))), b_eq=force,
                         bounds=(None, None), method="highs")
        if result.status != 0:
            raise InvalidProblem("Tension distribution failed at sample {}: {}".format(k, result.message))
        tensions[k], margins[k] = result.x[:m], result.x[m]
    return TensionProfile(tensions, margins)
