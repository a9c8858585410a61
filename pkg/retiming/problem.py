"""Retiming problem data model

Holds the sampled path, the task constraint description, the discretized
per-step rows in (x, u) with x = sdot^2 and u = sddot, and the JSON
interchange format of a discretized problem.
"""
import os
import json
import math
import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from . import lp2d
from .errors import (
    DimensionMismatch, EmptyVelocityInterval, InvalidProblem, NonFiniteCoefficient,
)
from .lp2d import Interval

logger = logging.getLogger(__name__)


def _as_interval(value) -> Interval:
    lo, hi = value
    return Interval(float(lo), float(hi))


@dataclass(frozen=True)
class PathSamples:

    """Geometric path sampled on a grid over [0, 1]

    Attributes
    ----------
    grid : np.ndarray
        ``(N+1,)`` strictly increasing path parameters, first 0 and last 1
    q : np.ndarray
        ``(N+1, n)`` configuration at every sample
    dq_ds : np.ndarray
        ``(N+1, n)`` first derivative with respect to s
    d2q_ds2 : np.ndarray
        ``(N+1, n)`` second derivative with respect to s
    """

    grid: np.ndarray
    q: np.ndarray
    dq_ds: np.ndarray
    d2q_ds2: np.ndarray

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        if grid.ndim != 1 or grid.shape[0] < 2:
            raise DimensionMismatch("A path needs at least 2 samples")
        arrays = []
        for name in ("q", "dq_ds", "d2q_ds2"):
            array = np.asarray(getattr(self, name), dtype=float)
            # one value per sample is a one-joint path
            arrays.append(array.reshape(-1, 1) if array.ndim == 1 else array)
        if any(a.shape != arrays[0].shape or a.shape[0] != grid.shape[0] for a in arrays):
            raise DimensionMismatch("q, dq_ds and d2q_ds2 must all have shape (len(grid), n)")
        if not all(np.all(np.isfinite(a)) for a in [grid] + arrays):
            raise NonFiniteCoefficient("Path samples must be finite")
        if np.any(np.diff(grid) <= 0) or grid[0] != 0.0 or grid[-1] != 1.0:
            raise InvalidProblem("Path grid must increase strictly from 0 to 1")
        object.__setattr__(self, "grid", grid)
        for name, array in zip(("q", "dq_ds", "d2q_ds2"), arrays):
            object.__setattr__(self, name, array)

    @property
    def num_samples(self):
        return self.grid.shape[0]

    @property
    def dof(self):
        return self.q.shape[1]


@dataclass(frozen=True)
class TaskConstraintSet:

    """First and second order constraints sampled along the path

    Second order rows read ``A qdd + qd^T B_i qd + f in [lo, hi]`` and first
    order rows ``A_v qd + f_v in [lo_v, hi_v]``. Either group may be absent.

    Attributes
    ----------
    A : np.ndarray
        ``(N+1, m, n)``
    B : np.ndarray
        ``(N+1, m, n, n)``, one n x n matrix per row
    f, lo, hi : np.ndarray
        ``(N+1, m)``
    A_v : np.ndarray
        ``(N+1, p, n)``
    f_v, lo_v, hi_v : np.ndarray
        ``(N+1, p)``
    """

    A: Optional[np.ndarray] = None
    B: Optional[np.ndarray] = None
    f: Optional[np.ndarray] = None
    lo: Optional[np.ndarray] = None
    hi: Optional[np.ndarray] = None
    A_v: Optional[np.ndarray] = None
    f_v: Optional[np.ndarray] = None
    lo_v: Optional[np.ndarray] = None
    hi_v: Optional[np.ndarray] = None

    def __post_init__(self):
        for name in ("A", "B", "f", "lo", "hi", "A_v", "f_v", "lo_v", "hi_v"):
            value = getattr(self, name)
            if value is not None:
                object.__setattr__(self, name, np.asarray(value, dtype=float))
        if self.A is not None:
            samples, rows, dof = self.A.shape
            B = self.B if self.B is not None else np.zeros((samples, rows, dof, dof))
            f = self.f if self.f is not None else np.zeros((samples, rows))
            object.__setattr__(self, "B", B)
            object.__setattr__(self, "f", f)
            if B.shape != (samples, rows, dof, dof) or f.shape != (samples, rows):
                raise DimensionMismatch("Second order coefficients have inconsistent shapes")
            for name in ("lo", "hi"):
                if getattr(self, name) is None or getattr(self, name).shape != (samples, rows):
                    raise DimensionMismatch("Second order bounds must have shape (samples, rows)")
            if np.any(self.lo > self.hi):
                raise InvalidProblem("Second order bounds must satisfy lo <= hi")
        if self.A_v is not None:
            samples, rows, _ = self.A_v.shape
            f_v = self.f_v if self.f_v is not None else np.zeros((samples, rows))
            object.__setattr__(self, "f_v", f_v)
            for name in ("f_v", "lo_v", "hi_v"):
                if getattr(self, name) is None or getattr(self, name).shape != (samples, rows):
                    raise DimensionMismatch("First order coefficients must have shape (samples, rows)")
            if np.any(self.lo_v > self.hi_v):
                raise InvalidProblem("First order bounds must satisfy lo <= hi")


@dataclass(frozen=True)
class DiscretizedStep:

    """Rows ``a_i u + b_i x + c_i in [lo_i, hi_i]`` at one grid point
    """

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        arrays = [np.atleast_1d(np.asarray(getattr(self, name), dtype=float))
                  for name in ("a", "b", "c", "lo", "hi")]
        if any(a.ndim != 1 or a.shape != arrays[0].shape for a in arrays):
            raise DimensionMismatch("Step coefficients a, b, c, lo, hi must have equal length")
        for name, array in zip(("a", "b", "c", "lo", "hi"), arrays):
            object.__setattr__(self, name, array)

    @classmethod
    def empty(cls):
        return cls(*([()] * 5))

    @property
    def num_rows(self):
        return self.a.shape[0]

    def concat(self, other):
        return DiscretizedStep(*(np.concatenate((getattr(self, name), getattr(other, name)))
                                 for name in ("a", "b", "c", "lo", "hi")))

    def residuals(self, x: float, u: float) -> np.ndarray:
        """Signed bound violation of every row (positive means violated)
        """
        value = self.a * u + self.b * x + self.c
        with np.errstate(invalid="ignore"):
            return np.maximum(value - self.hi, self.lo - value)


@dataclass(frozen=True)
class BoundaryConditions:

    """Admissible intervals for the first and last squared path velocity

    Defaults to rest-to-rest motion.
    """

    x0: Interval = Interval(0.0, 0.0)
    xN: Interval = Interval(0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "x0", _as_interval(self.x0))
        object.__setattr__(self, "xN", _as_interval(self.xN))


@dataclass(frozen=True)
class QuadraticStepCost:

    """Per-step cost ``Q xt^2 + R ut^2 + N xt ut`` with ``xt = x - x_des``
    and ``ut = u - u_des``, plus optional exact linear/constant terms
    ``g_x x + g_u u + offset``
    """

    Q: float = 0.0
    R: float = 0.0
    N: float = 0.0
    x_des: float = 0.0
    u_des: float = 0.0
    g_x: float = 0.0
    g_u: float = 0.0
    offset: float = 0.0

    def is_psd(self, tol: float = 1e-12) -> bool:
        scale = max(1.0, abs(self.Q), abs(self.R), abs(self.N))
        return (self.Q >= -tol * scale and self.R >= -tol * scale
                and self.Q * self.R - 0.25 * self.N * self.N >= -tol * scale * scale)

    def general_form(self) -> Tuple[float, float, float, float, float, float]:
        """Coefficients ``(p, r, n, g, h, const)`` of
        ``0.5 p x^2 + 0.5 r u^2 + n x u + g x + h u + const``
        """
        Q, R, N, xd, ud = self.Q, self.R, self.N, self.x_des, self.u_des
        return (2.0 * Q, 2.0 * R, N,
                -2.0 * Q * xd - N * ud + self.g_x,
                -2.0 * R * ud - N * xd + self.g_u,
                Q * xd * xd + R * ud * ud + N * xd * ud + self.offset)

    def evaluate(self, x: float, u: float) -> float:
        xt, ut = x - self.x_des, u - self.u_des
        return (self.Q * xt * xt + self.R * ut * ut + self.N * xt * ut
                + self.g_x * x + self.g_u * u + self.offset)

    def substitute_control(self, delta_s: float):
        """Substitute ``u = (y - x) / (2 delta_s)`` where y is the next x

        Returns
        -------
        pwq.BivariateQuadratic
            The cost in (x_k, x_{k+1})
        """
        from .pwq import BivariateQuadratic

        p, r, n, g, h, const = self.general_form()
        alpha, beta = -0.5 / delta_s, 0.5 / delta_s
        return BivariateQuadratic(p=p + 2.0 * n * alpha + r * alpha * alpha,
                                  r=r * beta * beta,
                                  n=n * beta + r * alpha * beta,
                                  g=g + h * alpha,
                                  h=h * beta,
                                  const=const)

    def terminal(self):
        """The cost at the last step, where u is fixed to 0

        Returns
        -------
        pwq.PiecewiseQuadratic
            Single segment over the whole real line
        """
        from .pwq import PiecewiseQuadratic

        p, _, _, g, _, const = self.general_form()
        return PiecewiseQuadratic.quadratic(0.5 * p, g, const)


@dataclass(frozen=True)
class DiscretizedProblem:

    """The solver's input

    Attributes
    ----------
    steps : list
        ``N+1`` ``DiscretizedStep``; the last one is evaluated with u = 0
    delta_s : float or np.ndarray
        Uniform spacing or ``N`` per-interval spacings
    boundary : BoundaryConditions
        Intervals for x_0 and x_N
    costs : list or None
        ``N+1`` ``QuadraticStepCost`` for the quadratic objective, None for
        the minimum-time objective
    x_floor : float
        Lower bound on every x_k
    path : PathSamples or None
        The sampled path, when the problem was generated from one
    """

    steps: List[DiscretizedStep]
    delta_s: Union[float, np.ndarray]
    boundary: BoundaryConditions = field(default_factory=BoundaryConditions)
    costs: Optional[List[QuadraticStepCost]] = None
    x_floor: float = 0.0
    path: Optional[PathSamples] = None

    def __post_init__(self):
        object.__setattr__(self, "steps", list(self.steps))
        if self.costs is not None:
            object.__setattr__(self, "costs", list(self.costs))
        if np.ndim(self.delta_s) == 0:
            object.__setattr__(self, "delta_s", float(self.delta_s))
        else:
            object.__setattr__(self, "delta_s", np.asarray(self.delta_s, dtype=float))
        object.__setattr__(self, "x_floor", float(self.x_floor))

    @property
    def N(self):
        return len(self.steps) - 1

    @cached_property
    def spacing(self) -> np.ndarray:
        """Per-interval spacings ``(N,)``, built once per problem
        """
        if np.ndim(self.delta_s) == 0:
            return np.full(max(self.N, 0), self.delta_s)
        return self.delta_s

    @cached_property
    def grid(self) -> np.ndarray:
        return np.concatenate(([0.0], np.cumsum(self.spacing)))

    @property
    def has_costs(self):
        return self.costs is not None


def square_velocity_limits(a_v: Sequence[float], c_v: Sequence[float],
                           lo: Sequence[float], hi: Sequence[float], sample: int = None) -> Interval:
    """Turn first order rows ``a_v sdot + c_v in [lo, hi]`` into bounds on x

    Parameters
    ----------
    a_v, c_v, lo, hi : Sequence
        Row coefficients and bounds at one sample
    sample : int, optional
        Sample index, only used in the error

    Returns
    -------
    Interval
        ``[sdot_min^2, sdot_max^2]``

    Raises
    ------
    EmptyVelocityInterval
        Raised when no positive sdot satisfies every row
    """
    rows = []
    for a, c, row_lo, row_hi in zip(a_v, c_v, lo, hi):
        if math.isfinite(row_hi):
            rows.append((a, row_hi - c))
        if math.isfinite(row_lo):
            rows.append((-a, c - row_lo))
    sdot = lp2d.clamp_1d(rows, Interval(0.0, math.inf))
    if sdot.is_empty or sdot.hi <= 0.0:
        raise EmptyVelocityInterval("No positive path velocity satisfies the first order rows"
                                    " at sample {}".format(sample), sample=sample)
    return Interval(sdot.lo * sdot.lo, sdot.hi * sdot.hi)


def reparameterize(path: PathSamples, task: TaskConstraintSet) -> List[DiscretizedStep]:
    """Express the task constraints as rows in (x, u) at every sample

    Second order rows become ``a = A dq/ds``,
    ``b = A d2q/ds2 + dq/ds^T B_i dq/ds`` and ``c = f``; first order rows
    are squared into one extra row ``x in [x_lo, x_hi]``.

    Raises
    ------
    DimensionMismatch
        Raised when the constraint set does not match the path
    NonFiniteCoefficient
        Raised when a resulting coefficient is not finite
    EmptyVelocityInterval
        Raised when the first order rows leave no positive velocity
    """
    samples, dof = path.num_samples, path.dof
    steps = [DiscretizedStep.empty() for _ in range(samples)]

    if task.A is not None:
        if task.A.shape[0] != samples or task.A.shape[2] != dof:
            raise DimensionMismatch("Second order constraints do not match the path samples")
        a = np.einsum("kmn,kn->km", task.A, path.dq_ds)
        b = (np.einsum("kmn,kn->km", task.A, path.d2q_ds2)
             + np.einsum("kmij,ki,kj->km", task.B, path.dq_ds, path.dq_ds))
        c = task.f
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b)) and np.all(np.isfinite(c))):
            raise NonFiniteCoefficient("Reparameterized second order rows are not finite")
        steps = [DiscretizedStep(a[k], b[k], c[k], task.lo[k], task.hi[k]) for k in range(samples)]

    if task.A_v is not None:
        if task.A_v.shape[0] != samples or task.A_v.shape[2] != dof:
            raise DimensionMismatch("First order constraints do not match the path samples")
        a_v = np.einsum("kpn,kn->kp", task.A_v, path.dq_ds)
        if not np.all(np.isfinite(a_v)):
            raise NonFiniteCoefficient("Reparameterized first order rows are not finite")
        for k in range(samples):
            bounds = square_velocity_limits(a_v[k], task.f_v[k], task.lo_v[k], task.hi_v[k], sample=k)
            steps[k] = steps[k].concat(DiscretizedStep((0.0,), (1.0,), (0.0,), (bounds.lo,), (bounds.hi,)))
    return steps


def discretize(path: PathSamples, task: TaskConstraintSet,
               boundary: BoundaryConditions = None,
               costs: Sequence[QuadraticStepCost] = None,
               x_floor: float = 0.0) -> DiscretizedProblem:
    """Build a problem on the path's own grid
    """
    steps = reparameterize(path, task)
    return DiscretizedProblem(steps=steps,
                              delta_s=np.diff(path.grid),
                              boundary=boundary or BoundaryConditions(),
                              costs=costs,
                              x_floor=x_floor,
                              path=path)


def validate(problem: DiscretizedProblem) -> List[str]:
    """List every violated invariant of a problem (empty when valid)
    """
    diagnostics = []
    N = problem.N
    if N < 1:
        diagnostics.append("problem needs at least 2 steps, got {}".format(N + 1))

    if np.ndim(problem.delta_s) != 0 and np.shape(problem.delta_s) != (max(N, 0),):
        diagnostics.append("delta_s must be a scalar or have {} entries".format(N))
    spacing = np.atleast_1d(problem.delta_s)
    if not np.all(np.isfinite(spacing)):
        diagnostics.append("delta_s must be finite")
    elif np.any(spacing <= 0):
        diagnostics.append("delta_s must be strictly positive")

    if not math.isfinite(problem.x_floor) or problem.x_floor < 0:
        diagnostics.append("x_floor must be finite and non-negative")

    for k, step in enumerate(problem.steps):
        if not (np.all(np.isfinite(step.a)) and np.all(np.isfinite(step.b)) and np.all(np.isfinite(step.c))):
            diagnostics.append("step {}: non-finite coefficient".format(k))
        if np.any(np.isnan(step.lo)) or np.any(np.isnan(step.hi)):
            diagnostics.append("step {}: NaN bound".format(k))
        elif np.any(step.lo > step.hi):
            diagnostics.append("step {}: rows {} have lo > hi".format(
                k, np.flatnonzero(step.lo > step.hi).tolist()))

    for name in ("x0", "xN"):
        bounds = getattr(problem.boundary, name)
        if bounds.lo > bounds.hi:
            diagnostics.append("boundary {}: lo > hi".format(name))
        if bounds.lo < problem.x_floor or math.isnan(bounds.lo):
            diagnostics.append("boundary {}: lower bound below x_floor".format(name))

    if problem.costs is not None:
        if len(problem.costs) != N + 1:
            diagnostics.append("costs must have {} entries, got {}".format(N + 1, len(problem.costs)))
        for k, cost in enumerate(problem.costs):
            values = (cost.Q, cost.R, cost.N, cost.x_des, cost.u_des, cost.g_x, cost.g_u, cost.offset)
            if not all(map(math.isfinite, values)):
                diagnostics.append("cost {}: non-finite coefficient".format(k))
            elif not cost.is_psd():
                diagnostics.append("cost {}: weights are not positive semidefinite "
                                   "(Q={}, R={}, N={})".format(k, cost.Q, cost.R, cost.N))
    return diagnostics


# JSON interchange ---------------------------------------------------------

PROBLEM_FIELDS = {"delta_s", "steps", "boundary", "costs", "x_floor", "path"}
STEP_FIELDS = {"a", "b", "c", "lo", "hi"}
BOUNDARY_FIELDS = {"x0", "xN"}
COST_FIELDS = {"Q", "R", "N", "x_des", "u_des", "g_x", "g_u", "offset"}
PATH_FIELDS = {"grid", "q", "dq_ds", "d2q_ds2"}


def _check_fields(obj, allowed, required, where):
    if not isinstance(obj, dict):
        raise InvalidProblem("{} must be an object".format(where))
    unknown = set(obj) - allowed
    if unknown:
        raise InvalidProblem("{}: unknown fields {}".format(where, sorted(unknown)))
    missing = required - set(obj)
    if missing:
        raise InvalidProblem("{}: missing fields {}".format(where, sorted(missing)))


def _bounds_from_json(values, default, where):
    """Decode bounds where null stands for an infinite bound
    """
    try:
        return [default if v is None else float(v) for v in values]
    except (TypeError, ValueError):
        raise InvalidProblem("{}: bounds must be numbers or null".format(where))


def _bounds_to_json(values):
    return [float(v) if math.isfinite(v) else None for v in values]


def problem_from_dict(document: dict, default_x_floor: float = 0.0) -> DiscretizedProblem:
    """Decode the JSON document of a problem

    Raises
    ------
    InvalidProblem
        Raised on unknown or missing fields and malformed values
    """
    _check_fields(document, PROBLEM_FIELDS, {"delta_s", "steps"}, "problem")
    if not isinstance(document["steps"], list):
        raise InvalidProblem("steps must be an array")
    try:
        steps = []
        for k, row in enumerate(document["steps"]):
            where = "steps[{}]".format(k)
            _check_fields(row, STEP_FIELDS, STEP_FIELDS, where)
            steps.append(DiscretizedStep(
                [float(v) for v in row["a"]], [float(v) for v in row["b"]], [float(v) for v in row["c"]],
                _bounds_from_json(row["lo"], -math.inf, where), _bounds_from_json(row["hi"], math.inf, where)))

        boundary = BoundaryConditions()
        if "boundary" in document:
            _check_fields(document["boundary"], BOUNDARY_FIELDS, set(), "boundary")
            intervals = {}
            for name in BOUNDARY_FIELDS & set(document["boundary"]):
                lo, hi = document["boundary"][name]
                intervals[name] = (-math.inf if lo is None else float(lo), math.inf if hi is None else float(hi))
            boundary = BoundaryConditions(**intervals)

        costs = None
        if document.get("costs") is not None:
            costs = []
            for k, entry in enumerate(document["costs"]):
                _check_fields(entry, COST_FIELDS, {"Q", "R", "N"}, "costs[{}]".format(k))
                costs.append(QuadraticStepCost(**{key: float(value) for key, value in entry.items()}))

        path = None
        if document.get("path") is not None:
            _check_fields(document["path"], PATH_FIELDS, PATH_FIELDS, "path")
            path = PathSamples(**document["path"])

        delta_s = document["delta_s"]
        delta_s = float(delta_s) if not isinstance(delta_s, list) else [float(v) for v in delta_s]
        return DiscretizedProblem(steps=steps, delta_s=delta_s, boundary=boundary, costs=costs,
                                  x_floor=float(document.get("x_floor", default_x_floor)), path=path)
    except (TypeError, ValueError, KeyError) as err:
        if isinstance(err, InvalidProblem):
            raise
        raise InvalidProblem("Malformed problem document: {}".format(err))


def problem_to_dict(problem: DiscretizedProblem) -> dict:
    """Encode a problem as a JSON-compatible document
    """
    document = {
        "delta_s": problem.delta_s if np.ndim(problem.delta_s) == 0 else problem.delta_s.tolist(),
        "x_floor": problem.x_floor,
        "boundary": {
            "x0": _bounds_to_json(problem.boundary.x0),
            "xN": _bounds_to_json(problem.boundary.xN),
        },
        "steps": [{
            "a": step.a.tolist(), "b": step.b.tolist(), "c": step.c.tolist(),
            "lo": _bounds_to_json(step.lo), "hi": _bounds_to_json(step.hi),
        } for step in problem.steps],
    }
    if problem.costs is not None:
        document["costs"] = [{key: getattr(cost, key) for key in
                              ("Q", "R", "N", "x_des", "u_des", "g_x", "g_u", "offset")}
                             for cost in problem.costs]
    if problem.path is not None:
        document["path"] = {name: getattr(problem.path, name).tolist() for name in PATH_FIELDS}
    return document


def load_problem(problem_path: str, default_x_floor: float = 0.0) -> DiscretizedProblem:
    """Load a problem from its JSON file

    Raises
    ------
    FileNotFoundError
        Raised when the file does not exist
    PermissionError
        Raised when the file cannot be read
    InvalidProblem
        Raised when the file is not a valid problem document
    """
    if not os.path.isfile(problem_path):
        raise FileNotFoundError("The problem file at '{}' was not found".format(problem_path))
    elif not os.access(problem_path, os.R_OK):
        raise PermissionError("Permission denied to read problem file")

    try:
        with open(problem_path) as fp:
            document = json.load(fp)
    except json.JSONDecodeError as err:
        raise InvalidProblem("Could not read JSON from problem file: {}".format(err))
    problem = problem_from_dict(document, default_x_floor)
    logger.info("Loaded problem with N = %d from %s", problem.N, problem_path)
    return problem


def dump_problem(problem: DiscretizedProblem, problem_path: str) -> str:
    """Write a problem as JSON and return the path written
    """
    with open(problem_path, "w") as fp:
        json.dump(problem_to_dict(problem), fp, sort_keys=True, allow_nan=False)
    logger.info("Problem saved successfully (filepath: %s)", problem_path)
    return problem_path
