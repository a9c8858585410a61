"""Dense reference solvers for small problems

The whole problem is flattened into one vector ``z = (x_0..x_N, u_0..u_{N-1})``
and stated as

    minimize    (1/2) z^T P z + q^T z + r
    subject to  G z <= h
                A z == b

The minimum-time reference maximizes x_N, x_{N-1}, ..., x_0 one after the
other with HiGHS; the quadratic reference is an active-set QP solver whose
answer is certified against the KKT conditions.
"""
import math
import logging
from itertools import combinations
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import linprog

from .elimination import SolutionProfile, Strategy, objective_value
from .errors import Infeasible, InvalidProblem, NotConverged, Unbounded
from .problem import DiscretizedProblem, validate

logger = logging.getLogger(__name__)

TOPP_MAX_N = 50
QOPP_MAX_N = 30
ENUMERATION_MAX_ROWS = 12
KKT_TOLERANCE = 1e-8
HIGHS_OPTIONS = {"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10}
# Relative widths of the window a maximized coordinate is held to in later
# passes, tried in order while a pass comes back infeasible
FIX_WINDOWS = (1e-10, 1e-9, 1e-8)


@dataclass
class DenseInstance:

    """Monolithic form of a discretized problem

    Attributes
    ----------
    num_x : int
        N+1 state variables, stored first
    num_u : int
        N control variables, stored after the states
    P, q, r : np.ndarray, np.ndarray, float
        Quadratic objective (zero for minimum time)
    G, h : np.ndarray
        Inequality rows, including the floor and non-degenerate boundary bounds
    A, b : np.ndarray
        Dynamics and degenerate boundary bounds
    """

    num_x: int
    num_u: int
    P: np.ndarray
    q: np.ndarray
    r: float
    G: np.ndarray
    h: np.ndarray
    A: np.ndarray
    b: np.ndarray

    @property
    def size(self):
        return self.num_x + self.num_u

    def x_index(self, k):
        return k

    def u_index(self, k):
        return self.num_x + k

    def split(self, z):
        return z[:self.num_x].copy(), z[self.num_x:].copy()

    def objective(self, z):
        return float(0.5 * z @ self.P @ z + self.q @ z + self.r)


def dense_instance(problem: DiscretizedProblem) -> DenseInstance:
    """Flatten a discretized problem
    """
    N = problem.N
    num_x, num_u = N + 1, N
    size = num_x + num_u
    G_rows, h_rows, A_rows, b_rows = [], [], [], []

    def row(entries):
        vector = np.zeros(size)
        for index, value in entries:
            vector[index] += value
        return vector

    for k, delta_s in enumerate(problem.spacing):
        A_rows.append(row([(k + 1, 1.0), (k, -1.0), (num_x + k, -2.0 * delta_s)]))
        b_rows.append(0.0)

    for k, step in enumerate(problem.steps):
        for i in range(step.num_rows):
            entries = [(k, step.b[i])]
            if k < N:
                entries.append((num_x + k, step.a[i]))
            if math.isfinite(step.hi[i]):
                G_rows.append(row(entries))
                h_rows.append(step.hi[i] - step.c[i])
            if math.isfinite(step.lo[i]):
                G_rows.append(-row(entries))
                h_rows.append(step.c[i] - step.lo[i])

    lower = np.full(num_x, problem.x_floor)
    upper = np.full(num_x, math.inf)
    for k, bounds in ((0, problem.boundary.x0), (N, problem.boundary.xN)):
        lower[k] = max(lower[k], bounds.lo)
        upper[k] = min(upper[k], bounds.hi)
    for k in range(num_x):
        if lower[k] == upper[k]:
            A_rows.append(row([(k, 1.0)]))
            b_rows.append(lower[k])
            continue
        if math.isfinite(lower[k]):
            G_rows.append(row([(k, -1.0)]))
            h_rows.append(-lower[k])
        if math.isfinite(upper[k]):
            G_rows.append(row([(k, 1.0)]))
            h_rows.append(upper[k])

    P, q, r = np.zeros((size, size)), np.zeros(size), 0.0
    if problem.costs is not None:
        for k, cost in enumerate(problem.costs):
            p_k, r_k, n_k, g_k, h_k, const = cost.general_form()
            P[k, k] += p_k
            q[k] += g_k
            r += const
            if k < N:
                j = num_x + k
                P[j, j] += r_k
                P[k, j] += n_k
                P[j, k] += n_k
                q[j] += h_k

    return DenseInstance(num_x=num_x, num_u=num_u, P=P, q=q, r=r,
                         G=np.array(G_rows).reshape(-1, size), h=np.array(h_rows),
                         A=np.array(A_rows).reshape(-1, size), b=np.array(b_rows))


def _linprog(instance: DenseInstance, c: np.ndarray, G=None, h=None):
    G = instance.G if G is None else G
    h = instance.h if h is None else h
    return linprog(c, A_ub=G if G.shape[0] else None, b_ub=h if G.shape[0] else None,
                   A_eq=instance.A if instance.A.shape[0] else None,
                   b_eq=instance.b if instance.A.shape[0] else None,
                   bounds=(None, None), method="highs", options=HIGHS_OPTIONS)


def _classify(instance: DenseInstance, result, G, h):
    """Resolve an "infeasible or unbounded" answer with a feasibility solve
    """
    if "unbounded" not in str(result.message).lower():
        return result
    feasibility = _linprog(instance, np.zeros(instance.size), G, h)
    if feasibility.status in (0, 2):
        result.status = 3 if feasibility.status == 0 else 2
    return result


def _check_size(problem: DiscretizedProblem, max_n: int):
    diagnostics = validate(problem)
    if diagnostics:
        raise InvalidProblem("Invalid problem: {}".format("; ".join(diagnostics)), diagnostics)
    if problem.N > max_n:
        raise InvalidProblem("Dense reference limited to N <= {}, got {}".format(max_n, problem.N))


def _profile(problem: DiscretizedProblem, x: np.ndarray, strategy, u: np.ndarray = None, **diagnostics):
    if u is None:
        u = (x[1:] - x[:-1]) / (2.0 * problem.spacing)
    value = None if problem.costs is None else objective_value(problem, x, u)
    return SolutionProfile(x=x, u=u, strategy=strategy, objective_value=value, diagnostics=diagnostics)


def _held(instance: DenseInstance, fixed: Sequence, width: float):
    """Inequality rows plus a window of relative width ``width`` around every fixed coordinate
    """
    if not fixed:
        return instance.G, instance.h
    eye = np.eye(instance.size)
    rows, rhs = [instance.G], [instance.h]
    for k, value in fixed:
        slack = width * max(1.0, abs(value))
        rows.append(np.vstack((eye[k], -eye[k])))
        rhs.append([value + slack, slack - value])
    return np.vstack(rows), np.concatenate(rhs)


def topp_oracle(problem: DiscretizedProblem, max_n: int = TOPP_MAX_N) -> SolutionProfile:
    """Greedy lexicographic maximum: x_N first, then x_{N-1}, down to x_0

    A pass that comes back infeasible only because the held coordinates sit
    on the solver tolerance is repeated with wider windows.

    Raises
    ------
    Infeasible
        Raised when the problem has no feasible profile
    Unbounded
        Raised when some coordinate can grow without bound
    """
    _check_size(problem, max_n)
    instance = dense_instance(problem)
    x = np.empty(instance.num_x)
    fixed = []
    for k in range(problem.N, -1, -1):
        c = np.zeros(instance.size)
        c[k] = -1.0
        widths = FIX_WINDOWS if fixed else FIX_WINDOWS[:1]
        for width in widths:
            G, h = _held(instance, fixed, width)
            result = _linprog(instance, c, G, h)
            if result.status not in (0, 2, 3):
                result = _classify(instance, result, G, h)
            if result.status != 2:
                break
            logger.debug("Pass for x_%d infeasible with window %.0e", k, width)
        if result.status == 2:
            raise Infeasible("Dense LP is infeasible", step=k)
        if result.status == 3:
            raise Unbounded("x_{} is unbounded".format(k), step=k)
        if result.status != 0:
            raise NotConverged("HiGHS stopped with status {}: {}".format(result.status, result.message))
        x[k] = result.x[k]
        fixed.append((k, x[k]))
    return _profile(problem, x, Strategy.TOPP, method="lexicographic")


class _KKTPoint:

    """Candidate point with multipliers of the equality and working rows
    """

    def __init__(self, z, nu, lam, working):
        self.z, self.nu, self.lam, self.working = z, nu, lam, list(working)


def _kkt_matrix(instance: DenseInstance, working: Sequence[int]):
    C = np.vstack((instance.A, instance.G[list(working)])) if working else instance.A
    size, rows = instance.size, C.shape[0]
    kkt = np.zeros((size + rows, size + rows))
    kkt[:size, :size] = instance.P
    kkt[:size, size:] = C.T
    kkt[size:, :size] = C
    return kkt


def _lstsq(kkt: np.ndarray, rhs: np.ndarray, size: int):
    solution = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
    residual = float(np.linalg.norm(kkt @ solution - rhs))
    return solution[:size], solution[size:], residual


def _solve_active(instance: DenseInstance, working: Sequence[int]):
    """Minimizer of the objective with the working rows held as equalities
    """
    d = np.concatenate((instance.b, instance.h[list(working)]))
    rhs = np.concatenate((-instance.q, d))
    return _lstsq(_kkt_matrix(instance, working), rhs, instance.size)


def _step_direction(instance: DenseInstance, working: Sequence[int], gradient: np.ndarray):
    """Equality-constrained step ``p`` from the current point, ``C p = 0``
    """
    rhs = np.concatenate((-gradient, np.zeros(instance.A.shape[0] + len(working))))
    return _lstsq(_kkt_matrix(instance, working), rhs, instance.size)


def kkt_residuals(instance: DenseInstance, z: np.ndarray, nu: np.ndarray, lam: np.ndarray) -> dict:
    """Stationarity, primal, dual and complementarity residuals of a point

    ``lam`` covers every inequality row of the instance, with the sign
    convention ``P z + q + A^T nu + G^T lam = 0``, ``lam >= 0``.
    """
    gradient = instance.P @ z + instance.q
    stationarity = gradient + instance.A.T @ nu + instance.G.T @ lam
    slack = instance.G @ z - instance.h
    equality = instance.A @ z - instance.b
    return {
        "stationarity": float(np.max(np.abs(stationarity), initial=0.0)),
        "primal": float(max(np.max(slack, initial=0.0), np.max(np.abs(equality), initial=0.0))),
        "dual": float(max(-np.min(lam, initial=0.0), 0.0)),
        "complementarity": float(np.max(np.abs(lam * slack), initial=0.0)),
    }


def _scale(instance: DenseInstance) -> float:
    return max(1.0, float(np.max(np.abs(instance.P), initial=0.0)),
               float(np.max(np.abs(instance.q), initial=0.0)))


def _certify(instance: DenseInstance, point: _KKTPoint, tol: float) -> dict:
    lam = np.zeros(instance.G.shape[0])
    np.add.at(lam, point.working, point.lam)
    residuals = kkt_residuals(instance, point.z, point.nu, lam)
    scale = _scale(instance)
    limits = {"stationarity": tol * scale, "primal": tol, "dual": tol * scale, "complementarity": tol * scale}
    failed = [name for name, value in residuals.items() if value > limits[name]]
    if failed:
        raise NotConverged("KKT conditions not met ({}): {}".format(", ".join(failed), residuals))
    return residuals


def _phase_one(instance: DenseInstance) -> np.ndarray:
    result = _linprog(instance, np.zeros(instance.size))
    if result.status == 2:
        raise Infeasible("Dense QP is infeasible")
    if result.status != 0:
        raise NotConverged("HiGHS stopped with status {}: {}".format(result.status, result.message))
    return result.x


def _enumerate_active_sets(instance: DenseInstance, tol: float) -> _KKTPoint:
    """Try every subset of inequality rows as the active set, keep the best KKT point
    """
    _phase_one(instance)
    rows, m_eq = instance.G.shape[0], instance.A.shape[0]
    scale = _scale(instance)
    best, best_value = None, math.inf
    for count in range(rows + 1):
        for working in combinations(range(rows), count):
            z, multipliers, residual = _solve_active(instance, working)
            if residual > tol * scale:
                # inconsistent working set
                continue
            if np.any(instance.G @ z - instance.h > tol) or np.any(np.abs(instance.A @ z - instance.b) > tol):
                continue
            lam = multipliers[m_eq:]
            if np.any(lam < -tol * scale):
                continue
            value = instance.objective(z)
            if value < best_value - 1e-12 * max(1.0, abs(value)):
                best, best_value = _KKTPoint(z, multipliers[:m_eq], lam, working), value
    if best is None:
        raise NotConverged("No active set satisfies the KKT conditions")
    return best


def _active_set(instance: DenseInstance, tol: float, max_iterations: int = None) -> _KKTPoint:
    """Primal active-set method started from a feasible vertex
    """
    z = _phase_one(instance)
    rows, m_eq = instance.G.shape[0], instance.A.shape[0]
    working = []
    limit = max_iterations or 50 * (rows + instance.size)
    for _ in range(limit):
        gradient = instance.P @ z + instance.q
        p, multipliers, residual = _step_direction(instance, working, gradient)
        if residual > tol * max(1.0, float(np.linalg.norm(gradient))):
            raise NotConverged("Objective is not strictly convex on the working set")
        if np.max(np.abs(p), initial=0.0) <= 1e-12 * max(1.0, float(np.max(np.abs(z)))):
            lam = multipliers[m_eq:]
            if not working or lam.min() >= -tol:
                return _KKTPoint(z, multipliers[:m_eq], lam, working)
            working.pop(int(np.argmin(lam)))
            continue
        Gp = instance.G @ p
        alpha, blocking = 1.0, None
        for i in range(rows):
            if i in working or Gp[i] <= 1e-14:
                continue
            ratio = max(instance.h[i] - instance.G[i] @ z, 0.0) / Gp[i]
            if ratio < alpha:
                alpha, blocking = ratio, i
        z = z + alpha * p
        if blocking is not None:
            working.append(blocking)
    raise NotConverged("Active-set method did not converge in {} iterations".format(limit))


def _polish(instance: DenseInstance, point: _KKTPoint, tol: float) -> _KKTPoint:
    """Re-solve on the final working set to remove drift from the iterations
    """
    z, multipliers, residual = _solve_active(instance, point.working)
    m_eq = instance.A.shape[0]
    if residual <= tol * _scale(instance) and np.all(instance.G @ z - instance.h <= tol):
        return _KKTPoint(z, multipliers[:m_eq], multipliers[m_eq:], point.working)
    return point


def qopp_oracle(problem: DiscretizedProblem, method: str = "auto",
                max_n: int = QOPP_MAX_N, tol: float = KKT_TOLERANCE) -> SolutionProfile:
    """Solve the quadratic objective problem as one dense convex QP

    Parameters
    ----------
    problem : DiscretizedProblem
        Problem with per-step costs
    method : str, optional
        ``"enumeration"``, ``"active_set"`` or ``"auto"`` (enumeration when
        there are at most 12 inequality rows)
    max_n : int, optional
        Largest accepted N
    tol : float, optional
        KKT certification tolerance

    Raises
    ------
    Infeasible
        Raised when the problem has no feasible profile
    NotConverged
        Raised when the answer fails KKT certification
    """
    _check_size(problem, max_n)
    if problem.costs is None:
        raise InvalidProblem("The quadratic reference needs per-step costs")
    instance = dense_instance(problem)
    if method == "auto":
        method = "enumeration" if instance.G.shape[0] <= ENUMERATION_MAX_ROWS else "active_set"
    if method == "enumeration":
        point = _enumerate_active_sets(instance, tol)
    elif method == "active_set":
        point = _polish(instance, _active_set(instance, tol), tol)
    else:
        raise ValueError("Unknown method '{}'".format(method))
    residuals = _certify(instance, point, tol)
    logger.debug("Dense QP solved by %s, KKT residuals %s", method, residuals)
    x, u = instance.split(point.z)
    return _profile(problem, x, Strategy.QOPP, u=u, method=method,
                    active_rows=sorted(point.working), kkt=residuals)
