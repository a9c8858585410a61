"""Forward elimination and back-substitution over the retiming factor chain

Variables are eliminated in the order u_0, x_0, u_1, x_1, ..., x_N. Every
u_k is fully determined by the dynamics, which turns the step-k rows into
rows on the pair (x_k, x_{k+1}). Eliminating x_k then either stores the
scalar "maximize x_k" program (minimum time) or builds the piecewise-linear
minimizer and the piecewise-quadratic cost-to-go (quadratic objective). The
feasible interval of every x is propagated the same way for both.
"""
import math
import logging
from enum import Enum
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from . import lp2d, pwq
from .errors import EmptyDomain, Infeasible, InvalidProblem, NonConvex, Unbounded
from .lp2d import Halfplane2, Interval
from .problem import DiscretizedProblem, validate

logger = logging.getLogger(__name__)

Strategy = Enum("Strategy", [("TOPP", "topp"), ("QOPP", "quadratic")])

FEASIBILITY_TOLERANCE = 1e-9
# Slack used when back-substitution meets an interval emptied by roundoff
BACKSOLVE_SLACK = 1e-9


class UConditional(NamedTuple):

    """``u_k = (x_{k+1} - x_k) / (2 delta_s)``
    """

    step: int
    delta_s: float

    @property
    def coefficients(self) -> Tuple[float, float]:
        """Coefficients of ``(x_k, x_{k+1})``
        """
        return -0.5 / self.delta_s, 0.5 / self.delta_s

    def __call__(self, x: float, y: float) -> float:
        return (y - x) / (2.0 * self.delta_s)


class ReducedRows(NamedTuple):

    """Step rows rewritten on ``(x_k, x_{k+1})`` as halfplanes

    Attributes
    ----------
    step : int
        Step index k
    halfplanes : list
        ``Halfplane2`` rows ``alpha x_k + beta x_{k+1} <= gamma``
    row_ids : list
        Index of the originating step row of every halfplane
    """

    step: int
    halfplanes: List[Halfplane2]
    row_ids: List[int]

    def fixed_next(self, y: float) -> List[Tuple[float, float]]:
        """1-D rows on x_k once x_{k+1} is known
        """
        return [(alpha, gamma - beta * y) for alpha, beta, gamma in self.halfplanes]


class ReachInterval(NamedTuple):
    step: int
    interval: Interval


class XConditionalTopp(NamedTuple):

    """The stored program ``maximize x_k`` over the reduced rows and reach interval
    """

    step: int
    rows: ReducedRows
    reach: Interval

    def __call__(self, y: float) -> float:
        return _backsolve(self.rows.fixed_next(y), self.reach, self.step).hi


class XConditionalQopp(NamedTuple):

    """The minimizer ``x_k*(x_{k+1})`` of the cost-to-go plus step cost
    """

    step: int
    conditional: pwq.PiecewiseLinear
    rows: ReducedRows

    def __call__(self, y: float) -> float:
        return self.conditional(y)


@dataclass
class BayesNet:

    """Result of the forward pass

    Attributes
    ----------
    strategy : Strategy
        Elimination strategy that produced the net
    u_conditionals : list
        ``N`` ``UConditional``
    x_conditionals : list
        ``N`` ``XConditionalTopp`` or ``XConditionalQopp``
    terminal : Interval or pwq.PiecewiseQuadratic
        Marginal on x_N: its feasible interval for minimum time, its
        cost-to-go for the quadratic objective
    reach_intervals : list
        ``N+1`` ``ReachInterval``
    segment_counts : list
        Cost-to-go segments after every elimination (quadratic objective only)
    """

    strategy: "Strategy"
    u_conditionals: List[UConditional] = field(default_factory=list)
    x_conditionals: List[Union[XConditionalTopp, XConditionalQopp]] = field(default_factory=list)
    terminal: Union[Interval, pwq.PiecewiseQuadratic, None] = None
    reach_intervals: List[ReachInterval] = field(default_factory=list)
    segment_counts: List[int] = field(default_factory=list)


@dataclass
class SolutionProfile:

    """Optimal squared velocities and accelerations along the path

    Attributes
    ----------
    x : np.ndarray
        ``(N+1,)`` squared path velocities
    u : np.ndarray
        ``(N,)`` path accelerations
    strategy : Strategy
        Strategy that produced the profile
    objective_value : float or None
        Quadratic objective of the profile, when the problem has costs
    reach_intervals : list
        ``N+1`` ``ReachInterval``
    segment_counts : list
        Cost-to-go segment count per step
    diagnostics : dict
        Free-form solve diagnostics
    """

    x: np.ndarray
    u: np.ndarray
    strategy: "Strategy"
    objective_value: Optional[float] = None
    reach_intervals: List[ReachInterval] = field(default_factory=list)
    segment_counts: List[int] = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    def check_residuals(self, problem: DiscretizedProblem, tol: float = FEASIBILITY_TOLERANCE) -> List[str]:
        """List every constraint the profile violates beyond ``tol``
        """
        violations = []
        x, u = self.x, self.u
        if x.shape != (problem.N + 1,) or u.shape != (problem.N,):
            return ["profile shape does not match N = {}".format(problem.N)]
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(u))):
            return ["profile has non-finite entries"]

        below = np.flatnonzero(x < problem.x_floor - tol)
        if below.size:
            violations.append("x below x_floor at steps {}".format(below.tolist()))

        dynamics = np.abs(x[1:] - x[:-1] - 2.0 * u * problem.spacing)
        scale = np.maximum(1.0, np.maximum(np.abs(x[:-1]), np.abs(x[1:])))
        bad = np.flatnonzero(dynamics > 1e-12 * scale)
        if bad.size:
            violations.append("dynamics residual above tolerance at steps {}".format(bad.tolist()))

        for k, step in enumerate(problem.steps):
            residual = step.residuals(x[k], u[k] if k < problem.N else 0.0)
            rows = np.flatnonzero(residual > tol)
            if rows.size:
                violations.append("step {}: rows {} violated by up to {:.3e}".format(
                    k, rows.tolist(), float(residual[rows].max())))

        for name, value in (("x0", x[0]), ("xN", x[-1])):
            if not getattr(problem.boundary, name).contains(value, tol):
                violations.append("boundary {} violated: {}".format(name, value))

        for reach in self.reach_intervals:
            if not reach.interval.contains(x[reach.step], tol * max(1.0, abs(x[reach.step]))):
                violations.append("x_{} outside its reach interval".format(reach.step))
        return violations


def resolve_strategy(problem: DiscretizedProblem, objective: Union[str, "Strategy"] = "auto") -> "Strategy":
    """Pick the strategy: quadratic objective when costs are present

    Raises
    ------
    InvalidProblem
        Raised for an unknown objective, or a quadratic objective without costs
    """
    if isinstance(objective, Strategy):
        strategy = objective
    elif objective == "auto":
        strategy = Strategy.QOPP if problem.has_costs else Strategy.TOPP
    else:
        try:
            strategy = Strategy(objective)
        except ValueError:
            raise InvalidProblem("Unknown objective '{}'; expected auto, topp or quadratic".format(objective))
    if strategy is Strategy.QOPP and not problem.has_costs:
        raise InvalidProblem("The quadratic objective needs per-step costs")
    return strategy


def eliminate_u(problem: DiscretizedProblem, k: int,
                strategy: "Strategy" = Strategy.TOPP) -> Tuple[UConditional, ReducedRows, Optional[pwq.BivariateQuadratic]]:
    """Eliminate u_k through the dynamics

    Every step row ``a u + b x_k + c in [lo, hi]`` becomes
    ``(b - a / (2 ds)) x_k + (a / (2 ds)) x_{k+1} + c in [lo, hi]``.

    Returns
    -------
    tuple
        ``(UConditional, ReducedRows, cost)`` where ``cost`` is the step cost
        on ``(x_k, x_{k+1})`` for the quadratic strategy, else None
    """
    delta_s = float(problem.spacing[k])
    step = problem.steps[k]
    beta = step.a / (2.0 * delta_s)
    alpha = step.b - beta
    halfplanes, row_ids = [], []
    for i in range(step.num_rows):
        if math.isfinite(step.hi[i]):
            halfplanes.append(Halfplane2(float(alpha[i]), float(beta[i]), float(step.hi[i] - step.c[i])))
            row_ids.append(i)
        if math.isfinite(step.lo[i]):
            halfplanes.append(Halfplane2(float(-alpha[i]), float(-beta[i]), float(step.c[i] - step.lo[i])))
            row_ids.append(i)
    cost = None
    if strategy is Strategy.QOPP:
        cost = problem.costs[k].substitute_control(delta_s)
    return UConditional(k, delta_s), ReducedRows(k, halfplanes, row_ids), cost


def _offending_rows(rows: ReducedRows, x_box: Interval, y_box: Interval) -> List[int]:
    """Rows that are infeasible on their own, or every row when none is
    """
    offending = sorted({i for plane, i in zip(rows.halfplanes, rows.row_ids)
                        if lp2d.extremize_y([plane], x_box, y_box).is_empty})
    return offending or sorted(set(rows.row_ids))


def propagate_reach(rows: ReducedRows, reach: ReachInterval, x_floor: float) -> ReachInterval:
    """Project the step rows over the incoming reach interval onto x_{k+1}

    Raises
    ------
    Infeasible
        Raised when no x_{k+1} is reachable
    """
    y_box = Interval(x_floor, math.inf)
    if reach.interval.is_empty:
        raise Infeasible("Empty reach interval at step {}".format(reach.step), step=reach.step)
    projected = lp2d.extremize_y(rows.halfplanes, reach.interval, y_box)
    if projected.is_empty:
        offending = _offending_rows(rows, reach.interval, y_box)
        raise Infeasible("No feasible state after step {} (rows {})".format(rows.step, offending),
                         step=rows.step, rows=offending)
    return ReachInterval(rows.step + 1, projected)


def eliminate_x_topp(rows: ReducedRows, reach: ReachInterval,
                     x_floor: float = 0.0) -> Tuple[XConditionalTopp, ReachInterval]:
    """Store ``maximize x_k`` and propagate the reach interval of x_{k+1}
    """
    next_reach = propagate_reach(rows, reach, x_floor)
    return XConditionalTopp(rows.step, rows, reach.interval), next_reach


def eliminate_x_qopp(rows: ReducedRows, cost: pwq.BivariateQuadratic,
                     prior: pwq.PiecewiseQuadratic, reach: ReachInterval,
                     x_floor: float = 0.0,
                     merge_tol: float = pwq.MERGE_TOLERANCE,
                     min_width: float = pwq.MIN_SEGMENT_WIDTH
                     ) -> Tuple[XConditionalQopp, pwq.PiecewiseQuadratic, ReachInterval]:
    """Minimize the step cost plus cost-to-go over x_k as a function of x_{k+1}

    Returns
    -------
    tuple
        ``(conditional, cost-to-go on x_{k+1}, reach interval of x_{k+1})``

    Raises
    ------
    Infeasible
        Raised when no x_{k+1} is reachable
    NonConvex
        Raised when the objective is not convex in x_k
    Unbounded
        Raised when the minimizer escapes to infinity
    """
    k = rows.step
    next_reach = propagate_reach(rows, reach, x_floor)
    try:
        conditional, value = pwq.eliminate_min(
            cost, rows.halfplanes, reach.interval, prior,
            y_box=Interval(x_floor, math.inf), y_domain=next_reach.interval,
            merge_tol=merge_tol, min_width=min_width)
    except Infeasible as err:
        raise Infeasible(str(err), step=k, rows=sorted(set(rows.row_ids)))
    except (NonConvex, Unbounded) as err:
        raise type(err)("{} (step {})".format(err, k), step=k)
    return XConditionalQopp(k, conditional, rows), value, next_reach


def terminal_interval(problem: DiscretizedProblem, reach: ReachInterval) -> Interval:
    """Feasible x_N: its reach interval, the xN boundary and the last rows at u = 0
    """
    N = problem.N
    step = problem.steps[N]
    rows, row_ids = [], []
    for i in range(step.num_rows):
        if math.isfinite(step.hi[i]):
            rows.append((step.b[i], step.hi[i] - step.c[i]))
            row_ids.append(i)
        if math.isfinite(step.lo[i]):
            rows.append((-step.b[i], step.c[i] - step.lo[i]))
            row_ids.append(i)
    box = reach.interval.intersect(problem.boundary.xN)
    interval = lp2d.clamp_1d(rows, box)
    if interval.is_empty:
        offending = []
        if not box.is_empty:
            offending = sorted({i for row, i in zip(rows, row_ids) if lp2d.clamp_1d([row], box).is_empty})
            offending = offending or sorted(set(row_ids))
        raise Infeasible("No feasible final state", step=N, rows=offending)
    return interval


def forward(problem: DiscretizedProblem, strategy: "Strategy",
            merge_tol: float = pwq.MERGE_TOLERANCE,
            min_width: float = pwq.MIN_SEGMENT_WIDTH) -> BayesNet:
    """Eliminate every variable and return the Bayes net of conditionals
    """
    net = BayesNet(strategy)
    x_floor = problem.x_floor
    reach = ReachInterval(0, Interval(*problem.boundary.x0).intersect((x_floor, math.inf)))
    if reach.interval.is_empty:
        raise Infeasible("Initial boundary lies below x_floor", step=0)
    net.reach_intervals.append(reach)

    prior = None
    if strategy is Strategy.QOPP:
        prior = pwq.PiecewiseQuadratic.zero(reach.interval)
        net.segment_counts.append(prior.num_segments)

    debug = logger.isEnabledFor(logging.DEBUG)
    for k in range(problem.N):
        u_conditional, rows, cost = eliminate_u(problem, k, strategy)
        net.u_conditionals.append(u_conditional)
        if strategy is Strategy.TOPP:
            conditional, reach = eliminate_x_topp(rows, reach, x_floor)
        else:
            conditional, prior, reach = eliminate_x_qopp(rows, cost, prior, reach, x_floor, merge_tol, min_width)
            net.segment_counts.append(prior.num_segments)
        net.x_conditionals.append(conditional)
        net.reach_intervals.append(reach)
        if debug:
            logger.debug("step %d: reach [%.6g, %.6g]%s", k + 1, reach.interval.lo, reach.interval.hi,
                         "" if prior is None else ", {} segments".format(prior.num_segments))

    interval = terminal_interval(problem, reach)
    if strategy is Strategy.TOPP:
        net.terminal = interval
    else:
        terminal = problem.costs[problem.N].terminal()
        net.terminal = pwq.add(prior.restrict(interval), terminal)
    return net


def _backsolve(rows: Sequence[Tuple[float, float]], box: Interval, step: int) -> Interval:
    interval = lp2d.clamp_1d(rows, box)
    if interval.is_empty:
        # crossing bounds from roundoff in the projected intervals
        slack = [(alpha, gamma + BACKSOLVE_SLACK * max(1.0, abs(gamma))) for alpha, gamma in rows]
        widened = Interval(box.lo - BACKSOLVE_SLACK * max(1.0, abs(box.lo)),
                           box.hi + BACKSOLVE_SLACK * max(1.0, abs(box.hi)))
        interval = lp2d.clamp_1d(slack, widened)
        if interval.is_empty:
            raise Infeasible("Back-substitution found no feasible x at step {}".format(step), step=step)
        logger.debug("Widened back-substitution interval at step %d", step)
        interval = Interval(box.clamp(interval.lo), box.clamp(interval.hi))
    return interval


def backsubstitute(net: BayesNet) -> SolutionProfile:
    """Recover the optimal profile from the Bayes net, last state first

    Raises
    ------
    Infeasible
        Raised when the terminal marginal or a back-substitution interval is empty
    Unbounded
        Raised when the optimal value of some x is infinite
    """
    N = len(net.x_conditionals)
    x = np.empty(N + 1)
    if net.strategy is Strategy.TOPP:
        if net.terminal is None or net.terminal.is_empty:
            raise Infeasible("Empty terminal marginal", step=N)
        x[N] = net.terminal.hi
    else:
        try:
            x[N], _ = pwq.minimize(net.terminal)
        except EmptyDomain:
            raise Infeasible("Empty terminal marginal", step=N)
        except Unbounded as err:
            raise Unbounded(str(err), step=N)
    if not math.isfinite(x[N]):
        raise Unbounded("Final squared velocity is unbounded", step=N)

    for k in range(N - 1, -1, -1):
        x[k] = net.x_conditionals[k](x[k + 1])
        if not math.isfinite(x[k]):
            raise Unbounded("Squared velocity at step {} is unbounded".format(k), step=k)
    u = np.array([net.u_conditionals[k](x[k], x[k + 1]) for k in range(N)])
    # no negative zeros in the reported profile
    x, u = x + 0.0, u + 0.0
    return SolutionProfile(x=x, u=u, strategy=net.strategy,
                           reach_intervals=list(net.reach_intervals),
                           segment_counts=list(net.segment_counts))


def objective_value(problem: DiscretizedProblem, x: Sequence[float], u: Sequence[float]) -> float:
    """Quadratic objective of a profile; the last step is evaluated at u = 0
    """
    if problem.costs is None:
        raise InvalidProblem("The problem has no costs")
    N = problem.N
    total = sum(problem.costs[k].evaluate(x[k], u[k]) for k in range(N))
    return float(total + problem.costs[N].evaluate(x[N], 0.0))


def solve(problem: DiscretizedProblem, objective: Union[str, "Strategy"] = "auto",
          merge_tol: float = pwq.MERGE_TOLERANCE,
          min_width: float = pwq.MIN_SEGMENT_WIDTH,
          tolerance: float = FEASIBILITY_TOLERANCE) -> SolutionProfile:
    """Solve a retiming problem by forward elimination and back-substitution

    Parameters
    ----------
    problem : DiscretizedProblem
        Problem to solve
    objective : str or Strategy, optional
        ``"auto"`` (quadratic when costs are present), ``"topp"`` or
        ``"quadratic"``
    merge_tol, min_width : float, optional
        Cost-to-go pruning tolerances
    tolerance : float, optional
        Absolute slack of the residual check

    Returns
    -------
    SolutionProfile
        Profile with residual violations (if any) under
        ``diagnostics["residuals"]``

    Raises
    ------
    InvalidProblem
        Raised when the problem fails validation
    Infeasible
        Raised with the earliest failing step and its offending rows
    NonConvex
        Raised when a step cost is not convex in the eliminated variable
    Unbounded
        Raised when the optimum is not finite
    """
    diagnostics = validate(problem)
    if diagnostics:
        raise InvalidProblem("Invalid problem: {}".format("; ".join(diagnostics)), diagnostics)
    strategy = resolve_strategy(problem, objective)
    logger.debug("Solving N = %d with the %s strategy", problem.N, strategy.value)

    net = forward(problem, strategy, merge_tol, min_width)
    profile = backsubstitute(net)
    if problem.has_costs:
        profile.objective_value = objective_value(problem, profile.x, profile.u)

    residuals = profile.check_residuals(problem, tolerance)
    if residuals:
        logger.warning("Solution violates %d checks: %s", len(residuals), residuals[0])
        profile.diagnostics["residuals"] = residuals
    return profile
