"""Exact one- and two-variable linear programs over halfplanes

The reach-interval propagation only ever needs the projection of a small
polygon onto one axis, so the projection is computed directly by eliminating
the other variable pairwise (every lower bound against every upper bound).
"""
import math
from typing import Iterable, NamedTuple, Sequence, Tuple

# Slack on normalized rows, relative to their offsets
TOLERANCE = 1e-12
PARALLEL_TOLERANCE = 1e-14


class Interval(NamedTuple):

    """Closed interval over the extended reals

    An interval with ``lo > hi`` is empty; use ``EMPTY`` rather than
    building one by hand.
    """

    lo: float = -math.inf
    hi: float = math.inf

    @property
    def is_empty(self):
        return self.lo > self.hi

    @property
    def is_bounded(self):
        return math.isfinite(self.lo) and math.isfinite(self.hi)

    @property
    def width(self):
        return 0.0 if self.is_empty else self.hi - self.lo

    def intersect(self, other):
        lo, hi = max(self.lo, other[0]), min(self.hi, other[1])
        return Interval(lo, hi) if lo <= hi else EMPTY

    def contains(self, value, tol=0.0):
        return self.lo - tol <= value <= self.hi + tol

    def clamp(self, value):
        return min(max(value, self.lo), self.hi)

    @classmethod
    def point(cls, value):
        return cls(float(value), float(value))


EMPTY = Interval(math.inf, -math.inf)
UNBOUNDED = Interval()


class Halfplane2(NamedTuple):

    """The halfplane ``alpha * x + beta * y <= gamma``
    """

    alpha: float
    beta: float
    gamma: float


def _settle(lo: float, hi: float) -> Interval:
    """Build an interval, collapsing crossings that are pure roundoff
    """
    if lo <= hi:
        return Interval(lo, hi)
    if lo - hi <= TOLERANCE * max(1.0, abs(lo), abs(hi)):
        mid = 0.5 * (lo + hi)
        return Interval(mid, mid)
    return EMPTY


def clamp_1d(rows: Iterable[Tuple[float, float]], box: Sequence[float] = UNBOUNDED) -> Interval:
    """Intersect the bounds implied by rows ``alpha * x <= gamma`` with a box

    Parameters
    ----------
    rows : Iterable
        ``(alpha, gamma)`` pairs
    box : Interval, optional
        Bounds on x before the rows are applied

    Returns
    -------
    Interval
        The feasible interval of x; ``EMPTY`` when the rows contradict
        each other or the box
    """
    lo, hi = float(box[0]), float(box[1])
    if lo > hi:
        return EMPTY
    rows = list(rows)
    # constant rows are checked against the largest offset of the system
    slack = TOLERANCE * max([1.0] + [abs(gamma) for _, gamma in rows])
    for alpha, gamma in rows:
        if alpha > 0.0:
            bound = gamma / alpha
            if bound < hi:
                hi = bound
        elif alpha < 0.0:
            bound = gamma / alpha
            if bound > lo:
                lo = bound
        elif gamma < -slack:
            return EMPTY
    return _settle(lo, hi)


def extremize_y(halfplanes: Iterable[Sequence[float]],
                x_box: Sequence[float] = UNBOUNDED,
                y_box: Sequence[float] = UNBOUNDED) -> Interval:
    """Compute the smallest and largest y of the polygon cut out by the rows

    Parameters
    ----------
    halfplanes : Iterable
        ``Halfplane2`` rows (or plain ``(alpha, beta, gamma)`` triples)
    x_box : Interval, optional
        Box on x
    y_box : Interval, optional
        Box on y

    Returns
    -------
    Interval
        The projection of the feasible polygon onto the y axis. An infinite
        end marks y as unbounded in that direction. ``EMPTY`` when the
        polygon is empty.
    """
    if x_box[0] > x_box[1]:
        return EMPTY
    lower, upper, y_rows = [], [], []
    for alpha, beta, gamma in halfplanes:
        norm = math.hypot(alpha, beta)
        if norm == 0.0:
            # constant feasibility check
            if gamma < -TOLERANCE:
                return EMPTY
            continue
        alpha, beta, gamma = alpha / norm, beta / norm, gamma / norm
        if alpha > 0.0:
            upper.append((alpha, beta, gamma))
        elif alpha < 0.0:
            lower.append((alpha, beta, gamma))
        else:
            y_rows.append((beta, gamma))

    if math.isfinite(x_box[0]):
        lower.append((-1.0, 0.0, -float(x_box[0])))
    if math.isfinite(x_box[1]):
        upper.append((1.0, 0.0, float(x_box[1])))

    for a_lo, b_lo, g_lo in lower:
        for a_up, b_up, g_up in upper:
            beta = a_up * b_lo - a_lo * b_up
            gamma = a_up * g_lo - a_lo * g_up
            if abs(beta) < PARALLEL_TOLERANCE:
                # parallel pair, only a constant check relative to both offsets remains
                if gamma < -TOLERANCE * max(1.0, abs(a_up * g_lo), abs(a_lo * g_up)):
                    return EMPTY
                continue
            y_rows.append((beta, gamma))
    return clamp_1d(y_rows, y_box)


def extremize_x(halfplanes: Iterable[Sequence[float]],
                x_box: Sequence[float] = UNBOUNDED,
                y_box: Sequence[float] = UNBOUNDED) -> Interval:
    """Same as ``extremize_y`` for the x axis
    """
    swapped = [(beta, alpha, gamma) for alpha, beta, gamma in halfplanes]
    return extremize_y(swapped, y_box, x_box)
