"""Scalar piecewise-linear and piecewise-quadratic functions

These are the cost-to-go functions and conditionals of the quadratic
objective solver. A function is stored as sorted breakpoints plus one set of
coefficients per segment; outside ``[breakpoints[0], breakpoints[-1]]`` the
function is +inf (for costs) or undefined (for conditionals).
"""
import math
import logging
from bisect import bisect_right
from typing import List, NamedTuple, Sequence, Tuple

from . import lp2d
from .errors import EmptyDomain, Infeasible, NonConvex, Unbounded
from .lp2d import Interval

logger = logging.getLogger(__name__)

MERGE_TOLERANCE = 1e-10
MIN_SEGMENT_WIDTH = 1e-12
CONVEXITY_TOLERANCE = 1e-12


def _inner_point(lo: float, hi: float) -> float:
    """A finite point inside ``[lo, hi]``
    """
    if math.isfinite(lo) and math.isfinite(hi):
        return 0.5 * (lo + hi)
    if math.isfinite(hi):
        return hi - 1.0
    if math.isfinite(lo):
        return lo + 1.0
    return 0.0


def _merged_breakpoints(first: Sequence[float], second: Sequence[float], domain: Interval) -> List[float]:
    inner = {z for z in first if domain.lo < z < domain.hi}
    inner.update(z for z in second if domain.lo < z < domain.hi)
    return [domain.lo] + sorted(inner) + [domain.hi]


def _close(u: float, v: float, tol: float) -> bool:
    if u == v:
        return True
    return abs(u - v) <= tol * max(1.0, abs(u), abs(v))


class PiecewiseLinear:

    """Continuous piecewise-linear function of one variable

    Attributes
    ----------
    breakpoints : tuple
        ``t_0 <= t_1 <= ... <= t_M``; a single degenerate segment
        ``t_0 == t_1`` represents a function on one point
    slopes : tuple
        Slope of every segment
    intercepts : tuple
        Intercept of every segment (value at z = 0 of its line)
    """

    __slots__ = ("breakpoints", "slopes", "intercepts")

    def __init__(self, breakpoints, slopes, intercepts):
        self.breakpoints = tuple(float(t) for t in breakpoints)
        self.slopes = tuple(float(s) for s in slopes)
        self.intercepts = tuple(float(i) for i in intercepts)
        if len(self.breakpoints) != len(self.slopes) + 1 or len(self.slopes) != len(self.intercepts):
            raise ValueError("A piecewise function needs one more breakpoint than segments")
        if not self.slopes:
            raise EmptyDomain("A piecewise function needs at least one segment")

    @classmethod
    def line(cls, slope: float, intercept: float, domain: Sequence[float]):
        return cls((domain[0], domain[1]), (slope,), (intercept,))

    @classmethod
    def constant(cls, value: float, domain: Sequence[float]):
        return cls.line(0.0, value, domain)

    @property
    def domain(self):
        return Interval(self.breakpoints[0], self.breakpoints[-1])

    @property
    def num_segments(self):
        return len(self.slopes)

    def segment_index(self, z: float) -> int:
        idx = bisect_right(self.breakpoints, z) - 1
        return min(max(idx, 0), len(self.slopes) - 1)

    def segment_value(self, idx: int, z: float) -> float:
        slope = self.slopes[idx]
        return self.intercepts[idx] if slope == 0.0 else slope * z + self.intercepts[idx]

    def __call__(self, z: float) -> float:
        return self.segment_value(self.segment_index(z), z)

    def maximum(self, other):
        """Pointwise maximum; where both agree ``self`` is kept
        """
        return self._combine(other, take_max=True)

    def minimum(self, other):
        """Pointwise minimum; where both agree ``self`` is kept
        """
        return self._combine(other, take_max=False)

    def _combine(self, other, take_max: bool):
        domain = self.domain.intersect(other.domain)
        if domain.is_empty:
            raise EmptyDomain("Piecewise functions have disjoint domains")
        cuts = _merged_breakpoints(self.breakpoints, other.breakpoints, domain)
        pieces = []
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            inner = _inner_point(lo, hi)
            i, j = self.segment_index(inner), other.segment_index(inner)
            mine = (self.slopes[i], self.intercepts[i])
            theirs = (other.slopes[j], other.intercepts[j])
            sub_cuts = [lo, hi]
            if all(map(math.isfinite, mine + theirs)) and mine[0] != theirs[0]:
                crossing = (theirs[1] - mine[1]) / (mine[0] - theirs[0])
                if lo < crossing < hi:
                    sub_cuts = [lo, crossing, hi]
            for sub_lo, sub_hi in zip(sub_cuts[:-1], sub_cuts[1:]):
                p = _inner_point(sub_lo, sub_hi)
                mine_value = self.segment_value(i, p)
                theirs_value = other.segment_value(j, p)
                keep_mine = mine_value >= theirs_value if take_max else mine_value <= theirs_value
                pieces.append((sub_lo, sub_hi) + (mine if keep_mine else theirs))
        return PiecewiseLinear._from_pieces(pieces)

    @staticmethod
    def _from_pieces(pieces):
        breakpoints, slopes, intercepts = [pieces[0][0]], [], []
        for lo, hi, slope, intercept in pieces:
            if slopes and slopes[-1] == slope and intercepts[-1] == intercept:
                breakpoints[-1] = hi
                continue
            slopes.append(slope)
            intercepts.append(intercept)
            breakpoints.append(hi)
        return PiecewiseLinear(breakpoints, slopes, intercepts)

    def pruned(self, merge_tol: float = MERGE_TOLERANCE, min_width: float = MIN_SEGMENT_WIDTH):
        """Drop near-empty segments and merge neighbours with equal lines
        """
        pieces = _prune_pieces(
            list(zip(self.breakpoints[:-1], self.breakpoints[1:], zip(self.slopes, self.intercepts))),
            merge_tol, min_width)
        return PiecewiseLinear([pieces[0][0]] + [p[1] for p in pieces],
                               [p[2][0] for p in pieces], [p[2][1] for p in pieces])

    def __repr__(self):
        return "PiecewiseLinear(segments={}, domain=[{}, {}])".format(
            self.num_segments, self.breakpoints[0], self.breakpoints[-1])


class PiecewiseQuadratic:

    """Piecewise-quadratic function ``a z^2 + b z + c`` per segment

    Attributes
    ----------
    breakpoints : tuple
        Segment boundaries; the outer two delimit the domain
    a, b, c : tuple
        Per-segment coefficients
    """

    __slots__ = ("breakpoints", "a", "b", "c")

    def __init__(self, breakpoints, a, b, c):
        self.breakpoints = tuple(float(t) for t in breakpoints)
        self.a = tuple(float(v) for v in a)
        self.b = tuple(float(v) for v in b)
        self.c = tuple(float(v) for v in c)
        if not (len(self.breakpoints) == len(self.a) + 1 and len(self.a) == len(self.b) == len(self.c)):
            raise ValueError("A piecewise function needs one more breakpoint than segments")
        if not self.a:
            raise EmptyDomain("A piecewise function needs at least one segment")

    @classmethod
    def quadratic(cls, a: float, b: float, c: float, domain: Sequence[float] = lp2d.UNBOUNDED):
        return cls((domain[0], domain[1]), (a,), (b,), (c,))

    @classmethod
    def zero(cls, domain: Sequence[float]):
        return cls.quadratic(0.0, 0.0, 0.0, domain)

    @property
    def domain(self):
        return Interval(self.breakpoints[0], self.breakpoints[-1])

    @property
    def num_segments(self):
        return len(self.a)

    def segment_index(self, z: float) -> int:
        idx = bisect_right(self.breakpoints, z) - 1
        return min(max(idx, 0), len(self.a) - 1)

    def __call__(self, z: float) -> float:
        if not self.domain.contains(z):
            return math.inf
        idx = self.segment_index(z)
        return (self.a[idx] * z + self.b[idx]) * z + self.c[idx]

    def restrict(self, interval: Sequence[float]):
        """The same function on a narrower domain
        """
        domain = self.domain.intersect(interval)
        if domain.is_empty:
            raise EmptyDomain("Restriction leaves an empty domain")
        pieces = []
        for idx in range(self.num_segments):
            lo = max(self.breakpoints[idx], domain.lo)
            hi = min(self.breakpoints[idx + 1], domain.hi)
            if lo < hi or (lo == hi and domain.lo == domain.hi and not pieces):
                pieces.append((lo, hi, (self.a[idx], self.b[idx], self.c[idx])))
        if not pieces:
            idx = self.segment_index(domain.lo)
            pieces.append((domain.lo, domain.hi, (self.a[idx], self.b[idx], self.c[idx])))
        return PiecewiseQuadratic._from_pieces(pieces)

    def derivative_gaps(self) -> List[float]:
        """Right minus left derivative at every interior breakpoint
        """
        gaps = []
        for idx, z in enumerate(self.breakpoints[1:-1]):
            left = 2.0 * self.a[idx] * z + self.b[idx]
            right = 2.0 * self.a[idx + 1] * z + self.b[idx + 1]
            gaps.append(right - left)
        return gaps

    def is_convex(self, tol: float = 1e-9) -> bool:
        if any(a < -CONVEXITY_TOLERANCE for a in self.a):
            return False
        for z, gap in zip(self.breakpoints[1:-1], self.derivative_gaps()):
            if gap < -tol * max(1.0, abs(z)):
                return False
        return True

    @staticmethod
    def _from_pieces(pieces):
        return PiecewiseQuadratic([pieces[0][0]] + [p[1] for p in pieces],
                                  [p[2][0] for p in pieces],
                                  [p[2][1] for p in pieces],
                                  [p[2][2] for p in pieces])

    def __repr__(self):
        return "PiecewiseQuadratic(segments={}, domain=[{}, {}])".format(
            self.num_segments, self.breakpoints[0], self.breakpoints[-1])


class BivariateQuadratic(NamedTuple):

    """``0.5 p x^2 + 0.5 r y^2 + n x y + g x + h y + const``
    """

    p: float = 0.0
    r: float = 0.0
    n: float = 0.0
    g: float = 0.0
    h: float = 0.0
    const: float = 0.0

    def __call__(self, x: float, y: float) -> float:
        return (0.5 * self.p * x * x + 0.5 * self.r * y * y + self.n * x * y
                + self.g * x + self.h * y + self.const)

    def weights(self) -> Tuple[float, float, float]:
        """The ``(x-weight, y-weight, cross-weight)`` triple of the form
        ``x Qx x + y Ry y + x Nxy y``
        """
        return 0.5 * self.p, 0.5 * self.r, self.n

    def is_psd(self, tol: float = 1e-12) -> bool:
        scale = max(1.0, abs(self.p), abs(self.r), abs(self.n))
        return (self.p >= -tol * scale and self.r >= -tol * scale
                and self.p * self.r - self.n * self.n >= -tol * scale * scale)


def add(f: PiecewiseQuadratic, g: PiecewiseQuadratic) -> PiecewiseQuadratic:
    """Pointwise sum on the intersected domain

    Raises
    ------
    EmptyDomain
        Raised when the two domains do not intersect
    """
    domain = f.domain.intersect(g.domain)
    if domain.is_empty:
        raise EmptyDomain("Cannot add piecewise quadratics with disjoint domains")
    cuts = _merged_breakpoints(f.breakpoints, g.breakpoints, domain)
    pieces = []
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        inner = _inner_point(lo, hi)
        i, j = f.segment_index(inner), g.segment_index(inner)
        pieces.append((lo, hi, (f.a[i] + g.a[j], f.b[i] + g.b[j], f.c[i] + g.c[j])))
    return PiecewiseQuadratic._from_pieces(pieces)


def _prune_pieces(pieces, merge_tol: float, min_width: float):
    """Shared pruning of ``(lo, hi, coefficients)`` pieces
    """
    if len(pieces) == 1:
        return pieces
    lo, hi = pieces[0][0], pieces[-1][1]
    width = hi - lo if math.isfinite(hi - lo) else 0.0
    threshold = min_width * max(1.0, width)

    # Fold near-empty segments into their wider neighbour
    kept = list(pieces)
    idx = 0
    while idx < len(kept) and len(kept) > 1:
        seg_lo, seg_hi, coefs = kept[idx]
        if seg_hi - seg_lo >= threshold:
            idx += 1
            continue
        if idx == 0:
            nxt = kept[1]
            kept[1] = (seg_lo, nxt[1], nxt[2])
        elif idx == len(kept) - 1:
            prev = kept[idx - 1]
            kept[idx - 1] = (prev[0], seg_hi, prev[2])
        else:
            prev, nxt = kept[idx - 1], kept[idx + 1]
            if prev[1] - prev[0] >= nxt[1] - nxt[0]:
                kept[idx - 1] = (prev[0], seg_hi, prev[2])
            else:
                kept[idx + 1] = (seg_lo, nxt[1], nxt[2])
        del kept[idx]

    merged = [kept[0]]
    for seg_lo, seg_hi, coefs in kept[1:]:
        first_lo, _, first_coefs = merged[-1]
        if all(_close(u, v, merge_tol) for u, v in zip(first_coefs, coefs)):
            merged[-1] = (first_lo, seg_hi, first_coefs)
        else:
            merged.append((seg_lo, seg_hi, coefs))
    return merged


def prune(f: PiecewiseQuadratic,
          merge_tol: float = MERGE_TOLERANCE,
          min_width: float = MIN_SEGMENT_WIDTH) -> PiecewiseQuadratic:
    """Merge redundant segments

    Segments narrower than ``min_width`` (relative to the domain width) are
    folded into a neighbour; adjacent segments whose coefficients agree
    within ``merge_tol`` are merged, keeping the leftmost coefficients.
    """
    pieces = [(f.breakpoints[i], f.breakpoints[i + 1], (f.a[i], f.b[i], f.c[i]))
              for i in range(f.num_segments)]
    pruned = _prune_pieces(pieces, merge_tol, min_width)
    if len(pruned) < len(pieces):
        logger.debug("Pruned %d of %d segments", len(pieces) - len(pruned), len(pieces))
    return PiecewiseQuadratic._from_pieces(pruned)


def _segment_argmin(a: float, b: float, c: float, lo: float, hi: float) -> Tuple[float, float]:
    """Leftmost minimizer of ``a z^2 + b z + c`` on ``[lo, hi]``; may be infinite
    """
    if a > CONVEXITY_TOLERANCE:
        z = min(max(-b / (2.0 * a), lo), hi)
    elif b > 0.0:
        z = lo
    elif b < 0.0:
        z = hi
    else:
        z = lo if math.isfinite(lo) else (hi if math.isfinite(hi) else 0.0)
    if not math.isfinite(z):
        return z, -math.inf
    return z, (a * z + b) * z + c


def _argmin(f: PiecewiseQuadratic) -> Tuple[float, float]:
    best_z, best_value = math.nan, math.inf
    for idx in range(f.num_segments):
        z, value = _segment_argmin(f.a[idx], f.b[idx], f.c[idx], f.breakpoints[idx], f.breakpoints[idx + 1])
        if value == -math.inf:
            return z, value
        if value < best_value - 1e-12 * max(1.0, abs(best_value)) or math.isnan(best_z):
            best_z, best_value = z, value
    return best_z, best_value


def minimize(f: PiecewiseQuadratic) -> Tuple[float, float]:
    """Global minimizer of a convex piecewise quadratic

    Returns
    -------
    tuple
        ``(z*, f(z*))``; ties are broken toward the smallest z

    Raises
    ------
    EmptyDomain
        Raised when the domain is empty
    Unbounded
        Raised when the function decreases without bound
    """
    if f.domain.is_empty:
        raise EmptyDomain("Cannot minimize over an empty domain")
    z, value = _argmin(f)
    if not math.isfinite(value):
        raise Unbounded("Piecewise quadratic is unbounded below")
    return z, value


def _bound_envelope(lines, base: float, domain: Interval, take_max: bool) -> PiecewiseLinear:
    """Upper (``take_max``) or lower envelope of lines and a constant over a domain
    """
    envelope = PiecewiseLinear.constant(base, domain)
    for slope, intercept in lines:
        line = PiecewiseLinear.line(slope, intercept, domain)
        envelope = envelope.maximum(line) if take_max else envelope.minimum(line)
    return envelope


def _stationary_curve(q: BivariateQuadratic, prior: PiecewiseQuadratic, domain: Interval) -> PiecewiseLinear:
    """Unconstrained minimizer over prior's domain as a function of y

    The optimality condition ``0 in P_j x + G_j + n y + subgradient jumps`` is
    inverted segment by segment: inside segment j the minimizer moves along
    a line in y, at a kink it stays on the breakpoint.
    """
    n = q.n
    knots = prior.breakpoints
    pieces = []
    # (t_lo, t_hi, x as slope/intercept in t), t := -n y
    for j in range(prior.num_segments):
        curvature = q.p + 2.0 * prior.a[j]
        offset = q.g + prior.b[j]
        t_lo = curvature * knots[j] + offset if math.isfinite(knots[j]) else -math.inf
        t_hi = curvature * knots[j + 1] + offset if math.isfinite(knots[j + 1]) else math.inf
        if pieces and t_lo > pieces[-1][1]:
            # kink: the minimizer sits on the shared breakpoint
            pieces.append((pieces[-1][1], t_lo, 0.0, knots[j]))
        elif pieces:
            t_lo = max(t_lo, pieces[-1][1])
        if t_hi > t_lo:
            pieces.append((t_lo, t_hi, 1.0 / curvature, -offset / curvature))
    if not pieces:
        # the whole domain is one point
        pieces.append((-math.inf, math.inf, 0.0, knots[0]))
    if pieces[0][0] > -math.inf:
        pieces.insert(0, (-math.inf, pieces[0][0], 0.0, knots[0]))
    if pieces[-1][1] < math.inf:
        pieces.append((pieces[-1][1], math.inf, 0.0, knots[-1]))

    # x = s t + i with t = -n y  ->  x = (-n s) y + i
    in_y = []
    for t_lo, t_hi, slope, intercept in pieces:
        y_a, y_b = -t_lo / n, -t_hi / n
        y_lo, y_hi = min(y_a, y_b), max(y_a, y_b)
        lo, hi = max(y_lo, domain.lo), min(y_hi, domain.hi)
        if lo < hi or (domain.lo == domain.hi and y_lo <= lo <= y_hi):
            in_y.append((lo, hi, -n * slope, intercept))
    in_y.sort(key=lambda piece: piece[0])
    if not in_y:
        # roundoff at a pinned domain
        p = domain.lo
        idx = min(range(len(pieces)), key=lambda m: abs(-pieces[m][0] / n - p))
        _, _, slope, intercept = pieces[idx]
        in_y.append((domain.lo, domain.hi, -n * slope, intercept))
    breakpoints = [in_y[0][0]] + [piece[1] for piece in in_y]
    breakpoints[-1] = domain.hi
    return PiecewiseLinear(breakpoints, [p[2] for p in in_y], [p[3] for p in in_y])


def eliminate_min(q: BivariateQuadratic,
                  x_constraints: Sequence[Sequence[float]],
                  x_box: Sequence[float],
                  prior: PiecewiseQuadratic,
                  y_box: Sequence[float] = lp2d.UNBOUNDED,
                  y_domain: Interval = None,
                  merge_tol: float = MERGE_TOLERANCE,
                  min_width: float = MIN_SEGMENT_WIDTH) -> Tuple[PiecewiseLinear, PiecewiseQuadratic]:
    """Minimize ``q(x, y) + prior(x)`` over x as a function of y

    Parameters
    ----------
    q : BivariateQuadratic
        Coupling objective in (x, y)
    x_constraints : Sequence
        ``Halfplane2`` rows in (x, y)
    x_box : Interval
        Box on x
    prior : PiecewiseQuadratic
        Cost already accumulated on x; its domain also bounds x
    y_box : Interval, optional
        Box on y
    y_domain : Interval, optional
        Precomputed projection of the feasible set onto y

    Returns
    -------
    tuple
        ``(conditional, value)``: the parametric minimizer x*(y) and the
        convex value function, both defined exactly on the set of y admitting
        a feasible x

    Raises
    ------
    Infeasible
        Raised when no y admits a feasible x
    NonConvex
        Raised when the objective is not strictly convex in x while x is
        still coupled to y
    """
    x_domain = Interval(*x_box).intersect(prior.domain)
    if x_domain.is_empty:
        raise Infeasible("No feasible x inside the prior's domain")
    if y_domain is None:
        y_domain = lp2d.extremize_y(x_constraints, x_domain, y_box)
    if y_domain.is_empty:
        raise Infeasible("No y admits a feasible x")

    lower, upper = [], []
    for alpha, beta, gamma in x_constraints:
        if alpha > 0.0:
            upper.append((-beta / alpha, gamma / alpha))
        elif alpha < 0.0:
            lower.append((-beta / alpha, gamma / alpha))
    floor = _bound_envelope(lower, x_domain.lo, y_domain, take_max=True)
    ceiling = _bound_envelope(upper, x_domain.hi, y_domain, take_max=False)

    scale = max(1.0, abs(q.p), abs(q.n))
    curvatures = [q.p + 2.0 * a for a in prior.a]
    if x_domain.lo == x_domain.hi:
        # x is pinned, nothing to optimize
        stationary = PiecewiseLinear.constant(x_domain.lo, y_domain)
    elif min(curvatures) < -CONVEXITY_TOLERANCE * scale:
        raise NonConvex("Objective is not convex in the eliminated variable")
    elif abs(q.n) <= CONVEXITY_TOLERANCE * scale:
        marginal = add(prior, PiecewiseQuadratic.quadratic(0.5 * q.p, q.g, 0.0))
        x_star, _ = _argmin(marginal)
        stationary = PiecewiseLinear.constant(x_star, y_domain)
    else:
        if min(curvatures) <= CONVEXITY_TOLERANCE * scale:
            raise NonConvex("Objective is flat in the eliminated variable but coupled to the next one")
        stationary = _stationary_curve(q, prior, y_domain)

    # clamped branch wins ties
    conditional = ceiling.minimum(floor.maximum(stationary))
    if not all(map(math.isfinite, conditional.intercepts)):
        raise Unbounded("Minimizer escapes to infinity")
    conditional = conditional.pruned(merge_tol, min_width)
    value = _substitute(q, prior, conditional)
    return conditional, prune(value, merge_tol, min_width)


def _substitute(q: BivariateQuadratic, prior: PiecewiseQuadratic, conditional: PiecewiseLinear) -> PiecewiseQuadratic:
    """Compose ``q(x*(y), y) + prior(x*(y))`` into a piecewise quadratic in y
    """
    inner_knots = [z for z in prior.breakpoints[1:-1]]
    pieces = []
    for idx in range(conditional.num_segments):
        lo, hi = conditional.breakpoints[idx], conditional.breakpoints[idx + 1]
        s, i = conditional.slopes[idx], conditional.intercepts[idx]
        cuts = [lo, hi]
        if s != 0.0:
            crossings = sorted((z - i) / s for z in inner_knots)
            cuts = [lo] + [y for y in crossings if lo < y < hi] + [hi]
        for sub_lo, sub_hi in zip(cuts[:-1], cuts[1:]):
            x_inner = s * _inner_point(sub_lo, sub_hi) + i
            j = prior.segment_index(x_inner)
            a, b, c = prior.a[j], prior.b[j], prior.c[j]
            quad = 0.5 * q.p * s * s + 0.5 * q.r + q.n * s + a * s * s
            lin = q.p * s * i + q.n * i + q.g * s + q.h + 2.0 * a * s * i + b * s
            const = 0.5 * q.p * i * i + q.g * i + q.const + a * i * i + b * i + c
            pieces.append((sub_lo, sub_hi, (quad, lin, const)))
    return PiecewiseQuadratic._from_pieces(pieces)
