"""Capacity objectives and the one-dimensional search over the control gain d.

All reported values are in bits.  The Shannon and eta-th-moment capacities
come from a coarse grid scan (log-densified near d = 0 and near -1/mean,
where the closed-form optimizers live) followed by golden-section refinement;
the zero-error capacity has an exact minimax closed form over the support
interval.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .distributions import ActuationDistribution

__all__ = [
    "CapacityQuery",
    "CapacityResult",
    "capacity_curve",
    "default_halfwidth",
    "eta_capacity",
    "eta_objective",
    "maximize_over_d",
    "second_moment_closed_form",
    "shannon_capacity",
    "shannon_objective",
    "zero_error_capacity",
]

INF = float("inf")
_LOG2 = math.log(2.0)
_TIE_TOL = 1e-12
# beyond this the plain power objective risks overflow; evaluate in log space
_LOG_SPACE_ETA = 8.0
_MAX_DOUBLINGS = 3


@dataclass(frozen=True)
class CapacityQuery:
    """Search parameters for the outer maximization over d."""

    sense: str = "shannon"  # "shannon" | "zero_error" | "eta"
    eta: float | None = None
    d_search_halfwidth: float | None = None  # None: derived from the law
    coarse_grid_points: int = 2001
    refine_tolerance: float = 1e-10

    def __post_init__(self):
        if self.sense not in ("shannon", "zero_error", "eta"):
            raise ValueError(f"unknown sense {self.sense!r}")
        if self.sense == "eta" and not (self.eta is not None and self.eta > 0):
            raise ValueError("eta sense requires eta > 0")
        if self.coarse_grid_points < 101:
            raise ValueError("coarse grid needs at least 101 points")
        if self.coarse_grid_points % 2 == 0:
            raise ValueError("coarse grid point count must be odd so d = 0 is evaluated")
        if self.d_search_halfwidth is not None and not self.d_search_halfwidth > 0:
            raise ValueError("d_search_halfwidth must be positive")


@dataclass(frozen=True)
class CapacityResult:
    value_bits: float
    optimal_d: float | None
    sense: str
    eta: float | None = None
    diagnostics: dict = field(default_factory=dict)


def shannon_objective(dist: ActuationDistribution, d: float) -> float:
    """E[-log2 |1 + B d|]; +inf when the law has an atom exactly at -1/d."""
    if d == 0.0:
        return 0.0
    hit = -1.0 / d
    for loc, _ in dist.support().atoms:
        if loc == hit:
            return INF

    def integrand(b):
        t = abs(1.0 + b * d)
        if t == 0.0:
            # float cancellation can zero 1 + b d a hair away from the
            # declared singular point; the true magnitude there is below
            # one ulp of the products involved
            t = 2.3e-16 * max(1.0, abs(b * d))
        return -math.log(t)

    return dist.expect(integrand, (hit,)) / _LOG2


def eta_objective(dist: ActuationDistribution, d: float, eta: float) -> float:
    """-(1/eta) log2 E[|1 + B d|^eta]."""
    if eta <= 0:
        raise ValueError("eta must be positive")
    if d == 0.0:
        return 0.0
    hit = -1.0 / d
    if eta < _LOG_SPACE_ETA:
        val = dist.expect(lambda b: abs(1.0 + b * d) ** eta, (hit,))
        if val == 0.0:
            return INF
        return -math.log2(val) / eta
    # Large eta: normalize by the sup of |1 + b d| so the integrand stays in
    # [0, 1]; the log of the normalizer is restored exactly afterwards.
    log_m = _log2_sup_abs(dist, d)
    if log_m == -INF:
        return INF
    scale = eta * log_m * _LOG2

    def normalized(b):
        t = abs(1.0 + b * d)
        if t == 0.0:
            return 0.0
        return math.exp(eta * math.log(t) - scale)

    val = dist.expect(normalized, (hit,))
    if val <= 0.0:
        return INF
    return -(log_m + math.log2(val) / eta)


def _log2_sup_abs(dist, d):
    """log2 sup |1 + b d| over the (tail-truncated) support and atoms."""
    info = dist.support()
    cands = [loc for loc, _ in info.atoms]
    lo, hi = info.lower, info.upper
    for piece_lo, piece_hi, _ in dist._density_pieces():
        cands.extend((piece_lo, piece_hi))
    if not cands:
        cands.extend(c for c in (lo, hi) if math.isfinite(c))
    m = max(abs(1.0 + b * d) for b in cands)
    return math.log2(m) if m > 0.0 else -INF


def default_halfwidth(dist: ActuationDistribution) -> float:
    """Search half-width: generous multiple of the inverse scales of the law."""
    mean, var, _ = dist.moments()
    info = dist.support()
    scale = max(
        [abs(b) for b in (info.lower, info.upper) if math.isfinite(b)]
        + [math.sqrt(var)]
    )
    inv_mean = 1.0 / abs(mean) if mean != 0.0 else INF
    inv_scale = 1.0 / scale if scale > 0.0 else INF
    return min(1e6, 100.0 * max(min(inv_mean, 1e6), min(inv_scale, 1e6), 1.0))


def _build_grid(halfwidth, n_points, centers):
    h = halfwidth
    per_center = max(8, n_points // 8)
    backbone = max(101, n_points - 2 * per_center * len(centers))
    pts = [np.linspace(-h, h, backbone), np.array([0.0])]
    for c in centers:
        tiny = max(abs(c), 1.0) * 1e-12
        offs = np.geomspace(tiny, h, per_center)
        pts.append(np.clip(c + offs, -h, h))
        pts.append(np.clip(c - offs, -h, h))
        if -h <= c <= h:
            pts.append(np.array([c]))  # exact cusp optima must be evaluable
    grid = np.unique(np.concatenate(pts))
    return grid[(grid >= -h) & (grid <= h)]


def maximize_over_d(objective, query: CapacityQuery, centers=(0.0,)):
    """Coarse grid scan then golden-section refinement of the best bracket.

    Returns ``(d_star, value, diagnostics)``.  An infinite objective value on
    the grid wins immediately.  ``diagnostics['bound_hit']`` flags an argmax
    on the search boundary, telling the caller to enlarge the half-width.
    """
    if query.d_search_halfwidth is None:
        raise ValueError("query must carry a concrete d_search_halfwidth")
    grid = _build_grid(
        query.d_search_halfwidth, query.coarse_grid_points, centers
    )
    vals = np.array([objective(d) for d in grid])
    evals = len(grid)

    if np.isinf(vals).any():
        winners = grid[np.isinf(vals) & (vals > 0)]
        d_star = float(winners[np.argmin(np.abs(winners))])
        return d_star, INF, {
            "grid_evaluations": evals,
            "refine_iterations": 0,
            "objective_at_d": INF,
            "flat": False,
            "bound_hit": False,
        }

    best = float(np.max(vals))
    tied = np.flatnonzero(vals >= best - _TIE_TOL)
    i = int(tied[np.argmin(np.abs(grid[tied]))])
    flat = len(tied) > 1

    lo = float(grid[max(i - 1, 0)])
    hi = float(grid[min(i + 1, len(grid) - 1)])
    d_star, val, iters = _golden_max(objective, lo, hi, query.refine_tolerance)
    evals += 2 * iters
    if vals[i] >= val:  # exact ties keep the canonical grid point
        d_star, val = float(grid[i]), float(vals[i])
    d_star, val = float(d_star), float(val)
    return d_star, val, {
        "grid_evaluations": evals,
        "refine_iterations": iters,
        "objective_at_d": val,
        "flat": flat,
        "bound_hit": i in (0, len(grid) - 1),
    }


_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def _golden_max(f, lo, hi, tol):
    x1 = hi - _GOLDEN * (hi - lo)
    x2 = lo + _GOLDEN * (hi - lo)
    f1, f2 = f(x1), f(x2)
    iters = 0
    while hi - lo > tol and iters < 200:
        if f1 >= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - _GOLDEN * (hi - lo)
            f1 = f(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + _GOLDEN * (hi - lo)
            f2 = f(x2)
        iters += 1
    if f1 >= f2:
        return x1, f1, iters
    return x2, f2, iters


def _grid_centers(dist):
    """Grid densification targets: the closed-form optimizers live at 0,
    -1/mean, and the exact atom-cancelling gains -1/location."""
    centers = [0.0]
    mean = dist.moments()[0]
    if mean != 0.0:
        centers.append(-1.0 / mean)
    for loc, _ in dist.support().atoms:
        if loc != 0.0:
            centers.append(-1.0 / loc)
    return tuple(centers)


def _search(objective, dist, query, sense, eta=None):
    """Run the outer maximization, doubling the half-width on a boundary hit."""
    halfwidth = query.d_search_halfwidth or default_halfwidth(dist)
    centers = _grid_centers(dist)
    for attempt in range(_MAX_DOUBLINGS + 1):
        q = CapacityQuery(
            sense=sense,
            eta=eta,
            d_search_halfwidth=halfwidth,
            coarse_grid_points=query.coarse_grid_points,
            refine_tolerance=query.refine_tolerance,
        )
        d_star, val, diag = maximize_over_d(objective, q, centers)
        if not diag["bound_hit"] or attempt == _MAX_DOUBLINGS:
            diag["halfwidth"] = halfwidth
            diag["doublings"] = attempt
            return d_star, val, diag
        halfwidth *= 2.0


_DEFAULT_QUERY = CapacityQuery()


def shannon_capacity(dist: ActuationDistribution,
                     query: CapacityQuery = _DEFAULT_QUERY) -> CapacityResult:
    """Capacity under the logarithmic (expected-log) stability sense.

    Infinite whenever the gain law has an atom away from zero: pinning the
    control to cancel that atom zeroes the state with positive probability
    each step, so the expected log drifts to -infinity.
    """
    if dist.support().has_nonzero_atom:
        return CapacityResult(INF, None, "shannon",
                              diagnostics={"atom_rule": True})
    d_star, val, diag = _search(
        lambda d: shannon_objective(dist, d), dist, query, "shannon"
    )
    if math.isinf(val):
        return CapacityResult(INF, None, "shannon", diagnostics=diag)
    return CapacityResult(max(val, 0.0), d_star, "shannon", diagnostics=diag)


def eta_capacity(dist: ActuationDistribution, eta: float,
                 query: CapacityQuery = _DEFAULT_QUERY) -> CapacityResult:
    if not eta > 0:
        raise ValueError("eta must be positive")
    d_star, val, diag = _search(
        lambda d: eta_objective(dist, d, eta), dist, query, "eta", eta
    )
    if math.isinf(val):
        return CapacityResult(INF, None, "eta", eta, diagnostics=diag)
    return CapacityResult(max(val, 0.0), d_star, "eta", eta, diagnostics=diag)


def zero_error_capacity(dist: ActuationDistribution) -> CapacityResult:
    """Worst-case capacity: exact minimax of |1 + b d| over the support.

    Zero for unbounded support (no control is safe against arbitrarily large
    gains) and for supports containing 0 (doing nothing is already optimal);
    otherwise log2 |b1+b2|/|b2-b1| achieved by d = -2/(b1+b2).
    """
    info = dist.support()
    diag = {"closed_form": True}
    if not info.is_bounded:
        return CapacityResult(0.0, None, "zero_error", diagnostics=diag)
    b1, b2 = info.lower, info.upper
    if info.contains_zero:
        return CapacityResult(0.0, 0.0, "zero_error", diagnostics=diag)
    if b1 == b2:
        return CapacityResult(INF, -1.0 / b1, "zero_error", diagnostics=diag)
    value = math.log2(abs(b1 + b2) / abs(b2 - b1))
    return CapacityResult(value, -2.0 / (b1 + b2), "zero_error", diagnostics=diag)


def second_moment_closed_form(dist: ActuationDistribution) -> CapacityResult:
    """Exact second-moment capacity (1/2) log2(1 + mean^2/var), no quadrature."""
    mean, var, _ = dist.moments()
    if var <= 0.0:
        return CapacityResult(INF, None, "eta", 2.0,
                              diagnostics={"degenerate": True})
    value = 0.5 * math.log2(1.0 + mean * mean / var)
    d_star = -mean / (mean * mean + var)
    return CapacityResult(value, d_star, "eta", 2.0,
                          diagnostics={"closed_form": True})


def capacity_curve(dist: ActuationDistribution, eta_grid,
                   query: CapacityQuery = _DEFAULT_QUERY):
    """(eta, capacity) along an increasing eta grid; checked nonincreasing."""
    etas = [float(e) for e in eta_grid]
    if any(e <= 0 for e in etas) or any(a >= b for a, b in zip(etas, etas[1:])):
        raise ValueError("eta grid must be strictly increasing and positive")
    points = [(e, eta_capacity(dist, e, query).value_bits) for e in etas]
    for (_, c0), (e1, c1) in zip(points, points[1:]):
        if c1 > c0 + 1e-7:
            raise RuntimeError(
                f"capacity not nonincreasing at eta={e1}: {c0} -> {c1}"
            )
    return points
