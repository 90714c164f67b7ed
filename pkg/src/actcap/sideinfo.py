"""Capacities when the controller observes which cell of a partition the
gain fell into, and the per-bit value of that side information.

The control gain d may depend on the revealed cell.  For the expected-log
sense the conditional capacities combine linearly; for the eta sense the
expectation of the per-cell minima sits inside a single log, so the
aggregate is NOT the probability-weighted average of per-cell capacities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .capacity import CapacityQuery, CapacityResult, eta_capacity, shannon_capacity
from .distributions import ActuationDistribution, EmptyCell

__all__ = [
    "SideCell",
    "SideInfoCapacityResult",
    "SideInformationModel",
    "UnboundedSupport",
    "eta_capacity_with_si",
    "model_from_boundaries",
    "shannon_capacity_with_si",
    "si_value_curve",
    "uniform_bit_partition",
]

INF = float("inf")

_PROB_TOL = 1e-10
_CONSISTENCY_TOL = 1e-7


class UnboundedSupport(ValueError):
    """Equal-width partitioning is undefined on an unbounded support."""


@dataclass(frozen=True)
class SideCell:
    label: str
    probability: float
    conditional: ActuationDistribution


@dataclass(frozen=True)
class SideInformationModel:
    """Finite partition of the gain law: cell probabilities + conditionals."""

    cells: tuple[SideCell, ...]

    def __post_init__(self):
        if not self.cells:
            raise ValueError("side-information model needs at least one cell")
        if any(c.probability <= 0.0 for c in self.cells):
            raise ValueError("every cell must have positive probability")
        total = sum(c.probability for c in self.cells)
        if abs(total - 1.0) > _PROB_TOL:
            raise ValueError(f"cell probabilities sum to {total}, expected 1")

    def validate_against(self, base: ActuationDistribution, tol=_CONSISTENCY_TOL):
        """Check the mixture of conditionals reproduces the base mean/variance."""
        mean = sum(c.probability * c.conditional.moments()[0] for c in self.cells)
        second = sum(c.probability * c.conditional.moments()[2] for c in self.cells)
        bmean, bvar, _ = base.moments()
        if abs(mean - bmean) > tol or abs(second - mean * mean - bvar) > tol:
            raise ValueError(
                "partition inconsistent with the base law: "
                f"mean {mean} vs {bmean}, var {second - mean * mean} vs {bvar}"
            )


@dataclass(frozen=True)
class SideInfoCapacityResult:
    value_bits: float
    sense: str
    eta: float | None
    per_cell: tuple[CapacityResult, ...]


def uniform_bit_partition(dist: ActuationDistribution,
                          k_bits: int) -> SideInformationModel:
    """Split the support into 2^k equal-width cells (empty cells dropped)."""
    if not 0 <= k_bits <= 20:
        raise ValueError("k_bits must be in [0, 20]")
    info = dist.support()
    if not info.is_bounded:
        raise UnboundedSupport("equal-width cells need bounded support")
    n = 1 << k_bits
    width = (info.upper - info.lower) / n
    edges = [info.lower + i * width for i in range(n)] + [info.upper]
    return model_from_boundaries(dist, edges)


def model_from_boundaries(dist: ActuationDistribution, edges) -> SideInformationModel:
    """Cells [e0,e1), ..., [e_{n-1}, e_n] from an increasing boundary list."""
    edges = [float(e) for e in edges]
    if len(edges) < 2 or any(a >= b for a, b in zip(edges, edges[1:])):
        raise ValueError("cell boundaries must be strictly increasing")
    cells = []
    last = len(edges) - 2
    for i, (lo, hi) in enumerate(zip(edges[:-1], edges[1:])):
        try:
            prob, cond = dist.restrict(lo, hi, include_upper=(i == last))
        except EmptyCell:
            continue
        cells.append(SideCell(f"[{lo:g},{hi:g})", prob, cond))
    if not cells:
        raise EmptyCell("no cell carries positive probability")
    model = SideInformationModel(tuple(cells))
    model.validate_against(dist)
    return model


_DEFAULT_QUERY = CapacityQuery()


def shannon_capacity_with_si(model: SideInformationModel,
                             query: CapacityQuery = _DEFAULT_QUERY):
    """Probability-weighted expected-log capacity with cell-dependent d."""
    per_cell = tuple(
        shannon_capacity(c.conditional, query) for c in model.cells
    )
    if any(math.isinf(r.value_bits) for r in per_cell):
        value = INF
    else:
        value = sum(
            c.probability * r.value_bits for c, r in zip(model.cells, per_cell)
        )
    return SideInfoCapacityResult(value, "shannon", None, per_cell)


def eta_capacity_with_si(model: SideInformationModel, eta: float,
                         query: CapacityQuery = _DEFAULT_QUERY):
    """-(1/eta) log2 E[min_d E[|1+B d(T)|^eta | T]].

    The cell-conditional minima are 2^(-eta * C_eta(cell)); their weighted
    sum goes through one log, so this generally exceeds the weighted average
    of per-cell capacities only through Jensen's inequality, not equality.
    """
    if not eta > 0:
        raise ValueError("eta must be positive")
    per_cell = tuple(
        eta_capacity(c.conditional, eta, query) for c in model.cells
    )
    acc = 0.0
    for c, r in zip(model.cells, per_cell):
        if math.isinf(r.value_bits):
            continue  # conditional minimum is exactly 0
        acc += c.probability * 2.0 ** (-eta * r.value_bits)
    value = INF if acc == 0.0 else -math.log2(acc) / eta
    return SideInfoCapacityResult(value, "eta", eta, per_cell)


def si_value_curve(dist: ActuationDistribution, k_max: int, sense="shannon",
                   eta: float | None = None,
                   query: CapacityQuery = _DEFAULT_QUERY):
    """Capacity at k = 0..k_max partition bits; checked nondecreasing in k."""
    points = []
    for k in range(k_max + 1):
        model = uniform_bit_partition(dist, k)
        if sense == "shannon":
            value = shannon_capacity_with_si(model, query).value_bits
        elif sense == "eta":
            value = eta_capacity_with_si(model, eta, query).value_bits
        else:
            raise ValueError(f"unknown sense {sense!r}")
        points.append((k, value))
    for (_, c0), (k1, c1) in zip(points, points[1:]):
        if c1 < c0 - 1e-7:
            raise RuntimeError(
                f"side information hurt capacity at k={k1}: {c0} -> {c1}"
            )
    return points
