"""Laws of the multiplicative actuation gain.

Each distribution knows its support (bounds plus atoms), exact moments, how
to draw reproducible samples, how to integrate functionals against itself
(atoms summed exactly, continuous parts by singularity-aware quadrature) and
how to condition on an interval cell.  Values are immutable and safe for
concurrent reads; sampling always goes through an explicit generator.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

import numpy as np
from scipy import special

from .quadrature import NonIntegrable, integrate_panels

__all__ = [
    "ActuationDistribution",
    "DistSpecError",
    "Empirical",
    "EmptyCell",
    "FiniteMixture",
    "Gaussian",
    "NonIntegrable",
    "ScaledBernoulli",
    "SupportInfo",
    "TruncatedGaussian",
    "Uniform",
    "make_rng",
    "parse_spec",
]

NEG_INF = float("-inf")
POS_INF = float("inf")

# Beyond 10 sigma the Gaussian tail mass is < 1e-23, far below the 1e-9
# quadrature target.
_GAUSS_TAIL_SIGMAS = 10.0

_ATOM_MASS_TOL = 1e-12
_WEIGHT_TOL = 1e-12


class EmptyCell(ValueError):
    """Conditioning cell carries zero probability."""


class DistSpecError(ValueError):
    """Unparseable distribution specification string."""


def make_rng(seed, *stream):
    """Counter-based generator for the (seed, stream...) key.

    Identical keys yield identical draw sequences across runs and across any
    thread scheduling, which is what makes all Monte Carlo in this package
    reproducible.
    """
    key = np.random.SeedSequence([int(seed), *map(int, stream)])
    return np.random.Generator(np.random.Philox(key))


@dataclass(frozen=True)
class SupportInfo:
    """Support bounds, atom list and derived flags of a gain law."""

    lower: float
    upper: float
    atoms: tuple[tuple[float, float], ...]
    contains_zero: bool
    has_nonzero_atom: bool

    @staticmethod
    def build(lower, upper, atoms=()):
        atoms = tuple((float(a), float(m)) for a, m in atoms if m > 0.0)
        if not lower <= upper:
            raise ValueError(f"support bounds out of order: [{lower}, {upper}]")
        for loc, _ in atoms:
            if not lower <= loc <= upper:
                raise ValueError(f"atom at {loc} outside [{lower}, {upper}]")
        mass = sum(m for _, m in atoms)
        if mass > 1.0 + _ATOM_MASS_TOL:
            raise ValueError(f"atom masses sum to {mass} > 1")
        return SupportInfo(
            lower=float(lower),
            upper=float(upper),
            atoms=atoms,
            contains_zero=lower <= 0.0 <= upper,
            has_nonzero_atom=any(loc != 0.0 for loc, _ in atoms),
        )

    @property
    def is_bounded(self):
        return self.lower > NEG_INF and self.upper < POS_INF

    @property
    def atom_mass(self):
        return sum(m for _, m in self.atoms)


class ActuationDistribution:
    """Base class for gain laws; subclasses provide atoms and density pieces."""

    def support(self) -> SupportInfo:
        raise NotImplementedError

    def moments(self) -> tuple[float, float, float]:
        """(mean, variance, second moment), exact."""
        raise NotImplementedError

    def sample(self, rng, size=None):
        """Draw i.i.d. values with the supplied generator."""
        raise NotImplementedError

    def restrict(self, lo, hi, *, include_upper=False):
        """Condition on the cell [lo, hi) (or [lo, hi] for a closing cell).

        Returns ``(probability, conditional distribution)``; raises
        :class:`EmptyCell` when the cell carries no mass.
        """
        raise NotImplementedError

    # hooks used by the shared expectation engine
    def _atoms(self) -> tuple[tuple[float, float], ...]:
        return ()

    def _density_pieces(self):
        """Weighted density pieces as (lo, hi, pdf) with pdf absolutely scaled."""
        return ()

    def expect(self, integrand, singularities=()):
        """E[integrand(B)]: atoms summed exactly, densities by quadrature.

        ``singularities`` lists the locations of any integrable blow-ups of
        the integrand (logarithmic, or power law with exponent > -1).
        """
        total = 0.0
        for loc, mass in self._atoms():
            total += mass * float(integrand(loc))
        for lo, hi, pdf in self._density_pieces():
            total += integrate_panels(
                lambda b: float(integrand(b)) * pdf(b), lo, hi, singularities
            )
        return total


@dataclass(frozen=True)
class Uniform(ActuationDistribution):
    b1: float
    b2: float

    def __post_init__(self):
        if not self.b1 < self.b2:
            raise ValueError(f"uniform requires b1 < b2, got [{self.b1}, {self.b2}]")

    def support(self):
        return SupportInfo.build(self.b1, self.b2)

    def moments(self):
        mean = 0.5 * (self.b1 + self.b2)
        var = (self.b2 - self.b1) ** 2 / 12.0
        return mean, var, var + mean * mean

    def sample(self, rng, size=None):
        return rng.uniform(self.b1, self.b2, size)

    def restrict(self, lo, hi, *, include_upper=False):
        nlo, nhi = max(self.b1, lo), min(self.b2, hi)
        if nhi <= nlo:
            raise EmptyCell(f"cell [{lo}, {hi}) misses Uniform({self.b1}, {self.b2})")
        prob = (nhi - nlo) / (self.b2 - self.b1)
        return prob, Uniform(nlo, nhi)

    def _density_pieces(self):
        dens = 1.0 / (self.b2 - self.b1)
        return ((self.b1, self.b2, lambda b: dens),)


@dataclass(frozen=True)
class Gaussian(ActuationDistribution):
    mu: float
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"gaussian requires sigma > 0, got {self.sigma}")

    def support(self):
        return SupportInfo.build(NEG_INF, POS_INF)

    def moments(self):
        return self.mu, self.sigma**2, self.sigma**2 + self.mu**2

    def sample(self, rng, size=None):
        return rng.normal(self.mu, self.sigma, size)

    def restrict(self, lo, hi, *, include_upper=False):
        cond = TruncatedGaussian(self.mu, self.sigma, lo, hi)
        return cond.cell_probability, cond

    def _density_pieces(self):
        mu, sig = self.mu, self.sigma
        norm = 1.0 / (sig * math.sqrt(2.0 * math.pi))

        def pdf(b):
            z = (b - mu) / sig
            return norm * math.exp(-0.5 * z * z)

        half = _GAUSS_TAIL_SIGMAS * sig
        return ((mu - half, mu + half, pdf),)


@dataclass(frozen=True)
class TruncatedGaussian(ActuationDistribution):
    """Gaussian conditioned on [lo, hi]; arises from restricting a Gaussian."""

    mu: float
    sigma: float
    lo: float
    hi: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be > 0, got {self.sigma}")
        if not self.lo < self.hi:
            raise ValueError(f"truncation window empty: [{self.lo}, {self.hi}]")
        if self.cell_probability <= 0.0:
            raise EmptyCell(
                f"Gaussian({self.mu}, {self.sigma}) has no mass in [{self.lo}, {self.hi})"
            )

    @property
    def _alpha(self):
        return (self.lo - self.mu) / self.sigma

    @property
    def _beta(self):
        return (self.hi - self.mu) / self.sigma

    @property
    def cell_probability(self):
        return float(special.ndtr(self._beta) - special.ndtr(self._alpha))

    def support(self):
        return SupportInfo.build(self.lo, self.hi)

    def moments(self):
        a, b = self._alpha, self._beta
        z = self.cell_probability
        pa, pb = _std_normal_pdf(a), _std_normal_pdf(b)
        mean = self.mu + self.sigma * (pa - pb) / z
        var = self.sigma**2 * (1.0 + (a * pa - b * pb) / z - ((pa - pb) / z) ** 2)
        return mean, var, var + mean * mean

    def sample(self, rng, size=None):
        # Inverse-CDF so the per-draw count is fixed (no rejection).
        u = rng.random(size)
        base = special.ndtr(self._alpha)
        x = self.mu + self.sigma * special.ndtri(base + u * self.cell_probability)
        return np.clip(x, self.lo, self.hi)

    def restrict(self, lo, hi, *, include_upper=False):
        nlo, nhi = max(self.lo, lo), min(self.hi, hi)
        if nhi <= nlo:
            raise EmptyCell(f"cell [{lo}, {hi}) misses truncation [{self.lo}, {self.hi}]")
        cond = TruncatedGaussian(self.mu, self.sigma, nlo, nhi)
        return cond.cell_probability / self.cell_probability, cond

    def _density_pieces(self):
        mu, sig = self.mu, self.sigma
        norm = 1.0 / (sig * math.sqrt(2.0 * math.pi) * self.cell_probability)

        def pdf(b):
            z = (b - mu) / sig
            return norm * math.exp(-0.5 * z * z)

        return ((self.lo, self.hi, pdf),)


@dataclass(frozen=True)
class ScaledBernoulli(ActuationDistribution):
    """Gain beta with probability p, else 0 (the erasure actuation channel)."""

    beta: float
    p: float

    def __post_init__(self):
        if self.beta == 0:
            raise ValueError("beta must be nonzero")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p must be a probability, got {self.p}")

    def support(self):
        atoms = ((0.0, 1.0 - self.p), (self.beta, self.p))
        atoms = tuple(a for a in atoms if a[1] > 0.0)
        lo = min(loc for loc, _ in atoms)
        hi = max(loc for loc, _ in atoms)
        return SupportInfo.build(lo, hi, atoms)

    def moments(self):
        mean = self.beta * self.p
        second = self.beta**2 * self.p
        return mean, second - mean * mean, second

    def sample(self, rng, size=None):
        hit = rng.random(size) < self.p
        return self.beta * np.asarray(hit, dtype=float) if size is not None else (
            self.beta if hit else 0.0
        )

    def restrict(self, lo, hi, *, include_upper=False):
        kept = [
            (loc, mass)
            for loc, mass in self.support().atoms
            if _in_cell(loc, lo, hi, include_upper)
        ]
        prob = sum(m for _, m in kept)
        if prob <= 0.0:
            raise EmptyCell(f"cell [{lo}, {hi}) carries no mass")
        if len(kept) == 2:
            return prob, self
        loc, _ = kept[0]
        return prob, Empirical((loc,))

    def _atoms(self):
        return self.support().atoms


@dataclass(frozen=True)
class FiniteMixture(ActuationDistribution):
    components: tuple[tuple[float, ActuationDistribution], ...]

    def __post_init__(self):
        comps = tuple((float(w), d) for w, d in self.components)
        object.__setattr__(self, "components", comps)
        if not comps:
            raise ValueError("mixture needs at least one component")
        if any(w < 0 for w, _ in comps):
            raise ValueError("mixture weights must be nonnegative")
        total = sum(w for w, _ in comps)
        if abs(total - 1.0) > _WEIGHT_TOL:
            raise ValueError(f"mixture weights sum to {total}, expected 1")

    def support(self):
        infos = [d.support() for _, d in self.components]
        merged = Counter()
        for (w, _), info in zip(self.components, infos):
            for loc, mass in info.atoms:
                merged[loc] += w * mass
        return SupportInfo.build(
            min(i.lower for i in infos),
            max(i.upper for i in infos),
            tuple(sorted(merged.items())),
        )

    def moments(self):
        mean = sum(w * d.moments()[0] for w, d in self.components)
        second = sum(w * d.moments()[2] for w, d in self.components)
        return mean, second - mean * mean, second

    def sample(self, rng, size=None):
        weights = np.array([w for w, _ in self.components])
        edges = np.cumsum(weights)
        if size is None:
            u = rng.random()
            idx = int(np.searchsorted(edges, u, side="right"))
            idx = min(idx, len(self.components) - 1)
            # keep the per-call draw count fixed across realized choices
            draws = [d.sample(rng) for _, d in self.components]
            return draws[idx]
        u = rng.random(size)
        idx = np.minimum(
            np.searchsorted(edges, u, side="right"), len(self.components) - 1
        )
        draws = np.stack([np.asarray(d.sample(rng, size), dtype=float)
                          for _, d in self.components])
        return draws[idx, np.arange(size)]

    def restrict(self, lo, hi, *, include_upper=False):
        kept = []
        for w, d in self.components:
            try:
                prob, cond = d.restrict(lo, hi, include_upper=include_upper)
            except EmptyCell:
                continue
            kept.append((w * prob, cond))
        total = sum(w for w, _ in kept)
        if total <= 0.0:
            raise EmptyCell(f"cell [{lo}, {hi}) carries no mixture mass")
        if len(kept) == 1:
            return total, kept[0][1]
        return total, FiniteMixture(tuple((w / total, d) for w, d in kept))

    def _atoms(self):
        return tuple(
            (loc, w * mass)
            for w, d in self.components
            for loc, mass in d._atoms()
        )

    def _density_pieces(self):
        pieces = []
        for w, d in self.components:
            for lo, hi, pdf in d._density_pieces():
                pieces.append((lo, hi, _scaled_pdf(w, pdf)))
        return tuple(pieces)


@dataclass(frozen=True)
class Empirical(ActuationDistribution):
    """Pure atom set with mass count/n at each distinct sample value."""

    samples: tuple[float, ...]

    def __post_init__(self):
        vals = tuple(float(s) for s in self.samples)
        if not vals:
            raise ValueError("empirical law needs at least one sample")
        object.__setattr__(self, "samples", vals)

    def support(self):
        counts = Counter(self.samples)
        n = len(self.samples)
        atoms = tuple(sorted((v, c / n) for v, c in counts.items()))
        return SupportInfo.build(min(self.samples), max(self.samples), atoms)

    def moments(self):
        arr = np.asarray(self.samples)
        mean = float(arr.mean())
        second = float((arr * arr).mean())
        return mean, second - mean * mean, second

    def sample(self, rng, size=None):
        arr = np.asarray(self.samples)
        idx = rng.integers(0, len(arr), size)
        return arr[idx]

    def restrict(self, lo, hi, *, include_upper=False):
        kept = tuple(s for s in self.samples if _in_cell(s, lo, hi, include_upper))
        if not kept:
            raise EmptyCell(f"cell [{lo}, {hi}) contains no samples")
        return len(kept) / len(self.samples), Empirical(kept)

    def _atoms(self):
        return self.support().atoms


def _in_cell(x, lo, hi, include_upper):
    return lo <= x < hi or (include_upper and x == hi)


def _scaled_pdf(w, pdf):
    return lambda b: w * pdf(b)


def _std_normal_pdf(z):
    return math.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)


# ---------------------------------------------------------------------------
# specification grammar
#
#   uniform:b1,b2          gaussian:mu,sigma       erasure:beta,p
#   mixture:w1*<spec>|w2*<spec>                    empirical:@path.csv
# ---------------------------------------------------------------------------

def parse_spec(text) -> ActuationDistribution:
    """Parse the distribution grammar used by the CLI and config files."""
    text = text.strip()
    kind, sep, rest = text.partition(":")
    if not sep:
        raise DistSpecError(f"missing ':' in distribution spec {text!r}")
    kind = kind.lower()
    try:
        if kind == "uniform":
            b1, b2 = _floats(rest, 2, text)
            return Uniform(b1, b2)
        if kind == "gaussian":
            mu, sigma = _floats(rest, 2, text)
            return Gaussian(mu, sigma)
        if kind == "erasure":
            beta, p = _floats(rest, 2, text)
            return ScaledBernoulli(beta, p)
        if kind == "empirical":
            if not rest.startswith("@"):
                raise DistSpecError(f"empirical spec needs @path, got {text!r}")
            return Empirical(_read_samples(rest[1:]))
        if kind == "mixture":
            comps = []
            for part in rest.split("|"):
                w_text, star, spec = part.partition("*")
                if not star:
                    raise DistSpecError(f"mixture component needs w*<spec>: {part!r}")
                comps.append((float(w_text), parse_spec(spec)))
            return FiniteMixture(tuple(comps))
    except DistSpecError:
        raise
    except (TypeError, ValueError) as exc:
        raise DistSpecError(f"invalid distribution spec {text!r}: {exc}") from exc
    raise DistSpecError(f"unknown distribution kind {kind!r} in {text!r}")


def _floats(rest, n, full):
    parts = rest.split(",")
    if len(parts) != n:
        raise DistSpecError(f"expected {n} comma-separated numbers in {full!r}")
    return [float(p) for p in parts]


def _read_samples(path):
    with open(path) as fh:
        return tuple(float(line.strip()) for line in fh if line.strip())
