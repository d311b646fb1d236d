"""Point-process priors on discrete measures.

A prior draw is ``sum_{k=1}^{K} w_k Q_k delta_{Y_k}`` with a random atom
count K, i.i.d. locations Y_k, i.i.d. marks Q_k and deterministic positive
weights w_k (unit by default).  Every built-in law exposes a density, so the
prior has a log-density with respect to the reference

    counting measure on n  x  Lebesgue(Omega)^n  x  (mark reference)^n,

with an ``n!`` factor for the unordered atom configuration.  This is the
convention that makes reversible-jump birth/death ratios cancel cleanly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import stats

from .measures import COMPLEX, REAL, DiscreteMeasure, Domain

LOG_2PI = math.log(2.0 * math.pi)


class UnsupportedLawError(ValueError):
    """The requested operation is not available for this law combination."""


class ClosedFormUnavailable(UnsupportedLawError):
    """No analytic expression exists; use a Monte-Carlo estimate instead."""


# ---------------------------------------------------------------------------
# Count laws


@dataclass(frozen=True)
class PoissonCount:
    gamma: float

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")

    def sample(self, rng: np.random.Generator) -> int:
        return int(rng.poisson(self.gamma))

    def sample_batch(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return rng.poisson(self.gamma, size=n)

    def log_pmf(self, n: int) -> float:
        if n < 0:
            return -math.inf
        return n * math.log(self.gamma) - self.gamma - math.lgamma(n + 1)

    def mean(self) -> float:
        return self.gamma

    @property
    def max_count(self) -> Optional[int]:
        return None


@dataclass(frozen=True)
class FixedCount:
    n: int

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("n must be >= 0")

    def sample(self, rng: np.random.Generator) -> int:
        return self.n

    def sample_batch(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return np.full(n, self.n, dtype=int)

    def log_pmf(self, n: int) -> float:
        return 0.0 if n == self.n else -math.inf

    def mean(self) -> float:
        return float(self.n)

    @property
    def max_count(self) -> Optional[int]:
        return self.n


def default_truncation(gamma: float) -> int:
    """Cap keeping the discarded Poisson mass below ~1e-12."""
    return int(math.ceil(gamma + 10.0 * math.sqrt(gamma)))


@dataclass(frozen=True)
class TruncatedPoissonCount:
    gamma: float
    k_max: Optional[int] = None

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        k_max = self.k_max if self.k_max is not None else default_truncation(self.gamma)
        if k_max < 0:
            raise ValueError("k_max must be >= 0")
        object.__setattr__(self, "k_max", int(k_max))
        ks = np.arange(k_max + 1)
        logp = ks * math.log(self.gamma) - self.gamma - np.array(
            [math.lgamma(k + 1) for k in ks]
        )
        p = np.exp(logp)
        mass = p.sum()
        object.__setattr__(self, "_truncated_mass", float(1.0 - mass))
        object.__setattr__(self, "_pmf", p / mass)
        object.__setattr__(self, "_cdf", np.cumsum(p / mass))

    @property
    def truncated_mass(self) -> float:
        """Poisson mass beyond k_max that the renormalization discards."""
        return self._truncated_mass

    def sample(self, rng: np.random.Generator) -> int:
        return int(np.searchsorted(self._cdf, rng.random(), side="right"))

    def sample_batch(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return np.searchsorted(self._cdf, rng.random(n), side="right")

    def log_pmf(self, n: int) -> float:
        if n < 0 or n > self.k_max:
            return -math.inf
        return float(np.log(self._pmf[n]))

    def mean(self) -> float:
        return float(np.arange(self.k_max + 1) @ self._pmf)

    @property
    def max_count(self) -> Optional[int]:
        return self.k_max


# ---------------------------------------------------------------------------
# Location laws


@dataclass(frozen=True)
class UniformLocations:
    domain: Domain

    def __post_init__(self):
        object.__setattr__(self, "_neg_log_vol", -math.log(self.domain.volume()))

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return self.domain.lower + self.domain.widths * rng.random((n, self.domain.dim))

    def sample_one(self, rng: np.random.Generator) -> np.ndarray:
        return self.domain.lower + self.domain.widths * rng.random(self.domain.dim)

    def log_density(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(points)
        out = np.full(pts.shape[0], self._neg_log_vol)
        out[~self.domain.contains(pts)] = -math.inf
        return out


@dataclass(frozen=True, eq=False)
class PointLocation:
    """Degenerate law: every atom sits at one fixed point.

    The density is taken with respect to the point mass itself, so the
    log-density is 0 at the point and -inf elsewhere.
    """

    domain: Domain
    point: np.ndarray

    def __post_init__(self):
        p = np.atleast_1d(np.asarray(self.point, dtype=float))
        if not self.domain.contains(p[None, :])[0]:
            raise ValueError("point must lie in the domain")
        p.setflags(write=False)
        object.__setattr__(self, "point", p)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return np.tile(self.point, (n, 1))

    def sample_one(self, rng: np.random.Generator) -> np.ndarray:
        return self.point.copy()

    def log_density(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(points)
        hit = np.all(pts == self.point, axis=1)
        return np.where(hit, 0.0, -math.inf)

    def __eq__(self, other):
        if not isinstance(other, PointLocation):
            return NotImplemented
        return self.domain == other.domain and np.array_equal(self.point, other.point)


@dataclass(frozen=True)
class DensityLocations:
    """Location law given by a density on the domain plus a sampler.

    ``density`` maps (n, d) points to (n,) nonnegative values; ``sampler``
    maps (n, rng) to (n, d) points inside the domain.  The normalization is
    checked at construction by tensor-product Gauss-Legendre quadrature.
    """

    domain: Domain
    density: Callable[[np.ndarray], np.ndarray]
    sampler: Callable[[int, np.random.Generator], np.ndarray]
    quad_n: int = 64
    check_tol: float = 1e-6

    def __post_init__(self):
        nodes, weights = tensor_gauss_legendre(self.domain, self.quad_n)
        vals = np.asarray(self.density(nodes), dtype=float)
        if np.any(vals < -1e-12):
            raise ValueError("location density must be nonnegative on the domain")
        total = float(weights @ vals)
        if abs(total - 1.0) > self.check_tol:
            raise ValueError(
                f"location density integrates to {total:.8f}, not 1 "
                f"(tolerance {self.check_tol})"
            )

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        pts = np.asarray(self.sampler(n, rng), dtype=float).reshape(n, self.domain.dim)
        if n > 0 and not np.all(self.domain.contains(pts)):
            raise ValueError("sampler produced points outside the domain")
        return pts

    def sample_one(self, rng: np.random.Generator) -> np.ndarray:
        return self.sample(1, rng)[0]

    def log_density(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(points)
        inside = self.domain.contains(pts)
        vals = np.asarray(self.density(pts), dtype=float)
        with np.errstate(divide="ignore"):
            out = np.where(inside & (vals > 0), np.log(np.maximum(vals, 1e-300)), -math.inf)
        return out


def tensor_gauss_legendre(domain: Domain, n_per_axis: int):
    """Product Gauss-Legendre rule on the box; returns (nodes (N,d), weights (N,))."""
    xs, ws = np.polynomial.legendre.leggauss(n_per_axis)
    axes, axis_w = [], []
    for i in range(domain.dim):
        half = 0.5 * (domain.upper[i] - domain.lower[i])
        mid = 0.5 * (domain.upper[i] + domain.lower[i])
        axes.append(mid + half * xs)
        axis_w.append(half * ws)
    mesh = np.meshgrid(*axes, indexing="ij")
    nodes = np.stack([m.ravel() for m in mesh], axis=1)
    wmesh = np.meshgrid(*axis_w, indexing="ij")
    weights = np.ones(nodes.shape[0])
    for w in wmesh:
        weights = weights * w.ravel()
    return nodes, weights


# ---------------------------------------------------------------------------
# Mark laws


@dataclass(frozen=True, eq=False)
class GaussianMark:
    """Gaussian amplitude law on R^m."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        if cov.shape != (mu.size, mu.size):
            raise ValueError("cov must be m x m")
        if not np.allclose(cov, cov.T):
            raise ValueError("cov must be symmetric")
        try:
            chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError as exc:
            raise ValueError("cov must be positive definite") from exc
        mu.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "mean", mu)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "_chol", chol)
        object.__setattr__(
            self, "_log_norm",
            -0.5 * (mu.size * LOG_2PI) - float(np.sum(np.log(np.diag(chol)))),
        )

    @property
    def m(self) -> int:
        return self.mean.size

    @property
    def field(self) -> str:
        return REAL

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        z = rng.standard_normal((n, self.m))
        return self.mean + z @ self._chol.T

    def sample_one(self, rng: np.random.Generator) -> np.ndarray:
        return self.mean + self._chol @ rng.standard_normal(self.m)

    def log_density(self, q: np.ndarray) -> np.ndarray:
        q2 = np.atleast_2d(np.asarray(q, dtype=float)) - self.mean
        w = np.linalg.solve(self._chol, q2.T)
        return self._log_norm - 0.5 * np.sum(w * w, axis=0)

    def mean_norm(self) -> float:
        """E|Q| in closed form; zero-mean isotropic case only (chi mean)."""
        if np.any(self.mean != 0.0) or not np.allclose(
            self.cov, self.cov[0, 0] * np.eye(self.m)
        ):
            raise ClosedFormUnavailable(
                "closed-form E|Q| needs a centered isotropic Gaussian"
            )
        sigma = math.sqrt(self.cov[0, 0])
        m = self.m
        return sigma * math.sqrt(2.0) * math.exp(
            math.lgamma((m + 1) / 2.0) - math.lgamma(m / 2.0)
        )

    def coordinate_std(self) -> float:
        return float(np.sqrt(np.mean(np.diag(self.cov))))

    def charfun(self, t: np.ndarray) -> np.ndarray:
        """E[exp(i t Q)] for scalar marks."""
        if self.m != 1:
            raise UnsupportedLawError("charfun requires m = 1")
        t = np.asarray(t, dtype=float)
        return np.exp(1j * self.mean[0] * t - 0.5 * self.cov[0, 0] * t * t)

    def __eq__(self, other):
        if not isinstance(other, GaussianMark):
            return NotImplemented
        return np.array_equal(self.mean, other.mean) and np.array_equal(
            self.cov, other.cov
        )


@dataclass(frozen=True)
class LogNormalMark:
    """Log-normal scalar amplitude law, supported on (0, inf)."""

    mu: float = 0.0
    sigma2: float = 1.0

    def __post_init__(self):
        if self.sigma2 <= 0:
            raise ValueError("sigma2 must be positive")

    @property
    def m(self) -> int:
        return 1

    @property
    def field(self) -> str:
        return REAL

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma2)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return rng.lognormal(self.mu, self.sigma, size=(n, 1))

    def sample_one(self, rng: np.random.Generator) -> np.ndarray:
        return rng.lognormal(self.mu, self.sigma, size=1)

    def log_density(self, q: np.ndarray) -> np.ndarray:
        q1 = np.atleast_2d(np.asarray(q, dtype=float))[:, 0]
        out = np.full(q1.shape, -math.inf)
        pos = q1 > 0
        lg = np.log(q1[pos])
        out[pos] = (
            -lg - math.log(self.sigma) - 0.5 * LOG_2PI
            - (lg - self.mu) ** 2 / (2.0 * self.sigma2)
        )
        return out

    def mean_norm(self) -> float:
        return math.exp(self.mu + 0.5 * self.sigma2)

    def coordinate_std(self) -> float:
        return math.sqrt(
            (math.exp(self.sigma2) - 1.0) * math.exp(2.0 * self.mu + self.sigma2)
        )

    def charfun(self, t: np.ndarray, quad_n: int = 400) -> np.ndarray:
        """E[exp(i t Q)] by Gauss-Legendre over a 1 - 1e-14 quantile range."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        lo = float(stats.lognorm.ppf(1e-15, self.sigma, scale=math.exp(self.mu)))
        hi = float(stats.lognorm.ppf(1.0 - 1e-15, self.sigma, scale=math.exp(self.mu)))
        xs, ws = np.polynomial.legendre.leggauss(quad_n)
        q = 0.5 * (hi + lo) + 0.5 * (hi - lo) * xs
        w = 0.5 * (hi - lo) * ws
        pdf = stats.lognorm.pdf(q, self.sigma, scale=math.exp(self.mu))
        return np.exp(1j * np.outer(t, q)) @ (w * pdf)


@dataclass(frozen=True)
class ComplexGaussianMark:
    """Scalar complex Gaussian amplitude with variance and relation parameters.

    ``sigma2 = E|Q - mean|^2`` and ``relation = E[(Q - mean)^2]``; the pair
    determines the covariance of (Re Q, Im Q), which must be positive
    definite (|relation| < sigma2).
    """

    mean: complex = 0j
    sigma2: float = 1.0
    relation: complex = 0j

    def __post_init__(self):
        if self.sigma2 <= 0:
            raise ValueError("sigma2 must be positive")
        if abs(self.relation) > self.sigma2:
            raise ValueError("need |relation| <= sigma2")
        c = complex(self.relation)
        cov = 0.5 * np.array(
            [
                [self.sigma2 + c.real, c.imag],
                [c.imag, self.sigma2 - c.real],
            ]
        )
        try:
            chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError as exc:
            raise ValueError(
                "relation parameter makes the (Re, Im) covariance singular"
            ) from exc
        object.__setattr__(self, "_chol", chol)
        object.__setattr__(
            self, "_log_norm", -LOG_2PI - float(np.sum(np.log(np.diag(chol))))
        )

    @property
    def m(self) -> int:
        return 1

    @property
    def field(self) -> str:
        return COMPLEX

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        z = rng.standard_normal((n, 2)) @ self._chol.T
        return (complex(self.mean) + z[:, 0] + 1j * z[:, 1]).reshape(n, 1)

    def sample_one(self, rng: np.random.Generator) -> np.ndarray:
        z = self._chol @ rng.standard_normal(2)
        return np.array([complex(self.mean) + z[0] + 1j * z[1]])

    def log_density(self, q: np.ndarray) -> np.ndarray:
        qc = np.atleast_2d(np.asarray(q, dtype=complex))[:, 0] - complex(self.mean)
        xy = np.stack([qc.real, qc.imag], axis=0)
        w = np.linalg.solve(self._chol, xy)
        return self._log_norm - 0.5 * np.sum(w * w, axis=0)

    def mean_norm(self) -> float:
        """E|Q| closed form for the centered circular case (Rayleigh mean)."""
        if self.mean != 0 or self.relation != 0:
            raise ClosedFormUnavailable(
                "closed-form E|Q| needs mean = relation = 0"
            )
        return 0.5 * math.sqrt(math.pi * self.sigma2)

    def coordinate_std(self) -> float:
        return math.sqrt(self.sigma2 / 2.0)


# ---------------------------------------------------------------------------
# Deterministic weights


@dataclass(frozen=True)
class UnitWeights:
    @property
    def is_unit(self) -> bool:
        return True

    def values(self, n: int) -> np.ndarray:
        return np.ones(n)


@dataclass(frozen=True, eq=False)
class SequenceWeights:
    """Positive deterministic weights w_k, truncated at k_max atoms.

    The sampler never realizes more than ``k_max`` atoms; the discarded tail
    is reported through :func:`summability_report`.  Ratios w_{k+1}/w_k must
    be bounded below 1 beyond the truncation point so a geometric majorant
    controls the tail.
    """

    fn: Callable[[int], float]
    k_max: int

    def __post_init__(self):
        if self.k_max < 1:
            raise ValueError("k_max must be >= 1")
        vals = np.array([float(self.fn(k)) for k in range(1, self.k_max + 1)])
        if np.any(vals <= 0) or not np.all(np.isfinite(vals)):
            raise ValueError("weights must be positive and finite")
        vals.setflags(write=False)
        object.__setattr__(self, "_values", vals)

    @property
    def is_unit(self) -> bool:
        return False

    def values(self, n: int) -> np.ndarray:
        return self._values[:n]

    def head_sum(self) -> float:
        return float(self._values.sum())

    def tail_bound(self, probe: int = 50) -> float:
        """Geometric bound on sum_{k > k_max} w_k via the worst probed ratio."""
        ks = np.arange(self.k_max, self.k_max + probe + 1)
        vals = np.array([float(self.fn(int(k))) for k in ks])
        ratios = vals[1:] / vals[:-1]
        r = float(ratios.max())
        if r >= 1.0:
            raise ValueError(
                "weight ratios do not decay beyond k_max; no geometric tail bound"
            )
        first_tail = float(self.fn(self.k_max + 1))
        return first_tail / (1.0 - r)


def geometric_weights(ratio: float, k_max: int, scale: float = None) -> SequenceWeights:
    """Weights w_k = scale * ratio^k (scale defaults to 1/ratio, so w_1 = 1)."""
    if not 0 < ratio < 1:
        raise ValueError("ratio must lie in (0, 1)")
    s = (1.0 / ratio) if scale is None else float(scale)
    return SequenceWeights(lambda k: s * ratio**k, k_max)


# ---------------------------------------------------------------------------
# Prior specification and operations


@dataclass(frozen=True)
class PriorSpec:
    """Atom-count, location, mark and weight laws defining the prior."""

    count: object
    location: object
    mark: object
    weights: object = field(default_factory=UnitWeights)

    @property
    def domain(self) -> Domain:
        return self.location.domain

    @property
    def m(self) -> int:
        return self.mark.m

    @property
    def field(self) -> str:
        return self.mark.field

    def effective_count(self, k: int) -> int:
        if self.weights.is_unit:
            return k
        return min(k, self.weights.k_max)


def sample_prior(spec: PriorSpec, rng: np.random.Generator) -> DiscreteMeasure:
    """Draw one measure from the prior; deterministic given the generator state."""
    k = spec.effective_count(spec.count.sample(rng))
    locs = spec.location.sample(k, rng)
    marks = spec.mark.sample(k, rng)
    amps = spec.weights.values(k)[:, None] * marks
    if k == 0:
        return DiscreteMeasure.empty(spec.domain, m=spec.m, field=spec.field)
    return DiscreteMeasure(spec.domain, locs, amps)


@dataclass(frozen=True)
class PriorBatch:
    """Flat storage for n prior draws: draw i owns atom rows offsets[i]:offsets[i+1]."""

    domain: Domain
    counts: np.ndarray
    offsets: np.ndarray
    locations: np.ndarray
    amplitudes: np.ndarray

    @property
    def n_draws(self) -> int:
        return self.counts.size

    def draw_index(self) -> np.ndarray:
        """Owning draw of each atom row."""
        return np.repeat(np.arange(self.n_draws), self.counts)

    def measure(self, i: int) -> DiscreteMeasure:
        a, b = self.offsets[i], self.offsets[i + 1]
        if a == b:
            m = self.amplitudes.shape[1]
            fld = COMPLEX if np.iscomplexobj(self.amplitudes) else REAL
            return DiscreteMeasure.empty(self.domain, m=m, field=fld)
        return DiscreteMeasure(self.domain, self.locations[a:b], self.amplitudes[a:b])

    def total_variations(self) -> np.ndarray:
        norms = np.sqrt(np.sum(np.abs(self.amplitudes) ** 2, axis=1))
        out = np.zeros(self.n_draws)
        np.add.at(out, self.draw_index(), norms)
        return out


def sample_prior_batch(spec: PriorSpec, n: int, rng: np.random.Generator) -> PriorBatch:
    """Draw n prior measures at once in flat arrays (for Monte-Carlo loops)."""
    counts = spec.count.sample_batch(n, rng)
    if not spec.weights.is_unit:
        counts = np.minimum(counts, spec.weights.k_max)
    offsets = np.zeros(n + 1, dtype=int)
    np.cumsum(counts, out=offsets[1:])
    total = int(offsets[-1])
    locs = spec.location.sample(total, rng)
    marks = spec.mark.sample(total, rng)
    if spec.weights.is_unit:
        amps = marks
    else:
        within = np.arange(total) - np.repeat(offsets[:-1], counts)
        amps = spec.weights.values(spec.weights.k_max)[within][:, None] * marks
    return PriorBatch(spec.domain, counts, offsets, locs, amps)


def log_prior_density(spec: PriorSpec, u: DiscreteMeasure) -> float:
    """Log-density of the unordered atom configuration under the prior.

    Returns ``log[pmf_K(n) * n! * prod_k g(y_k) * prod_k q(q_k)]`` and -inf
    off the support.  Only unit-weight priors are density-representable;
    weighted atoms are not exchangeable.
    """
    if not spec.weights.is_unit:
        raise UnsupportedLawError("log_prior_density requires unit weights")
    if u.m != spec.m or u.field != spec.field:
        raise UnsupportedLawError("measure amplitude type does not match the prior")
    n = u.n_atoms
    out = spec.count.log_pmf(n) + math.lgamma(n + 1)
    if n == 0:
        return out
    loc_terms = spec.location.log_density(u.locations)
    mark_terms = spec.mark.log_density(u.amplitudes)
    total = out + float(np.sum(loc_terms) + np.sum(mark_terms))
    return total if np.isfinite(total) else -math.inf


def prior_mean_tv(spec: PriorSpec) -> float:
    """E[K] * E|Q| in closed form (unit weights, independent count and marks)."""
    if not spec.weights.is_unit:
        raise UnsupportedLawError("prior_mean_tv requires unit weights")
    return spec.count.mean() * spec.mark.mean_norm()


@dataclass(frozen=True)
class SummabilityReport:
    """Witness that a truncated weighted prior has finite expected norm."""

    head: float
    tail_bound: float
    mean_norm: float
    k_max: int


def summability_report(
    spec: PriorSpec, rng: Optional[np.random.Generator] = None, n_mc: int = 100_000
) -> SummabilityReport:
    """Head sum and tail bound for sum_k w_k E|Q_k| of a weighted prior.

    Uses the closed-form E|Q| when the mark law has one, otherwise a
    Monte-Carlo estimate with ``n_mc`` draws from ``rng``.
    """
    if spec.weights.is_unit:
        raise UnsupportedLawError("summability_report applies to weighted priors")
    try:
        mean_norm = spec.mark.mean_norm()
    except ClosedFormUnavailable:
        if rng is None:
            raise
        q = spec.mark.sample(n_mc, rng)
        mean_norm = float(np.mean(np.sqrt(np.sum(np.abs(q) ** 2, axis=1))))
    head = spec.weights.head_sum() * mean_norm
    if not math.isfinite(head):
        raise ValueError("weighted prior fails the summability precondition")
    tail = spec.weights.tail_bound() * mean_norm
    return SummabilityReport(head, tail, mean_norm, spec.weights.k_max)
