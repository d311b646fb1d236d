"""Finite discrete vector measures on a compact box.

A measure is a finite list of atoms ``(location, amplitude)`` with locations
in an axis-aligned box and amplitudes in R^m or C^m.  The total-variation
norm is the sum of amplitude norms; the pairing against a continuous test
function f is ``sum_k (f(y_k), q_k)``, where the complex inner product
conjugates the amplitude (second slot).

Measures are immutable values: all operations return new objects and the
backing arrays are marked read-only, so they are safe to share across
threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

REAL = "real"
COMPLEX = "complex"


class DimensionMismatchError(ValueError):
    """Operands disagree on spatial dimension, amplitude dimension or field."""


@dataclass(frozen=True)
class Domain:
    """Axis-aligned compact box in R^d."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lo.ndim != 1 or lo.shape != hi.shape or lo.size < 1:
            raise ValueError("lower and upper must be 1-d arrays of equal length >= 1")
        if not np.all(lo < hi):
            raise ValueError("domain requires lower[i] < upper[i] for every axis")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def widths(self) -> np.ndarray:
        return self.upper - self.lower

    def diameter(self) -> float:
        return float(np.linalg.norm(self.widths))

    def volume(self) -> float:
        return float(np.prod(self.widths))

    def contains(self, points: np.ndarray, atol: float = 0.0) -> np.ndarray:
        """Componentwise membership test for an (n, d) array of points."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return np.all(
            (pts >= self.lower - atol) & (pts <= self.upper + atol), axis=1
        )

    def reflect(self, point: np.ndarray) -> np.ndarray:
        """Fold a point back into the box by reflection at the faces.

        The folding is the triangle wave with period ``2 * width`` per axis,
        which makes Gaussian random-walk proposals symmetric on the box.
        """
        w = self.widths
        t = np.mod(np.asarray(point, dtype=float) - self.lower, 2.0 * w)
        return self.lower + np.where(t <= w, t, 2.0 * w - t)

    def grid(self, n_cells: int) -> np.ndarray:
        """Product grid with ``n_cells`` subdivisions (n_cells+1 nodes) per axis."""
        axes = [
            np.linspace(self.lower[i], self.upper[i], n_cells + 1)
            for i in range(self.dim)
        ]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def __eq__(self, other):
        if not isinstance(other, Domain):
            return NotImplemented
        return np.array_equal(self.lower, other.lower) and np.array_equal(
            self.upper, other.upper
        )

    def __hash__(self):
        return hash((self.lower.tobytes(), self.upper.tobytes()))


def _amplitude_field(amplitudes: np.ndarray) -> str:
    return COMPLEX if np.iscomplexobj(amplitudes) else REAL


def amplitude_norms(amplitudes: np.ndarray) -> np.ndarray:
    """Euclidean (complex-modulus) norm of each amplitude row."""
    q = np.atleast_2d(amplitudes)
    return np.sqrt(np.sum(np.abs(q) ** 2, axis=1))


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Finite atomic measure ``sum_k q_k * delta_{y_k}`` on a box domain.

    ``locations`` has shape (n, d) and every row must lie in ``domain``;
    ``amplitudes`` has shape (n, m), real or complex.  n may be zero (the
    empty measure).
    """

    domain: Domain
    locations: np.ndarray
    amplitudes: np.ndarray

    def __post_init__(self):
        locs = np.asarray(self.locations, dtype=float).reshape(-1, self.domain.dim)
        amps = np.asarray(self.amplitudes)
        if not np.iscomplexobj(amps):
            amps = amps.astype(float, copy=True)
        else:
            amps = amps.astype(complex, copy=True)
        if locs.shape[0] > 0:
            amps = amps.reshape(locs.shape[0], -1)
        else:
            amps = amps.reshape(0, amps.shape[-1] if amps.ndim > 1 and amps.shape[-1] else 1)
        if amps.shape[1] < 1:
            raise ValueError("amplitude dimension m must be >= 1")
        if locs.shape[0] != amps.shape[0]:
            raise DimensionMismatchError("locations and amplitudes disagree on atom count")
        if locs.shape[0] > 0 and not np.all(self.domain.contains(locs)):
            raise ValueError("every atom location must lie in the domain")
        locs.setflags(write=False)
        amps.setflags(write=False)
        object.__setattr__(self, "locations", locs)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def empty(cls, domain: Domain, m: int = 1, field: str = REAL) -> "DiscreteMeasure":
        dtype = complex if field == COMPLEX else float
        return cls(domain, np.zeros((0, domain.dim)), np.zeros((0, m), dtype=dtype))

    @property
    def n_atoms(self) -> int:
        return self.locations.shape[0]

    @property
    def d(self) -> int:
        return self.domain.dim

    @property
    def m(self) -> int:
        return self.amplitudes.shape[1]

    @property
    def field(self) -> str:
        return _amplitude_field(self.amplitudes)

    def total_variation(self) -> float:
        """Total-variation norm: the sum of atom amplitude norms."""
        if self.n_atoms == 0:
            return 0.0
        return float(np.sum(amplitude_norms(self.amplitudes)))

    def pair(self, f: "TestFunction"):
        """Duality pairing ``sum_k (f(y_k), q_k)``.

        In the complex case the inner product conjugates the amplitude slot,
        so the pairing is linear in f and conjugate-linear in the measure.
        """
        if f.m != self.m:
            raise DimensionMismatchError(
                f"test function has m={f.m}, measure has m={self.m}"
            )
        if self.n_atoms == 0:
            return 0j if (self.field == COMPLEX or f.field == COMPLEX) else 0.0
        values = np.asarray(f(self.locations))
        values = values.reshape(self.n_atoms, self.m)
        acc = np.sum(values * np.conj(self.amplitudes))
        if self.field == REAL and f.field == REAL:
            return float(acc.real)
        return complex(acc)

    def support(self) -> np.ndarray:
        """Locations carrying a nonzero amplitude."""
        keep = amplitude_norms(self.amplitudes) > 0.0
        return self.locations[keep]

    def scaled(self, a) -> "DiscreteMeasure":
        amps = a * self.amplitudes
        return DiscreteMeasure(self.domain, self.locations, amps)

    def __add__(self, other: "DiscreteMeasure") -> "DiscreteMeasure":
        return linear_combine(1.0, self, 1.0, other)

    def __sub__(self, other: "DiscreteMeasure") -> "DiscreteMeasure":
        return linear_combine(1.0, self, -1.0, other)

    def __rmul__(self, a) -> "DiscreteMeasure":
        return self.scaled(a)

    def __eq__(self, other):
        if not isinstance(other, DiscreteMeasure):
            return NotImplemented
        return (
            self.domain == other.domain
            and self.field == other.field
            and np.array_equal(self.locations, other.locations)
            and np.array_equal(self.amplitudes, other.amplitudes)
        )


def total_variation(u: DiscreteMeasure) -> float:
    return u.total_variation()


def pair(u: DiscreteMeasure, f: "TestFunction"):
    return u.pair(f)


def _common_field(u: DiscreteMeasure, v: DiscreteMeasure, a, b) -> str:
    if u.field == COMPLEX or v.field == COMPLEX:
        return COMPLEX
    if isinstance(a, complex) or isinstance(b, complex):
        return COMPLEX
    return REAL


def linear_combine(a, u: DiscreteMeasure, b, v: DiscreteMeasure) -> DiscreteMeasure:
    """Form ``a*u + b*v`` by concatenating scaled atom lists.

    Atoms at identical locations are kept separate; use
    :func:`normalize_atoms` to merge them.
    """
    if u.domain != v.domain or u.m != v.m or u.field != v.field:
        raise DimensionMismatchError("linear_combine requires matching d, m and field")
    locs = np.concatenate([u.locations, v.locations], axis=0)
    dtype = complex if _common_field(u, v, a, b) == COMPLEX else float
    amps = np.concatenate(
        [np.asarray(a * u.amplitudes, dtype=dtype), np.asarray(b * v.amplitudes, dtype=dtype)],
        axis=0,
    )
    return DiscreteMeasure(u.domain, locs, amps)


def normalize_atoms(u: DiscreteMeasure, tol: float = 0.0) -> DiscreteMeasure:
    """Merge atoms whose locations coincide within ``tol`` (max-norm).

    Amplitudes of merged atoms are summed; the representative location is the
    first one seen.  Atoms whose merged amplitude norm is <= tol are dropped.
    """
    if tol < 0:
        raise ValueError("tol must be >= 0")
    reps: list[np.ndarray] = []
    sums: list[np.ndarray] = []
    for k in range(u.n_atoms):
        y = u.locations[k]
        q = u.amplitudes[k]
        for i, r in enumerate(reps):
            if np.max(np.abs(y - r)) <= tol:
                sums[i] = sums[i] + q
                break
        else:
            reps.append(y)
            sums.append(q.copy())
    keep = [i for i, q in enumerate(sums) if np.linalg.norm(q) > tol]
    if not keep:
        return DiscreteMeasure.empty(u.domain, m=u.m, field=u.field)
    locs = np.stack([reps[i] for i in keep])
    amps = np.stack([sums[i] for i in keep])
    return DiscreteMeasure(u.domain, locs, amps)


@dataclass(frozen=True)
class TestFunction:
    """Continuous test function on the domain, evaluated in batch.

    ``fn`` maps an (n, d) array of points to an (n, m) array (an (n,)
    array is accepted for m=1).  ``sup_norm`` and ``lipschitz``, when set,
    are bounds over the domain used by diagnostics and tests.
    """

    fn: Callable[[np.ndarray], np.ndarray]
    m: int = 1
    field: str = REAL
    sup_norm: Optional[float] = None
    lipschitz: Optional[float] = None
    name: str = ""

    __test__ = False  # keep pytest from collecting this as a test class

    def __call__(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.asarray(self.fn(pts))
        return out.reshape(pts.shape[0], self.m)


def constant_fn(value=1.0, m: int = 1) -> TestFunction:
    value_arr = np.full(m, value, dtype=complex if isinstance(value, complex) else float)
    fld = COMPLEX if np.iscomplexobj(value_arr) else REAL

    def fn(pts):
        return np.tile(value_arr, (pts.shape[0], 1))

    return TestFunction(
        fn, m=m, field=fld,
        sup_norm=float(np.linalg.norm(value_arr)), lipschitz=0.0,
        name=f"const({value})",
    )


def linear_fn(weights, offset: float = 0.0, domain: Optional[Domain] = None) -> TestFunction:
    """Scalar affine function w . x + offset; sup taken over the box corners."""
    w = np.atleast_1d(np.asarray(weights, dtype=float))

    def fn(pts):
        return pts @ w + offset

    sup = None
    if domain is not None:
        # |w.x + c| is maximized at a corner of the box
        corners = np.array(
            np.meshgrid(*zip(domain.lower, domain.upper), indexing="ij")
        ).reshape(domain.dim, -1).T
        sup = float(np.max(np.abs(corners @ w + offset)))
    return TestFunction(
        fn, m=1, field=REAL, sup_norm=sup,
        lipschitz=float(np.linalg.norm(w)), name="linear",
    )


def sine_fn(freq: float = np.pi, axis: int = 0) -> TestFunction:
    def fn(pts):
        return np.sin(freq * pts[:, axis])

    return TestFunction(
        fn, m=1, field=REAL, sup_norm=1.0, lipschitz=abs(freq), name=f"sin({freq}*x)"
    )


def bump_fn(center, width: float) -> TestFunction:
    """Gaussian bump exp(-|x - center|^2 / (2 width^2))."""
    c = np.atleast_1d(np.asarray(center, dtype=float))

    def fn(pts):
        r2 = np.sum((pts - c) ** 2, axis=1)
        return np.exp(-r2 / (2.0 * width**2))

    return TestFunction(
        fn, m=1, field=REAL, sup_norm=1.0,
        lipschitz=float(np.exp(-0.5) / width), name="bump",
    )
