"""Kernel-type forward operators mapping measures to observation vectors.

Every operator here is of the form ``u -> integral k[x, y] du(y)`` for a
kernel that is continuous in y on the compact source box, which makes the
map continuous along weak* convergent sequences of measures.  Built-in
kernels: Gaussian convolution (real) and free-space time-harmonic monopole
kernels in 2-d/3-d (complex); arbitrary kernels can be supplied on a grid.

``DiscretizedForward`` wraps any operator with snap-to-nearest-grid-node
evaluation, the approximation family used by the consistency experiments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .bessel import hankel1_0
from .measures import COMPLEX, REAL, DiscreteMeasure, Domain, TestFunction

_LIPSCHITZ_CUSHION = 1.001


class FieldMismatchError(ValueError):
    """Measure amplitudes are incompatible with the operator's output field."""


def sensor_grid(lower, upper, n: int) -> np.ndarray:
    """Product grid of n points per axis spanning [lower, upper], as sensor rows."""
    lo = np.atleast_1d(np.asarray(lower, dtype=float))
    hi = np.atleast_1d(np.asarray(upper, dtype=float))
    axes = [np.linspace(lo[i], hi[i], n) for i in range(lo.size)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


@dataclass(frozen=True, eq=False)
class SensorSet:
    points: np.ndarray

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        if pts.shape[0] < 1:
            raise ValueError("need at least one sensor")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def n_obs(self) -> int:
        return self.points.shape[0]

    def __eq__(self, other):
        if not isinstance(other, SensorSet):
            return NotImplemented
        return np.array_equal(self.points, other.points)


class KernelForward:
    """Base class: linear operator with an (N_o, n, m) kernel tensor."""

    sensors: SensorSet
    output_field: str = REAL
    m: int = 1

    @property
    def n_obs(self) -> int:
        return self.sensors.n_obs

    def kernel_tensor(self, points: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def lipschitz(self) -> float:
        """Bound on |k(x, y) - k(x, y')| / |y - y'| over the source region."""
        raise NotImplementedError

    def _check_measure(self, u: DiscreteMeasure):
        if u.m != self.m:
            raise FieldMismatchError(f"operator expects m={self.m}, measure has m={u.m}")
        if self.output_field == REAL and u.field == COMPLEX:
            raise FieldMismatchError(
                "complex amplitudes are incompatible with a real observation space"
            )

    def apply(self, u: DiscreteMeasure) -> np.ndarray:
        """Observation vector with entries sum_k k(x_i, y_k) q_k."""
        self._check_measure(u)
        dtype = complex if self.output_field == COMPLEX else float
        if u.n_atoms == 0:
            return np.zeros(self.n_obs, dtype=dtype)
        kt = self.kernel_tensor(u.locations)
        return np.einsum("ikj,kj->i", kt, u.amplitudes.astype(dtype))

    def atom_observation(self, location: np.ndarray, amplitude: np.ndarray) -> np.ndarray:
        """Contribution of one atom to the observation vector."""
        kt = self.kernel_tensor(np.atleast_2d(location))
        dtype = complex if self.output_field == COMPLEX else float
        return np.einsum("ij,j->i", kt[:, 0, :], np.atleast_1d(amplitude).astype(dtype))


def apply(fwd: KernelForward, u: DiscreteMeasure) -> np.ndarray:
    return fwd.apply(u)


def apply_batch(fwd: KernelForward, batch) -> np.ndarray:
    """Apply the operator to every draw of a PriorBatch; returns (n_draws, N_o)."""
    dtype = complex if fwd.output_field == COMPLEX else float
    out = np.zeros((batch.n_draws, fwd.n_obs), dtype=dtype)
    if batch.locations.shape[0] == 0:
        return out
    kt = fwd.kernel_tensor(batch.locations)
    contrib = np.einsum("ikj,kj->ki", kt, batch.amplitudes.astype(dtype))
    np.add.at(out, batch.draw_index(), contrib)
    return out


@dataclass(frozen=True, eq=False)
class GaussianKernelForward(KernelForward):
    """Convolution observations k(x, y) = exp(-|x - y|^2 / (2 sigma^2))."""

    sigma: float
    sensors: SensorSet

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if not isinstance(self.sensors, SensorSet):
            object.__setattr__(self, "sensors", SensorSet(self.sensors))

    output_field = REAL
    m = 1

    def kernel_tensor(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(points)
        d2 = np.sum((self.sensors.points[:, None, :] - pts[None, :, :]) ** 2, axis=2)
        return np.exp(-d2 / (2.0 * self.sigma**2))[:, :, None]

    def lipschitz(self) -> float:
        # max_t t e^{-t^2/2} = e^{-1/2}, attained at |x - y| = sigma
        return math.exp(-0.5) / self.sigma

    def __eq__(self, other):
        if not isinstance(other, GaussianKernelForward):
            return NotImplemented
        return self.sigma == other.sigma and self.sensors == other.sensors


def helmholtz_kernel(kappa: float, space_dim: int, x, y) -> complex:
    """Free-space monopole kernel at wavenumber kappa.

    3-d: ``exp(i kappa r) / (4 pi r)``; 2-d: ``(i/4) H0^(1)(kappa r)`` with
    r = |x - y| > 0.
    """
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    r = float(np.linalg.norm(np.asarray(x, dtype=float) - np.asarray(y, dtype=float)))
    if r == 0.0:
        raise ValueError("helmholtz kernel is singular at x = y")
    if space_dim == 3:
        return complex(np.exp(1j * kappa * r) / (4.0 * math.pi * r))
    if space_dim == 2:
        return complex(0.25j * hankel1_0(kappa * r))
    raise ValueError("space_dim must be 2 or 3")


@dataclass(frozen=True, eq=False)
class HelmholtzForward(KernelForward):
    """Pointwise observations of a superposition of time-harmonic monopoles.

    The solution operator is realized by the free-space kernel (see
    :func:`helmholtz_kernel`); sensors must keep a positive distance from
    the source box, which also keeps the kernel smooth in y.
    """

    kappa: float
    sensors: SensorSet
    source_domain: Domain

    output_field = COMPLEX
    m = 1

    def __post_init__(self):
        if self.kappa <= 0:
            raise ValueError("kappa must be positive")
        if not isinstance(self.sensors, SensorSet):
            object.__setattr__(self, "sensors", SensorSet(self.sensors))
        dim = self.source_domain.dim
        if dim not in (2, 3):
            raise ValueError("helmholtz forward requires a 2-d or 3-d source domain")
        if self.sensors.points.shape[1] != dim:
            raise ValueError("sensor dimension must match the source domain")
        r_min = _min_distance_to_box(self.sensors.points, self.source_domain)
        if r_min <= 0:
            raise ValueError("sensors must be disjoint from the source domain")
        object.__setattr__(self, "_r_min", float(r_min))

    @property
    def space_dim(self) -> int:
        return self.source_domain.dim

    @property
    def r_min(self) -> float:
        return self._r_min

    def kernel_tensor(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(points)
        r = np.sqrt(
            np.sum((self.sensors.points[:, None, :] - pts[None, :, :]) ** 2, axis=2)
        )
        if self.space_dim == 3:
            vals = np.exp(1j * self.kappa * r) / (4.0 * math.pi * r)
        else:
            vals = 0.25j * hankel1_0(self.kappa * r)
        return vals[:, :, None]

    def lipschitz(self) -> float:
        """|d kernel / dr| at r_min; the radial derivative modulus decreases in r."""
        if self.space_dim == 3:
            return math.sqrt(1.0 + (self.kappa * self._r_min) ** 2) / (
                4.0 * math.pi * self._r_min**2
            )
        h = self._r_min * 1e-6
        k_plus = 0.25j * hankel1_0(self.kappa * (self._r_min + h))
        k_minus = 0.25j * hankel1_0(self.kappa * (self._r_min - h))
        return abs(k_plus - k_minus) / (2.0 * h) * _LIPSCHITZ_CUSHION

    def __eq__(self, other):
        if not isinstance(other, HelmholtzForward):
            return NotImplemented
        return (
            self.kappa == other.kappa
            and self.sensors == other.sensors
            and self.source_domain == other.source_domain
        )


def _min_distance_to_box(points: np.ndarray, box: Domain) -> float:
    clipped = np.clip(points, box.lower, box.upper)
    return float(np.min(np.linalg.norm(points - clipped, axis=1)))


@dataclass(frozen=True, eq=False)
class TabulatedForward(KernelForward):
    """Kernel given by values on a node grid, evaluated by multilinear interpolation.

    ``values`` has shape (N_o, n_1, ..., n_d, m) on the product grid of
    ``axes`` (one strictly increasing node vector per axis spanning the
    domain).  Supports matrix-valued kernels (m > 1) and complex fields.
    """

    domain: Domain
    axes: tuple
    values: np.ndarray
    sensors: Optional[SensorSet] = None

    def __post_init__(self):
        vals = np.asarray(self.values)
        axes = tuple(np.asarray(a, dtype=float) for a in self.axes)
        if len(axes) != self.domain.dim:
            raise ValueError("one node vector per domain axis required")
        expect = (len(a) for a in axes)
        if vals.ndim != self.domain.dim + 2 or tuple(vals.shape[1:-1]) != tuple(expect):
            raise ValueError("values must have shape (N_o, nodes per axis ..., m)")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "axes", axes)
        if self.sensors is None:
            # placeholder coordinates; the tabulated kernel already fixes geometry
            object.__setattr__(
                self, "sensors", SensorSet(np.zeros((vals.shape[0], self.domain.dim)))
            )
        object.__setattr__(self, "m", int(vals.shape[-1]))
        object.__setattr__(
            self, "output_field", COMPLEX if np.iscomplexobj(vals) else REAL
        )
        flat = np.moveaxis(vals, 0, -2)  # (nodes..., N_o, m)
        interp = RegularGridInterpolator(
            axes, flat.reshape(*[len(a) for a in axes], -1),
            method="linear", bounds_error=False, fill_value=None,
        )
        object.__setattr__(self, "_interp", interp)

    def kernel_tensor(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(points)
        out = self._interp(pts)  # (n, N_o * m)
        out = out.reshape(pts.shape[0], self.n_obs, self.m)
        return np.moveaxis(out, 0, 1)

    def lipschitz(self) -> float:
        """Max nodal difference quotient; exact for multilinear interpolants."""
        lip = 0.0
        for ax in range(self.domain.dim):
            diffs = np.abs(np.diff(self.values, axis=1 + ax))
            steps = np.diff(self.axes[ax])
            shape = [1] * self.values.ndim
            shape[1 + ax] = steps.size
            lip = max(lip, float(np.max(diffs / steps.reshape(shape))))
        return lip


@dataclass(frozen=True, eq=False)
class DiscretizedForward(KernelForward):
    """Snap-to-nearest-grid-node approximation of a kernel operator.

    ``grid_n`` counts subdivisions per axis, so nodes sit at
    ``lower + j * width / grid_n`` (grid_n + 1 nodes per axis) and the snap
    distance is at most half a cell in each coordinate.  Doubling ``grid_n``
    refines nested grids.
    """

    base: KernelForward
    domain: Domain
    grid_n: int

    def __post_init__(self):
        if self.grid_n < 1:
            raise ValueError("grid_n must be >= 1")

    @property
    def sensors(self) -> SensorSet:
        return self.base.sensors

    @property
    def output_field(self) -> str:
        return self.base.output_field

    @property
    def m(self) -> int:
        return self.base.m

    def snap(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(points)
        h = self.domain.widths / self.grid_n
        idx = np.rint((pts - self.domain.lower) / h)
        return self.domain.lower + idx * h

    def snap_radius(self) -> float:
        """Largest possible Euclidean displacement of the snapping map."""
        return 0.5 * float(np.linalg.norm(self.domain.widths / self.grid_n))

    def kernel_tensor(self, points: np.ndarray) -> np.ndarray:
        return self.base.kernel_tensor(self.snap(points))

    def lipschitz(self) -> float:
        return self.base.lipschitz()

    def uniform_error_bound(self, total_variation: float) -> float:
        """Sup-norm bound on (apply - base.apply) over measures of given norm."""
        return self.base.lipschitz() * self.snap_radius() * total_variation

    def __eq__(self, other):
        if not isinstance(other, DiscretizedForward):
            return NotImplemented
        return (
            self.base == other.base
            and self.domain == other.domain
            and self.grid_n == other.grid_n
        )


def apply_discretized(fwd: DiscretizedForward, u: DiscreteMeasure) -> np.ndarray:
    if not isinstance(fwd, DiscretizedForward):
        raise TypeError("apply_discretized expects a DiscretizedForward")
    return fwd.apply(u)


def kernel_column(fwd: KernelForward, sensor_index: int) -> TestFunction:
    """The map y -> k(x_i, y) as a test function (a stock weak*-pairing probe)."""
    if fwd.m != 1:
        raise ValueError("kernel columns are scalar only for m = 1 operators")
    i = int(sensor_index)

    def fn(pts):
        return fwd.kernel_tensor(pts)[i, :, 0]

    sup = 1.0 if isinstance(fwd, GaussianKernelForward) else None
    return TestFunction(
        fn, m=1, field=fwd.output_field, sup_norm=sup,
        lipschitz=fwd.lipschitz(), name=f"kernel_column[{i}]",
    )
