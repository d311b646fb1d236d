"""Input validation helpers shared by the estimator, CLI and posteriors."""

from __future__ import annotations

from numbers import Integral
from typing import Union

import numpy as np

from .measures import COMPLEX, Domain
from .posterior import NoiseModel


def check_random_state(seed: Union[None, int, np.random.Generator]) -> np.random.Generator:
    """Coerce None / int / Generator into a numpy Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None or isinstance(seed, Integral):
        return np.random.default_rng(seed if seed is None else int(seed))
    raise TypeError(f"cannot build a random generator from {seed!r}")


def check_observation(z, forward) -> np.ndarray:
    """Validate a data vector against a forward operator's output space."""
    z = np.atleast_1d(np.asarray(z))
    if z.ndim != 1:
        raise ValueError("observation vector must be one-dimensional")
    if np.iscomplexobj(z) and forward.output_field != COMPLEX:
        raise ValueError("complex data with a real-valued forward operator")
    if z.size != forward.n_obs:
        raise ValueError(
            f"observation vector has length {z.size}, operator produces {forward.n_obs}"
        )
    if not np.all(np.isfinite(np.abs(z))):
        raise ValueError("observation vector must be finite")
    return z


def check_noise(noise, forward) -> NoiseModel:
    """Coerce a scalar variance or NoiseModel to match the (embedded) space."""
    n = forward.n_obs * (2 if forward.output_field == COMPLEX else 1)
    if isinstance(noise, NoiseModel):
        if noise.n_obs != n:
            raise ValueError(
                f"noise model covers {noise.n_obs} coordinates, expected {n}"
            )
        return noise
    variance = float(noise)
    return NoiseModel.iso(variance, n)


def check_points_in_domain(points, domain: Domain) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[1] != domain.dim:
        raise ValueError(f"points must have dimension {domain.dim}")
    if not np.all(domain.contains(pts)):
        raise ValueError("points must lie inside the domain")
    return pts
