"""Scikit-learn-style front end for the posterior sampler.

``MeasureInversion`` wraps prior + forward + noise + sampler settings as
estimator parameters: ``fit(z)`` runs the reversible-jump chain on one
observation vector, after which the posterior draws, the chain summary and
the intensity map are available as fitted attributes; ``predict(X)``
evaluates the posterior-mean intensity at query points.  ``get_params`` /
``set_params`` / ``clone`` follow the scikit-learn contract.
"""

from __future__ import annotations

from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .posterior import Posterior
from .sampler import SamplerConfig, intensity_map, posterior_expectation, run_chain
from .validation import check_noise, check_observation, check_random_state


class MeasureInversion(BaseEstimator):
    """Bayesian recovery of a sparse atomic measure from indirect data.

    Parameters mirror :class:`~atombayes.sampler.SamplerConfig`; ``noise``
    may be a scalar variance or a NoiseModel on the (embedded) observation
    space.
    """

    def __init__(
        self,
        prior=None,
        forward=None,
        noise=1.0,
        n_iters: int = 10_000,
        burn_in: int = 1_000,
        thin: int = 1,
        p_birth: float = 0.25,
        p_death: float = 0.25,
        p_move: float = 0.30,
        p_perturb: float = 0.20,
        location_step: Optional[float] = None,
        amplitude_step: Optional[float] = None,
        k_max: Optional[int] = None,
        intensity_grid_n: int = 100,
        random_state=None,
    ):
        self.prior = prior
        self.forward = forward
        self.noise = noise
        self.n_iters = n_iters
        self.burn_in = burn_in
        self.thin = thin
        self.p_birth = p_birth
        self.p_death = p_death
        self.p_move = p_move
        self.p_perturb = p_perturb
        self.location_step = location_step
        self.amplitude_step = amplitude_step
        self.k_max = k_max
        self.intensity_grid_n = intensity_grid_n
        self.random_state = random_state

    def _sampler_config(self) -> SamplerConfig:
        return SamplerConfig(
            n_iters=self.n_iters, burn_in=self.burn_in, thin=self.thin,
            p_birth=self.p_birth, p_death=self.p_death,
            p_move=self.p_move, p_perturb=self.p_perturb,
            location_step=self.location_step,
            amplitude_step=self.amplitude_step,
            k_max=self.k_max,
        )

    def fit(self, z, y=None):
        """Run the chain on the observation vector ``z``; returns self."""
        if self.prior is None or self.forward is None:
            raise ValueError("prior and forward must be set before fitting")
        z = check_observation(z, self.forward)
        noise = check_noise(self.noise, self.forward)
        rng = check_random_state(self.random_state)
        posterior = Posterior(self.prior, self.forward, noise, z)
        result = run_chain(
            posterior, self._sampler_config(), rng,
            intensity_grid_n=self.intensity_grid_n,
        )
        self.posterior_ = posterior
        self.records_ = result.records
        self.summary_ = result.summary
        self.n_records_ = len(result.records)
        return self

    def _check_fitted(self):
        if not hasattr(self, "records_"):
            raise NotFittedError("call fit before using this estimator")

    def predict(self, X) -> np.ndarray:
        """Posterior-mean intensity at query points (Gaussian-smoothed atoms)."""
        self._check_fitted()
        X = np.atleast_2d(np.asarray(X, dtype=float))
        bandwidth = self.summary_["location_step"]
        domain = self.prior.domain
        # reuse the chain's smoothing at arbitrary points
        locs, weights = [], []
        for r in self.records_:
            u = r.measure
            if u.n_atoms:
                locs.append(u.locations)
                weights.append(np.sqrt(np.sum(np.abs(u.amplitudes) ** 2, axis=1)))
        values = np.zeros(X.shape[0])
        if locs:
            locs = np.concatenate(locs)
            w = np.concatenate(weights)
            norm = (2.0 * np.pi * bandwidth**2) ** (domain.dim / 2.0)
            d2 = np.sum((X[:, None, :] - locs[None, :, :]) ** 2, axis=2)
            values = (np.exp(-d2 / (2.0 * bandwidth**2)) / norm) @ w
        return values / max(len(self.records_), 1)

    def sample_measures(self):
        """The thinned posterior draws as DiscreteMeasure objects."""
        self._check_fitted()
        return [r.measure for r in self.records_]

    def expectation(self, statistic: str, f=None):
        """Ergodic estimate of a posterior functional; see posterior_expectation."""
        self._check_fitted()
        return posterior_expectation(self.records_, statistic, f=f)

    def intensity(self, grid_n: Optional[int] = None):
        """(grid, values) of the posterior-mean intensity on a reporting grid."""
        self._check_fitted()
        n = grid_n if grid_n is not None else self.intensity_grid_n
        return intensity_map(
            self.records_, self.prior.domain, self.summary_["location_step"], n
        )

    def log_evidence(self, n_samples: int = 10_000, random_state=None):
        """Monte-Carlo (log Z, SE) for the fitted data vector."""
        self._check_fitted()
        rng = check_random_state(random_state)
        return self.posterior_.estimate_evidence(n_samples, rng)
