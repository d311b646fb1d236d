"""Gaussian likelihood, unnormalized posterior density and evidence.

The posterior has density ``L(z|u) / Z(z)`` with respect to the prior,
with ``L(z|u) = exp(-0.5 |Sigma^{-1/2}(G(u) - z)|^2)``, so ``0 < L <= 1``
everywhere.  All computation is carried out in log space; the evidence
``Z(z)`` is estimated by prior-sampling Monte Carlo with log-sum-exp.

Complex observation vectors are identified with real vectors of twice the
length (real parts stacked before imaginary parts); the noise covariance is
always expressed on that real embedding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import solve_triangular

from .forward import apply_batch
from .measures import COMPLEX, DiscreteMeasure
from .priors import PriorBatch, PriorSpec, log_prior_density, sample_prior_batch


def embed_observation(v: np.ndarray) -> np.ndarray:
    """Identify C^n with R^2n: real parts first, imaginary parts second."""
    v = np.atleast_1d(np.asarray(v))
    if np.iscomplexobj(v):
        return np.concatenate([v.real, v.imag])
    return v.astype(float)


def embed_rows(obs: np.ndarray) -> np.ndarray:
    if np.iscomplexobj(obs):
        return np.concatenate([obs.real, obs.imag], axis=1)
    return obs.astype(float)


@dataclass(frozen=True, eq=False)
class NoiseModel:
    """Centered Gaussian noise with SPD covariance on the (real) observation space."""

    cov: np.ndarray

    def __post_init__(self):
        cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        if cov.shape[0] != cov.shape[1]:
            raise ValueError("covariance must be square")
        if not np.allclose(cov, cov.T):
            raise ValueError("covariance must be symmetric")
        try:
            chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError as exc:
            raise ValueError("covariance must be positive definite") from exc
        cov.setflags(write=False)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "_chol", chol)

    @classmethod
    def iso(cls, variance: float, n_obs: int) -> "NoiseModel":
        if variance <= 0:
            raise ValueError("variance must be positive")
        return cls(variance * np.eye(n_obs))

    @property
    def n_obs(self) -> int:
        return self.cov.shape[0]

    def whiten(self, v: np.ndarray) -> np.ndarray:
        """Sigma^{-1/2} v via the cached Cholesky factor."""
        return solve_triangular(self._chol, np.asarray(v, dtype=float), lower=True)

    def whiten_rows(self, rows: np.ndarray) -> np.ndarray:
        return solve_triangular(self._chol, rows.T, lower=True).T

    def sample(self, rng: np.random.Generator, size: Optional[int] = None) -> np.ndarray:
        if size is None:
            return self._chol @ rng.standard_normal(self.n_obs)
        return rng.standard_normal((size, self.n_obs)) @ self._chol.T

    def __eq__(self, other):
        if not isinstance(other, NoiseModel):
            return NotImplemented
        return np.array_equal(self.cov, other.cov)


@dataclass(frozen=True, eq=False)
class Posterior:
    """Prior, forward operator, noise model and one data vector.

    With ``noise=None`` (and then ``forward=None, data=None`` allowed) the
    likelihood is identically one, which makes the posterior equal the
    prior; this is the flat-likelihood configuration used by sampler
    validation.
    """

    prior: PriorSpec
    forward: Optional[object] = None
    noise: Optional[NoiseModel] = None
    data: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.noise is None:
            if self.data is not None:
                raise ValueError("data without a noise model")
            return
        if self.forward is None:
            raise ValueError("a noise model requires a forward operator")
        if self.data is None:
            raise ValueError("a noise model requires a data vector")
        z = np.atleast_1d(np.asarray(self.data))
        z_emb = embed_observation(z)
        expected = self.forward.n_obs * (2 if self.forward.output_field == COMPLEX else 1)
        if z_emb.size != expected or self.noise.n_obs != expected:
            raise ValueError(
                f"embedded data/noise dimension must be {expected}, "
                f"got data {z_emb.size} and noise {self.noise.n_obs}"
            )
        z_emb.setflags(write=False)
        object.__setattr__(self, "data", z)
        object.__setattr__(self, "_z_emb", z_emb)

    @classmethod
    def flat(cls, prior: PriorSpec) -> "Posterior":
        """Posterior with likelihood identically 1 (equals the prior)."""
        return cls(prior)

    @property
    def is_flat(self) -> bool:
        return self.noise is None

    def with_data(self, z: np.ndarray) -> "Posterior":
        return Posterior(self.prior, self.forward, self.noise, z)

    def log_likelihood(self, u: DiscreteMeasure) -> float:
        """-0.5 |Sigma^{-1/2}(G(u) - z)|^2; always finite and <= 0."""
        if self.is_flat:
            return 0.0
        return self.log_likelihood_obs(self.forward.apply(u))

    def log_likelihood_obs(self, observed: np.ndarray) -> float:
        """Log-likelihood from an already-computed observation vector."""
        if self.is_flat:
            return 0.0
        w = self.noise.whiten(embed_observation(observed) - self._z_emb)
        return -0.5 * float(w @ w)

    def log_posterior_unnorm(self, u: DiscreteMeasure) -> float:
        lp = log_prior_density(self.prior, u)
        if lp == -math.inf:
            return -math.inf
        return lp + self.log_likelihood(u)

    def batch_log_likelihood(self, batch: PriorBatch) -> np.ndarray:
        if self.is_flat:
            return np.zeros(batch.n_draws)
        obs = apply_batch(self.forward, batch)
        return self.batch_log_likelihood_obs(obs)

    def batch_log_likelihood_obs(self, obs: np.ndarray) -> np.ndarray:
        if self.is_flat:
            return np.zeros(obs.shape[0])
        r = embed_rows(obs) - self._z_emb
        w = self.noise.whiten_rows(r)
        return -0.5 * np.sum(w * w, axis=1)

    def estimate_evidence(self, n_samples: int, rng: np.random.Generator):
        """Monte-Carlo log-evidence and its delta-method standard error."""
        if n_samples < 2:
            raise ValueError("n_samples must be >= 2")
        batch = sample_prior_batch(self.prior, n_samples, rng)
        ll = self.batch_log_likelihood(batch)
        return log_mean_exp_with_se(ll)


def log_mean_exp_with_se(log_values: np.ndarray):
    """log(mean(exp(x))) with the delta-method SE of the log estimate."""
    x = np.asarray(log_values, dtype=float)
    n = x.size
    peak = float(np.max(x))
    w = np.exp(x - peak)
    mean_w = float(np.mean(w))
    log_est = peak + math.log(mean_w)
    se = float(np.std(w, ddof=1)) / (mean_w * math.sqrt(n))
    return log_est, se


def log_likelihood(p: Posterior, u: DiscreteMeasure) -> float:
    return p.log_likelihood(u)


def log_posterior_unnorm(p: Posterior, u: DiscreteMeasure) -> float:
    return p.log_posterior_unnorm(u)


def estimate_evidence(p: Posterior, n_samples: int, rng: np.random.Generator):
    return p.estimate_evidence(n_samples, rng)
