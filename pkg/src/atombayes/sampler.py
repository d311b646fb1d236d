"""Reversible-jump Metropolis-Hastings over atom configurations.

Moves: birth (new atom drawn from the prior's location and mark laws),
death (uniformly chosen atom removed), location random walk (reflected at
the domain boundary) and amplitude random walk.  Because births propose
from the prior and the prior density carries the n! exchangeability factor,
the birth/death acceptance ratio reduces to

    pmf_K(n+1)/pmf_K(n) * p_death(n+1)/p_birth(n) * exp(delta log-lik),

with the location/mark densities and the atom-choice factor cancelling
exactly.  In-place moves are symmetric walks accepted with the unnormalized
posterior ratio.  One chain owns its state and generator; run several
chains with disjoint seed streams for parallelism.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import List, Optional

import numpy as np

from .measures import COMPLEX, DiscreteMeasure, Domain
from .posterior import Posterior
from .priors import (
    PoissonCount,
    UnsupportedLawError,
    default_truncation,
    log_prior_density,
    sample_prior,
)

SCHEMA_VERSION = 1

BIRTH, DEATH, MOVE, PERTURB = "birth", "death", "move_location", "perturb_amplitude"
MOVE_KINDS = (BIRTH, DEATH, MOVE, PERTURB)


def _log(x: float) -> float:
    return math.log(x) if x > 0.0 else -math.inf


@dataclass(frozen=True)
class SamplerConfig:
    """Chain length, move mixture and step sizes.

    ``location_step`` defaults to 5% of the domain diameter and
    ``amplitude_step`` to 10% of the mark coordinate std when left None;
    ``k_max`` defaults to the count law's own cap (or the ~1e-12 Poisson
    truncation point).
    """

    n_iters: int = 10_000
    burn_in: int = 1_000
    thin: int = 1
    p_birth: float = 0.25
    p_death: float = 0.25
    p_move: float = 0.30
    p_perturb: float = 0.20
    location_step: Optional[float] = None
    amplitude_step: Optional[float] = None
    k_max: Optional[int] = None
    seed: Optional[int] = None

    def __post_init__(self):
        probs = (self.p_birth, self.p_death, self.p_move, self.p_perturb)
        if any(p < 0 for p in probs):
            raise ValueError("move probabilities must be nonnegative")
        if abs(sum(probs) - 1.0) > 1e-12:
            raise ValueError("move probabilities must sum to 1")
        if self.n_iters < 0 or self.burn_in < 0:
            raise ValueError("n_iters and burn_in must be >= 0")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")

    def resolve(self, posterior: Posterior) -> "SamplerConfig":
        """Fill in the posterior-dependent defaults."""
        prior = posterior.prior
        loc = self.location_step
        if loc is None:
            loc = 0.05 * prior.domain.diameter()
        amp = self.amplitude_step
        if amp is None:
            amp = 0.1 * prior.mark.coordinate_std()
        k_max = self.k_max
        if k_max is None:
            k_max = prior.count.max_count
            if k_max is None:
                k_max = default_truncation(prior.count.mean())
        return replace(
            self, location_step=float(loc), amplitude_step=float(amp), k_max=int(k_max)
        )


def move_probabilities(n: int, k_max: int, cfg: SamplerConfig):
    """(birth, death, move, perturb) proposal probabilities in state size n.

    At n = 0 all mass goes to birth; at n = k_max the birth mass goes to
    death.  The acceptance ratios use these state-dependent values.
    """
    if k_max == 0:
        return (0.0, 0.0, 0.0, 0.0)
    if n == 0:
        return (1.0, 0.0, 0.0, 0.0)
    if n >= k_max:
        return (0.0, cfg.p_death + cfg.p_birth, cfg.p_move, cfg.p_perturb)
    return (cfg.p_birth, cfg.p_death, cfg.p_move, cfg.p_perturb)


def birth_log_acceptance(count_law, cfg: SamplerConfig, k_max: int, n: int,
                         delta_loglik: float) -> float:
    """Log acceptance ratio for a birth from n to n+1 atoms."""
    pb = move_probabilities(n, k_max, cfg)[0]
    pd_next = move_probabilities(n + 1, k_max, cfg)[1]
    return (
        count_law.log_pmf(n + 1) - count_law.log_pmf(n)
        + _log(pd_next) - _log(pb) + delta_loglik
    )


def death_log_acceptance(count_law, cfg: SamplerConfig, k_max: int, n: int,
                         delta_loglik: float) -> float:
    """Log acceptance ratio for a death from n to n-1 atoms."""
    pd = move_probabilities(n, k_max, cfg)[1]
    pb_prev = move_probabilities(n - 1, k_max, cfg)[0]
    return (
        count_law.log_pmf(n - 1) - count_law.log_pmf(n)
        + _log(pb_prev) - _log(pd) + delta_loglik
    )


@dataclass
class ChainRecord:
    """One persisted draw; log_likelihood is re-evaluable from the measure."""

    iteration: int
    measure: DiscreteMeasure
    log_likelihood: float
    move: str
    accepted: bool


class _State:
    """Mutable chain state with cached observation vector and amplitude norms."""

    __slots__ = ("locations", "amplitudes", "amp_norms", "log_lik", "observed")

    def __init__(self, locations, amplitudes, amp_norms, log_lik, observed):
        self.locations = locations      # list of (d,) arrays
        self.amplitudes = amplitudes    # list of (m,) arrays
        self.amp_norms = amp_norms      # list of floats, |q_k|
        self.log_lik = log_lik
        self.observed = observed        # raw G(u) vector, None for flat posteriors

    @property
    def n(self) -> int:
        return len(self.locations)

    def total_variation(self) -> float:
        return float(sum(self.amp_norms))

    def measure(self, posterior: Posterior) -> DiscreteMeasure:
        prior = posterior.prior
        if self.n == 0:
            return DiscreteMeasure.empty(prior.domain, m=prior.m, field=prior.field)
        return DiscreteMeasure(
            prior.domain, np.array(self.locations), np.array(self.amplitudes)
        )

    @classmethod
    def from_measure(cls, posterior: Posterior, u: DiscreteMeasure) -> "_State":
        if log_prior_density(posterior.prior, u) == -math.inf:
            raise ValueError("state must lie in the prior support")
        obs = None if posterior.is_flat else posterior.forward.apply(u)
        ll = posterior.log_likelihood_obs(obs) if obs is not None else 0.0
        return cls(
            [u.locations[i].copy() for i in range(u.n_atoms)],
            [u.amplitudes[i].copy() for i in range(u.n_atoms)],
            [float(np.linalg.norm(u.amplitudes[i])) for i in range(u.n_atoms)],
            ll, obs,
        )


class _Kernel:
    """Resolved transition kernel: per-count move mixtures and the
    likelihood-free parts of the birth/death log-acceptance ratios,
    precomputed from the same public functions the tests enumerate."""

    __slots__ = (
        "posterior", "prior", "cfg", "k_max", "probs",
        "birth_base", "death_base", "fwd", "complex_marks",
    )

    def __init__(self, posterior: Posterior, cfg: SamplerConfig):
        self.posterior = posterior
        self.prior = posterior.prior
        self.cfg = cfg
        self.k_max = cfg.k_max
        self.fwd = posterior.forward
        self.complex_marks = self.prior.field == COMPLEX
        self.probs = [
            move_probabilities(n, cfg.k_max, cfg) for n in range(cfg.k_max + 1)
        ]
        count = self.prior.count
        self.birth_base = [
            birth_log_acceptance(count, cfg, cfg.k_max, n, 0.0)
            for n in range(cfg.k_max)
        ] + [-math.inf]
        self.death_base = [-math.inf] + [
            death_log_acceptance(count, cfg, cfg.k_max, n, 0.0)
            for n in range(1, cfg.k_max + 1)
        ]


def _ll_from_obs(posterior: Posterior, obs) -> float:
    return 0.0 if posterior.is_flat else posterior.log_likelihood_obs(obs)


def _transition(kernel: _Kernel, st: _State, rng: np.random.Generator):
    """One in-place MH transition; returns (move_tag, accepted)."""
    posterior = kernel.posterior
    prior = kernel.prior
    cfg = kernel.cfg
    n = st.n
    pb, pd, pm, pp = kernel.probs[n]
    if pb + pd + pm + pp == 0.0:
        return "none", False
    r = rng.random()
    fwd = kernel.fwd

    if r < pb:
        y = prior.location.sample_one(rng)
        q = prior.mark.sample_one(rng)
        if st.observed is not None:
            obs_new = st.observed + fwd.atom_observation(y, q)
            ll_new = _ll_from_obs(posterior, obs_new)
        else:
            obs_new, ll_new = None, 0.0
        log_alpha = kernel.birth_base[n] + ll_new - st.log_lik
        if log_alpha >= 0.0 or rng.random() < math.exp(log_alpha):
            st.locations.append(y)
            st.amplitudes.append(q)
            st.amp_norms.append(float(np.linalg.norm(q)))
            st.log_lik, st.observed = ll_new, obs_new
            return BIRTH, True
        return BIRTH, False

    if r < pb + pd:
        j = int(rng.integers(n))
        y, q = st.locations[j], st.amplitudes[j]
        if st.observed is not None:
            obs_new = st.observed - fwd.atom_observation(y, q)
            ll_new = _ll_from_obs(posterior, obs_new)
        else:
            obs_new, ll_new = None, 0.0
        log_alpha = kernel.death_base[n] + ll_new - st.log_lik
        if log_alpha >= 0.0 or rng.random() < math.exp(log_alpha):
            del st.locations[j]
            del st.amplitudes[j]
            del st.amp_norms[j]
            st.log_lik, st.observed = ll_new, obs_new
            return DEATH, True
        return DEATH, False

    if r < pb + pd + pm:
        j = int(rng.integers(n))
        y, q = st.locations[j], st.amplitudes[j]
        y_new = prior.domain.reflect(y + cfg.location_step * rng.standard_normal(y.size))
        delta_loc = float(
            prior.location.log_density(y_new[None])[0]
            - prior.location.log_density(y[None])[0]
        )
        if delta_loc == -math.inf:
            return MOVE, False
        if st.observed is not None:
            obs_new = st.observed + fwd.atom_observation(y_new, q) - fwd.atom_observation(y, q)
            ll_new = _ll_from_obs(posterior, obs_new)
        else:
            obs_new, ll_new = None, 0.0
        log_alpha = delta_loc + ll_new - st.log_lik
        if log_alpha >= 0.0 or rng.random() < math.exp(log_alpha):
            st.locations[j] = y_new
            st.log_lik, st.observed = ll_new, obs_new
            return MOVE, True
        return MOVE, False

    j = int(rng.integers(n))
    y, q = st.locations[j], st.amplitudes[j]
    if kernel.complex_marks:
        eta = rng.standard_normal(q.size) + 1j * rng.standard_normal(q.size)
    else:
        eta = rng.standard_normal(q.size)
    q_new = q + cfg.amplitude_step * eta
    delta_mark = float(
        prior.mark.log_density(q_new[None])[0] - prior.mark.log_density(q[None])[0]
    )
    if delta_mark == -math.inf:
        return PERTURB, False
    if st.observed is not None:
        obs_new = st.observed + fwd.atom_observation(y, q_new - q)
        ll_new = _ll_from_obs(posterior, obs_new)
    else:
        obs_new, ll_new = None, 0.0
    log_alpha = delta_mark + ll_new - st.log_lik
    if log_alpha >= 0.0 or rng.random() < math.exp(log_alpha):
        st.amplitudes[j] = q_new
        st.amp_norms[j] = float(np.linalg.norm(q_new))
        st.log_lik, st.observed = ll_new, obs_new
        return PERTURB, True
    return PERTURB, False


def step(posterior: Posterior, state, cfg: SamplerConfig,
         rng: np.random.Generator, iteration: int = 0):
    """One public MH step from a measure (or prepared state); returns
    (new state, ChainRecord).  The returned state carries cached quantities
    and exposes the measure via ``state.measure(posterior)``."""
    cfg = cfg.resolve(posterior)
    if isinstance(state, DiscreteMeasure):
        state = _State.from_measure(posterior, state)
    kernel = _Kernel(posterior, cfg)
    move, accepted = _transition(kernel, state, rng)
    record = ChainRecord(
        iteration, state.measure(posterior), state.log_lik, move, accepted
    )
    return state, record


def _initial_state(posterior: Posterior, cfg: SamplerConfig,
                   rng: np.random.Generator) -> _State:
    for _ in range(1000):
        u = sample_prior(posterior.prior, rng)
        if u.n_atoms <= cfg.k_max:
            return _State.from_measure(posterior, u)
    raise RuntimeError("could not draw an initial state below k_max")


@dataclass
class ChainResult:
    records: List[ChainRecord]
    summary: dict


def run_chain(
    posterior: Posterior,
    cfg: SamplerConfig,
    rng: Optional[np.random.Generator] = None,
    chain_path=None,
    intensity_grid_n: int = 100,
    keep_records: bool = True,
) -> ChainResult:
    """Run one chain; returns thinned post-burn-in records plus a summary.

    The summary reports per-move acceptance rates, the atom-count histogram,
    mean count/total variation, the effective sample size of the
    log-likelihood trace and a Gaussian-smoothed posterior-mean intensity
    map (bandwidth = location step).  Cached quantities are recomputed
    exactly at every record, so stored log-likelihoods are re-evaluable.
    ``keep_records=False`` drops the per-draw measures (long chains where
    only the summary matters).
    """
    if not posterior.prior.weights.is_unit:
        raise UnsupportedLawError("the sampler requires a unit-weight prior")
    cfg = cfg.resolve(posterior)
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    if chain_path is not None and not keep_records:
        raise ValueError("writing a chain file requires keep_records=True")
    st = _initial_state(posterior, cfg, rng)
    proposed = {k: 0 for k in MOVE_KINDS}
    accepted = {k: 0 for k in MOVE_KINDS}
    records: List[ChainRecord] = []
    ks: List[int] = []
    tvs: List[float] = []
    lls: List[float] = []
    atom_locs: List[np.ndarray] = []
    atom_weights: List[np.ndarray] = []
    flat = posterior.is_flat
    kernel = _Kernel(posterior, cfg)
    total = cfg.burn_in + cfg.n_iters
    for i in range(total):
        move, ok = _transition(kernel, st, rng)
        if move in proposed:
            proposed[move] += 1
            accepted[move] += ok
        j = i - cfg.burn_in
        if j >= 0 and (j % cfg.thin) == cfg.thin - 1:
            n = st.n
            ks.append(n)
            tvs.append(st.total_variation())
            if not flat:
                # refresh caches from scratch so the stored value is exact
                u = st.measure(posterior)
                st.observed = posterior.forward.apply(u)
                st.log_lik = posterior.log_likelihood_obs(st.observed)
            lls.append(st.log_lik)
            if intensity_grid_n > 0 and n:
                atom_locs.append(np.array(st.locations))
                atom_weights.append(np.array(st.amp_norms))
            if keep_records:
                records.append(
                    ChainRecord(i, st.measure(posterior), st.log_lik, move, bool(ok))
                )
    summary = _summarize(
        posterior, cfg, proposed, accepted,
        np.array(ks, dtype=int), np.array(tvs), np.array(lls),
        atom_locs, atom_weights, intensity_grid_n,
    )
    if chain_path is not None:
        from . import io as _io

        _io.write_chain(chain_path, records)
    return ChainResult(records, summary)


def _summarize(posterior, cfg, proposed, accepted, ks, tvs, lls,
               atom_locs, atom_weights, intensity_grid_n) -> dict:
    domain = posterior.prior.domain
    summary = {
        "schema_version": SCHEMA_VERSION,
        "n_iters": cfg.n_iters,
        "burn_in": cfg.burn_in,
        "thin": cfg.thin,
        "k_max": cfg.k_max,
        "location_step": cfg.location_step,
        "amplitude_step": cfg.amplitude_step,
        "n_records": int(ks.size),
        "insufficient_samples": bool(ks.size == 0),
        "acceptance": {
            k: (accepted[k] / proposed[k] if proposed[k] else None)
            for k in MOVE_KINDS
        },
    }
    if isinstance(posterior.prior.count, PoissonCount):
        # bias of capping the chain at k_max, in prior mass
        from scipy import stats as _stats

        summary["k_cap_mass"] = float(
            1.0 - _stats.poisson.cdf(cfg.k_max, posterior.prior.count.mean())
        )
    if ks.size == 0:
        return summary
    hist = np.bincount(ks, minlength=cfg.k_max + 1)
    summary["k_hist"] = [int(c) for c in hist]
    summary["mean_k"] = float(ks.mean())
    summary["mean_tv"] = float(tvs.mean())
    summary["mean_loglik"] = float(lls.mean())
    summary["ess_loglik"] = float(effective_sample_size(lls))
    if intensity_grid_n > 0:
        grid, values = _intensity_from_atoms(
            atom_locs, atom_weights, ks.size, domain, cfg.location_step,
            intensity_grid_n,
        )
        summary["intensity"] = {
            "grid_n": intensity_grid_n,
            "lower": [float(x) for x in domain.lower],
            "upper": [float(x) for x in domain.upper],
            "bandwidth": cfg.location_step,
            "values": [float(v) for v in values],
        }
    return summary


def intensity_map(records, domain: Domain, bandwidth: float, grid_n: int = 100):
    """Posterior-mean intensity: amplitude-norm-weighted Gaussian smoothing
    of the atom locations on the reporting grid.  Returns (grid, values)."""
    locs, weights = [], []
    for r in records:
        u = r.measure
        if u.n_atoms:
            locs.append(u.locations)
            weights.append(np.sqrt(np.sum(np.abs(u.amplitudes) ** 2, axis=1)))
    return _intensity_from_atoms(
        locs, weights, max(len(records), 1), domain, bandwidth, grid_n
    )


def _intensity_from_atoms(locs, weights, n_records, domain, bandwidth, grid_n):
    grid = domain.grid(grid_n)
    values = np.zeros(grid.shape[0])
    if locs:
        locs = np.concatenate(locs)
        weights = np.concatenate(weights)
        norm = (2.0 * math.pi * bandwidth**2) ** (domain.dim / 2.0)
        # chunked to bound memory on long chains
        for a in range(0, locs.shape[0], 65536):
            chunk = locs[a: a + 65536]
            w = weights[a: a + 65536]
            d2 = np.sum((grid[:, None, :] - chunk[None, :, :]) ** 2, axis=2)
            values += (np.exp(-d2 / (2.0 * bandwidth**2)) / norm) @ w
    return grid, values / n_records


def integrated_autocorr_time(x) -> float:
    """Geyer initial-positive-sequence estimate of the autocorrelation time."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 4:
        return 1.0
    x = x - x.mean()
    var = float(x @ x) / n
    if var == 0.0:
        return 1.0
    nfft = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(x, nfft)
    acov = np.fft.irfft(f * np.conjugate(f), nfft)[:n] / n
    rho = acov / acov[0]
    tau = -1.0
    for k in range(0, n // 2 - 1):
        gamma = rho[2 * k] + rho[2 * k + 1]
        if gamma <= 0.0:
            break
        tau += 2.0 * gamma
    return max(tau, 1.0)


def effective_sample_size(x) -> float:
    x = np.asarray(x, dtype=float)
    return x.size / integrated_autocorr_time(x)


def posterior_expectation(records, statistic, f=None):
    """Ergodic average with an autocorrelation-corrected standard error.

    ``statistic`` is one of ``"mean_K"``, ``"mean_tv"`` or ``"pair"`` (with
    a test function ``f``).  Returns (estimate, se).
    """
    if not records:
        raise ValueError("empty chain")
    if statistic == "mean_K":
        series = np.array([r.measure.n_atoms for r in records], dtype=float)
    elif statistic == "mean_tv":
        series = np.array([r.measure.total_variation() for r in records])
    elif statistic == "pair":
        if f is None:
            raise ValueError("statistic 'pair' needs a test function")
        vals = [r.measure.pair(f) for r in records]
        if any(isinstance(v, complex) for v in vals):
            re = np.array([complex(v).real for v in vals])
            im = np.array([complex(v).imag for v in vals])
            se = math.hypot(_series_se(re), _series_se(im))
            return complex(re.mean(), im.mean()), se
        series = np.array(vals, dtype=float)
    else:
        raise ValueError(f"unknown statistic {statistic!r}")
    return float(series.mean()), _series_se(series)


def _series_se(series: np.ndarray) -> float:
    n = series.size
    if n < 2:
        return math.inf
    tau = integrated_autocorr_time(series)
    return float(series.std(ddof=1)) * math.sqrt(tau / n)
