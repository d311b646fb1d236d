"""Bayesian inversion for sparse atomic measures.

Discrete vector measures with point-process priors, kernel forward
operators, Gaussian likelihoods, reversible-jump posterior sampling and
Monte-Carlo Hellinger diagnostics, plus a config-driven CLI
(``atombayes run <config.json>``).
"""

from .measures import (
    COMPLEX,
    REAL,
    DiscreteMeasure,
    Domain,
    TestFunction,
    bump_fn,
    constant_fn,
    linear_combine,
    linear_fn,
    normalize_atoms,
    pair,
    sine_fn,
    total_variation,
)
from .priors import (
    ClosedFormUnavailable,
    ComplexGaussianMark,
    DensityLocations,
    FixedCount,
    GaussianMark,
    LogNormalMark,
    PointLocation,
    PoissonCount,
    PriorSpec,
    SequenceWeights,
    TruncatedPoissonCount,
    UniformLocations,
    UnitWeights,
    UnsupportedLawError,
    geometric_weights,
    log_prior_density,
    prior_mean_tv,
    sample_prior,
    sample_prior_batch,
    summability_report,
)
from .forward import (
    DiscretizedForward,
    GaussianKernelForward,
    HelmholtzForward,
    SensorSet,
    TabulatedForward,
    apply,
    apply_batch,
    apply_discretized,
    helmholtz_kernel,
    kernel_column,
    sensor_grid,
)
from .posterior import (
    NoiseModel,
    Posterior,
    estimate_evidence,
    log_likelihood,
    log_posterior_unnorm,
)
from .sampler import (
    ChainRecord,
    ChainResult,
    SamplerConfig,
    effective_sample_size,
    integrated_autocorr_time,
    intensity_map,
    posterior_expectation,
    run_chain,
    step,
)
from .diagnostics import (
    HellingerEstimate,
    consistency_curve,
    empirical_charfun,
    hellinger,
    poisson_charfun_closed_form,
    stability_curve,
    top_peaks,
)
from .cli import Scenario, generate_scenario, load_scenario, save_scenario
from .estimator import MeasureInversion
from .seeding import substream

__version__ = "0.1.0"
