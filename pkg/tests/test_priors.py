import math

import numpy as np
import pytest
from scipy import stats

from atombayes import (
    ClosedFormUnavailable,
    ComplexGaussianMark,
    DiscreteMeasure,
    Domain,
    FixedCount,
    GaussianMark,
    LogNormalMark,
    PointLocation,
    PoissonCount,
    PriorSpec,
    TruncatedPoissonCount,
    UniformLocations,
    UnsupportedLawError,
    geometric_weights,
    log_prior_density,
    prior_mean_tv,
    sample_prior,
    sample_prior_batch,
    summability_report,
)
from atombayes.priors import DensityLocations

UNIT = Domain([0.0], [1.0])


def lognormal_prior(gamma=2.0, mu=0.0, sigma2=0.25):
    return PriorSpec(
        PoissonCount(gamma), UniformLocations(UNIT), LogNormalMark(mu, sigma2)
    )


class TestSampling:
    def test_fixed_zero_always_empty(self):
        spec = PriorSpec(FixedCount(0), UniformLocations(UNIT), LogNormalMark())
        rng = np.random.default_rng(0)
        for _ in range(20):
            assert sample_prior(spec, rng).n_atoms == 0

    def test_poisson_empty_fraction_matches_pmf_at_zero(self):
        # P(K = 0) = exp(-gamma) for the Poisson count law
        spec = lognormal_prior(gamma=2.0)
        n = 100_000
        batch = sample_prior_batch(spec, n, np.random.default_rng(1))
        frac = float(np.mean(batch.counts == 0))
        p = math.exp(-2.0)
        se = math.sqrt(p * (1 - p) / n)
        assert abs(frac - p) <= 3 * se

    def test_fixed_count_three_positive_amplitudes(self):
        spec = PriorSpec(
            FixedCount(3), UniformLocations(UNIT), LogNormalMark(0.0, 0.25)
        )
        rng = np.random.default_rng(2)
        for _ in range(50):
            u = sample_prior(spec, rng)
            assert u.n_atoms == 3
            assert np.all(u.amplitudes > 0)
            assert np.all(UNIT.contains(u.locations))

    def test_deterministic_given_seed(self):
        spec = lognormal_prior()
        u1 = sample_prior(spec, np.random.default_rng(42))
        u2 = sample_prior(spec, np.random.default_rng(42))
        assert u1 == u2

    def test_batch_counts_match_single_draw_law(self):
        spec = lognormal_prior(gamma=1.5)
        batch = sample_prior_batch(spec, 200_000, np.random.default_rng(3))
        assert batch.counts.mean() == pytest.approx(1.5, abs=0.02)
        assert batch.offsets[-1] == batch.counts.sum()
        u5 = batch.measure(5)
        assert u5.n_atoms == batch.counts[5]

    def test_complex_marks(self):
        spec = PriorSpec(
            FixedCount(2),
            UniformLocations(UNIT),
            ComplexGaussianMark(0j, 1.0, 0j),
        )
        u = sample_prior(spec, np.random.default_rng(4))
        assert u.field == "complex"
        assert u.amplitudes.shape == (2, 1)


class TestMomentIdentity:
    """Mean total variation factors as E[K] * E|Q| (independent count/marks)."""

    def test_poisson_lognormal_closed_form(self):
        spec = lognormal_prior(gamma=2.0, mu=0.0, sigma2=0.25)
        assert prior_mean_tv(spec) == pytest.approx(2.0 * math.exp(0.125), rel=1e-12)

    def test_poisson_lognormal_monte_carlo(self):
        spec = lognormal_prior(gamma=2.0, mu=0.0, sigma2=0.25)
        n = 100_000
        tvs = sample_prior_batch(spec, n, np.random.default_rng(5)).total_variations()
        se = tvs.std(ddof=1) / math.sqrt(n)
        assert abs(tvs.mean() - prior_mean_tv(spec)) <= 4 * se

    def test_fixed_gaussian_half_normal(self):
        spec = PriorSpec(
            FixedCount(5), UniformLocations(UNIT), GaussianMark([0.0], [[1.0]])
        )
        expected = 5.0 * math.sqrt(2.0 / math.pi)
        assert prior_mean_tv(spec) == pytest.approx(expected, rel=1e-12)
        n = 100_000
        tvs = sample_prior_batch(spec, n, np.random.default_rng(6)).total_variations()
        se = tvs.std(ddof=1) / math.sqrt(n)
        assert abs(tvs.mean() - expected) <= 4 * se

    def test_fixed_zero_gives_zero(self):
        spec = PriorSpec(FixedCount(0), UniformLocations(UNIT), LogNormalMark())
        assert prior_mean_tv(spec) == 0.0

    def test_circular_complex_rayleigh_mean(self):
        spec = PriorSpec(
            PoissonCount(1.0), UniformLocations(UNIT), ComplexGaussianMark(0j, 2.0)
        )
        expected = 1.0 * 0.5 * math.sqrt(math.pi * 2.0)
        assert prior_mean_tv(spec) == pytest.approx(expected, rel=1e-12)
        tvs = sample_prior_batch(spec, 100_000, np.random.default_rng(7)).total_variations()
        se = tvs.std(ddof=1) / math.sqrt(tvs.size)
        assert abs(tvs.mean() - expected) <= 4 * se

    def test_no_closed_form_raises(self):
        spec = PriorSpec(
            PoissonCount(1.0),
            UniformLocations(UNIT),
            GaussianMark([1.0], [[1.0]]),  # noncentral: no elementary E|Q|
        )
        with pytest.raises(ClosedFormUnavailable):
            prior_mean_tv(spec)


class TestLogPriorDensity:
    def test_empty_measure_poisson(self):
        spec = lognormal_prior(gamma=2.0)
        u = DiscreteMeasure.empty(UNIT)
        assert log_prior_density(spec, u) == pytest.approx(-2.0)

    def test_single_standard_normal_atom(self):
        spec = PriorSpec(
            FixedCount(1), UniformLocations(UNIT), GaussianMark([0.0], [[1.0]])
        )
        u = DiscreteMeasure(UNIT, [[0.5]], [[0.0]])
        assert log_prior_density(spec, u) == pytest.approx(-0.5 * math.log(2 * math.pi))

    def test_off_support_amplitude(self):
        spec = lognormal_prior()
        u = DiscreteMeasure(UNIT, [[0.5]], [[-1.0]])  # lognormal support is (0, inf)
        assert log_prior_density(spec, u) == -math.inf

    def test_wrong_count_is_minus_inf(self):
        spec = PriorSpec(FixedCount(2), UniformLocations(UNIT), LogNormalMark())
        u = DiscreteMeasure(UNIT, [[0.5]], [[1.0]])
        assert log_prior_density(spec, u) == -math.inf

    def test_exchangeability(self):
        spec = lognormal_prior()
        rng = np.random.default_rng(8)
        u = DiscreteMeasure(UNIT, rng.random((4, 1)), rng.lognormal(size=(4, 1)))
        base = log_prior_density(spec, u)
        for _ in range(5):
            perm = rng.permutation(4)
            v = DiscreteMeasure(UNIT, u.locations[perm], u.amplitudes[perm])
            assert log_prior_density(spec, v) == pytest.approx(base, rel=1e-13)

    def test_includes_count_factorial_and_densities(self):
        spec = lognormal_prior(gamma=2.0)
        u = DiscreteMeasure(UNIT, [[0.2], [0.6]], [[1.0], [2.0]])
        mark = LogNormalMark(0.0, 0.25)
        expected = (
            PoissonCount(2.0).log_pmf(2)
            + math.log(2)
            + float(np.sum(mark.log_density(u.amplitudes)))
        )
        assert log_prior_density(spec, u) == pytest.approx(expected, rel=1e-13)

    def test_weighted_prior_not_density_representable(self):
        spec = PriorSpec(
            PoissonCount(2.0), UniformLocations(UNIT), LogNormalMark(),
            geometric_weights(0.5, 10),
        )
        with pytest.raises(UnsupportedLawError):
            log_prior_density(spec, sample_prior(spec, np.random.default_rng(0)))


class TestSamplerDensityCoherence:
    def test_chi_square_on_joint_grid(self):
        # histogram of (y, q) draws against cellwise integrals of
        # exp(log_prior_density) for a single-atom prior, 10x10 grid, 1% level
        spec = PriorSpec(
            FixedCount(1), UniformLocations(UNIT), GaussianMark([0.0], [[1.0]])
        )
        n = 50_000
        batch = sample_prior_batch(spec, n, np.random.default_rng(9))
        ys = batch.locations[:, 0]
        qs = batch.amplitudes[:, 0]
        q_lo, q_hi = -3.0, 3.0
        keep = (qs >= q_lo) & (qs < q_hi)
        ys, qs = ys[keep], qs[keep]
        edges_y = np.linspace(0.0, 1.0, 11)
        edges_q = np.linspace(q_lo, q_hi, 11)
        observed, _, _ = np.histogram2d(ys, qs, bins=[edges_y, edges_q])

        # expected cell masses by fine midpoint quadrature of the density
        sub = 40
        probs = np.zeros((10, 10))
        for i in range(10):
            for j in range(10):
                yy = np.linspace(edges_y[i], edges_y[i + 1], sub + 1)[:-1]
                yy = yy + (edges_y[i + 1] - edges_y[i]) / (2 * sub)
                qq = np.linspace(edges_q[j], edges_q[j + 1], sub + 1)[:-1]
                qq = qq + (edges_q[j + 1] - edges_q[j]) / (2 * sub)
                ym, qm = np.meshgrid(yy, qq, indexing="ij")
                dens = np.array([
                    math.exp(log_prior_density(
                        spec, DiscreteMeasure(UNIT, [[y]], [[q]])
                    ))
                    for y, q in zip(ym.ravel(), qm.ravel())
                ])
                cell_area = (edges_y[i + 1] - edges_y[i]) * (
                    edges_q[j + 1] - edges_q[j]
                )
                probs[i, j] = dens.mean() * cell_area
        probs /= probs.sum()
        expected = probs * ys.size
        stat = float(np.sum((observed - expected) ** 2 / expected))
        pvalue = stats.chi2.sf(stat, df=observed.size - 1)
        assert pvalue > 0.01


class TestWeights:
    def test_truncated_sampler_caps_atom_count(self):
        spec = PriorSpec(
            PoissonCount(5.0), UniformLocations(UNIT), LogNormalMark(),
            geometric_weights(0.5, 3),
        )
        rng = np.random.default_rng(10)
        for _ in range(50):
            assert sample_prior(spec, rng).n_atoms <= 3

    def test_weights_scale_amplitudes(self):
        spec = PriorSpec(
            FixedCount(2), UniformLocations(UNIT), LogNormalMark(0.0, 1e-12),
            geometric_weights(0.5, 5),
        )
        u = sample_prior(spec, np.random.default_rng(11))
        # marks are ~1 (tiny variance); weights are 1, 1/2
        assert u.amplitudes[0, 0] == pytest.approx(1.0, abs=1e-4)
        assert u.amplitudes[1, 0] == pytest.approx(0.5, abs=1e-4)

    def test_summability_tail_bound_geometric(self):
        # unit-mean marks, w_k = 2^-k: reported tail <= 2 * 2^-k_max
        k_max = 12
        mark = LogNormalMark(-0.125, 0.25)  # mean exp(mu + s2/2) = 1
        spec = PriorSpec(
            PoissonCount(3.0), UniformLocations(UNIT), mark,
            geometric_weights(0.5, k_max, scale=1.0),
        )
        report = summability_report(spec)
        assert report.mean_norm == pytest.approx(1.0, rel=1e-12)
        assert report.tail_bound <= 2.0 * 2.0 ** -k_max + 1e-15
        assert report.head < math.inf

    def test_unit_weight_report_rejected(self):
        with pytest.raises(UnsupportedLawError):
            summability_report(lognormal_prior())


class TestCountLaws:
    def test_truncated_poisson_pmf_normalized(self):
        law = TruncatedPoissonCount(2.0, 15)
        total = sum(math.exp(law.log_pmf(k)) for k in range(16))
        assert total == pytest.approx(1.0, rel=1e-12)
        assert law.log_pmf(16) == -math.inf
        assert law.truncated_mass < 1e-8

    def test_truncated_poisson_default_cap(self):
        law = TruncatedPoissonCount(4.0)
        assert law.k_max == math.ceil(4.0 + 10 * 2.0)
        assert law.truncated_mass < 1e-11

    def test_truncated_poisson_sampler_matches_pmf(self):
        law = TruncatedPoissonCount(2.0, 6)
        draws = law.sample_batch(100_000, np.random.default_rng(12))
        assert draws.max() <= 6
        freq0 = np.mean(draws == 0)
        p0 = math.exp(law.log_pmf(0))
        assert abs(freq0 - p0) <= 4 * math.sqrt(p0 * (1 - p0) / draws.size)

    def test_poisson_pmf_against_scipy(self):
        law = PoissonCount(2.7)
        ks = np.arange(12)
        ours = np.array([law.log_pmf(int(k)) for k in ks])
        ref = stats.poisson.logpmf(ks, 2.7)
        assert np.allclose(ours, ref, rtol=1e-12)


class TestLocationLaws:
    def test_point_location_degenerate(self):
        law = PointLocation(UNIT, [0.3])
        pts = law.sample(4, np.random.default_rng(0))
        assert np.all(pts == 0.3)
        assert law.log_density(np.array([[0.3]]))[0] == 0.0
        assert law.log_density(np.array([[0.31]]))[0] == -math.inf

    def test_density_law_normalization_checked(self):
        with pytest.raises(ValueError, match="integrates"):
            DensityLocations(
                UNIT,
                density=lambda pts: np.full(pts.shape[0], 2.0),
                sampler=lambda n, rng: rng.random((n, 1)),
            )

    def test_density_law_tilted(self):
        # g(y) = 2y on [0, 1], sampled by inverse CDF sqrt(U)
        law = DensityLocations(
            UNIT,
            density=lambda pts: 2.0 * pts[:, 0],
            sampler=lambda n, rng: np.sqrt(rng.random((n, 1))),
        )
        pts = law.sample(200_000, np.random.default_rng(13))
        assert pts.mean() == pytest.approx(2.0 / 3.0, abs=0.005)
        assert law.log_density(np.array([[0.5]]))[0] == pytest.approx(math.log(1.0))


class TestMarkLaws:
    def test_gaussian_log_density_matches_scipy(self):
        mark = GaussianMark([0.5, -1.0], [[2.0, 0.3], [0.3, 1.0]])
        rng = np.random.default_rng(14)
        q = mark.sample(100, rng)
        ref = stats.multivariate_normal(mark.mean, mark.cov).logpdf(q)
        assert np.allclose(mark.log_density(q), ref, rtol=1e-10)

    def test_lognormal_log_density_matches_scipy(self):
        mark = LogNormalMark(0.3, 0.5)
        q = np.linspace(0.05, 5.0, 40)[:, None]
        ref = stats.lognorm.logpdf(q[:, 0], math.sqrt(0.5), scale=math.exp(0.3))
        assert np.allclose(mark.log_density(q), ref, rtol=1e-10)

    def test_complex_gaussian_relation_shapes_covariance(self):
        mark = ComplexGaussianMark(1.0 + 2.0j, 2.0, 0.5 + 0.5j)
        q = mark.sample(400_000, np.random.default_rng(15))[:, 0]
        assert np.mean(q).real == pytest.approx(1.0, abs=0.01)
        assert np.mean(q).imag == pytest.approx(2.0, abs=0.01)
        centered = q - np.mean(q)
        assert np.mean(np.abs(centered) ** 2) == pytest.approx(2.0, abs=0.02)
        rel = np.mean(centered**2)
        assert rel.real == pytest.approx(0.5, abs=0.02)
        assert rel.imag == pytest.approx(0.5, abs=0.02)

    def test_complex_gaussian_invalid_relation(self):
        with pytest.raises(ValueError):
            ComplexGaussianMark(0j, 1.0, 2.0 + 0j)
