import math

import numpy as np
import pytest
from scipy import stats

from atombayes import (
    Domain,
    FixedCount,
    GaussianKernelForward,
    GaussianMark,
    LogNormalMark,
    NoiseModel,
    PoissonCount,
    Posterior,
    PriorSpec,
    SensorSet,
    UniformLocations,
    bump_fn,
    consistency_curve,
    constant_fn,
    empirical_charfun,
    hellinger,
    kernel_column,
    linear_fn,
    poisson_charfun_closed_form,
    sensor_grid,
    sine_fn,
    stability_curve,
)
from atombayes.diagnostics import local_maxima, top_peaks
from tests_support_conjugate import conjugate_problem, gaussian_hellinger

UNIT = Domain([0.0], [1.0])


def toy_posterior(z, variance=0.05, gamma=2.0):
    prior = PriorSpec(
        PoissonCount(gamma), UniformLocations(UNIT), LogNormalMark(0.0, 0.25)
    )
    fwd = GaussianKernelForward(0.15, SensorSet(sensor_grid([0.0], [1.0], 6)))
    noise = NoiseModel.iso(variance, 6)
    return Posterior(prior, fwd, noise, np.asarray(z, dtype=float))


class TestHellinger:
    def test_identical_posteriors_exact_zero(self):
        p = toy_posterior(np.full(6, 0.4))
        est = hellinger(p, p, 2000, 0)
        assert est.value == 0.0
        assert est.std_error == 0.0
        assert est.n_samples == 2000

    def test_flat_likelihoods_zero(self):
        prior = PriorSpec(PoissonCount(1.0), UniformLocations(UNIT), LogNormalMark())
        est = hellinger(Posterior.flat(prior), Posterior.flat(prior), 500, 1)
        assert est.value == 0.0

    def test_requires_shared_prior(self):
        p1 = toy_posterior(np.zeros(6), gamma=2.0)
        p2 = toy_posterior(np.zeros(6), gamma=3.0)
        with pytest.raises(ValueError, match="prior"):
            hellinger(p1, p2, 100, 0)

    def test_symmetry_under_shared_seed(self):
        p1 = toy_posterior(np.full(6, 0.2))
        p2 = p1.with_data(np.full(6, 0.5))
        a = hellinger(p1, p2, 5000, 7)
        b = hellinger(p2, p1, 5000, 7)
        assert a.value == b.value
        assert a.common_seed == b.common_seed == 7

    def test_bounds(self):
        rng = np.random.default_rng(2)
        p = toy_posterior(np.zeros(6))
        for _ in range(10):
            p2 = p.with_data(rng.normal(scale=2.0, size=6))
            est = hellinger(p, p2, 2000, rng)
            assert 0.0 <= est.value <= 1.0

    def test_conjugate_gaussian_closed_form(self):
        # two data values for the same conjugate problem: Hellinger between
        # the two Gaussian amplitude posteriors has a closed form, itself
        # cross-checked by quadrature here
        post1, m1, v1 = conjugate_problem(z_value=0.9)
        post2, m2, v2 = conjugate_problem(z_value=0.4)
        expected = gaussian_hellinger(m1, math.sqrt(v1), m2, math.sqrt(v2))

        q = np.linspace(-10, 10, 400_001)
        pdf1 = stats.norm.pdf(q, m1, math.sqrt(v1))
        pdf2 = stats.norm.pdf(q, m2, math.sqrt(v2))
        d2_quad = 0.5 * np.trapezoid((np.sqrt(pdf1) - np.sqrt(pdf2)) ** 2, q)
        assert expected == pytest.approx(math.sqrt(d2_quad), rel=1e-8)

        est = hellinger(post1, post2, 100_000, 3)
        assert est.value == pytest.approx(expected, abs=4 * est.std_error)
        assert est.std_error < 0.01

    def test_triangle_inequality_independent_seeds(self):
        rng = np.random.default_rng(4)
        base = toy_posterior(np.zeros(6))
        for _ in range(5):
            zs = [rng.normal(scale=0.8, size=6) for _ in range(3)]
            ps = [base.with_data(z) for z in zs]
            d12 = hellinger(ps[0], ps[1], 20_000, rng)
            d23 = hellinger(ps[1], ps[2], 20_000, rng)
            d13 = hellinger(ps[0], ps[2], 20_000, rng)
            slack = 8 * max(d12.std_error, d23.std_error, d13.std_error)
            assert d13.value <= d12.value + d23.value + slack


class TestEmpiricalCharfun:
    def test_zero_function_gives_one(self):
        spec = PriorSpec(PoissonCount(2.0), UniformLocations(UNIT), LogNormalMark())
        est, se = empirical_charfun(spec, constant_fn(0.0), 1000, 0)
        assert est == 1.0 + 0.0j
        assert se == 0.0

    def test_empty_prior_gives_one(self):
        spec = PriorSpec(FixedCount(0), UniformLocations(UNIT), LogNormalMark())
        est, _ = empirical_charfun(spec, sine_fn(), 500, 1)
        assert est == 1.0 + 0.0j

    def test_modulus_bound(self):
        spec = PriorSpec(
            PoissonCount(3.0), UniformLocations(UNIT), GaussianMark([0.5], [[2.0]])
        )
        for f in (constant_fn(1.0), sine_fn(7.0), bump_fn([0.2], 0.05)):
            est, se = empirical_charfun(spec, f, 20_000, 2)
            assert abs(est) <= 1.0 + 4 * se


class TestPoissonCharfunClosedForm:
    def test_zero_function(self):
        spec = PriorSpec(
            PoissonCount(1.0), UniformLocations(UNIT), GaussianMark([0.0], [[1.0]])
        )
        assert poisson_charfun_closed_form(spec, constant_fn(0.0)) == pytest.approx(1.0)

    def test_vanishing_intensity(self):
        spec = PriorSpec(
            PoissonCount(1e-12), UniformLocations(UNIT), GaussianMark([0.0], [[1.0]])
        )
        val = poisson_charfun_closed_form(spec, sine_fn())
        assert val == pytest.approx(1.0, abs=1e-11)

    def test_reference_value_constant_function(self):
        # Pois(1), uniform locations, standard normal marks, f = 1:
        # exp(E[e^{iQ}] - 1) = exp(e^{-1/2} - 1)
        spec = PriorSpec(
            PoissonCount(1.0), UniformLocations(UNIT), GaussianMark([0.0], [[1.0]])
        )
        val = poisson_charfun_closed_form(spec, constant_fn(1.0))
        expected = math.exp(math.exp(-0.5) - 1.0)
        assert val.real == pytest.approx(expected, rel=1e-10)
        assert val.imag == pytest.approx(0.0, abs=1e-12)

    def test_matches_compound_poisson_identity(self):
        # for constant f = t the closed form must equal exp(gamma (phi_Q(t)-1))
        spec = PriorSpec(
            PoissonCount(2.5), UniformLocations(UNIT), GaussianMark([0.3], [[0.7]])
        )
        for t in (0.5, 1.0, 2.0):
            val = poisson_charfun_closed_form(spec, constant_fn(t))
            phi = np.exp(1j * 0.3 * t - 0.5 * 0.7 * t * t)
            assert val == pytest.approx(np.exp(2.5 * (phi - 1.0)), rel=1e-10)

    def test_against_empirical_all_stock_functions(self):
        spec = PriorSpec(
            PoissonCount(1.5), UniformLocations(UNIT), GaussianMark([0.2], [[0.8]])
        )
        fwd = GaussianKernelForward(0.2, SensorSet([[0.35]]))
        fns = [
            constant_fn(1.0),
            linear_fn([1.0], 0.0, domain=UNIT),
            sine_fn(math.pi),
            bump_fn([0.5], 0.2),
            kernel_column(fwd, 0),
        ]
        for i, f in enumerate(fns):
            closed = poisson_charfun_closed_form(spec, f, quad_n=96)
            est, se = empirical_charfun(spec, f, 200_000, 10 + i)
            assert abs(est - closed) <= 4 * se

    def test_lognormal_marks_by_quadrature(self):
        spec = PriorSpec(
            PoissonCount(1.0), UniformLocations(UNIT), LogNormalMark(0.0, 0.25)
        )
        f = constant_fn(1.0)
        closed = poisson_charfun_closed_form(spec, f, quad_n=64)
        est, se = empirical_charfun(spec, f, 300_000, 5)
        assert abs(est - closed) <= 4 * se

    def test_rejects_non_poisson(self):
        from atombayes import UnsupportedLawError

        spec = PriorSpec(FixedCount(2), UniformLocations(UNIT), LogNormalMark())
        with pytest.raises(UnsupportedLawError):
            poisson_charfun_closed_form(spec, constant_fn(1.0))


class TestStabilityCurve:
    def test_unperturbed_entries_exactly_zero(self):
        p = toy_posterior(np.full(6, 0.3))
        z = np.asarray(p.data)
        perturbations = [z, z + 0.5 * np.eye(6)[0], z]
        curve = stability_curve(p, perturbations, 3000, 11)
        assert curve[0][0] == 0.0 and curve[0][1].value == 0.0
        assert curve[2][1].value == 0.0
        assert curve[1][1].value > 0.0

    def test_harmonic_curve_trend(self):
        p = toy_posterior(np.full(6, 0.3), variance=0.04)
        z = np.asarray(p.data)
        e1 = np.eye(6)[0]
        perturbations = [z + e1 / k for k in range(1, 9)]
        curve = stability_curve(p, perturbations, 40_000, 12)
        values = [est.value for _, est in curve]
        ses = [est.std_error for _, est in curve]
        for a, b, sa, sb in zip(values, values[1:], ses, ses[1:]):
            assert b <= a + 4 * math.hypot(sa, sb)
        assert values[-1] < values[0] / 4


class TestConsistencyCurve:
    def test_atom_free_prior_all_zero(self):
        prior = PriorSpec(FixedCount(0), UniformLocations(UNIT), LogNormalMark())
        fwd = GaussianKernelForward(0.15, SensorSet(sensor_grid([0.0], [1.0], 6)))
        p = Posterior(prior, fwd, NoiseModel.iso(0.05, 6), np.zeros(6))
        curve = consistency_curve(p, [2, 4, 8], 500, 13)
        assert all(est.value == 0.0 for _, est in curve)

    def test_fine_grid_at_noise_floor(self):
        p = toy_posterior(np.full(6, 0.3))
        curve = consistency_curve(p, [2**20], 20_000, 14)
        _, est = curve[0]
        assert est.value <= 1e-4

    def test_doubling_grids_decrease(self):
        p = toy_posterior(np.full(6, 0.3), variance=0.04)
        curve = consistency_curve(p, [4, 16, 64, 256], 40_000, 15)
        values = [est.value for _, est in curve]
        assert values[-1] < 0.01 + 4 * curve[-1][1].std_error
        assert values[0] > values[-1]

    def test_rejects_discretized_exact_operator(self):
        from atombayes import DiscretizedForward

        p = toy_posterior(np.full(6, 0.3))
        disc = DiscretizedForward(p.forward, UNIT, 8)
        p_disc = Posterior(p.prior, disc, p.noise, p.data)
        with pytest.raises(ValueError):
            consistency_curve(p_disc, [4, 8], 100, 0)


class TestPeaks:
    def test_local_maxima_interior_only(self):
        v = np.array([0.0, 2.0, 1.0, 3.0, 0.5, 0.2])
        assert list(local_maxima(v)) == [1, 3]

    def test_top_peaks_ordering(self):
        grid = np.linspace(0, 1, 101)[:, None]
        values = (
            np.exp(-0.5 * ((grid[:, 0] - 0.3) / 0.05) ** 2) * 2.0
            + np.exp(-0.5 * ((grid[:, 0] - 0.7) / 0.05) ** 2)
        )
        peaks = top_peaks(grid, values, 2)
        assert peaks.shape == (2, 1)
        assert peaks[0, 0] == pytest.approx(0.3, abs=0.011)
        assert peaks[1, 0] == pytest.approx(0.7, abs=0.011)
