import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from atombayes import (
    Domain,
    GaussianKernelForward,
    LogNormalMark,
    MeasureInversion,
    NoiseModel,
    PoissonCount,
    PriorSpec,
    SensorSet,
    UniformLocations,
    sensor_grid,
)

UNIT = Domain([0.0], [1.0])


def make_estimator(**kw):
    prior = PriorSpec(
        PoissonCount(2.0), UniformLocations(UNIT), LogNormalMark(0.0, 0.25)
    )
    fwd = GaussianKernelForward(0.08, SensorSet(sensor_grid([0.0], [1.0], 15)))
    defaults = dict(
        prior=prior, forward=fwd, noise=0.01,
        n_iters=8_000, burn_in=1_000, thin=4, random_state=0,
    )
    defaults.update(kw)
    return MeasureInversion(**defaults)


def truth_data(fwd, locations=(0.25, 0.75), amps=(1.2, 0.9)):
    from atombayes import DiscreteMeasure

    u = DiscreteMeasure(UNIT, [[y] for y in locations], [[a] for a in amps])
    return u, fwd.apply(u)


class TestSklearnContract:
    def test_get_set_params_round_trip(self):
        est = make_estimator()
        params = est.get_params()
        assert params["n_iters"] == 8_000
        est.set_params(n_iters=123)
        assert est.n_iters == 123

    def test_clone(self):
        est = make_estimator()
        twin = clone(est)
        assert twin.get_params().keys() == est.get_params().keys()
        assert twin.prior == est.prior
        assert twin.n_iters == est.n_iters

    def test_not_fitted_errors(self):
        est = make_estimator()
        with pytest.raises(NotFittedError):
            est.predict(np.array([[0.5]]))
        with pytest.raises(NotFittedError):
            est.expectation("mean_K")

    def test_fit_returns_self(self):
        est = make_estimator(n_iters=500, burn_in=50)
        _, z = truth_data(est.forward)
        assert est.fit(z) is est
        assert est.n_records_ == len(est.records_)


class TestValidation:
    def test_wrong_length_rejected(self):
        est = make_estimator()
        with pytest.raises(ValueError, match="length"):
            est.fit(np.zeros(3))

    def test_complex_data_on_real_operator_rejected(self):
        est = make_estimator()
        with pytest.raises(ValueError, match="complex"):
            est.fit(np.zeros(15, dtype=complex))

    def test_noise_model_dimension_checked(self):
        est = make_estimator(noise=NoiseModel.iso(0.01, 3))
        with pytest.raises(ValueError, match="coordinates"):
            est.fit(np.zeros(15))

    def test_missing_components(self):
        est = MeasureInversion()
        with pytest.raises(ValueError, match="prior and forward"):
            est.fit(np.zeros(3))


class TestFitQuality:
    def test_intensity_peaks_near_truth(self):
        est = make_estimator(n_iters=20_000, burn_in=3_000, thin=5)
        u, z = truth_data(est.forward)
        rng = np.random.default_rng(1)
        est.fit(z + 0.02 * rng.standard_normal(z.size))
        grid, values = est.intensity(grid_n=200)
        from atombayes import top_peaks

        peaks = top_peaks(grid, values, 2)
        dists = [min(abs(p[0] - y) for y in (0.25, 0.75)) for p in peaks]
        step = est.summary_["location_step"]
        assert all(d <= 2 * step for d in dists)

    def test_predict_matches_intensity_on_grid(self):
        est = make_estimator(n_iters=2_000, burn_in=200)
        _, z = truth_data(est.forward)
        est.fit(z)
        grid, values = est.intensity(grid_n=50)
        direct = est.predict(grid)
        assert np.allclose(direct, values, rtol=1e-10)

    def test_expectation_and_evidence(self):
        est = make_estimator(n_iters=4_000, burn_in=500)
        _, z = truth_data(est.forward)
        est.fit(z)
        mean_k, se = est.expectation("mean_K")
        assert mean_k > 0 and se > 0
        log_z, ev_se = est.log_evidence(5_000, random_state=2)
        assert np.isfinite(log_z) and ev_se > 0
        measures = est.sample_measures()
        assert len(measures) == est.n_records_
