import numpy as np
import pytest
from scipy.stats import kstest, kurtosis, spearmanr

from estim.core import RngStream
from estim.errors import BadDof, DegenerateField, GridTooLarge, NonStationary
from estim.simulators import (
    BrownResnickParams,
    BrownResnickSampler,
    GpSampler,
    Grid2D,
    SvolParams,
    empirical_semivariogram,
    fit_powexp,
    powexp_cov,
    sim_ar1,
    sim_brown_resnick,
    sim_gaussian_iid,
    sim_gp,
    sim_svol,
    sim_svol_latent,
)
from estim.simulators.basic import standardized_t


class TestGaussianIid:
    def test_vanishing_noise_pins_values_to_mean(self):
        x = sim_gaussian_iid(0.7, -30.0, 50, RngStream(1))
        assert np.all(np.abs(x - 0.7) < 1e-5)

    def test_log_sample_variance_concentrates(self):
        x = sim_gaussian_iid(1.0, 1.0, 10**6, RngStream(2))
        assert abs(np.log(x.var()) - 1.0) < 0.01

    def test_paper_shape(self):
        x = sim_gaussian_iid(1.0, 1.0, 20, RngStream(3))
        assert x.shape == (20,)

    def test_deterministic(self):
        a = sim_gaussian_iid(0.0, 0.0, 10, RngStream(4, 5))
        b = sim_gaussian_iid(0.0, 0.0, 10, RngStream(4, 5))
        assert np.array_equal(a, b)


def lag1_autocorr(x):
    x = x - x.mean()
    return float(x[1:] @ x[:-1] / (x @ x))


class TestAr1:
    def test_white_noise_when_rho_zero(self):
        t = 40_000
        x = sim_ar1(0.0, t, RngStream(5))
        assert abs(lag1_autocorr(x)) < 4 / np.sqrt(t)

    def test_autocorrelation_matches_rho(self):
        x = sim_ar1(0.9, 10**5, RngStream(6))
        assert abs(lag1_autocorr(x) - 0.9) < 0.02

    def test_stationary_variance(self):
        x = sim_ar1(0.9, 10**5, RngStream(7))
        assert x.var() == pytest.approx(1.0 / (1.0 - 0.81), rel=0.05)

    def test_nonstationary_raises(self):
        with pytest.raises(NonStationary):
            sim_ar1(1.0, 100, RngStream(1))

    def test_stationarity_under_doubling(self):
        # single-time marginal moments unchanged when T doubles
        a = sim_ar1(0.8, 20_000, RngStream(8))
        b = sim_ar1(0.8, 40_000, RngStream(9))
        stat_sd = np.sqrt(1 / (1 - 0.64))
        assert abs(a.var() - b.var()) < 5 * stat_sd**2 / np.sqrt(20_000 / 10)


class TestSvol:
    def test_degenerate_ar_gives_white_latent(self):
        p = SvolParams(rho=0.0, nu=8.0, sigma=0.4)
        h = sim_svol_latent(p, 10**5, RngStream(10), scaled=False)
        assert h.var() == pytest.approx(0.16, rel=0.05)

    def test_latent_stationary_variance(self):
        p = SvolParams(rho=0.8, nu=6.0, sigma=0.1)
        h = sim_svol_latent(p, 10**6, RngStream(11), scaled=False)
        assert h.var() == pytest.approx(0.01 / (1 - 0.64), rel=0.05)

    def test_t_limit_is_gaussian(self):
        eps = standardized_t(1e6, 10**6, RngStream(12).generator())
        assert abs(kurtosis(eps)) < 0.1

    def test_scaled_series_has_unit_variance(self):
        p = SvolParams(rho=0.8, nu=6.0, sigma=0.1)
        x = sim_svol(p, 4 * 10**5, RngStream(13), scaled=True)
        assert x.var() == pytest.approx(1.0, rel=0.06)
        h = sim_svol_latent(p, 4 * 10**5, RngStream(14), scaled=True)
        assert h.var() == pytest.approx(1.0, rel=0.05)

    def test_bad_dof(self):
        with pytest.raises(BadDof):
            sim_svol(SvolParams(rho=0.5, nu=2.0), 10, RngStream(1))

    def test_nonstationary(self):
        with pytest.raises(NonStationary):
            sim_svol(SvolParams(rho=1.2, nu=6.0), 10, RngStream(1))


class TestGp:
    def test_small_range_decorrelates_sites(self):
        grid = Grid2D(4, 4)
        sampler = GpSampler(grid, alpha=1e-3, eta=1.0)
        fields = sampler.draw(RngStream(15), 4000)
        corr = np.corrcoef(fields[:, 0], fields[:, 1])[0, 1]
        assert abs(corr) < 0.05

    def test_unit_marginal_variance(self):
        grid = Grid2D(5, 5)
        fields = GpSampler(grid, alpha=2.0, eta=1.0).draw(RngStream(16), 10**4)
        assert np.allclose(fields.var(axis=0), 1.0, atol=0.06)

    def test_correlation_at_unit_distance(self):
        grid = Grid2D(5, 5)
        fields = GpSampler(grid, alpha=2.0, eta=1.0).draw(RngStream(17), 10**4)
        # sites 0 and 1 are one unit apart (same row of the grid)
        emp = np.corrcoef(fields[:, 0], fields[:, 1])[0, 1]
        assert abs(emp - np.exp(-0.5)) < 0.05

    def test_single_draw_shape(self):
        assert sim_gp(Grid2D(3, 4), 1.5, 1.2, RngStream(18)).shape == (12,)


class TestBrownResnick:
    def setup_method(self):
        self.grid = Grid2D(8, 8)
        self.params = BrownResnickParams(lam=6.2, nu=1.0)

    def test_strictly_positive_and_deterministic(self):
        s = BrownResnickSampler(self.params, self.grid)
        f1 = s.draw(RngStream(19))
        f2 = s.draw(RngStream(19))
        assert np.array_equal(f1, f2)
        assert (f1 > 0).all()

    def test_unit_frechet_margin(self):
        s = BrownResnickSampler(self.params, self.grid)
        vals = s.draw_many(RngStream(20), 2000)[:, 21]
        res = kstest(vals, lambda x: np.exp(-1.0 / x))
        assert res.pvalue > 0.01

    def test_max_stability_at_a_site(self):
        s = BrownResnickSampler(self.params, self.grid)
        k, n = 800, 5
        site = 13
        maxima = np.empty(k)
        for i in range(k):
            grp = np.array([s.draw(RngStream(21).child(i, j))[site] for j in range(n)])
            maxima[i] = grp.max() / n
        res = kstest(maxima, lambda x: np.exp(-1.0 / x))
        assert res.pvalue > 0.01

    def test_dependence_increases_with_range(self):
        grid = Grid2D(4, 4)
        rhos = []
        for lam in (0.5, 8.0):
            s = BrownResnickSampler(BrownResnickParams(lam, 1.0), grid)
            fields = np.log(s.draw_many(RngStream(22).child(str(lam)), 1000))
            rho, _ = spearmanr(fields[:, 0], fields[:, 1])  # adjacent sites
            rhos.append(rho)
        assert rhos[1] > rhos[0]

    def test_grid_cap(self):
        with pytest.raises(GridTooLarge):
            sim_brown_resnick(self.params, Grid2D(80, 80), RngStream(1))

    def test_budget_warns(self):
        with pytest.warns(UserWarning, match="budget"):
            sim_brown_resnick(
                self.params, self.grid, RngStream(23), max_extremal_draws=3
            )

    def test_paper_configuration_runs(self):
        field = sim_brown_resnick(
            BrownResnickParams(6.2, 1.0), Grid2D(6, 6), RngStream(24)
        )
        assert field.shape == (36,) and np.isfinite(field).all()


class TestFitPowexp:
    def test_recovers_range_from_gp_fields(self):
        grid = Grid2D(30, 30)
        fields = GpSampler(grid, alpha=5.0, eta=1.0).draw(RngStream(25), 100)
        fit = fit_powexp(fields, grid)
        assert abs(fit.alpha - 5.0) / 5.0 < 0.2

    def test_constant_field_degenerate(self):
        grid = Grid2D(4, 4)
        with pytest.raises(DegenerateField):
            fit_powexp(np.ones((3, 16)), grid)

    def test_white_noise_hits_lower_bound(self):
        # flat-at-sill variogram: the fitted range collapses to the bottom
        # of the search range, far below the smallest binned lag
        grid = Grid2D(10, 10)
        fields = RngStream(26).generator().standard_normal((200, 100))
        fit = fit_powexp(fields, grid)
        alpha_lo = 0.01 * grid.spacing
        assert fit.alpha <= 5 * alpha_lo
        assert powexp_cov(1.0, fit.alpha, fit.eta) < 0.01  # no correlation at lag 1

    def test_semivariogram_caps_lag(self):
        grid = Grid2D(10, 10)
        fields = GpSampler(grid, 2.0, 1.0).draw(RngStream(27), 20)
        h, gamma, counts = empirical_semivariogram(fields, grid)
        assert h.max() <= 0.5 * grid.diameter()
        assert (counts > 0).all() and gamma.shape == h.shape

    def test_powexp_cov_values(self):
        assert powexp_cov(0.0, 2.0, 1.0) == 1.0
        assert powexp_cov(2.0, 2.0, 1.0) == pytest.approx(np.exp(-1.0))
