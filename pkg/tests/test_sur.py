import math

import numpy as np
import pytest
from scipy import integrate

from surkit import (DegenerateFitError, DomainError, GevParams,
                    MonotonicityError, SurCurve, UnreachablePercentileError,
                    empirical_sur, fit_sur_lsq, gev_cdf, gev_median,
                    gev_quantile, jnd_pmf, p_jnd, p_sur, sur_from_params,
                    sur_lsq_residual)


def _random_params(rng):
    return GevParams(xi=rng.uniform(-0.6, 0.6), mu=rng.uniform(8, 45),
                     sigma=rng.uniform(2, 15))


# ---------------------------------------------------------------------------
# Curve construction


def test_sur_from_params_is_qf_cdf_at_reflected_level():
    p = GevParams(xi=0.09, mu=20.20, sigma=6.86)
    c = sur_from_params(p)
    for y in (1, 13, 50, 79, 100):
        assert c.values[y - 1] == pytest.approx(gev_cdf(101.0 - y, p), abs=1e-12)


def test_sur_from_params_matches_level_axis_density_integration():
    # the level-axis density is the QF density reflected at 101; integrating
    # it numerically must reproduce the sampled complementary CDF
    from surkit import gev_pdf
    p = GevParams(xi=0.18, mu=21.30, sigma=5.36)
    c = sur_from_params(p)
    for y in (20, 60, 78, 95):
        val, _ = integrate.quad(lambda s: gev_pdf(101.0 - s, p), y, np.inf, limit=300)
        assert c.values[y - 1] == pytest.approx(val, abs=1e-8)


def test_sur_curve_nonincreasing_for_many_random_params():
    rng = np.random.default_rng(1)
    for _ in range(500):
        c = sur_from_params(_random_params(rng))
        assert np.all(np.diff(c.values) <= 0)


def test_sur_support_entirely_below_qf_range_gives_all_ones():
    # negative shape whose QF support ends below QF 1: every level's SUR is
    # the CDF above the right support endpoint, i.e. nobody ever notices
    # within the level range
    p = GevParams(xi=-0.5, mu=-30.0, sigma=10.0)
    c = sur_from_params(p)
    assert np.all(c.values == 1.0)


def test_sur_value_at_convention():
    c = sur_from_params(GevParams(xi=0.1, mu=20.0, sigma=7.0))
    assert c.value_at(0.5) == 1.0
    assert c.value_at(1.0) == c.values[0]
    assert c.value_at(55.7) == c.values[54]
    assert c.value_at(1000.0) == c.values[-1]


def test_empirical_sur_is_sample_ccdf():
    c = empirical_sur([3, 3, 5, 10], n_levels=12)
    assert c.value_at(2) == pytest.approx(1.0)
    assert c.value_at(3) == pytest.approx(0.5)
    assert c.value_at(9) == pytest.approx(0.25)
    assert c.value_at(10) == 0.0


def test_curve_validation():
    with pytest.raises(DomainError):
        SurCurve(n_levels=3, values=np.array([0.5, 0.6]), source="analytic")
    with pytest.raises(MonotonicityError):
        SurCurve(n_levels=3, values=np.array([0.5, 0.8, 0.2]), source="analytic")
    with pytest.raises(DomainError):
        SurCurve(n_levels=2, values=np.array([0.5, 1.7]), source="empirical")


# ---------------------------------------------------------------------------
# Discrete JND distribution


def test_jnd_pmf_hand_step_function():
    c = SurCurve(n_levels=4, values=np.array([1.0, 1.0, 0.5, 0.0]), source="empirical")
    pmf = jnd_pmf(c)
    assert np.allclose(pmf.mass, [0.0, 0.0, 0.5, 0.5])
    assert pmf.tail == 0.0


def test_jnd_pmf_telescopes_to_one():
    rng = np.random.default_rng(2)
    for _ in range(50):
        pmf = jnd_pmf(sur_from_params(_random_params(rng)))
        assert pmf.total() == pytest.approx(1.0, abs=1e-9)
        assert np.all(pmf.mass >= -1e-15)


def test_jnd_pmf_rejects_nonmonotone():
    c = SurCurve(n_levels=3, values=np.array([0.2, 0.9, 0.1]), source="empirical")
    with pytest.raises(MonotonicityError):
        jnd_pmf(c)


def test_jnd_pmf_mean_matches_monte_carlo():
    p = GevParams(xi=0.09, mu=20.20, sigma=6.86)
    pmf = jnd_pmf(sur_from_params(p))
    rng = np.random.default_rng(77)
    qf = gev_quantile(rng.uniform(size=200_000), p)
    # discretized level: JND = n when qf falls in (100-n, 101-n]
    levels = np.clip(np.ceil(101.0 - qf), 1, 101)
    mc_mean = float(np.mean(levels))
    se = float(np.std(levels) / math.sqrt(levels.size))
    assert pmf.mean_level() == pytest.approx(mc_mean, abs=3.5 * se)


# ---------------------------------------------------------------------------
# Percentile extraction


def test_p_jnd_fixture_rows():
    assert p_jnd(sur_from_params(GevParams(xi=0.18, mu=21.30, sigma=5.36)), 50) == 78
    assert p_jnd(sur_from_params(GevParams(xi=0.09, mu=20.20, sigma=6.86)), 50) == 79


def test_p_jnd_equals_ceiling_of_reflected_median():
    rng = np.random.default_rng(4)
    for _ in range(1000):
        p = _random_params(rng)
        c = sur_from_params(p)
        # brute-force scan of the step function
        cdf = 1.0 - c.values
        scan = next((n for n in range(1, 101) if cdf[n - 1] >= 0.5), None)
        closed = math.ceil(101.0 - gev_median(p))
        if scan is None:
            continue
        assert scan == p_jnd(c, 50)
        assert scan == min(max(closed, 1), 100)


def test_p_jnd_matches_exhaustive_scan_any_percent():
    rng = np.random.default_rng(5)
    for _ in range(200):
        c = sur_from_params(_random_params(rng))
        pct = rng.uniform(5, 95)
        want = next((n for n in range(1, 101) if 1 - c.values[n - 1] >= pct / 100), None)
        if want is None:
            with pytest.raises(UnreachablePercentileError):
                p_jnd(c, pct)
        else:
            assert p_jnd(c, pct) == want


def test_p_jnd_validates_percent_and_reachability():
    c = sur_from_params(GevParams(xi=0.1, mu=20.0, sigma=7.0))
    with pytest.raises(DomainError):
        p_jnd(c, 0.0)
    with pytest.raises(DomainError):
        p_jnd(c, 100.0)
    flat = SurCurve(n_levels=5, values=np.ones(5), source="empirical")
    with pytest.raises(UnreachablePercentileError):
        p_jnd(flat, 50)


def test_p_sur_hand_cases():
    c = SurCurve(n_levels=4, values=np.array([1.0, 0.8, 0.74, 0.2]), source="empirical")
    assert p_sur(c, 75) == 2
    exact = SurCurve(n_levels=4, values=np.array([1.0, 0.9, 0.75, 0.2]), source="empirical")
    assert p_sur(exact, 75) == 3  # >= is inclusive at the boundary
    low = SurCurve(n_levels=3, values=np.array([0.5, 0.4, 0.3]), source="empirical")
    with pytest.raises(UnreachablePercentileError):
        p_sur(low, 75)


def test_p_sur_matches_scan_on_analytic_curves():
    rng = np.random.default_rng(6)
    for _ in range(200):
        c = sur_from_params(_random_params(rng))
        if c.values[0] < 0.75:
            continue
        want = max(n for n in range(1, 101) if c.values[n - 1] >= 0.75)
        assert p_sur(c, 75) == want


# ---------------------------------------------------------------------------
# Least-squares fitting


def test_fit_sur_lsq_exact_recovery():
    rng = np.random.default_rng(7)
    for _ in range(25):
        p = _random_params(rng)
        c = sur_from_params(p)
        rec = fit_sur_lsq(c.values, seed=3)
        assert rec.xi == pytest.approx(p.xi, abs=1e-6)
        assert rec.mu == pytest.approx(p.mu, abs=1e-6)
        assert rec.sigma == pytest.approx(p.sigma, abs=1e-6)
        assert sur_lsq_residual(rec, c.values) < 1e-10


def test_fit_sur_lsq_noise_injection():
    rng = np.random.default_rng(8)
    for _ in range(10):
        p = GevParams(xi=rng.uniform(-0.3, 0.4), mu=rng.uniform(15, 35),
                      sigma=rng.uniform(4, 10))
        clean = sur_from_params(p).values
        noise = rng.uniform(-0.02, 0.02, size=clean.size)
        noisy = np.clip(clean + noise, 0, 1)
        rec = fit_sur_lsq(noisy, seed=4)
        assert sur_lsq_residual(rec, noisy) <= float(np.sum(noise**2)) + 1e-12
        assert rec.mu == pytest.approx(p.mu, abs=0.5)
        assert rec.sigma == pytest.approx(p.sigma, abs=0.5)


def test_fit_sur_lsq_never_worse_than_generating_params():
    rng = np.random.default_rng(9)
    for _ in range(20):
        p = _random_params(rng)
        noisy = np.clip(sur_from_params(p).values +
                        rng.uniform(-0.03, 0.03, size=100), 0, 1)
        rec = fit_sur_lsq(noisy, seed=5)
        assert sur_lsq_residual(rec, noisy) <= sur_lsq_residual(p, noisy) + 1e-12


def test_fit_sur_lsq_published_prediction_round_trip():
    # samples generated from a published predicted parameter triple must
    # round-trip through the fit to the same triple
    p = GevParams(xi=0.16, mu=19.55, sigma=7.70)
    rec = fit_sur_lsq(sur_from_params(p).values, seed=0)
    assert rec.mu == pytest.approx(19.55, abs=1e-3)
    assert rec.sigma == pytest.approx(7.70, abs=1e-3)
    assert rec.xi == pytest.approx(0.16, abs=1e-3)


def test_fit_sur_lsq_guards():
    with pytest.raises(DegenerateFitError):
        fit_sur_lsq(np.full(100, 0.7))
    with pytest.raises(DomainError):
        fit_sur_lsq(np.array([0.9, 0.5]))
    with pytest.raises(DomainError):
        fit_sur_lsq(np.array([0.9, 0.5, 1.4]))
