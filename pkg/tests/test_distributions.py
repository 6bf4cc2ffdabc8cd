import math

import numpy as np
import pytest
from scipy import integrate, special, stats

from qbld.distributions import (
    AlParams,
    al_cdf,
    al_density,
    al_log_density,
    al_quantile,
    check_loss,
    gig_half_moments,
    mixture_constants,
    sample_al,
    sample_al_mixture,
    sample_gig_half,
    sample_inverse_gamma,
    sample_inverse_gaussian,
    sample_mvn,
    sample_mvn_precision,
    sample_truncated_normal,
)
from qbld.errors import DomainError, NumericalError
from qbld.rng import RandomStream

N = 1_000_000


def scipy_al(params: AlParams):
    p = params.p
    return stats.laplace_asymmetric(kappa=math.sqrt(p / (1 - p)), loc=params.mu,
                                    scale=params.sigma / math.sqrt(p * (1 - p)))


# ---------------- asymmetric Laplace

@pytest.mark.parametrize("u,expected", [(0.0, 0.0), (2.0, 0.5), (-2.0, 1.5)])
def test_check_loss(u, expected):
    assert check_loss(u, 0.25) == pytest.approx(expected)


def test_check_loss_rejects_p_outside_open_interval():
    with pytest.raises(DomainError):
        check_loss(1.0, 1.0)


def test_al_density_examples():
    assert al_density(0.0, AlParams(0, 1, 0.5)) == pytest.approx(0.25)
    assert al_density(1.0, AlParams(0, 1, 0.25)) == pytest.approx(0.14603, abs=1e-5)
    assert al_density(-1.0, AlParams(0, 1, 0.25)) == pytest.approx(0.1875 * math.exp(-0.75), rel=1e-12)


@pytest.mark.parametrize("params", [AlParams(0, 1, 0.25), AlParams(1.5, 2.0, 0.5), AlParams(-1, 0.5, 0.9)])
def test_al_density_matches_scipy_and_integrates_to_one(params):
    y = np.linspace(-6, 6, 41)
    np.testing.assert_allclose(al_density(y, params), scipy_al(params).pdf(y), rtol=1e-10)
    np.testing.assert_allclose(al_log_density(y, params), scipy_al(params).logpdf(y), rtol=1e-10, atol=1e-12)
    f = lambda v: al_density(v, params)  # noqa: E731
    total = integrate.quad(f, -np.inf, params.mu)[0] + integrate.quad(f, params.mu, np.inf)[0]
    assert total == pytest.approx(1.0, abs=1e-8)


def test_al_cdf_examples():
    assert al_cdf(0.0, AlParams(0, 1, 0.3)) == pytest.approx(0.3)
    assert al_cdf(-1.0, AlParams(0, 1, 0.5)) == pytest.approx(0.30327, abs=1e-5)
    assert al_cdf(2.0, AlParams(0, 1, 0.25)) == pytest.approx(0.54512, abs=1e-4)


def test_al_cdf_is_integral_of_density():
    params = AlParams(0.5, 1.3, 0.2)
    for y in (-3.0, 0.5, 4.0):
        f = lambda v: al_density(v, params)  # noqa: E731
        area = integrate.quad(f, -np.inf, min(y, params.mu))[0]
        if y > params.mu:
            area += integrate.quad(f, params.mu, y)[0]
        assert al_cdf(y, params) == pytest.approx(area, abs=1e-8)


@pytest.mark.parametrize("params", [AlParams(0.5, 1.3, 0.2), AlParams(0, 1, 0.5), AlParams(-2, 0.4, 0.85)])
def test_al_cdf_derivative_is_density(params):
    h = 1e-5
    y = np.linspace(-8, 8, 100) * params.sigma + params.mu + 0.037
    slope = (al_cdf(y + h, params) - al_cdf(y - h, params)) / (2 * h)
    np.testing.assert_allclose(slope, al_density(y, params), atol=1e-6)


def test_al_cdf_does_not_overflow_in_far_tails():
    out = al_cdf(np.array([-1e4, 1e4]), AlParams(0, 1, 0.3))
    assert np.all(np.isfinite(out))
    np.testing.assert_allclose(out, [0.0, 1.0])


def test_al_quantile_examples():
    assert al_quantile(0.3, AlParams(0, 1, 0.3)) == pytest.approx(0.0, abs=1e-12)
    assert al_quantile(0.1, AlParams(0, 1, 0.5)) == pytest.approx(-3.21888, abs=1e-5)
    # F(q) = 0.5 at p = 0.25 lies right of the location: -ln(0.5/0.75)/0.25
    assert al_quantile(0.5, AlParams(0, 1, 0.25)) == pytest.approx(4 * math.log(1.5), abs=1e-10)


def test_al_quantile_inverts_cdf():
    params = AlParams(-0.7, 2.5, 0.35)
    q = np.linspace(0.01, 0.99, 99)
    np.testing.assert_allclose(al_cdf(al_quantile(q, params), params), q, atol=1e-12)


@pytest.mark.parametrize("q", [0.0, 1.0, -0.1, 1.5])
def test_al_quantile_domain(q):
    with pytest.raises(DomainError):
        al_quantile(q, AlParams())


def test_al_params_validation():
    with pytest.raises(DomainError):
        AlParams(0, 0.0, 0.5)
    with pytest.raises(DomainError):
        AlParams(0, 1.0, 0.0)


def test_mixture_constants():
    c = mixture_constants(0.5)
    assert (c.theta, c.tau) == pytest.approx((0.0, 2.828427), abs=1e-6)
    c = mixture_constants(0.25)
    assert (c.theta, c.tau) == pytest.approx((2.666667, 3.265986), abs=1e-6)
    c75 = mixture_constants(0.75)
    assert c75.theta == pytest.approx(-c.theta)
    assert c75.tau == pytest.approx(c.tau)


def test_sample_al_moments():
    rng = RandomStream(1)
    draws = sample_al(AlParams(0, 1, 0.5), rng, size=N)
    assert draws.mean() == pytest.approx(0.0, abs=0.01)
    assert draws.var() == pytest.approx(8.0, abs=0.1)
    draws = sample_al(AlParams(0, 1, 0.25), rng, size=N)
    assert draws.mean() == pytest.approx(AlParams(0, 1, 0.25).mean, abs=0.02)
    assert AlParams(0, 1, 0.25).mean == pytest.approx(2.6667, abs=1e-4)


@pytest.mark.parametrize("p", [0.25, 0.5, 0.75])
def test_mixture_and_inverse_cdf_agree_with_al_law(p):
    rng = RandomStream(2)
    params = AlParams(0, 1, p)
    mixture = sample_al_mixture(p, rng, size=N)
    direct = sample_al(params, rng, size=N)
    cdf = lambda v: al_cdf(v, params)  # noqa: E731
    assert stats.kstest(mixture, cdf).statistic < 0.002
    assert stats.kstest(direct, cdf).statistic < 0.002


# ---------------- truncated normal

def test_truncated_normal_half_line_mean():
    draws = sample_truncated_normal(0.0, 1.0, 0.0, np.inf, RandomStream(3), size=N)
    assert np.all(draws > 0)
    assert draws.mean() == pytest.approx(0.79788, abs=0.005)


def test_truncated_normal_symmetric_interval():
    draws = sample_truncated_normal(0.0, 1.0, -1.0, 1.0, RandomStream(4), size=N)
    assert np.all((draws > -1) & (draws <= 1))
    assert draws.mean() == pytest.approx(0.0, abs=0.005)


@pytest.mark.parametrize("mean,variance,lower,upper", [
    (0.5, 9.0, 0.0, np.inf),
    (-2.0, 0.5, 0.0, np.inf),
    (3.0, 2.0, -np.inf, 0.0),
    (0.0, 1.0, 6.0, np.inf),        # far tail, rejection path
    (0.0, 1.0, -np.inf, -7.5),      # far tail on the left
])
def test_truncated_normal_matches_scipy(mean, variance, lower, upper):
    sd = math.sqrt(variance)
    draws = sample_truncated_normal(mean, variance, lower, upper, RandomStream(5), size=50_000)
    assert np.all((draws > lower) & (draws <= upper))
    law = stats.truncnorm((lower - mean) / sd, (upper - mean) / sd, loc=mean, scale=sd)
    assert stats.kstest(draws, law.cdf).statistic < 0.01


def test_truncated_normal_vectorised_bounds():
    y = np.array([1, 0, 1, 0])
    lower = np.where(y == 1, 0.0, -np.inf)
    upper = np.where(y == 1, np.inf, 0.0)
    out = sample_truncated_normal(np.array([-30.0, 30.0, 0.0, 0.0]), 1.0, lower, upper, RandomStream(6))
    assert out.shape == (4,)
    assert np.all((out > 0) == (y == 1))


def test_truncated_normal_domain_errors():
    with pytest.raises(DomainError):
        sample_truncated_normal(0.0, 0.0, 0.0, np.inf, RandomStream(7))
    with pytest.raises(DomainError):
        sample_truncated_normal(0.0, 1.0, 1.0, 1.0, RandomStream(7))


# ---------------- GIG(1/2), inverse Gaussian, inverse gamma

@pytest.mark.parametrize("lam,eta,expected", [(1.0, 2.0, 1.20711), (4.0, 4.0, 1.25)])
def test_gig_half_mean(lam, eta, expected):
    draws = sample_gig_half(lam, eta, RandomStream(8), size=N)
    assert np.all(draws > 0)
    assert draws.mean() == pytest.approx(expected, abs=0.01)
    assert gig_half_moments(lam, eta)[0] == pytest.approx(expected, abs=1e-5)


def test_gig_half_second_moment_and_scipy_law():
    lam, eta = 0.3, 2.7
    draws = sample_gig_half(lam, eta, RandomStream(9), size=N)
    _, second = gig_half_moments(lam, eta)
    assert np.mean(draws ** 2) == pytest.approx(second, rel=0.02)
    law = stats.geninvgauss(0.5, math.sqrt(lam * eta), scale=math.sqrt(lam / eta))
    assert stats.kstest(draws[:50_000], law.cdf).statistic < 0.01


@pytest.mark.parametrize("lam", [0.01, 0.3, 1.0, 4.0, 25.0])
def test_gig_half_moments_on_grid(lam):
    # E[w^r] = (lam/eta)^(r/2) K_{1/2+r}(sqrt(lam*eta)) / K_{1/2}(sqrt(lam*eta))
    rng = RandomStream(int(lam * 100) + 17)
    for eta in (0.5, 1.0, 2.0, 5.0, 20.0):
        x = math.sqrt(lam * eta)
        ratio = math.sqrt(lam / eta)
        mean = ratio * special.kve(1.5, x) / special.kve(0.5, x)
        second = ratio ** 2 * special.kve(2.5, x) / special.kve(0.5, x)
        assert gig_half_moments(lam, eta) == pytest.approx((mean, second), rel=1e-10)

        draws = sample_gig_half(lam, eta, rng, size=200_000)
        se_mean = draws.std() / math.sqrt(draws.size)
        se_second = (draws ** 2).std() / math.sqrt(draws.size)
        # 50 comparisons over the grid: family-wise bound
        assert abs(draws.mean() - mean) < 4 * se_mean
        assert abs(np.mean(draws ** 2) - second) < 4 * se_second


def test_gig_half_zero_lambda_is_clamped():
    draws = sample_gig_half(np.zeros(1000), 2.0, RandomStream(10))
    assert np.all(np.isfinite(draws)) and np.all(draws > 0)


def test_inverse_gaussian_matches_scipy():
    mu, shape = 1.7, 3.0
    draws = sample_inverse_gaussian(mu, shape, RandomStream(11), size=50_000)
    law = stats.invgauss(mu / shape, scale=shape)
    assert stats.kstest(draws, law.cdf).statistic < 0.01


def test_inverse_gamma_mean():
    draws = sample_inverse_gamma(6.0, 7.0, RandomStream(12), size=N)
    assert draws.mean() == pytest.approx(1.4, abs=0.01)
    assert stats.kstest(draws[:50_000], stats.invgamma(6.0, scale=7.0).cdf).statistic < 0.01


def test_inverse_gamma_domain():
    with pytest.raises(DomainError):
        sample_inverse_gamma(0.0, 1.0, RandomStream(0))


# ---------------- multivariate normal

def test_mvn_identity():
    draws = sample_mvn([1.0, 2.0], np.eye(2), RandomStream(13), size=N)
    np.testing.assert_allclose(draws.mean(axis=0), [1.0, 2.0], atol=0.01)


def test_mvn_covariance():
    cov = np.array([[2.0, 1.0], [1.0, 2.0]])
    draws = sample_mvn([0.0, 0.0], cov, RandomStream(14), size=N)
    np.testing.assert_allclose(np.cov(draws.T), cov, atol=0.02)


def test_mvn_rejects_indefinite_covariance():
    with pytest.raises(NumericalError):
        sample_mvn([0.0, 0.0], [[1.0, 2.0], [2.0, 1.0]], RandomStream(15))


def test_mvn_precision_batched():
    precision = np.broadcast_to(np.array([[2.0, 0.5], [0.5, 1.0]]), (200_000, 2, 2))
    linear = np.broadcast_to(np.array([1.0, -1.0]), (200_000, 2))
    draws = sample_mvn_precision(precision, linear, RandomStream(16))
    cov = np.linalg.inv(precision[0])
    np.testing.assert_allclose(draws.mean(axis=0), cov @ linear[0], atol=0.01)
    np.testing.assert_allclose(np.cov(draws.T), cov, atol=0.01)


def test_streams_are_reproducible_and_independent():
    a, b = RandomStream(99).spawn(2)
    a2, _ = RandomStream(99).spawn(2)
    assert np.array_equal(a.standard_normal(5), a2.standard_normal(5))
    assert not np.array_equal(RandomStream(99).spawn(2)[0].standard_normal(5), b.standard_normal(5))
