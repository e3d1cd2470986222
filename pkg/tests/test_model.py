import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special

from urnscheme.errors import ConfigurationError, DomainError
from urnscheme.model import (HEAD_SIZE, MAX_INDEX, Kind, alpha, alpha_by_search, l_star,
                             l_star_from_alpha, make_explicit, make_logzipf, make_zipf)

ZETA2 = math.pi ** 2 / 6


class TestZipf:
    def test_first_probability_is_inverse_zeta2(self, zipf05):
        assert zipf05.prob(1.0) == pytest.approx(6 / math.pi ** 2, rel=1e-11)

    def test_alpha_at_inverse_first_probability(self, zipf05):
        assert zipf05.alpha(1.0 / zipf05.head[0]) == 1

    def test_alpha_million_matches_closed_form(self, zipf05):
        assert abs(zipf05.alpha(1e6) - math.sqrt(1e6 / ZETA2)) <= 1.0

    def test_alpha_over_power_converges(self, zipf05):
        ratio = zipf05.alpha(1e6) / 1e6 ** 0.5
        assert abs(ratio / ZETA2 ** -0.5 - 1) <= 0.01

    def test_tail_mass_within_tolerance(self, zipf05):
        assert zipf05.tail_mass <= zipf05.tail_mass_tol == 1e-12
        assert zipf05.kind is Kind.ZIPF
        assert zipf05.truncation_index > HEAD_SIZE

    def test_probabilities_sum_to_one(self, zipf05):
        assert zipf05.sum_over_urns(lambda p: p) == pytest.approx(1.0, abs=1e-12)

    def test_second_moment_of_probabilities(self, zipf05):
        exact = (math.pi ** 4 / 90) / ZETA2 ** 2
        assert zipf05.sum_over_urns(lambda p: p * p) == pytest.approx(exact, rel=1e-10)

    def test_nonincreasing_head(self, zipf05):
        assert np.all(np.diff(zipf05.head) <= 0)

    @settings(max_examples=200, deadline=None)
    @given(st.floats(0.0, 60.0))
    def test_closed_form_alpha_equals_binary_search(self, logx):
        d = make_zipf(0.5)
        x = math.exp(logx)
        assert d.alpha(x) == alpha_by_search(d, x)

    def test_explicit_truncation(self):
        d = make_zipf(0.25, truncation_index=10 ** 6, tail_mass_tol=1e-3)
        assert d.truncation_index == 10 ** 6
        assert d.tail_mass == pytest.approx(special.zeta(4.0, 1e6 + 1) / special.zeta(4.0), rel=1e-12)

    @pytest.mark.parametrize("theta", [0.0, 1.0, -0.5, 1.5])
    def test_theta_out_of_range(self, theta):
        with pytest.raises(DomainError):
            make_zipf(theta)

    def test_unreachable_tail_at_given_index(self):
        with pytest.raises(ConfigurationError):
            make_zipf(0.5, truncation_index=1000, tail_mass_tol=1e-12)

    def test_unreachable_tail_beyond_representable_index(self):
        with pytest.raises(ConfigurationError):
            make_zipf(0.75)


class TestLogZipf:
    def test_strictly_decreasing(self, logzipf):
        assert np.all(np.diff(logzipf.head) < 0)
        i = np.array([1e7, 1e9, 1e12, 1e15, 1e18])
        assert np.all(np.diff(logzipf.prob(i)) < 0)

    def test_normalisation_contract(self, logzipf):
        total = logzipf.sum_over_urns(lambda p: p)
        assert 1 - logzipf.tail_mass_tol <= total <= 1 + 1e-12
        assert logzipf.tail_mass <= logzipf.tail_mass_tol
        assert logzipf.theta == 1.0

    def test_weights_follow_family(self, logzipf):
        i = np.arange(1.0, 50.0)
        w = 1.0 / (i * np.log(i + math.e) ** 2)
        np.testing.assert_allclose(logzipf.head[:49] / logzipf.head[0], w / w[0], rtol=1e-14)

    def test_alpha_satisfies_definition(self, logzipf):
        xs = 10.0 ** np.arange(4, 15)
        a = logzipf.alpha(xs).astype(float)
        assert np.all(logzipf.prob(a) >= 1 / xs)
        assert np.all(logzipf.prob(a + 1) < 1 / xs)

    def test_slow_variation_trend(self, logzipf):
        # L(x) ~ c / log(x)^2, so L(2x)/L(x) creeps up to 1 at a logarithmic rate
        xs = 10.0 ** np.arange(4, 21, 2)
        L = lambda x: logzipf.alpha(x) / x  # noqa: E731
        ratios = L(2 * xs) / L(xs)
        assert np.all(np.diff(ratios) > 0)
        assert ratios[0] > 0.8 and ratios[-1] > 0.96

    def test_decade_ratio_of_L(self, logzipf):
        L = lambda x: logzipf.alpha(x) / x  # noqa: E731
        ratios = np.array([L(10 * x) / L(x) for x in (1e4, 1e5, 1e6)])
        # frozen from a plain binary search over p_j >= 1/x; for this family
        # the decade ratio is still far from 1 at these scales
        np.testing.assert_allclose(ratios, [0.5757847533632288, 0.6326323987538941,
                                            0.6798350363166318], rtol=1e-12)

    def test_small_truncation_rejected(self):
        with pytest.raises(ConfigurationError):
            make_logzipf(truncation_index=9)
        with pytest.raises(ConfigurationError):
            make_logzipf(truncation_index=2 * MAX_INDEX)

    def test_tolerance_enforced(self):
        with pytest.raises(ConfigurationError):
            make_logzipf(tail_mass_tol=1e-12)


class TestExplicitAndAlpha:
    def test_alpha_below_first_jump_is_zero(self):
        d = make_explicit([0.5, 0.3, 0.2])
        assert alpha(d, 1.9) == 0
        assert alpha(d, 0.0) == 0

    def test_alpha_counts_probabilities_at_least_inverse(self):
        assert alpha(make_explicit([0.5, 0.3, 0.2]), 4.0) == 2

    def test_alpha_right_continuous_at_jumps(self):
        d = make_explicit([0.5, 0.25, 0.125, 0.125])
        assert [alpha(d, x) for x in (2.0, 4.0, 8.0)] == [1, 2, 4]
        assert [alpha(d, np.nextafter(x, 0)) for x in (2.0, 4.0, 8.0)] == [0, 1, 2]

    def test_alpha_nondecreasing_on_grid(self, zipf05):
        a = zipf05.alpha(10.0 ** np.arange(0, 13))
        assert np.all(np.diff(a) >= 0)

    @pytest.mark.parametrize("probs", [[0.6, 0.5], [0.5, -0.1, 0.6], [0.3, 0.7], []])
    def test_invalid_explicit(self, probs):
        with pytest.raises(ConfigurationError):
            make_explicit(probs)

    def test_explicit_is_not_regularly_varying(self):
        d = make_explicit([1.0])
        assert d.theta is None and not d.regularly_varying
        with pytest.raises(DomainError):
            d.profile()


class TestLStar:
    @pytest.mark.parametrize("beta", [0.3, 0.5, 0.8])
    def test_power_counting_function_closed_form(self, beta):
        # alpha(x) = c x^beta gives n * L*(n) = c n^beta Gamma(1 - beta)
        c, n = 2.5, 1e5
        val = l_star_from_alpha(lambda x: c * x ** beta, n)
        assert val == pytest.approx(c * n ** (beta - 1) * math.gamma(1 - beta), rel=1e-9)

    def test_matches_expected_poissonized_occupancy(self, logzipf):
        n = 1e6
        exact = logzipf.sum_over_urns(lambda p: -np.expm1(-n * p))
        assert n * l_star(logzipf, n) == pytest.approx(exact, rel=1e-8)

    def test_slow_variation(self, logzipf):
        ratios = [l_star(logzipf, 2 * n) / l_star(logzipf, n) for n in (1e4, 1e5, 1e6)]
        assert ratios[0] < ratios[1] < ratios[2] < 1
        assert all(abs(r - 1) <= 0.10 for r in ratios[1:])

    def test_nonnegative(self, logzipf):
        assert l_star(logzipf, 1.0) >= 0
        assert l_star(logzipf, 1e3) > 0

    def test_domain(self, zipf05, logzipf):
        with pytest.raises(DomainError):
            l_star(zipf05, 1e3)
        with pytest.raises(DomainError):
            l_star(logzipf, 0.5)

    def test_profile_exposes_l_star(self, logzipf):
        prof = logzipf.profile()
        assert prof.theta == 1.0
        assert prof.L_star_at(1e4) == pytest.approx(l_star(logzipf, 1e4))


class TestSampling:
    def test_head_frequencies(self, zipf05):
        rng = np.random.default_rng(1)
        draws = zipf05.sample(rng, 200_000)
        for i in (1, 2, 3, 10):
            p = float(zipf05.prob(float(i)))
            se = math.sqrt(p * (1 - p) / draws.size)
            assert abs(np.mean(draws == i) - p) <= 4 * se

    def test_beyond_head_fraction_and_range(self, zipf05):
        rng = np.random.default_rng(2)
        draws = zipf05.sample(rng, 2_000_000)
        p_tail = 1.0 - zipf05._cdf[-1]
        frac = np.mean(draws > HEAD_SIZE)
        assert abs(frac - p_tail) <= 4 * math.sqrt(p_tail / draws.size)
        assert draws.max() <= zipf05.truncation_index and draws.min() >= 1

    def test_tail_draws_follow_conditional_law(self, logzipf):
        rng = np.random.default_rng(3)
        tail = logzipf._draw_beyond_head(rng, 20_000)
        assert np.all(tail > HEAD_SIZE)
        # P(I > 2^30 | I > H) from the exact tail sums
        from urnscheme.model import _logzipf_tail
        cut = 1 << 30
        p_head_tail = logzipf.sum_over_urns(lambda p: p) - float(logzipf._cdf[-1])
        weight_above = (_logzipf_tail(cut) - _logzipf_tail(logzipf.truncation_index)) / logzipf.norm
        q = weight_above / p_head_tail
        assert abs(np.mean(tail > cut) - q) <= 4 * math.sqrt(q * (1 - q) / tail.size)

    def test_same_seed_same_draws(self, zipf05):
        a = zipf05.sample(np.random.default_rng(7), 1000)
        b = zipf05.sample(np.random.default_rng(7), 1000)
        np.testing.assert_array_equal(a, b)
