import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from minewatch import runstat
from minewatch.runstat import (
    RunCountDistribution,
    TestStatistic,
    critical_count,
    enumerate_bruteforce,
    p_value,
    pmf_chain,
    pmf_ling,
    sample_runcount,
)


def slow_reference_pmf(h: float, T: int) -> list[float]:
    """Test-local oracle: plain itertools enumeration, no numpy tricks."""
    if T == 0:
        return [1.0]
    pmf = [0.0] * max(T, 1)
    for bits in itertools.product((0, 1), repeat=T):
        runs = sum(1 for t in range(T - 1) if bits[t] and bits[t + 1])
        prob = 1.0
        for b in bits:
            prob *= h if b else (1.0 - h)
        pmf[runs] += prob
    return pmf


class TestPmfLing:
    def test_top_branch_certain(self):
        assert pmf_ling(1.0, 3, 2) == 1.0

    def test_no_successes(self):
        assert pmf_ling(0.0, 5, 0) == 1.0

    def test_enumerated_values_T3(self):
        # all 8 binary strings of length 3: only 110 and 011 give one run
        assert pmf_ling(0.5, 3, 1) == pytest.approx(0.25, abs=1e-15)
        assert pmf_ling(0.5, 3, 0) == pytest.approx(0.625, abs=1e-15)

    def test_enumerated_value_T4(self):
        assert pmf_ling(0.5, 4, 0) == pytest.approx(0.5, abs=1e-15)

    def test_short_sequence_boundary(self):
        assert pmf_ling(0.7, 0, 0) == 1.0
        assert pmf_ling(0.7, 1, 0) == 1.0

    def test_T2_low_count_falls_through_to_recursion(self):
        # the piecewise branches as written leave (T=2, x=0) to the summation
        assert pmf_ling(0.3, 2, 0) == pytest.approx(1 - 0.09, abs=1e-15)

    def test_domain_errors_name_parameter(self):
        with pytest.raises(ValueError, match="h"):
            pmf_ling(1.5, 3, 1)
        with pytest.raises(ValueError, match="x"):
            pmf_ling(0.5, 3, 3)
        with pytest.raises(ValueError, match="T"):
            pmf_ling(0.5, -1, 0)

    def test_memoised_requeries_consistent(self):
        first = pmf_ling(0.37, 40, 5)
        again = pmf_ling(0.37, 40, 5)
        assert first == again

    def test_agrees_with_reference_enumeration(self):
        for T in range(2, 8):
            for h in (0.1, 0.4, 0.8):
                ref = slow_reference_pmf(h, T)
                for x in range(T):
                    assert pmf_ling(h, T, x) == pytest.approx(ref[x], abs=1e-12)


class TestPmfChain:
    def test_matches_enumeration_T3(self):
        np.testing.assert_allclose(pmf_chain(0.5, 3).pmf, [0.625, 0.25, 0.125], atol=1e-15)

    def test_zero_power_point_mass(self):
        dist = pmf_chain(0.0, 10)
        assert dist.pmf[0] == 1.0
        assert dist.pmf[1:].sum() == 0.0

    def test_mode_grows_with_power(self):
        assert pmf_chain(0.3, 100).argmax() > pmf_chain(0.1, 100).argmax()

    def test_boundary_branches_exact(self):
        for h in (0.2, 0.5, 0.9):
            for T in (3, 5, 17, 60):
                pmf = pmf_chain(h, T).pmf
                assert pmf[T - 1] == pytest.approx(h**T, abs=1e-12)
                assert pmf[T - 2] == pytest.approx(2 * h ** (T - 1) * (1 - h), abs=1e-12)

    def test_agrees_with_ling_medium_T(self):
        for x in range(4):
            assert pmf_chain(0.3, 300).pmf[x] == pytest.approx(pmf_ling(0.3, 300, x), abs=1e-12)

    def test_immutable(self):
        dist = pmf_chain(0.4, 6)
        with pytest.raises(ValueError):
            dist.pmf[0] = 0.5

    @given(st.floats(0.0, 1.0), st.integers(0, 40))
    @settings(max_examples=60, deadline=None)
    def test_is_probability_vector(self, h, T):
        pmf = pmf_chain(h, T).pmf
        assert len(pmf) == max(T, 1)
        assert (pmf >= 0).all() and (pmf <= 1 + 1e-12).all()
        assert math.fsum(pmf.tolist()) == pytest.approx(1.0, abs=1e-9)


class TestBruteForce:
    def test_exact_T3(self):
        np.testing.assert_allclose(enumerate_bruteforce(0.5, 3).pmf, [0.625, 0.25, 0.125], atol=0)

    def test_exact_T4_group_sizes(self):
        # sequence groups of sizes 8, 5, 2, 1 over the 16 outcomes
        np.testing.assert_allclose(
            enumerate_bruteforce(0.5, 4).pmf, [0.5, 0.3125, 0.125, 0.0625], atol=0
        )

    def test_short_boundary(self):
        np.testing.assert_allclose(enumerate_bruteforce(0.2, 1).pmf, [1.0], atol=0)

    def test_capacity_error(self):
        with pytest.raises(ValueError, match="T <= 20"):
            enumerate_bruteforce(0.5, 21)

    def test_matches_reference_enumeration(self):
        for T in range(0, 7):
            for h in (0.15, 0.6):
                np.testing.assert_allclose(
                    enumerate_bruteforce(h, T).pmf, slow_reference_pmf(h, T), atol=1e-14
                )


class TestPValue:
    def test_tail_from_enumeration(self):
        assert p_value(0.5, 3, 1) == pytest.approx(0.375, abs=1e-15)

    def test_empty_sum_is_one(self):
        for h, T in ((0.0, 5), (0.3, 1), (0.9, 100)):
            assert p_value(h, T, 0) == 1.0

    def test_certain_event(self):
        assert p_value(1.0, 3, 2) == 1.0

    def test_matches_distribution_tail(self):
        dist = pmf_chain(0.35, 80)
        for c in (0, 1, 5, 20, 79):
            assert p_value(0.35, 80, c) == pytest.approx(dist.tail(c), abs=1e-12)

    def test_monotone_in_c(self):
        values = [p_value(0.4, 60, c) for c in range(0, 60)]
        assert all(a >= b for a, b in zip(values, values[1:]))

    def test_monotone_in_h(self):
        values = [p_value(h, 50, 5) for h in np.linspace(0.05, 0.95, 10)]
        assert all(a <= b + 1e-15 for a, b in zip(values, values[1:]))

    def test_domain_error(self):
        with pytest.raises(ValueError, match="c"):
            p_value(0.5, 5, 5)


class TestCriticalCount:
    def test_no_flaggable_count_when_certain(self):
        assert critical_count(1.0, 10, 0.05) == 9

    def test_small_table(self):
        # p_value(0.5, 3, 1) = 0.375 <= 0.5, so c* = 0
        assert critical_count(0.5, 3, 0.5) == 0

    def test_zero_power(self):
        assert critical_count(0.0, 10, 0.05) == 0

    def test_convention_brackets_alpha(self):
        for h, T in ((0.1, 200), (0.3, 500), (0.6, 300)):
            cstar = critical_count(h, T, 0.05)
            assert p_value(h, T, cstar) > 0.05
            if cstar + 1 <= T - 1:
                assert p_value(h, T, cstar + 1) <= 0.05

    def test_alpha_domain(self):
        with pytest.raises(ValueError, match="alpha"):
            critical_count(0.5, 10, 0.0)


class TestSampleRunCount:
    def test_impossible_success(self):
        assert sample_runcount(0.0, 100, 5, seed=1).tolist() == [0, 0, 0, 0, 0]

    def test_certain_success(self):
        assert sample_runcount(1.0, 10, 3, seed=2).tolist() == [9, 9, 9]

    def test_deterministic(self):
        a = sample_runcount(0.3, 200, 50, seed=77)
        b = sample_runcount(0.3, 200, 50, seed=77)
        assert (a == b).all()

    def test_mean_matches_exact(self):
        counts = sample_runcount(0.3, 500, 20_000, seed=5)
        dist = pmf_chain(0.3, 500)
        exact_mean = dist.mean()
        exact_var = float((np.arange(500) - exact_mean) ** 2 @ dist.pmf)
        se = math.sqrt(exact_var / 20_000)
        assert abs(counts.mean() - exact_mean) <= 3 * se

    def test_n_domain(self):
        with pytest.raises(ValueError, match="n"):
            sample_runcount(0.5, 10, 0, seed=0)


class TestTypes:
    def test_statistic_invariants(self):
        TestStatistic(c=0, T=0, h=0.5)
        TestStatistic(c=4, T=5, h=0.5)
        with pytest.raises(ValueError):
            TestStatistic(c=5, T=5, h=0.5)
        with pytest.raises(ValueError):
            TestStatistic(c=1, T=1, h=0.5)

    def test_statistic_p_value(self):
        assert TestStatistic(c=1, T=3, h=0.5).p_value() == pytest.approx(0.375)

    def test_distribution_validation(self):
        with pytest.raises(ValueError):
            RunCountDistribution(h=1.2, T=3, pmf=np.array([1.0, 0.0, 0.0]))


@given(
    h=st.sampled_from([0.1 * k for k in range(1, 10)]),
    T=st.integers(2, 10),
)
@settings(max_examples=40, deadline=None)
def test_oracle_triangle_property(h, T):
    ling = np.array([pmf_ling(h, T, x) for x in range(T)])
    chain = pmf_chain(h, T).pmf
    brute = enumerate_bruteforce(h, T).pmf
    np.testing.assert_allclose(ling, chain, atol=1e-12)
    np.testing.assert_allclose(chain, brute, atol=1e-12)
