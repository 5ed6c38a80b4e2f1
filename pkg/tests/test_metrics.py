import math

import numpy as np
import pytest
from scipy import stats

from slicerx._validation import InvalidArgumentError
from slicerx.metrics import KP4_THRESHOLD, count_ber, hard_decide, q_function, wilson_interval


class TestCountBer:
    def test_known_count(self):
        truth = np.zeros(200_000, dtype=np.uint8)
        dec = truth.copy()
        dec[np.random.default_rng(0).choice(truth.size, 45, replace=False)] = 1
        r = count_ber(dec, truth)
        assert (r.errors, r.bits) == (45, 200_000)
        assert r.ber == 2.25e-4  # exact binary64 quotient
        assert not r.below_kp4  # 2.25e-4 sits just above 2.24e-4

    def test_skip(self):
        r = count_ber([1, 1, 0, 0], [0, 0, 0, 0], skip=2)
        assert (r.errors, r.bits) == (0, 2)
        assert r.below_kp4

    def test_rejects_mismatch_and_empty(self):
        with pytest.raises(InvalidArgumentError):
            count_ber([0, 1], [0])
        with pytest.raises(InvalidArgumentError):
            count_ber([0, 1], [0, 1], skip=2)

    def test_threshold_constant(self):
        assert KP4_THRESHOLD == 2.24e-4


class TestWilson:
    @pytest.mark.parametrize("k,n", [(0, 100), (3, 1000), (45, 200_000), (500, 1000), (1000, 1000)])
    def test_endpoints_solve_score_equation(self, k, n):
        # Wilson bounds are the roots of (p_hat - p)^2 = z^2 p (1 - p) / n
        z = stats.norm.ppf(0.975)
        lo, hi = wilson_interval(k, n)
        ph = k / n
        for p in (lo, hi):
            if 1e-12 < p < 1:  # k = 0 leaves a rounding-level lower bound
                assert (ph - p) ** 2 == pytest.approx(z**2 * p * (1 - p) / n, rel=1e-9, abs=1e-18)
        assert lo <= ph <= hi

    def test_zero_trials(self):
        assert wilson_interval(0, 0) == (0.0, 1.0)

    @pytest.mark.parametrize("p,n", [(2.24e-4, 50_000), (1e-3, 20_000), (0.02, 1000)])
    def test_coverage(self, p, n):
        rng = np.random.default_rng(11)
        k = rng.binomial(n, p, size=4000)
        cover = np.mean([lo <= p <= hi for lo, hi in (wilson_interval(int(x), n) for x in k)])
        assert cover >= 0.93


class TestQFunction:
    def test_matches_normal_tail(self):
        x = np.linspace(-5, 8, 53)
        np.testing.assert_allclose(q_function(x), stats.norm.sf(x), rtol=1e-12)

    def test_reference_value(self):
        # Q(3) from the tabulated normal distribution
        assert q_function(3.0) == pytest.approx(1.3498980316301e-3, rel=1e-10)


class TestHardDecide:
    def test_gaussian_two_level_ber(self):
        # levels +/-1 in N(0, sigma^2): midpoint slicing gives BER = Q(1 / sigma)
        rng = np.random.default_rng(5)
        n, sigma = 400_000, 0.4
        bits = rng.integers(0, 2, n).astype(np.uint8)
        soft = (2.0 * bits - 1) + sigma * rng.standard_normal(n)
        d = hard_decide(soft, soft[:20_000], bits[:20_000])
        r = count_ber(d[20_000:], bits[20_000:])
        want = float(q_function(1 / sigma))
        assert r.ci95_low <= want <= r.ci95_high

    @pytest.mark.parametrize("a,b", [(3.0, -7.0), (-0.5, 2.0), (1e-3, 1e3)])
    def test_affine_invariance(self, a, b):
        rng = np.random.default_rng(1)
        bits = rng.integers(0, 2, 5000)
        soft = bits + 0.3 * rng.standard_normal(5000)
        base = hard_decide(soft, soft[:1000], bits[:1000])
        mapped = a * soft + b
        np.testing.assert_array_equal(hard_decide(mapped, mapped[:1000], bits[:1000]), base)

    def test_label_symmetry(self):
        rng = np.random.default_rng(2)
        bits = rng.integers(0, 2, 3000)
        soft = bits + 0.2 * rng.standard_normal(3000)
        d = hard_decide(soft, soft, bits)
        np.testing.assert_array_equal(hard_decide(soft, soft, 1 - bits), 1 - d)

    def test_needs_both_classes(self):
        with pytest.raises(InvalidArgumentError):
            hard_decide([0.1], [0.1, 0.2], [1, 1])
        with pytest.raises(InvalidArgumentError):
            hard_decide([0.1], [0.1], [1, 0])


def test_result_dict():
    r = count_ber([0, 1], [0, 0])
    d = r.to_dict()
    assert d["errors"] == 1 and d["bits"] == 2 and math.isclose(d["ber"], 0.5)
