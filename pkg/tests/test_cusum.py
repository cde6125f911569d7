"""Weighted CUSUM statistic, limit-law calibration, change locators."""

import json
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from funcusum.basis import FunctionalSample, change_basis, fourier_basis, inner_product
from funcusum.cusum import (
    ApproximationFailureError,
    ScoreMatrix,
    _fully_functional_max,
    change_estimates,
    gumbel_critical,
    gumbel_pvalue,
    normalizer_a,
    normalizer_b,
    normalizers,
    run_test,
    scores,
    statistic,
    vostrikova_critical,
    vostrikova_pvalue,
    vostrikova_tail,
)
from funcusum.cusum import TestConfig as Config
from funcusum.cusum import TestResult as Result
from funcusum.lrcov import LagWindowKernel, LrCovEstimate, lrcov_estimate
from funcusum.simulate import Far1Simulator, SimSpec, calibrate_kernel, make_change

PLAIN = LagWindowKernel.from_name("plain")


def identity_estimate(basis):
    """LrCovEstimate whose eigenfunctions are the basis itself."""
    j = basis.size
    return LrCovEstimate(cov=np.eye(j), eigvals=np.ones(j), eigvecs=np.eye(j),
                         basis=basis, h=0.0, kernel_kind="plain", d_max=j)


def naive_scores(sample, est, d):
    """Direct O(n^2 d) double summation through curve inner products."""
    n = len(sample)
    mean = sample.mean()
    out = np.zeros((n - 1, d))
    for k in range(1, n):
        for r in range(d):
            acc = 0.0
            for i in range(k):
                acc += inner_product(sample.curve(i) - mean,
                                     est.eigenfunction(r))
            out[k - 1, r] = acc / math.sqrt(n)
    return out


def scalar_weighted_cusum(x, lam):
    """Classical univariate weighted CUSUM, plain-Python reference."""
    n = len(x)
    xbar = sum(x) / n
    best, best_k = -math.inf, 0
    for k in range(1, n):
        part = sum(x[i] - xbar for i in range(k)) / math.sqrt(n)
        w = 1.0 / math.sqrt((k / n) * (1.0 - k / n))
        obj = w * math.sqrt(part * part / lam)
        if obj > best:
            best, best_k = obj, k
    return best, best_k


class TestScores:
    def test_constant_sample_zero_scores(self):
        b = fourier_basis(4)
        s = FunctionalSample(np.tile([2.0, -1.0, 0.5, 3.0], (9, 1)), b)
        sm = scores(s, identity_estimate(b), 3)
        assert np.array_equal(sm.eta, np.zeros((8, 3)))

    def test_two_point_algebra(self):
        b = fourier_basis(3)
        x1 = np.array([1.0, 2.0, -0.5])
        x2 = np.array([0.0, 1.0, 4.0])
        s = FunctionalSample(np.stack([x1, x2]), b)
        sm = scores(s, identity_estimate(b), 3)
        assert np.allclose(sm.eta[0], (x1 - x2) * 2.0 ** -1.5, atol=1e-15)

    def test_matches_direct_summation_oracle(self):
        rng = np.random.default_rng(17)
        b = fourier_basis(7)
        s = FunctionalSample(rng.normal(size=(30, 7)), b)
        est = lrcov_estimate(s, PLAIN, 2.0)
        sm = scores(s, est, 2)
        assert np.max(np.abs(sm.eta - naive_scores(s, est, 2))) <= 1e-10

    def test_last_row_is_negated_final_score(self):
        rng = np.random.default_rng(18)
        b = fourier_basis(5)
        s = FunctionalSample(rng.normal(size=(12, 5)), b)
        est = lrcov_estimate(s, PLAIN, 0.0)
        sm = scores(s, est, 3)
        centered_last = s.coeffs[-1] - s.coeffs.mean(axis=0)
        expected = -(centered_last @ est.eigvecs[:, :3]) / math.sqrt(12)
        assert np.max(np.abs(sm.eta[-1] - expected)) <= 1e-10

    def test_d_out_of_range(self):
        b = fourier_basis(4)
        s = FunctionalSample(np.zeros((5, 4)), b)
        with pytest.raises(ValueError, match="1 <= d <= 4"):
            scores(s, identity_estimate(b), 5)

    def test_basis_mismatch(self):
        s = FunctionalSample(np.zeros((5, 4)), fourier_basis(4))
        with pytest.raises(ValueError, match="share a basis"):
            scores(s, identity_estimate(fourier_basis(5)), 2)

    def test_score_matrix_validation(self):
        with pytest.raises(ValueError, match="shapes"):
            ScoreMatrix(eta=np.zeros((3, 2)), lambdas=np.ones(3))
        with pytest.raises(ValueError, match="finite"):
            ScoreMatrix(eta=np.array([[np.nan]]), lambdas=np.ones(1))
        assert ScoreMatrix(np.zeros((2, 1)), np.zeros(1)).degenerate
        assert not ScoreMatrix(np.zeros((2, 1)), np.ones(1)).degenerate


class TestStatistic:
    def test_zero_scores(self):
        sm = ScoreMatrix(np.zeros((7, 2)), np.ones(2))
        assert statistic(sm, 8) == (0.0, 1)

    def test_midpoint_weight_is_two(self):
        eta = np.zeros((9, 1))
        eta[4, 0] = 1.0  # k = 5, n = 10, w(1/2) = 2
        sm = ScoreMatrix(eta, np.ones(1))
        t, k = statistic(sm, 10)
        assert t == 2.0 and k == 5

    def test_d1_matches_scalar_reference(self):
        rng = np.random.default_rng(19)
        b = fourier_basis(6)
        s = FunctionalSample(rng.normal(size=(25, 6)), b)
        est = lrcov_estimate(s, PLAIN, 2.0)
        t, k = statistic(scores(s, est, 1), 25)
        x = list(s.coeffs @ est.eigvecs[:, 0])
        t_ref, k_ref = scalar_weighted_cusum(x, est.eigvals[0])
        assert t == pytest.approx(t_ref, abs=1e-12)
        assert k == k_ref

    def test_zero_eigenvalue_gives_infinity(self):
        eta = np.ones((4, 2))
        sm = ScoreMatrix(eta, np.array([1.0, 0.0]))
        t, _ = statistic(sm, 5)
        assert math.isinf(t)

    def test_zero_over_zero_contributes_nothing(self):
        eta = np.zeros((4, 2))
        eta[:, 0] = [0.1, 0.3, 0.2, 0.1]
        sm = ScoreMatrix(eta, np.array([1.0, 0.0]))
        t, _ = statistic(sm, 5)
        assert math.isfinite(t)
        only_first = statistic(ScoreMatrix(eta[:, :1], np.ones(1)), 5)[0]
        assert t == pytest.approx(only_first, abs=1e-15)

    def test_smallest_argmax_on_ties(self):
        eta = np.zeros((3, 1))
        eta[0, 0] = eta[2, 0] = 1.0  # w(1/4) = w(3/4)
        sm = ScoreMatrix(eta, np.ones(1))
        assert statistic(sm, 4)[1] == 1

    def test_row_count_guard(self):
        sm = ScoreMatrix(np.zeros((3, 1)), np.ones(1))
        with pytest.raises(ValueError, match="expected n-1"):
            statistic(sm, 10)
        with pytest.raises(ValueError, match="n >= 2"):
            statistic(sm, 1)

    def test_unstandardized_objective_monotone_in_d(self):
        rng = np.random.default_rng(20)
        eta = rng.normal(size=(19, 5))
        prev = np.zeros(19)
        for d in range(1, 6):
            sumsq = (eta[:, :d] ** 2).sum(axis=1)
            assert np.all(sumsq >= prev - 1e-15)
            prev = sumsq


class TestNormalizers:
    def test_values_at_t_equal_e(self):
        assert normalizer_a(math.e) == pytest.approx(math.sqrt(2.0), abs=1e-15)
        assert normalizer_b(math.e, 2) == pytest.approx(2.0, abs=1e-15)

    def test_high_precision_oracle(self):
        mpmath.mp.dps = 50
        t = mpmath.log(10**6)
        a_ref = float(mpmath.sqrt(2 * mpmath.log(t)))
        b_ref = float(2 * mpmath.log(t) + mpmath.mpf(3) / 2 * mpmath.log(mpmath.log(t))
                      - mpmath.log(mpmath.gamma(mpmath.mpf(3) / 2)))
        a, b = normalizers(10**6, 3)
        assert a == pytest.approx(a_ref, abs=1e-12)
        assert b == pytest.approx(b_ref, abs=1e-12)

    def test_rejects_small_n(self):
        with pytest.raises(ValueError, match="log log n"):
            normalizers(2, 1)
        a, b = normalizers(3, 1)  # log 3 > 1, smallest n that works
        assert math.isfinite(a) and math.isfinite(b)

    def test_rejects_t_at_most_one(self):
        with pytest.raises(ValueError, match="t > 1"):
            normalizer_a(1.0)
        with pytest.raises(ValueError, match="t > 1"):
            normalizer_b(0.5, 2)
        with pytest.raises(ValueError, match="d"):
            normalizer_b(math.e, 0)


class TestGumbel:
    def test_closed_form_inversion(self):
        a, b = normalizers(200, 2)
        crit = gumbel_critical(0.1, 200, 2)
        x = a * crit - b
        assert x == pytest.approx(-math.log(-math.log(0.9) / 2.0), abs=1e-12)
        assert x == pytest.approx(2.944, abs=1e-3)
        assert gumbel_pvalue(crit, 200, 2) == pytest.approx(0.1, abs=1e-9)

    def test_infinite_statistic(self):
        assert gumbel_pvalue(math.inf, 100, 2) == 0.0

    def test_x_zero_reference_point(self):
        a, b = normalizers(100, 1)
        p = gumbel_pvalue(b / a, 100, 1)
        assert p == pytest.approx(1.0 - math.exp(-2.0), abs=1e-12)

    def test_pvalue_in_unit_interval(self):
        for t in (-5.0, 0.0, 1.0, 3.0, 10.0):
            assert 0.0 <= gumbel_pvalue(t, 50, 3) <= 1.0

    def test_alpha_bounds(self):
        with pytest.raises(ValueError, match="alpha"):
            gumbel_critical(0.0, 100, 1)
        with pytest.raises(ValueError, match="alpha"):
            gumbel_critical(1.0, 100, 1)


class TestVostrikovaTail:
    def test_matches_bridge_supremum_oracle(self, bridge_sup_samples):
        p_mc = float(np.mean(bridge_sup_samples[(1, 100)] >= 3.5))
        p = vostrikova_tail(3.5, 100, 1)
        assert abs(p - p_mc) <= 0.15 * p_mc

    def test_vanishes_in_the_far_tail(self):
        assert vostrikova_tail(40.0, 100, 1) <= 1e-100
        assert vostrikova_tail(math.inf, 100, 1) == 0.0

    def test_d2_leading_constant(self):
        # Gamma(1) = 1, so the prefactor is x^2 exp(-x^2/2) / 2
        x, n = 3.0, 300
        hn = math.log(n) ** 1.5 / n
        big_l = math.log((1.0 - hn) ** 2 / hn ** 2)
        expected = (x**2 * math.exp(-x**2 / 2) / 2.0
                    * ((1.0 - 2.0 / x**2) * big_l + 4.0 / x**2))
        assert vostrikova_tail(x, n, 2) == pytest.approx(expected, rel=1e-12)

    def test_domain_guard(self):
        with pytest.raises(ValueError, match="sqrt"):
            vostrikova_tail(1.0, 100, 1)
        with pytest.raises(ValueError, match="sqrt"):
            vostrikova_tail(math.sqrt(2.0), 100, 2)

    def test_clamped_to_unit_interval(self):
        assert vostrikova_tail(1.2, 10**9, 1) == 1.0

    def test_pvalue_conventions(self):
        assert vostrikova_pvalue(0.5, 100, 1) == 1.0  # below domain
        assert vostrikova_pvalue(math.inf, 100, 1) == 0.0


class TestVostrikovaCritical:
    @pytest.mark.parametrize("n", [100, 500])
    @pytest.mark.parametrize("d", [1, 2, 3, 4, 5])
    def test_root_self_consistency(self, n, d):
        x = vostrikova_critical(0.1, n, d)
        assert vostrikova_tail(x, n, d) == pytest.approx(0.1, abs=1e-7)

    def test_reference_values(self):
        assert vostrikova_critical(0.1, 50, 1) == pytest.approx(2.6908, abs=1e-3)
        assert vostrikova_critical(0.1, 100, 1) == pytest.approx(2.7865, abs=1e-3)
        assert vostrikova_critical(0.1, 300, 1) == pytest.approx(2.9034, abs=1e-3)
        assert vostrikova_critical(0.1, 500, 1) == pytest.approx(2.9478, abs=1e-3)
        assert vostrikova_critical(0.1, 100, 2) == pytest.approx(3.2742, abs=1e-3)

    def test_matches_bridge_quantile(self, bridge_sup_samples):
        q_mc = float(np.quantile(bridge_sup_samples[(1, 100)], 0.9))
        x = vostrikova_critical(0.1, 100, 1)
        assert abs(x - q_mc) <= 0.02 * q_mc

    def test_central_quantiles_unreachable(self):
        with pytest.raises(ApproximationFailureError, match="peaks"):
            vostrikova_critical(0.99, 100, 1)
        x = vostrikova_critical(0.9, 100, 1)  # still solvable, near the edge
        assert x < 1.5

    def test_alpha_bounds(self):
        with pytest.raises(ValueError, match="alpha"):
            vostrikova_critical(0.0, 100, 1)


class TestChangeEstimates:
    def brute_force_k(self, sample):
        """Unweighted-by-hand argmax of the fully functional objective."""
        n = len(sample)
        centered = sample.coeffs - sample.coeffs.mean(axis=0)
        best, best_k = -math.inf, 0
        for k in range(1, n):
            part = centered[:k].sum(axis=0) / math.sqrt(n)
            w = 1.0 / math.sqrt((k / n) * (1.0 - k / n))
            obj = w * np.linalg.norm(part)
            if obj > best:
                best, best_k = obj, k
        return best_k

    @pytest.mark.parametrize("m", [9, 22, 45])
    def test_noiseless_step_found_exactly(self, m):
        n = 60
        coeffs = np.zeros((n, 5))
        coeffs[m:] = np.array([1.0, -0.5, 0.2, 0.0, 0.3])
        s = FunctionalSample(coeffs, fourier_basis(5))
        est = lrcov_estimate(s, PLAIN, 0.0)
        for d in (1, 2):
            ce = change_estimates(s, est, d)
            assert ce == (m, m, m)
        assert self.brute_force_k(s) == m

    def test_constant_data_tie_rule(self):
        s = FunctionalSample(np.ones((12, 3)), fourier_basis(3))
        est = identity_estimate(fourier_basis(3))
        assert change_estimates(s, est, 2) == (1, 1, 1)

    def test_consistency_under_weak_dependence(self):
        spec = SimSpec(n=300, kernel=calibrate_kernel("wiener", 0.2),
                       change=make_change("sin", 0.5))
        sim = Far1Simulator(spec)
        f25 = fourier_basis(25)
        devs = np.zeros((500, 3))
        for rep in range(500):
            work = change_basis(sim.generate(seed=(888, rep)), f25)
            est = lrcov_estimate(work, PLAIN, 3.0)
            ce = change_estimates(work, est, 2)
            devs[rep] = [abs(k / 300 - 0.5) for k in ce]
        assert np.all(np.median(devs, axis=0) <= 0.03)


class TestRunTest:
    def test_iid_size_within_bracket(self):
        sim = Far1Simulator(SimSpec(n=100, kernel=calibrate_kernel("gaussian", 0.0),
                                    burn_in=5))
        cfg = Config(d=2, h=2.0, alpha=0.10)
        rejections = sum(run_test(sim.generate(seed=(777, rep)), cfg).reject
                         for rep in range(1000))
        assert 0.03 <= rejections / 1000 <= 0.13

    def test_large_step_rejects_decisively(self):
        spec = SimSpec(n=100, kernel=calibrate_kernel("wiener", 0.3),
                       change=make_change("constant", 0.5, amplitude=3.0))
        res = run_test(Far1Simulator(spec).generate(seed=31), Config(d=2, h=2.0))
        assert res.reject
        assert res.p_vostrikova < 0.01
        assert abs(res.k_hat_standardized - 50) <= 5

    def test_sign_flip_of_eigenfunction_is_invisible(self):
        rng = np.random.default_rng(23)
        s = FunctionalSample(rng.normal(size=(40, 6)), fourier_basis(6))
        est = lrcov_estimate(s, PLAIN, 2.0)
        flipped = LrCovEstimate(cov=est.cov, eigvals=est.eigvals,
                                eigvecs=est.eigvecs * np.array([-1, 1, -1, 1, 1, -1]),
                                basis=est.basis, h=est.h,
                                kernel_kind=est.kernel_kind, d_max=est.d_max)
        assert statistic(scores(s, est, 3), 40) == statistic(scores(s, flipped, 3), 40)

    def test_scale_invariance_of_standardized_statistic(self):
        rng = np.random.default_rng(24)
        coeffs = rng.normal(size=(50, 5))
        b = fourier_basis(5)
        results = []
        for c in (1.0, 7.5):
            s = FunctionalSample(c * coeffs, b)
            est = lrcov_estimate(s, PLAIN, 3.0)
            results.append(statistic(scores(s, est, 2), 50))
        assert results[0][0] == pytest.approx(results[1][0], abs=1e-10)
        assert results[0][1] == results[1][1]

    def test_location_invariance(self):
        rng = np.random.default_rng(25)
        coeffs = rng.normal(size=(50, 5))
        shift = np.array([4.0, -2.0, 1.0, 0.5, -3.0])
        b = fourier_basis(5)
        results = []
        for delta in (0.0, 1.0):
            s = FunctionalSample(coeffs + delta * shift, b)
            est = lrcov_estimate(s, PLAIN, 3.0)
            results.append(statistic(scores(s, est, 2), 50))
        assert results[0][0] == pytest.approx(results[1][0], abs=1e-10)
        assert results[0][1] == results[1][1]

    @pytest.mark.parametrize("h", [0.0, 3.0])
    def test_time_reversal_symmetry(self, h):
        rng = np.random.default_rng(5)
        coeffs = rng.normal(size=(40, 6))
        b = fourier_basis(6)
        s = FunctionalSample(coeffs, b)
        s_rev = FunctionalSample(coeffs[::-1].copy(), b)
        t_fwd, k_fwd = statistic(scores(s, lrcov_estimate(s, PLAIN, h), 3), 40)
        t_rev, k_rev = statistic(scores(s_rev, lrcov_estimate(s_rev, PLAIN, h), 3), 40)
        assert t_fwd == pytest.approx(t_rev, abs=1e-10)
        assert k_rev == 40 - k_fwd

    def test_full_projection_equals_functional_objective(self):
        rng = np.random.default_rng(26)
        s = FunctionalSample(rng.normal(size=(40, 6)), fourier_basis(6))
        est = lrcov_estimate(s, PLAIN, 2.0)
        t_proj, k_proj = statistic(scores(s, est, 6), 40, standardized=False)
        t_full, k_full = _fully_functional_max(s)
        assert t_proj == pytest.approx(t_full, abs=1e-10)
        assert k_proj == k_full
        res = run_test(s, Config(d=6, h=2.0, fourier_size=6))
        assert res.k_hat_fully_functional == k_full

    def test_default_bandwidth_used_when_h_omitted(self):
        rng = np.random.default_rng(27)
        s = FunctionalSample(rng.normal(size=(100, 5)), fourier_basis(5))
        res = run_test(s, Config(d=2))
        assert res.h == 3.0  # floor(100^(1/4))

    def test_reject_consistent_with_critical_value(self):
        rng = np.random.default_rng(28)
        s = FunctionalSample(rng.normal(size=(60, 4)), fourier_basis(4))
        for method in ("vostrikova", "gumbel"):
            res = run_test(s, Config(d=2, h=1.0, critical_method=method))
            assert res.reject == (res.statistic > res.critical_value)
            assert res.critical_method == method

    def test_config_validation(self):
        with pytest.raises(ValueError, match="d must be >= 1"):
            Config(d=0)
        with pytest.raises(ValueError, match="alpha"):
            Config(alpha=1.5)
        with pytest.raises(ValueError, match="critical_method"):
            Config(critical_method="bootstrap")
        with pytest.raises(ValueError, match="basis size"):
            Config(d=30, fourier_size=25)

    def test_needs_three_curves(self):
        s = FunctionalSample(np.zeros((2, 3)), fourier_basis(3))
        with pytest.raises(ValueError, match="three"):
            run_test(s, Config(d=1))

    def test_json_and_csv_serialization(self):
        rng = np.random.default_rng(29)
        s = FunctionalSample(rng.normal(size=(50, 4)), fourier_basis(4))
        res = run_test(s, Config(d=2, h=2.0))
        data = json.loads(json.dumps(res.to_json_dict(provenance={"src": "x"})))
        assert data["n"] == 50 and data["provenance"] == {"src": "x"}
        assert data["statistic"] == res.statistic
        row = res.csv_row()
        header_fields = Result.CSV_HEADER.split(",")
        assert len(row.split(",")) == len(header_fields) == 16
        assert row.split(",")[header_fields.index("reject")] in ("true", "false")

    def test_degenerate_sample_flagged(self):
        s = FunctionalSample(np.ones((10, 3)), fourier_basis(3))
        res = run_test(s, Config(d=2, h=0.0, fourier_size=3))
        assert res.degenerate
        assert res.statistic == 0.0  # constant data: scores vanish too
