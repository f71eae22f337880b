import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from freqdetect import entropy as E
from freqdetect.entropy import GaussianProcessSpec as Spec

K = math.sqrt(2 * math.pi * math.e)


def test_entropy_gaussian_examples():
    assert E.entropy_gaussian(1) == pytest.approx(1.418939, abs=1e-6)
    assert E.entropy_gaussian(1 / K) == pytest.approx(0, abs=1e-15)
    assert E.entropy_gaussian(math.e / K) == pytest.approx(1, abs=1e-15)
    with pytest.raises(E.NonPositiveSigma):
        E.entropy_gaussian(0)
    with pytest.raises(E.NonPositiveSigma):
        Spec([1.0, -1.0])


def test_packet_entropy_examples():
    assert E.packet_entropy(Spec.constant(1, 1)) == pytest.approx(1.418939, abs=1e-6)
    assert E.packet_entropy(Spec.constant(10, 1)) == pytest.approx(14.18939, abs=1e-5)
    assert E.packet_entropy(Spec.constant(7, 1 / K)) == pytest.approx(0, abs=1e-12)


@given(st.lists(st.floats(0.25, 20), min_size=1, max_size=20),
       st.lists(st.floats(0.25, 20), min_size=1, max_size=20))
@settings(max_examples=100, deadline=None)
def test_packet_entropy_additive(a, b):
    assert E.packet_entropy(Spec(a + b)) == pytest.approx(
        E.packet_entropy(Spec(a)) + E.packet_entropy(Spec(b)), abs=1e-9)


def test_minmax_examples():
    assert E.loss_minmax_lower_bound(Spec.constant(1, 3)) == 0
    assert E.loss_minmax_lower_bound(Spec.constant(100, 1)) == pytest.approx(140.475, abs=1e-3)
    assert E.loss_minmax_lower_bound(Spec.constant(100, 1 / K)) == pytest.approx(0, abs=1e-12)


def test_avg_examples():
    assert E.loss_avg_bounds(Spec.constant(100, 1))[0] == pytest.approx(4.60517, abs=1e-5)
    lo, up = E.loss_avg_bounds(Spec.constant(100, 1 / K))
    assert up == pytest.approx(math.log(math.sqrt(100)), abs=1e-12)
    # transcribed as written: the ln N lower bound sits above ln sqrt(N) here
    assert lo == pytest.approx(math.log(100)) and lo > up
    assert E.loss_avg_exact(Spec.constant(1, 1)) == pytest.approx(0, abs=1e-15)
    assert E.loss_avg_exact(Spec.constant(2, 1)) == pytest.approx(1.765, abs=1e-3)


def test_avg_exact_matches_direct_log_of_product():
    s = np.array([0.5, 1.0, 3.0, 2.2])
    n = len(s)
    want = math.log(n * K ** (n - 1) * np.prod(s) / math.sqrt(np.sum(s ** 2)))
    assert E.loss_avg_exact(Spec(s)) == pytest.approx(want, rel=1e-12)


def test_sqrt_n_lower_bound_holds_on_stationary_specs():
    # ln sqrt(N) + (N-1) ln(K E[sigma]) <= exact on stationary specs
    rng = np.random.default_rng(0)
    for _ in range(1000):
        spec = Spec.constant(int(rng.integers(1, 65)), math.exp(rng.uniform(0, math.log(10))) / K)
        assert E.loss_avg_expected_lower_bound(spec) <= E.loss_avg_exact(spec) + 1e-9


def test_sqrt_n_lower_bound_holds_where_ln_n_is_tight():
    # at K sigma = 1 the exact loss is ln sqrt(N), below ln N for N >= 2
    rng = np.random.default_rng(1)
    for _ in range(1000):
        n = int(rng.integers(1, 65))
        ks = np.exp(rng.uniform(0, math.log(10), n))
        spec = Spec(ks / K)
        _, up = E.loss_avg_bounds(spec)
        exact = E.loss_avg_exact(spec)
        assert 0.5 * math.log(n) - 1e-9 <= exact <= up + 1e-9


def test_variance_examples():
    assert E.loss_variance(Spec.constant(100, 1)) == pytest.approx(133.72, abs=5e-3)
    a, b = E.loss_variance(Spec.constant(100, 1)), E.loss_variance(Spec.constant(200, 1))
    assert b - a == pytest.approx(100 * math.log(K) - 1.5 * math.log(2), rel=1e-12)
    assert abs((b - a) - 100 * math.log(K)) <= 0.05 * 100 * math.log(K)
    v = E.loss_variance(Spec.constant(100, 1 / K))
    assert v == pytest.approx(-math.log(math.sqrt(4 * math.pi * 1e6) * K ** 2), rel=1e-12) and v < 0
    with pytest.raises(E.NonStationary):
        E.loss_variance(Spec([1.0, 2.0]))


def test_frequency_examples():
    assert E.loss_frequency(Spec.constant(100, 1), 1) == pytest.approx(-487.94, abs=0.01)
    vals = [E.loss_frequency(Spec.constant(30, 1), w) for w in (0.5, 1, 10, 1000)]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    with pytest.raises(E.NonStationary):
        E.loss_frequency(Spec([1.0, 2.0]), 10)


@given(st.integers(1, 500), st.floats(1 / K, 50), st.floats(0.1, 1000))
@settings(max_examples=200, deadline=None)
def test_reduction_identity(n, sigma, w):
    spec = Spec.constant(n, sigma)
    lhs = E.loss_avg_exact(spec) - E.loss_frequency(spec, w)
    assert lhs == pytest.approx(E.reduction_vs_avg(spec, w), abs=1e-6)


@pytest.mark.parametrize("sampler,truth", [
    (lambda rng, n: rng.standard_normal(n), math.log(K)),
    (lambda rng, n: rng.random(n), 0.0),
    (lambda rng, n: 2 * rng.standard_normal(n), math.log(2 * K)),
])
def test_knn_estimator_examples(sampler, truth):
    est, se = E.estimate_entropy_mc(sampler, 100_000, seed=3)
    assert abs(est - truth) <= 0.05 and se > 0


def test_knn_estimator_two_dimensions():
    est = E.knn_entropy(np.random.default_rng(4).standard_normal((50_000, 2)))
    assert est == pytest.approx(2 * math.log(K), abs=0.05)


def test_knn_estimator_rejects_small_budget():
    with pytest.raises(ValueError):
        E.estimate_entropy_mc(lambda rng, n: rng.random(n), 999)


def test_stderr_shrinks_with_sample_count():
    f = lambda rng, n: rng.standard_normal(n)  # noqa: E731
    _, se1 = E.estimate_entropy_mc(f, 25_000, seed=5)
    _, se4 = E.estimate_entropy_mc(f, 100_000, seed=5)
    assert se1 / se4 == pytest.approx(2.0, rel=0.3)


def test_minmax_check_min_feature():
    r = E.verify_theorem(1, Spec.constant(20, 1), 100_000, seed=0)
    assert r.method is E.Method.MINMAX
    assert r.closed_form == pytest.approx(19 * math.log(K))
    assert r.monte_carlo >= 19 * math.log(K) - 3 * r.mc_stderr and r.passed


def test_average_check():
    r = E.verify_theorem(3, Spec.constant(50, 1), 100_000, seed=0)
    assert r.monte_carlo >= math.log(50) - 3 * r.mc_stderr and r.passed
    assert r.mc_stderr > 0


def test_variance_estimate_converges_relative_to_chi2_form():
    # the written estimate undershoots the exact chi-square loss; the relative gap shrinks with N
    gaps = []
    for n in (10, 50, 200, 1000):
        spec = Spec.constant(n, 1)
        exact = E.loss_variance_chi2(spec)
        gaps.append((exact - E.loss_variance(spec)) / exact)
    assert all(g > 0 for g in gaps)
    assert all(a > b for a, b in zip(gaps, gaps[1:]))
    assert gaps[-1] < 0.01


def test_average_lower_bound_check_needs_stationarity():
    assert E.verify_theorem(2, Spec.constant(10, 1.5), 20_000).passed
    with pytest.raises(E.NonStationary):
        E.verify_theorem(2, Spec([1.0, 10.0]), 20_000)


def test_average_lower_bound_is_tight_at_boundary():
    spec = Spec.constant(12, 1 / K)
    assert E.loss_avg_expected_lower_bound(spec) == pytest.approx(E.loss_avg_exact(spec), abs=1e-12)


def test_inadmissible_spec_rejected():
    with pytest.raises(E.HypothesisViolation):
        E.verify_theorem(1, Spec.constant(5, 0.1), 10_000)


def test_variance_frequency_and_identity_reports():
    spec = Spec.constant(50, 1)
    r4 = E.verify_theorem(4, spec, 20_000)
    assert r4.closed_form == E.loss_variance(spec) and r4.passed
    assert abs(r4.monte_carlo - r4.details["exact_chi2"]) <= 0.05
    r5 = E.verify_theorem(5, spec, 100_000, w=10)
    assert r5.passed and abs(r5.details["bin_entropy_mc"] - (1 + math.log(2))) < 0.05
    r6 = E.verify_theorem(6, spec, 20_000, w=10)
    assert r6.passed and r6.details["identity_lhs"] == pytest.approx(r6.closed_form, abs=1e-6)
    d = r6.to_dict()
    assert d["method"] == "Frequency" and d["theorem"] == 6
    with pytest.raises(ValueError):
        E.verify_theorem(7, spec)
