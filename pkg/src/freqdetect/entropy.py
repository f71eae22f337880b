"""Differential-entropy model of feature extraction, in nats.

A per-packet feature sequence of length N is modelled as independent Gaussians
s_i ~ N(u_i, sigma_i**2), so H(s_i) = ln(K sigma_i) with K = sqrt(2 pi e).
The information loss of an extractor is the entropy of the raw sequence minus
the entropy of the extracted feature.  This module has closed forms for
min/max, average, variance and frequency-domain extractors and a
nearest-neighbour Monte-Carlo harness that checks them.

Every sigma must satisfy sigma >= 1/K so that each H(s_i) >= 0.
"""
from __future__ import annotations

import dataclasses
import enum
import math
from typing import Callable, Optional

import numpy as np
from scipy.special import digamma, gammaln

from .errors import FreqDetectError

K = math.sqrt(2 * math.pi * math.e)
LN_K = math.log(K)
_ADMISSIBLE_RTOL = 1e-12


class NonPositiveSigma(FreqDetectError, ValueError):
    pass


class HypothesisViolation(FreqDetectError, ValueError):
    pass


class NonStationary(HypothesisViolation):
    pass


class Method(str, enum.Enum):
    MINMAX = "MinMax"
    AVERAGE = "Average"
    VARIANCE = "Variance"
    FREQUENCY = "Frequency"


@dataclasses.dataclass(frozen=True)
class GaussianProcessSpec:
    sigma: np.ndarray
    mean: Optional[np.ndarray] = None

    def __post_init__(self):
        sigma = np.atleast_1d(np.asarray(self.sigma, dtype=np.float64))
        if sigma.ndim != 1 or len(sigma) == 0:
            raise ValueError("sigma must be a non-empty 1-D sequence")
        if not (sigma > 0).all():
            raise NonPositiveSigma("every sigma must be positive")
        mean = np.zeros_like(sigma) if self.mean is None else np.asarray(self.mean, dtype=np.float64)
        if mean.shape != sigma.shape:
            raise ValueError("mean and sigma must have the same length")
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "mean", mean)

    @classmethod
    def constant(cls, n: int, sigma: float, mean: float = 0.0) -> "GaussianProcessSpec":
        return cls(np.full(n, float(sigma)), np.full(n, float(mean)))

    @property
    def n(self) -> int:
        return len(self.sigma)

    @property
    def stationary(self) -> bool:
        return bool(np.ptp(self.sigma) == 0 and np.ptp(self.mean) == 0)

    @property
    def admissible(self) -> bool:
        """Non-negative differential entropy of every element (K sigma >= 1)."""
        return bool((K * self.sigma >= 1 - _ADMISSIBLE_RTOL).all())

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return self.mean + self.sigma * rng.standard_normal((size, self.n))


def _require_admissible(spec: GaussianProcessSpec):
    if not spec.admissible:
        raise HypothesisViolation(f"sigma below 1/K = {1 / K:.6f}: min sigma {spec.sigma.min():.6g}")


def _require_stationary(spec: GaussianProcessSpec) -> float:
    if not spec.stationary or spec.mean[0] != 0:
        raise NonStationary("requires a strictly stationary zero-mean process")
    return float(spec.sigma[0])


# ---------------------------------------------------------------------------
# closed forms

def entropy_gaussian(sigma: float) -> float:
    if not sigma > 0:
        raise NonPositiveSigma(f"sigma must be positive, got {sigma!r}")
    return math.log(K * sigma)


def packet_entropy(spec: GaussianProcessSpec) -> float:
    return float(np.sum(np.log(K * spec.sigma)))


def loss_minmax_lower_bound(spec: GaussianProcessSpec) -> float:
    """(N - 1) ln(K E[sigma]): lower bound on the expected min/max loss."""
    return (spec.n - 1) * math.log(K * float(spec.sigma.mean()))


def loss_avg_expected_lower_bound(spec: GaussianProcessSpec) -> float:
    """ln sqrt(N) + (N - 1) ln(K E[sigma]) for the average feature."""
    return 0.5 * math.log(spec.n) + (spec.n - 1) * math.log(K * float(spec.sigma.mean()))


def loss_avg_bounds(spec: GaussianProcessSpec) -> tuple[float, float]:
    """(ln N, ln sqrt(N) + (N - 1) ln(K Q)) with Q the quadratic mean of sigma."""
    q = math.sqrt(float(np.mean(spec.sigma ** 2)))
    return math.log(spec.n), 0.5 * math.log(spec.n) + (spec.n - 1) * math.log(K * q)


def loss_avg_exact(spec: GaussianProcessSpec) -> float:
    """Loss of the average feature: ln(N K^(N-1) prod(sigma) / sqrt(sum sigma^2))."""
    s = spec.sigma
    return (math.log(spec.n) + (spec.n - 1) * LN_K + float(np.sum(np.log(s)))
            - 0.5 * math.log(float(np.sum(s * s))))


def loss_variance(spec: GaussianProcessSpec) -> float:
    """Large-N estimate N ln(K sigma) - ln(sqrt(4 pi N^3) / sigma^2)."""
    sigma = _require_stationary(spec)
    n = spec.n
    return n * math.log(K * sigma) - math.log(math.sqrt(4 * math.pi * n ** 3) / sigma ** 2)


def loss_variance_chi2(spec: GaussianProcessSpec) -> float:
    """Same loss without the large-N approximations (exact chi-square entropy)."""
    sigma = _require_stationary(spec)
    n = spec.n
    h_chi2 = math.log(2) + gammaln(n / 2) + (1 - n / 2) * digamma(n / 2) + n / 2
    return packet_entropy(spec) - (math.log(sigma ** 2 / n) + h_chi2)


def loss_frequency(spec: GaussianProcessSpec, w: float) -> float:
    """N ln((sigma / w^2) sqrt(pi / 2e)) - N ln N for the frequency features."""
    sigma = _require_stationary(spec)
    if not w > 0:
        raise ValueError("encoding weight must be positive")
    n = spec.n
    return n * math.log(sigma / w ** 2 * math.sqrt(math.pi / (2 * math.e))) - n * math.log(n)


def reduction_vs_avg(spec: GaussianProcessSpec, w: float) -> float:
    """N ln(2 e w^2 N) + ln(sqrt(N) / (K sigma))."""
    sigma = _require_stationary(spec)
    n = spec.n
    return n * math.log(2 * math.e * w ** 2 * n) + math.log(math.sqrt(n) / (K * sigma))


def reduction_vs_minmax(spec: GaussianProcessSpec, w: float) -> float:
    sigma = _require_stationary(spec)
    n = spec.n
    return n * math.log(2 * math.e * w ** 2 * n) - math.log(K * sigma)


def reduction_vs_variance(spec: GaussianProcessSpec, w: float) -> float:
    sigma = _require_stationary(spec)
    n = spec.n
    return n * math.log(2 * math.e * w ** 2 * n) - math.log(math.sqrt(4 * math.pi * n ** 3) / sigma ** 2)


# ---------------------------------------------------------------------------
# Monte-Carlo

def knn_entropy_terms(x) -> tuple[float, np.ndarray]:
    """Kozachenko-Leonenko (k=1) decomposition: H = const + mean(terms).

    Points with a zero nearest-neighbour distance (exact duplicates) are
    dropped.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    n, d = x.shape
    if n < 2:
        raise ValueError("need at least two samples")
    if d == 1:
        s = np.sort(x[:, 0])
        gaps = np.diff(s)
        eps = np.minimum(np.r_[np.inf, gaps], np.r_[gaps, np.inf])
    else:
        from scipy.spatial import cKDTree
        eps = cKDTree(x).query(x, k=2)[0][:, 1]
    eps = eps[eps > 0]
    m = len(eps)
    log_unit_ball = (d / 2) * math.log(math.pi) - gammaln(d / 2 + 1)
    const = digamma(m) - digamma(1) + log_unit_ball
    return float(const), d * np.log(eps)


def knn_entropy(x) -> float:
    const, terms = knn_entropy_terms(x)
    return const + float(terms.mean())


def estimate_entropy_mc(sampler: Callable[[np.random.Generator, int], np.ndarray],
                        n_samples: int = 100_000, seed: int = 0,
                        n_boot: int = 200) -> tuple[float, float]:
    """Nearest-neighbour entropy estimate of ``sampler`` output with a bootstrap stderr.

    ``sampler(rng, n)`` must return ``n`` draws (shape ``(n,)`` or ``(n, d)``).
    The bootstrap resamples the per-point log-distance terms.
    """
    if n_samples < 1000:
        raise ValueError("n_samples must be at least 1000")
    rng = np.random.default_rng(seed)
    const, terms = knn_entropy_terms(sampler(rng, n_samples))
    boot_rng = np.random.default_rng([seed, 1])
    means = np.empty(n_boot)
    for b in range(n_boot):
        means[b] = terms[boot_rng.integers(0, len(terms), len(terms))].mean()
    return const + float(terms.mean()), float(means.std(ddof=1))


@dataclasses.dataclass
class LossReport:
    theorem: int
    method: Method
    closed_form: float
    monte_carlo: Optional[float]
    mc_stderr: Optional[float]
    check: str
    passed: bool
    details: dict = dataclasses.field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"theorem": self.theorem, "method": self.method.value,
                "closed_form": self.closed_form, "monte_carlo": self.monte_carlo,
                "mc_stderr": self.mc_stderr, "check": self.check, "passed": self.passed,
                "details": self.details}


def _feature_entropy(spec, reduce, n_samples, seed):
    def sampler(rng, n):
        out = np.empty(n)
        # bounded memory for long sequences
        step = max(1, 4_000_000 // spec.n)
        for s in range(0, n, step):
            out[s:s + step] = reduce(spec.sample(rng, min(step, n - s)))
        return out
    return estimate_entropy_mc(sampler, n_samples, seed)


def _chi2_bin_entropy(sigma, w, n, n_samples, seed):
    """Entropy of 2 |DFT_k(w s)|^2 / (n sigma^2 w^2) for one interior bin k."""
    k = max(1, (n - 1) // 4)

    def sampler(rng, size):
        s = sigma * rng.standard_normal((size, n))
        F = np.fft.rfft(w * s, axis=1)[:, k]
        return 2 * (F.real ** 2 + F.imag ** 2) / (n * sigma ** 2 * w ** 2)
    return estimate_entropy_mc(sampler, n_samples, seed)


def verify_theorem(theorem: int, spec: GaussianProcessSpec, mc_samples: int = 100_000,
                   seed: int = 0, w: float = 10.0, z: float = 3.0,
                   spot_n: int = 16) -> LossReport:
    """Closed form plus Monte-Carlo evidence for one check, ``theorem`` in 1-6.

    1: min/max loss lower bound.  2: average-feature lower bound (stationary
    specs only).  3: average-feature bounds; the exact loss must lie between
    them.  For 1-3 the Monte-Carlo loss must be on the correct side of the
    lower bound within ``z`` standard errors.  4: variance estimate, reported
    without a bound.  5: chi-square(2) law of a normalized DFT bin at
    ``min(max(N, 3), spot_n)`` samples.  6: algebraic identity between the
    average and frequency losses.
    """
    _require_admissible(spec)
    h_packet = packet_entropy(spec)

    if theorem == 1:
        closed = loss_minmax_lower_bound(spec)
        h_min, se_min = _feature_entropy(spec, lambda x: x.min(1), mc_samples, seed)
        h_max, se_max = _feature_entropy(spec, lambda x: x.max(1), mc_samples, seed + 1)
        mc_min, mc_max = h_packet - h_min, h_packet - h_max
        ok = mc_min >= closed - z * se_min and mc_max >= closed - z * se_max
        return LossReport(1, Method.MINMAX, closed, mc_min, se_min,
                          "loss >= (N-1) ln(K E[sigma])", bool(ok),
                          {"mc_max_feature": mc_max, "mc_max_stderr": se_max})

    if theorem in (2, 3):
        h_avg, se = _feature_entropy(spec, lambda x: x.mean(1), mc_samples, seed)
        mc = h_packet - h_avg
        exact = loss_avg_exact(spec)
        if theorem == 2:
            _require_stationary(spec)
            closed = loss_avg_expected_lower_bound(spec)
            ok = mc >= closed - z * se
            return LossReport(2, Method.AVERAGE, closed, mc, se,
                              "loss >= ln sqrt(N) + (N-1) ln(K E[sigma])", bool(ok),
                              {"exact": exact})
        lower, upper = loss_avg_bounds(spec)
        ok = mc >= lower - z * se and lower <= exact <= upper
        return LossReport(3, Method.AVERAGE, lower, mc, se,
                          "ln N <= loss <= ln sqrt(N) + (N-1) ln(K Q)", bool(ok),
                          {"lower": lower, "upper": upper, "exact": exact})

    if theorem == 4:
        closed = loss_variance(spec)
        h_var, se = _feature_entropy(spec, lambda x: (x * x).mean(1), mc_samples, seed)
        return LossReport(4, Method.VARIANCE, closed, h_packet - h_var, se,
                          "estimate, no bound", True,
                          {"exact_chi2": loss_variance_chi2(spec)})

    if theorem == 5:
        closed = loss_frequency(spec, w)
        sigma = float(spec.sigma[0])
        # an interior (complex) bin needs at least 3 points
        n_spot = min(max(spec.n, 3), spot_n)
        h_t, se_t = _chi2_bin_entropy(sigma, w, n_spot, mc_samples, seed)
        target = 1 + math.log(2)
        # the closed form with the Monte-Carlo chi-square entropy in place of 1 + ln 2
        n = spec.n
        mc = h_packet - (n * math.log(n * w ** 2) + n * h_t)
        ok = abs(h_t - target) <= z * se_t
        return LossReport(5, Method.FREQUENCY, closed, mc, n * se_t,
                          "normalized DFT bin entropy = 1 + ln 2", bool(ok),
                          {"bin_entropy_mc": h_t, "bin_entropy_stderr": se_t,
                           "bin_entropy_exact": target, "spot_n": n_spot})

    if theorem == 6:
        closed = reduction_vs_avg(spec, w)
        identity = loss_avg_exact(spec) - loss_frequency(spec, w)
        r_avg = verify_theorem(3, spec, mc_samples, seed, w, z)
        r_wh = verify_theorem(5, spec, mc_samples, seed + 7, w, z, spot_n)
        mc = r_avg.monte_carlo - r_wh.monte_carlo
        se = math.hypot(r_avg.mc_stderr, r_wh.mc_stderr)
        ok = abs(identity - closed) <= 1e-6
        return LossReport(6, Method.FREQUENCY, closed, mc, se,
                          "loss_avg - loss_frequency = N ln(2e w^2 N) + ln(sqrt(N)/(K sigma))",
                          bool(ok), {"identity_lhs": identity,
                                     "vs_minmax": reduction_vs_minmax(spec, w),
                                     "vs_variance": reduction_vs_variance(spec, w)})

    raise ValueError(f"unknown theorem {theorem}")
