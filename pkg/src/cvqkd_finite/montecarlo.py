"""Synthetic linear-model data and statistical validation of the estimation step."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate, stats

from .errors import DomainError, QuadratureError
from .estimation import confidence_bounds, keyrate_from_estimates, ml_estimators, normal_quantile_half
from .finite_size import BlockPlan, SecurityBudget
from .gaussian import ChannelModel
from .modulation import ProtocolSpec, Scheme

QUAD_HALF_WIDTH_SD = 8.0


@dataclass(frozen=True)
class TrialConfig:
    true_t: float
    true_sigma2: float
    spec: ProtocolSpec
    m: int
    trials: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.trials < 1:
            raise DomainError("trials must be >= 1")
        if self.m < 2:
            raise DomainError("m must be >= 2")
        if self.true_sigma2 < 0:
            raise DomainError("noise variance must be >= 0")

    @classmethod
    def from_channel(cls, spec: ProtocolSpec, ch: ChannelModel, m: int, trials: int = 1, seed: int = 0):
        return cls(math.sqrt(ch.t_lin), ch.sigma2, spec, m, trials, seed)


def x_law(scheme: Scheme) -> str:
    """Distribution used for Alice's disclosed values; eight-dim uses a Gaussian stand-in."""
    if scheme in (Scheme.TWO_STATE, Scheme.FOUR_STATE):
        return "bernoulli"
    if scheme is Scheme.EIGHT_DIM:
        return "normal-proxy"
    return "normal"


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """Counter-based stream for one trial; streams for distinct trials never overlap."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(trial,))
    return np.random.Generator(np.random.Philox(ss))


def sample_pairs(cfg: TrialConfig, trial: int = 0) -> tuple[np.ndarray, np.ndarray]:
    rng = trial_rng(cfg.seed, trial)
    va = cfg.spec.va
    if x_law(cfg.spec.scheme) == "bernoulli":
        x = np.where(rng.random(cfg.m) < 0.5, -1.0, 1.0) * math.sqrt(va)
    else:
        x = rng.standard_normal(cfg.m) * math.sqrt(va)
    noise = rng.standard_normal(cfg.m) * math.sqrt(cfg.true_sigma2)
    return x, cfg.true_t * x + noise


def _map_trials(fn: Callable[[int], tuple], trials: int, workers: int) -> list:
    if workers <= 1:
        return [fn(i) for i in range(trials)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(trials)))


@dataclass(frozen=True)
class EstimatorCheck:
    trials: int
    m: int
    ks_t_stat: float
    ks_t_pvalue: float
    ks_chi2_stat: float
    ks_chi2_pvalue: float
    corr_t_sigma2: float
    t_std_mean: float
    t_std_var: float

    def passes(self, level: float = 1e-3) -> bool:
        return (
            self.ks_t_pvalue > level
            and self.ks_chi2_pvalue > level
            and abs(self.corr_t_sigma2) < 5.0 / math.sqrt(self.trials)
        )


def estimator_distribution_check(cfg: TrialConfig, workers: int = 1) -> EstimatorCheck:
    """KS tests of the ML estimators against their sampling laws.

    ``t_hat`` is standardised per trial with its own ``sum(x^2)``, which is
    the conditional law; ``m * sigma2_hat / sigma2`` is compared with
    chi-squared on ``m - 1`` degrees of freedom.
    """
    if cfg.true_sigma2 <= 0:
        raise DomainError("noise variance must be > 0 for the distribution check")

    def one(i: int):
        x, y = sample_pairs(cfg, i)
        t_hat, s2_hat = ml_estimators(x, y)
        sxx = float(np.dot(x, x))
        return t_hat, s2_hat, (t_hat - cfg.true_t) / math.sqrt(cfg.true_sigma2 / sxx)

    res = np.array(_map_trials(one, cfg.trials, workers))
    t_hat, s2_hat, t_std = res[:, 0], res[:, 1], res[:, 2]
    ks_t = stats.kstest(t_std, "norm")
    ks_c = stats.kstest(cfg.m * s2_hat / cfg.true_sigma2, stats.chi2(cfg.m - 1).cdf)
    corr = float(np.corrcoef(t_hat, s2_hat)[0, 1]) if cfg.trials > 2 else math.nan
    return EstimatorCheck(
        cfg.trials, cfg.m,
        float(ks_t.statistic), float(ks_t.pvalue),
        float(ks_c.statistic), float(ks_c.pvalue),
        corr, float(t_std.mean()), float(t_std.var(ddof=1)),
    )


@dataclass(frozen=True)
class CoverageResult:
    trials: int
    hits: int
    t_hits: int
    sigma2_hits: int

    @property
    def coverage(self) -> float:
        return self.hits / self.trials

    def binomial_sd(self, p: float) -> float:
        return math.sqrt(p * (1.0 - p) / self.trials)


def coverage_counts(cfg: TrialConfig, eps_pe: float, workers: int = 1) -> CoverageResult:
    def one(i: int):
        x, y = sample_pairs(cfg, i)
        t_hat, s2_hat = ml_estimators(x, y)
        b = confidence_bounds(t_hat, s2_hat, cfg.m, cfg.spec.va, eps_pe)
        return cfg.true_t >= b.t_min, cfg.true_sigma2 <= b.sigma2_max

    res = np.array(_map_trials(one, cfg.trials, workers), dtype=bool)
    return CoverageResult(cfg.trials, int(np.sum(res[:, 0] & res[:, 1])), int(res[:, 0].sum()), int(res[:, 1].sum()))


def coverage_experiment(cfg: TrialConfig, eps_pe: float, workers: int = 1) -> float:
    """Fraction of trials whose confidence rectangle contains the true ``(t, sigma2)``."""
    return coverage_counts(cfg, eps_pe, workers).coverage


def sigma2_expectation(f: Callable[[float], float], sigma2: float, m: int, tol: float = 1e-6) -> float:
    """``E[f(s)]`` for ``s ~ N(sigma2, 2 sigma2^2 / m)``, the large-m law of ``sigma2_hat``.

    Adaptive quadrature over +-8 standard deviations.
    """
    sd = sigma2 * math.sqrt(2.0 / m)
    norm = 1.0 / (2.0 * sigma2) * math.sqrt(m / math.pi)

    def integrand(s: float) -> float:
        return norm * math.exp(-m * (s - sigma2) ** 2 / (4.0 * sigma2**2)) * f(s)

    lo = sigma2 - QUAD_HALF_WIDTH_SD * sd
    hi = sigma2 + QUAD_HALF_WIDTH_SD * sd
    value, err, info = integrate.quad(integrand, lo, hi, epsabs=tol, epsrel=1e-10, limit=200, full_output=1)[:3]
    if err > tol:
        raise QuadratureError(f"quadrature error estimate {err:.3g} exceeds tolerance {tol:.3g}")
    return value


def expected_keyrate_k2(
    spec: ProtocolSpec,
    ch: ChannelModel,
    plan: BlockPlan,
    budget: SecurityBudget,
    beta: float,
    tol: float = 1e-6,
) -> float:
    """Key rate averaged over the sampling law of ``sigma2_hat``; ``t_hat`` held at ``sqrt(T)``.

    Observed values whose upper bound would fall below shot noise are
    evaluated at the smallest value with a physical bound, so the integrand
    stays defined across the whole window.
    """
    t = math.sqrt(ch.t_lin)
    z = normal_quantile_half(budget.eps_pe)
    s_floor = 1.0 / (1.0 + z * math.sqrt(2.0 / plan.n_est))

    def rate(s: float) -> float:
        return keyrate_from_estimates(spec, t, max(s, s_floor), plan, budget, beta).rate

    return sigma2_expectation(rate, ch.sigma2, plan.n_est, tol)
