"""Parameter estimation in the normal linear model ``y = t*x + z``.

``t = sqrt(T)`` and ``sigma2 = 1 + T*xi`` are bounded from the ``m``
disclosed pairs by a rectangular confidence region, each side failing with
probability ``eps_pe / 2``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import special

from .errors import DomainError, InsufficientSamplesError, SmallSampleWarning, UnphysicalStateError
from .finite_size import BlockPlan, KeyRateReport, SecurityBudget, keyrate_finite
from .gaussian import PHYS_TOL, ChannelModel, TwoModeCov, awgn_mutual_info, cov_from_model, holevo_yE
from .modulation import ProtocolSpec, correlation_strength

GAUSSIAN_APPROX_MIN_M = 10_000
_SQRT2 = math.sqrt(2.0)


class Bounds(NamedTuple):
    t_min: float
    sigma2_max: float


@dataclass(frozen=True)
class EstimationOutcome:
    t_hat: float
    sigma2_hat: float
    m: int
    t_min: float
    sigma2_max: float
    eps_pe: float

    @property
    def transmission_hat(self) -> float:
        return self.t_hat**2

    @property
    def xi_hat(self) -> float:
        """Excess-noise estimate implied by ``(t_hat, sigma2_hat)``."""
        return (self.sigma2_hat - 1.0) / self.t_hat**2


@dataclass(frozen=True)
class CorrectionTerms:
    """First-order shifts of the covariance entries caused by finite estimation.

    ``delta_z_first_order`` and ``delta_b_first_order`` are the textbook
    expansion in ``1/sqrt(m)``, whose cross term omits ``sqrt(1 + T xi)``.
    ``delta_c`` and ``delta_b`` are the exact shifts of the ``c`` and ``b``
    coefficients under worst-case substitution.
    """

    delta_z_first_order: float
    delta_b_first_order: float
    delta_c: float
    delta_b: float


def normal_quantile_half(eps_pe: float) -> float:
    """Return z with ``(1 - erf(z / sqrt(2))) / 2 = eps_pe / 2``.

    Seeded with ``erfcinv`` and polished by Newton steps on ``log erfc`` so
    the residual is at double-precision level even for tiny ``eps_pe``.
    """
    if not (0.0 < eps_pe < 1.0):
        raise DomainError(f"eps_pe must lie in (0, 1), got {eps_pe!r}")
    z = _SQRT2 * float(special.erfcinv(eps_pe))
    target = math.log(eps_pe)
    for _ in range(3):
        tail = math.erfc(z / _SQRT2)
        if tail <= 0.0:
            break
        # d/dz log erfc(z/sqrt2) = -sqrt(2/pi) exp(-z^2/2) / erfc(z/sqrt2)
        slope = -math.sqrt(2.0 / math.pi) * math.exp(-0.5 * z * z) / tail
        step = (math.log(tail) - target) / slope
        z -= step
        if abs(step) < 1e-15 * max(1.0, abs(z)):
            break
    return z


def ml_estimators(x, y) -> tuple[float, float]:
    """Maximum-likelihood ``(t_hat, sigma2_hat)`` for ``y = t*x + z``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise DomainError(f"x and y must be 1-D arrays of equal length, got {x.shape} and {y.shape}")
    if x.size < 2:
        raise DomainError("need at least two sample pairs")
    sxx = float(np.dot(x, x))
    if sxx <= 0.0:
        raise DomainError("degenerate data: all x values are zero")
    t_hat = float(np.dot(x, y)) / sxx
    resid = y - t_hat * x
    return t_hat, float(np.dot(resid, resid)) / x.size


def confidence_bounds(t_hat: float, sigma2_hat: float, m: int, va: float, eps_pe: float) -> Bounds:
    """Worst-case ``(t_min, sigma2_max)`` from observed estimators.

    Uses the normal approximation to the chi-squared law of ``sigma2_hat``;
    a :class:`SmallSampleWarning` is emitted below 10^4 samples.
    """
    if va <= 0:
        raise DomainError(f"modulation variance must be > 0, got {va!r}")
    if m < 1:
        raise DomainError(f"need at least one estimation sample, got m={m!r}")
    if sigma2_hat < 0:
        raise DomainError(f"sigma2_hat must be >= 0, got {sigma2_hat!r}")
    if m < GAUSSIAN_APPROX_MIN_M:
        warnings.warn(
            f"m={m} is below {GAUSSIAN_APPROX_MIN_M}; the chi-squared normal approximation is loose",
            SmallSampleWarning,
            stacklevel=2,
        )
    z = normal_quantile_half(eps_pe)
    t_min = t_hat - z * math.sqrt(sigma2_hat / (m * va))
    sigma2_max = sigma2_hat + z * sigma2_hat * _SQRT2 / math.sqrt(m)
    return Bounds(t_min, sigma2_max)


def expected_bounds(ch: ChannelModel, m: int, va: float, eps_pe: float) -> Bounds:
    """Bounds obtained when the estimators sit at their expected values."""
    return confidence_bounds(math.sqrt(ch.t_lin), ch.sigma2, m, va, eps_pe)


def estimate(x, y, va: float, eps_pe: float) -> EstimationOutcome:
    t_hat, s2_hat = ml_estimators(x, y)
    m = len(x)
    b = confidence_bounds(t_hat, s2_hat, m, va, eps_pe)
    return EstimationOutcome(t_hat, s2_hat, m, b.t_min, b.sigma2_max, eps_pe)


def cov_from_bounds(spec: ProtocolSpec, bounds: Bounds) -> TwoModeCov:
    if bounds.t_min <= 0.0:
        raise InsufficientSamplesError(
            f"t_min = {bounds.t_min:.6g} <= 0: too few estimation samples for this eps_pe")
    if bounds.sigma2_max < 1.0 - PHYS_TOL:
        raise UnphysicalStateError(
            f"noise variance bound sigma2_max = {bounds.sigma2_max:.6g} is below shot noise (1); "
            "the data cannot come from a physical channel")
    return cov_from_model(spec, bounds.t_min, bounds.sigma2_max)


def worst_case_cov(spec: ProtocolSpec, ch: ChannelModel, m: int, eps_pe: float) -> TwoModeCov:
    """Covariance matrix at the corner ``(t_min, sigma2_max)`` of the confidence region."""
    return cov_from_bounds(spec, expected_bounds(ch, m, spec.va, eps_pe))


def covariance_correction(spec: ProtocolSpec, ch: ChannelModel, m: int, eps_pe: float) -> CorrectionTerms:
    """First-order covariance shifts next to the exact ones."""
    z = normal_quantile_half(eps_pe)
    T, va, s = ch.t_lin, spec.va, ch.sigma2
    dz_first = -z * math.sqrt(s / (m * va))
    db_first = z / math.sqrt(m) * (s * _SQRT2 - 2.0 * math.sqrt(T * va)) + z * z * s / m
    t_min, s2_max = expected_bounds(ch, m, va, eps_pe)
    zc = correlation_strength(spec)
    delta_c = (t_min - math.sqrt(T)) * zc
    delta_b = (t_min**2 * va + s2_max) - (T * va + s)
    return CorrectionTerms(dz_first, db_first, delta_c, delta_b)


def effective_excess_noise(t_lin: float, m: float, eps_pe: float) -> float:
    """Excess-noise uncertainty caused by estimating from ``m`` samples."""
    if t_lin <= 0:
        raise DomainError(f"transmission must be > 0, got {t_lin!r}")
    if m < 1:
        raise DomainError(f"m must be >= 1, got {m!r}")
    return normal_quantile_half(eps_pe) * _SQRT2 / (t_lin * math.sqrt(m))


def required_samples(t_lin: float, target_dxi: float, eps_pe: float) -> int:
    """Smallest ``m`` whose effective excess noise does not exceed ``target_dxi``."""
    if target_dxi <= 0:
        raise DomainError(f"target excess-noise uncertainty must be > 0, got {target_dxi!r}")
    if t_lin <= 0:
        raise DomainError(f"transmission must be > 0, got {t_lin!r}")
    z = normal_quantile_half(eps_pe)
    m = math.ceil(2.0 * z * z / (t_lin * t_lin * target_dxi * target_dxi))
    # guard against the ceiling landing one ulp short
    while effective_excess_noise(t_lin, m, eps_pe) > target_dxi:
        m += 1
    return m


def keyrate_from_estimates(
    spec: ProtocolSpec,
    t_hat: float,
    sigma2_hat: float,
    plan: BlockPlan,
    budget: SecurityBudget,
    beta: float,
) -> KeyRateReport:
    """Finite-size key rate for observed estimator values ``f(t_hat, sigma2_hat)``."""
    bounds = confidence_bounds(t_hat, sigma2_hat, plan.n_est, spec.va, budget.eps_pe)
    chi = holevo_yE(cov_from_bounds(spec, bounds))
    i_xy = awgn_mutual_info(t_hat * t_hat * spec.va / sigma2_hat)
    return keyrate_finite(plan, budget, beta, i_xy, chi, bounds.t_min, bounds.sigma2_max)


def expected_keyrate_k1(
    spec: ProtocolSpec,
    ch: ChannelModel,
    plan: BlockPlan,
    budget: SecurityBudget,
    beta: float,
) -> KeyRateReport:
    """Key rate with both estimators at their expected values."""
    return keyrate_from_estimates(spec, math.sqrt(ch.t_lin), ch.sigma2, plan, budget, beta)
