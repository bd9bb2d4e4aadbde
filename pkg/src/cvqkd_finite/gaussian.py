"""Two-mode Gaussian state of the entanglement-based protocol and its entropies.

Covariance matrices are stored by their three symmetric-form coefficients::

    Gamma = [[a*I2,  c*Z2],
             [c*Z2,  b*I2]]      Z2 = diag(1, -1)

Eve's Holevo information on Bob's homodyne outcome (reverse reconciliation)
is ``g(nu1) + g(nu2) - g(nu3)``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError, UnphysicalStateError
from .modulation import ProtocolSpec, correlation_strength

PHYS_TOL = 1e-9
FIBER_LOSS_DB_PER_KM = 0.2


@dataclass(frozen=True)
class TwoModeCov:
    a: float
    b: float
    c: float

    def __post_init__(self):
        if self.a < 1.0 - PHYS_TOL or self.b < 1.0 - PHYS_TOL:
            raise UnphysicalStateError(
                f"mode variances below shot noise: a={self.a!r}, b={self.b!r}")
        det = self.det_block()
        if det < 1.0 - PHYS_TOL:
            raise UnphysicalStateError(
                f"a*b - c^2 = {det!r} < 1 (a={self.a!r}, b={self.b!r}, c={self.c!r})")
        # smaller symplectic eigenvalue >= 1
        excess = self.a**2 + self.b**2 - 2.0 * self.c**2 - 1.0 - det * det
        if excess > PHYS_TOL * max(1.0, det * det):
            raise UnphysicalStateError(
                f"smaller symplectic eigenvalue below 1 (a={self.a!r}, b={self.b!r}, c={self.c!r})")

    def det_block(self) -> float:
        return self.a * self.b - self.c * self.c

    def matrix(self) -> np.ndarray:
        """Full 4x4 covariance matrix in (x_A, p_A, x_B, p_B) ordering."""
        a, b, c = self.a, self.b, self.c
        return np.array([
            [a, 0.0, c, 0.0],
            [0.0, a, 0.0, -c],
            [c, 0.0, b, 0.0],
            [0.0, -c, 0.0, b],
        ])


@dataclass(frozen=True)
class ChannelModel:
    """Fiber channel seen by Bob, with detector efficiency folded into ``t_lin``.

    ``xi`` is the excess noise referred to the channel input.
    """

    t_lin: float
    xi: float = 0.0
    eta: float = 1.0
    dist_km: float = math.nan

    def __post_init__(self):
        if not (0.0 <= self.t_lin <= 1.0):
            raise DomainError(f"transmission must lie in [0, 1], got {self.t_lin!r}")
        if not (self.xi >= 0.0 and math.isfinite(self.xi)):
            raise DomainError(f"excess noise must be finite and >= 0, got {self.xi!r}")
        if not (0.0 < self.eta <= 1.0):
            raise DomainError(f"detector efficiency must lie in (0, 1], got {self.eta!r}")

    @classmethod
    def from_distance(cls, dist_km: float, xi: float = 0.0, eta: float = 1.0) -> "ChannelModel":
        if dist_km < 0:
            raise DomainError(f"distance must be >= 0, got {dist_km!r}")
        return cls(eta * 10.0 ** (-FIBER_LOSS_DB_PER_KM / 10.0 * dist_km), xi, eta, float(dist_km))

    @classmethod
    def from_transmission(cls, t_lin: float, xi: float = 0.0, eta: float = 1.0) -> "ChannelModel":
        dist = math.nan
        if 0.0 < t_lin <= eta:
            dist = -10.0 / FIBER_LOSS_DB_PER_KM * math.log10(t_lin / eta)
        return cls(t_lin, xi, eta, dist)

    @property
    def loss_db(self) -> float:
        return -10.0 * math.log10(self.t_lin) if self.t_lin > 0 else math.inf

    @property
    def sigma2(self) -> float:
        """Variance of Bob's noise term, ``1 + T*xi``."""
        return 1.0 + self.t_lin * self.xi


def cov_from_model(spec: ProtocolSpec, t: float, sigma2: float) -> TwoModeCov:
    """Covariance matrix in the linear-model parametrisation ``y = t*x + z``."""
    z = correlation_strength(spec)
    return TwoModeCov(spec.va + 1.0, t * t * spec.va + sigma2, t * z)


def build_cov(spec: ProtocolSpec, ch: ChannelModel) -> TwoModeCov:
    return TwoModeCov(
        spec.va + 1.0,
        ch.t_lin * spec.va + 1.0 + ch.t_lin * ch.xi,
        math.sqrt(ch.t_lin) * correlation_strength(spec),
    )


def symplectic_spectrum(cov: TwoModeCov) -> tuple[float, float]:
    """Symplectic eigenvalues ``(nu1, nu2)``, largest first."""
    a, b, c = cov.a, cov.b, cov.c
    delta = a * a + b * b - 2.0 * c * c
    det = a * b - c * c
    disc = delta * delta - 4.0 * det * det
    if disc < 0.0:
        if disc < -PHYS_TOL:
            raise DomainError(f"negative discriminant {disc!r} in symplectic spectrum")
        disc = 0.0
    root = math.sqrt(disc)
    nu1_sq = 0.5 * (delta + root)
    # product nu1*nu2 = det avoids cancellation in (delta - root)
    nu1 = math.sqrt(nu1_sq)
    nu2 = det / nu1
    return nu1, nu2


def conditional_eigenvalue_homodyne(cov: TwoModeCov) -> float:
    """Symplectic eigenvalue of Alice's mode conditioned on Bob's x-quadrature result."""
    if cov.b <= 0:
        raise DomainError(f"Bob's variance must be positive, got {cov.b!r}")
    cond = cov.a - cov.c * cov.c / cov.b
    if cond < 0.0:
        raise UnphysicalStateError(f"conditional variance a - c^2/b = {cond!r} < 0")
    return math.sqrt(cov.a * cond)


def g_entropy(nu: float) -> float:
    """Von Neumann entropy (bits) of a thermal state with symplectic eigenvalue ``nu``."""
    if nu < 1.0 - PHYS_TOL:
        raise DomainError(f"symplectic eigenvalue below 1: {nu!r}")
    if nu <= 1.0:
        return 0.0
    p = 0.5 * (nu + 1.0)
    q = 0.5 * (nu - 1.0)
    return p * math.log2(p) - q * math.log2(q)


def holevo_yE(cov: TwoModeCov) -> float:
    """Holevo bound chi(y:E) on Eve's information about Bob's homodyne data."""
    nu1, nu2 = symplectic_spectrum(cov)
    nu3 = conditional_eigenvalue_homodyne(cov)
    chi = g_entropy(nu1) + g_entropy(nu2) - g_entropy(nu3)
    if chi < 0.0:
        if chi < -PHYS_TOL:
            raise DomainError(f"negative Holevo information {chi!r}")
        chi = 0.0
    return chi


def awgn_mutual_info(snr: float) -> float:
    """Capacity ``0.5*log2(1 + snr)`` of a real Gaussian channel, bits per use."""
    if snr < 0:
        raise DomainError(f"signal-to-noise ratio must be >= 0, got {snr!r}")
    return 0.5 * math.log2(1.0 + snr)


def mutual_info(spec: ProtocolSpec, ch: ChannelModel) -> float:
    """I(x:y) in bits per channel use, for every modulation scheme."""
    return awgn_mutual_info(ch.t_lin * spec.va / ch.sigma2)


class DimensionKind(str, enum.Enum):
    PURITY = "purity"
    RENYI_HALF = "renyi-half"


def effective_dimension(spectrum: Sequence[float], kind: DimensionKind | str = DimensionKind.PURITY) -> float:
    """Effective number of states a density matrix with eigenvalues ``spectrum`` spreads over.

    ``PURITY`` gives ``1 / tr(rho^2)``; ``RENYI_HALF`` gives ``(tr sqrt(rho))^2``.
    """
    kind = DimensionKind(kind)
    p = np.asarray(spectrum, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise DomainError("spectrum must be a non-empty 1-D sequence")
    if np.any(p < 0):
        raise DomainError("spectrum has negative entries")
    if abs(p.sum() - 1.0) > 1e-9:
        raise DomainError(f"spectrum sums to {p.sum()!r}, not 1")
    if kind is DimensionKind.PURITY:
        return float(1.0 / np.sum(p * p))
    return float(np.sum(np.sqrt(p)) ** 2)
