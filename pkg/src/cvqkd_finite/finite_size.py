"""Finite-size corrections: privacy-amplification penalty, epsilon budget, key rates."""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError

DEFAULT_BETA = 0.8
DEFAULT_EPS = 1e-10


def _check_prob(name: str, value: float, allow_zero: bool = False) -> None:
    lo_ok = value >= 0.0 if allow_zero else value > 0.0
    if not (lo_ok and value < 1.0):
        raise DomainError(f"{name} must lie in {'[0' if allow_zero else '(0'}, 1), got {value!r}")


@dataclass(frozen=True)
class SecurityBudget:
    eps_pe: float = DEFAULT_EPS
    eps_ec: float = DEFAULT_EPS
    eps_bar: float = DEFAULT_EPS
    eps_pa: float = DEFAULT_EPS

    def __post_init__(self):
        for name in ("eps_pe", "eps_ec", "eps_bar", "eps_pa"):
            _check_prob(name, getattr(self, name), allow_zero=True)
        if self.total >= 1.0:
            raise DomainError(f"total failure probability {self.total!r} must be < 1")

    @property
    def total(self) -> float:
        return epsilon_total(self)

    def replace(self, **changes) -> "SecurityBudget":
        fields = dict(eps_pe=self.eps_pe, eps_ec=self.eps_ec, eps_bar=self.eps_bar, eps_pa=self.eps_pa)
        fields.update(changes)
        return SecurityBudget(**fields)


@dataclass(frozen=True)
class BlockPlan:
    """Split of the ``n_total`` exchanged signals into ``n_key`` key and ``n_est`` estimation samples.

    Sizes are floats-as-integers so that block lengths such as 1e14 can be
    passed directly.
    """

    n_total: int
    n_key: int
    n_est: int
    dim_key_alphabet: int = 2

    def __post_init__(self):
        if self.n_total <= 0 or self.n_key <= 0 or self.n_est < 0:
            raise DomainError(f"invalid block sizes N={self.n_total}, n={self.n_key}, m={self.n_est}")
        if self.n_key + self.n_est != self.n_total:
            raise DomainError(f"n + m = {self.n_key + self.n_est} differs from N = {self.n_total}")
        if self.dim_key_alphabet < 2:
            raise DomainError("raw-key alphabet needs at least two symbols")

    @classmethod
    def from_fraction(cls, n_total: float, m_fraction: float = 0.5, dim_key_alphabet: int = 2) -> "BlockPlan":
        if not (0.0 <= m_fraction < 1.0):
            raise DomainError(f"estimation fraction must lie in [0, 1), got {m_fraction!r}")
        n_total = int(round(n_total))
        n_est = int(round(n_total * m_fraction))
        return cls(n_total, n_total - n_est, n_est, dim_key_alphabet)

    @property
    def key_fraction(self) -> float:
        return self.n_key / self.n_total


@dataclass(frozen=True)
class KeyRateReport:
    i_xy: float
    chi_ye: float
    delta_n: float
    rate: float
    worst_t: float = math.nan
    worst_sigma2: float = math.nan

    @property
    def distillable(self) -> bool:
        return self.rate > 0.0

    @property
    def status(self) -> str:
        return "ok" if self.distillable else "abort"


def delta_n(plan: BlockPlan, budget: SecurityBudget) -> float:
    """Privacy-amplification penalty Delta(n) in bits per key symbol."""
    n = plan.n_key
    if n < 1:
        raise DomainError("raw key must hold at least one symbol")
    if budget.eps_bar <= 0 or budget.eps_pa <= 0:
        raise DomainError("smoothing and privacy-amplification parameters must be > 0")
    smooth = (2 * plan.dim_key_alphabet + 3) * math.sqrt(math.log2(2.0 / budget.eps_bar) / n)
    return smooth + 2.0 / n * math.log2(1.0 / budget.eps_pa)


def epsilon_total(budget: SecurityBudget) -> float:
    return budget.eps_pe + budget.eps_ec + budget.eps_bar + budget.eps_pa


def fec_from_beta(beta: float, h_xy: float) -> float:
    """Convert reconciliation efficiency beta into the overhead factor f_EC (symmetric binary data)."""
    if not (0.0 <= beta <= 1.0):
        raise DomainError(f"beta must lie in [0, 1], got {beta!r}")
    if not (0.0 < h_xy < 1.0):
        raise DomainError(f"H(x|y) must lie in (0, 1), got {h_xy!r}")
    return (1.0 - beta * (1.0 - h_xy)) / h_xy


def leak_ec(plan: BlockPlan, f_ec: float, h_xy: float, eps_ec: float) -> float:
    """Error-correction leakage per key symbol."""
    _check_prob("eps_ec", eps_ec)
    if f_ec < 1.0:
        raise DomainError(f"f_EC must be >= 1, got {f_ec!r}")
    return f_ec * h_xy + math.log2(2.0 / eps_ec) / plan.n_key


def keyrate_finite(
    plan: BlockPlan,
    budget: SecurityBudget,
    beta: float,
    i_xy: float,
    chi_worst: float,
    worst_t: float = math.nan,
    worst_sigma2: float = math.nan,
) -> KeyRateReport:
    """Finite-size secret key rate; negative values are kept (protocol aborts)."""
    d = delta_n(plan, budget)
    rate = plan.key_fraction * (beta * i_xy - chi_worst - d)
    return KeyRateReport(i_xy, chi_worst, d, rate, worst_t, worst_sigma2)


def keyrate_asymptotic(beta: float, i_xy: float, chi: float) -> float:
    return beta * i_xy - chi
