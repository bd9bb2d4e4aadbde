"""Modulation schemes and their Alice-Bob correlation coefficient Z.

The off-diagonal block of the entanglement-based covariance matrix is
``sqrt(T) * Z * sigma_z`` where Z depends only on the modulation variance
and the constellation. All values are in shot-noise units.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .errors import DomainError

# below this half-variance the lambda combinations are evaluated by series
_SERIES_SWITCH = 0.5
_Z8_REL_TOL = 1e-15


class Scheme(str, enum.Enum):
    GAUSSIAN = "gaussian"
    TWO_STATE = "two-state"
    FOUR_STATE = "four-state"
    EIGHT_DIM = "eight-dim"

    @classmethod
    def parse(cls, value: "str | Scheme") -> "Scheme":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("_", "-")
        aliases = {
            "gauss": cls.GAUSSIAN,
            "2": cls.TWO_STATE,
            "two": cls.TWO_STATE,
            "twostate": cls.TWO_STATE,
            "4": cls.FOUR_STATE,
            "four": cls.FOUR_STATE,
            "fourstate": cls.FOUR_STATE,
            "8": cls.EIGHT_DIM,
            "eight": cls.EIGHT_DIM,
            "eightdim": cls.EIGHT_DIM,
        }
        if key in aliases:
            return aliases[key]
        try:
            return cls(key)
        except ValueError:
            names = ", ".join(s.value for s in cls)
            raise DomainError(f"unknown modulation scheme {value!r} (expected one of {names})") from None


@dataclass(frozen=True)
class ProtocolSpec:
    """Modulation scheme plus Alice's modulation variance ``va``."""

    scheme: Scheme
    va: float

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme.parse(self.scheme))
        _check_va(self.va)

    def with_va(self, va: float) -> "ProtocolSpec":
        return ProtocolSpec(self.scheme, va)


def _check_va(va: float) -> None:
    if not (isinstance(va, (int, float)) and math.isfinite(va) and va > 0):
        raise DomainError(f"modulation variance must be a positive finite number, got {va!r}")


def _half_angle_terms(h: float) -> tuple[float, float, float, float]:
    """Return (cosh+cos, sinh+sin, cosh-cos, sinh-sin) at ``h``, each halved.

    The differences cancel catastrophically for small ``h``; there the
    Taylor series (only every fourth power survives) is summed instead.
    """
    if h >= _SERIES_SWITCH:
        ch, sh, c, s = math.cosh(h), math.sinh(h), math.cos(h), math.sin(h)
        return 0.5 * (ch + c), 0.5 * (sh + s), 0.5 * (ch - c), 0.5 * (sh - s)
    out = []
    for start in range(4):
        # sum of h^(start + 4j) / (start + 4j)!
        term = h**start / math.factorial(start)
        total = term
        j = start
        while abs(term) > 1e-18 * abs(total):
            term *= h**4 / ((j + 1) * (j + 2) * (j + 3) * (j + 4))
            j += 4
            total += term
        out.append(total)
    return out[0], out[1], out[2], out[3]


def fourstate_lambdas(va: float) -> tuple[float, float, float, float]:
    """Eigenvalue weights (lambda_0, lambda_1, lambda_2, lambda_3) of the four-state mixture.

    They are non-negative and sum to one.
    """
    _check_va(va)
    h = 0.5 * va
    e = math.exp(-h)
    cp, sp, cm, sm = _half_angle_terms(h)
    return e * cp, e * sp, e * cm, e * sm


def z_gaussian(va: float) -> float:
    _check_va(va)
    return math.sqrt(va * va + 2.0 * va)


def z_two_state(va: float) -> float:
    _check_va(va)
    q = math.exp(-2.0 * va)
    return va * (1.0 + q) / math.sqrt(-math.expm1(-2.0 * va))


def z_four_state(va: float) -> float:
    lam = fourstate_lambdas(va)
    total = sum(lam[i] ** 1.5 / math.sqrt(lam[(i + 1) % 4]) for i in range(4))
    return va * total


def _z8_series(va: float, max_terms: int | None = None) -> tuple[float, int]:
    # mean photon number over the four modes carrying the 8-dim constellation
    x = 2.0 * va
    log_x = math.log(x)
    total = 0.0
    k = 0
    while True:
        term = math.sqrt(k + 4) * math.exp(-x + (k + 0.5) * log_x - math.lgamma(k + 1))
        total += term
        k += 1
        if max_terms is not None:
            if k >= max_terms:
                break
        elif k > x and term < _Z8_REL_TOL * total:
            break
    return 0.5 * total, k


def z_eight_dim(va: float) -> float:
    """Correlation coefficient of the eight-dimensional (4-mode sphere) modulation.

    Poisson-weighted sum over the total photon number ``k`` with mean
    ``2 * va``; summed until the term falls below 1e-15 of the partial sum
    (and past the Poisson peak).
    """
    _check_va(va)
    return _z8_series(va)[0]


_Z_FUNCS = {
    Scheme.GAUSSIAN: z_gaussian,
    Scheme.TWO_STATE: z_two_state,
    Scheme.FOUR_STATE: z_four_state,
    Scheme.EIGHT_DIM: z_eight_dim,
}


def correlation_strength(spec: ProtocolSpec) -> float:
    """Correlation coefficient Z for the protocol's scheme at its modulation variance."""
    return _Z_FUNCS[spec.scheme](spec.va)


def _log1p_remainder(x: float) -> float:
    """``log1p(x) - x`` without cancellation."""
    if abs(x) < 1e-3:
        return x * x * (-0.5 + x * (1.0 / 3.0 + x * (-0.25 + x * 0.2)))
    return math.log1p(x) - x


def _expm1_remainder(x: float) -> float:
    """``expm1(x) - x`` without cancellation."""
    if abs(x) < 1e-3:
        return x * x * (0.5 + x * (1.0 / 6.0 + x * (1.0 / 24.0 + x / 120.0)))
    return math.expm1(x) - x


def correlation_excess(spec: ProtocolSpec) -> float:
    """Return ``Z / va - 1`` with full relative precision.

    For large ``va`` the two- and four-state Z both approach ``va`` and
    their difference drops below one ulp of Z itself; this form keeps the
    ordering resolvable.
    """
    va = spec.va
    if spec.scheme is Scheme.GAUSSIAN:
        return math.expm1(0.5 * math.log1p(2.0 / va))
    if spec.scheme is Scheme.TWO_STATE:
        q = math.exp(-2.0 * va)
        return math.expm1(math.log1p(q) - 0.5 * math.log(-math.expm1(-2.0 * va)))
    if spec.scheme is Scheme.FOUR_STATE:
        h = 0.5 * va
        if h < 2.0:
            return z_four_state(va) / va - 1.0
        # lambda_i = (1 + d_i) / 4 with sum(d_i) = 0 exactly; the first-order
        # parts cancel analytically, so only second-order remainders are summed
        e1, e2 = math.exp(-h), math.exp(-2.0 * h)
        c, s = math.cos(h), math.sin(h)
        d = (e2 + 2 * e1 * c, -e2 + 2 * e1 * s, e2 - 2 * e1 * c, -e2 - 2 * e1 * s)
        u = [math.log1p(di) for di in d]
        acc = sum(_log1p_remainder(di) for di in d)
        for i in range(4):
            acc += _expm1_remainder(1.5 * u[i] - 0.5 * u[(i + 1) % 4])
        return 0.25 * acc
    return z_eight_dim(va) / va - 1.0
