"""Scenario assembly, modulation-variance optimisation, scans and figure tables."""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataFileError, DomainError
from .estimation import (
    EstimationOutcome,
    effective_excess_noise,
    estimate,
    expected_keyrate_k1,
    keyrate_from_estimates,
)
from .finite_size import DEFAULT_BETA, BlockPlan, KeyRateReport, SecurityBudget, delta_n
from .gaussian import ChannelModel
from .modulation import ProtocolSpec, Scheme

VA_SEARCH_RANGE = (1e-2, 1e2)
VA_REL_TOL = 1e-3
_VA_COARSE_POINTS = 41
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0

FIG_BLOCK_LENGTHS = (1e6, 1e8, 1e10, 1e12, 1e14)
FIG3_XI = (0.001, 0.005, 0.01)
FIG4_XI = 0.005
FIG1_EPS = (1e-6, 1e-7, 1e-8, 1e-9, 1e-10)
FIG2_LOSSES_DB = (5.0, 10.0, 15.0, 20.0)

ROW_COLUMNS = ("va_opt", "i_xy", "chi_worst", "delta_n", "rate", "status")


@dataclass(frozen=True)
class Scenario:
    """Everything needed to evaluate one finite-size key rate.

    ``va=None`` asks for the modulation variance to be optimised. Exactly
    one of ``distance_km`` / ``transmission`` fixes the channel.
    """

    scheme: Scheme = Scheme.FOUR_STATE
    va: float | None = None
    distance_km: float | None = None
    transmission: float | None = None
    xi: float = 0.0
    n_total: float = 1e10
    m_fraction: float = 0.5
    beta: float = DEFAULT_BETA
    eta: float = 0.6
    budget: SecurityBudget = field(default_factory=SecurityBudget)
    dim_key_alphabet: int = 2

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme.parse(self.scheme))
        if self.distance_km is not None and self.transmission is not None:
            raise DomainError("give either a distance or a transmission, not both")
        if self.va is not None:
            ProtocolSpec(self.scheme, self.va)
        if not (0.0 < self.beta <= 1.0):
            raise DomainError(f"beta must lie in (0, 1], got {self.beta!r}")

    def channel(self) -> ChannelModel:
        if self.transmission is not None:
            return ChannelModel.from_transmission(self.transmission, self.xi, self.eta)
        if self.distance_km is None:
            raise DomainError("scenario needs a distance or a transmission")
        return ChannelModel.from_distance(self.distance_km, self.xi, self.eta)

    def plan(self) -> BlockPlan:
        return BlockPlan.from_fraction(self.n_total, self.m_fraction, self.dim_key_alphabet)

    def spec(self, va: float | None = None) -> ProtocolSpec:
        va = self.va if va is None else va
        if va is None:
            raise DomainError("modulation variance not set")
        return ProtocolSpec(self.scheme, va)

    def with_(self, **changes) -> "Scenario":
        return replace(self, **changes)

    def metadata(self) -> dict:
        out = {k: v for k, v in asdict(self).items() if k != "budget"}
        out["scheme"] = self.scheme.value
        out.update(asdict(self.budget))
        out["eps_total"] = self.budget.total
        return out


@dataclass(frozen=True)
class VaOptimum:
    va: float
    rate: float
    report: KeyRateReport | None
    at_boundary: bool

    @property
    def status(self) -> str:
        return "ok" if self.rate > 0 else "no positive key"


def _rate_at(scn: Scenario, ch: ChannelModel, plan: BlockPlan, va: float) -> tuple[float, KeyRateReport | None]:
    try:
        rep = expected_keyrate_k1(scn.spec(va), ch, plan, scn.budget, scn.beta)
    except DomainError:
        return -math.inf, None
    return rep.rate, rep


def optimize_va(scn: Scenario) -> VaOptimum:
    """Maximise the expected finite-size key rate over the modulation variance.

    A coarse log grid locates the best bracket, then golden-section search
    in ``log(va)`` refines it to 1e-3 relative.
    """
    ch = scn.channel()
    plan = scn.plan()
    lo, hi = math.log(VA_SEARCH_RANGE[0]), math.log(VA_SEARCH_RANGE[1])
    grid = np.linspace(lo, hi, _VA_COARSE_POINTS)
    vals = [_rate_at(scn, ch, plan, math.exp(u))[0] for u in grid]
    best = int(np.argmax(vals))
    if not math.isfinite(vals[best]):
        return VaOptimum(math.exp(grid[best]), -math.inf, None, False)

    a = grid[max(best - 1, 0)]
    b = grid[min(best + 1, len(grid) - 1)]
    f = lambda u: _rate_at(scn, ch, plan, math.exp(u))[0]
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    tol = math.log1p(VA_REL_TOL)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    # compare against the bracket endpoints so a boundary optimum is kept
    candidates = [(fc, c), (fd, d), (f(a), a), (f(b), b)]
    _, u_best = max(candidates)
    va = math.exp(u_best)
    rate, rep = _rate_at(scn, ch, plan, va)
    at_boundary = (u_best - lo) < 2 * tol or (hi - u_best) < 2 * tol
    return VaOptimum(va, rate, rep, at_boundary)


@dataclass(frozen=True)
class ScanRow:
    axis_value: float
    va_opt: float
    i_xy: float
    chi_worst: float
    delta_n: float
    rate: float
    status: str

    def values(self) -> tuple:
        return (self.axis_value, self.va_opt, self.i_xy, self.chi_worst, self.delta_n, self.rate, self.status)


def evaluate(scn: Scenario) -> ScanRow:
    """Single-point evaluation, optimising ``va`` when the scenario leaves it open."""
    if scn.va is None:
        opt = optimize_va(scn)
        va, rep = opt.va, opt.report
    else:
        va = scn.va
        rep = _rate_at(scn, scn.channel(), scn.plan(), va)[1]
    if rep is None:
        d = delta_n(scn.plan(), scn.budget)
        return ScanRow(math.nan, va, math.nan, math.nan, d, -math.inf, "abort")
    return ScanRow(math.nan, va, rep.i_xy, rep.chi_ye, rep.delta_n, rep.rate, rep.status)


AXES = {"distance": "distance_km", "blocklength": "n_total", "xi": "xi", "transmission": "transmission"}


def _point(args) -> ScanRow:
    scn, axis, value = args
    changes = {AXES[axis]: value}
    if axis == "transmission":
        changes["distance_km"] = None
    elif axis == "distance":
        changes["transmission"] = None
    row = evaluate(scn.with_(**changes))
    return replace(row, axis_value=float(value))


def scan(scn: Scenario, axis: str, grid: Iterable[float], jobs: int = 1) -> list[ScanRow]:
    """Evaluate ``scn`` along one axis; rows come back in grid order."""
    if axis not in AXES:
        raise DomainError(f"unknown scan axis {axis!r} (expected one of {', '.join(AXES)})")
    tasks = [(scn, axis, float(v)) for v in grid]
    if jobs <= 1 or len(tasks) < 2:
        return [_point(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_point, tasks))


def achievable_distance(scn: Scenario, d_max: float = 300.0, tol_km: float = 0.05) -> float:
    """Largest distance with a positive optimised key rate (0 if none, ``d_max`` if always positive)."""
    rate = lambda d: evaluate(scn.with_(distance_km=d, transmission=None)).rate
    if rate(0.0) <= 0:
        return 0.0
    if rate(d_max) > 0:
        return d_max
    lo, hi = 0.0, d_max
    while hi - lo > tol_km:
        mid = 0.5 * (lo + hi)
        if rate(mid) > 0:
            lo = mid
        else:
            hi = mid
    return lo


def epsilon_split(
    n_key: int,
    residual: float,
    dim_key_alphabet: int = 2,
    log_ratio_range: tuple[float, float] = (-8.0, 8.0),
    points: int = 321,
) -> tuple[float, float]:
    """Split ``residual = eps_bar + eps_pa`` to minimise Delta(n).

    Grid search over ``log10(eps_bar / eps_pa)``.
    """
    if residual <= 0:
        raise DomainError(f"no failure probability left for smoothing and privacy amplification ({residual!r})")
    if residual >= 1:
        raise DomainError("residual failure probability must be < 1")
    plan = BlockPlan(n_key, n_key, 0, dim_key_alphabet)
    best = None
    for lr in np.linspace(*log_ratio_range, points):
        ratio = 10.0**lr
        eps_pa = residual / (1.0 + ratio)
        eps_bar = residual - eps_pa
        d = delta_n(plan, SecurityBudget(0.0, 0.0, eps_bar, eps_pa))
        if best is None or d < best[0]:
            best = (d, eps_bar, eps_pa)
    return best[1], best[2]


def epsilon_split_for(scn: Scenario) -> tuple[float, float]:
    b = scn.budget
    residual = b.total - b.eps_pe - b.eps_ec
    return epsilon_split(scn.plan().n_key, residual, scn.dim_key_alphabet)


# -- estimation data files ----------------------------------------------------

def read_pairs(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    """Read a two-column ``x,y`` CSV (optional header, ``#`` comments)."""
    xs: list[float] = []
    ys: list[float] = []
    with open(path, newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            parts = [p.strip() for p in text.replace(";", ",").split(",")]
            if len(parts) != 2:
                raise DataFileError(f"expected 2 columns, found {len(parts)}", lineno)
            try:
                x, y = float(parts[0]), float(parts[1])
            except ValueError:
                if not xs and not ys and _looks_like_header(parts):
                    continue
                raise DataFileError(f"non-numeric value in {text!r}", lineno) from None
            if not (math.isfinite(x) and math.isfinite(y)):
                raise DataFileError(f"non-finite value in {text!r}", lineno)
            xs.append(x)
            ys.append(y)
    if len(xs) < 2:
        raise DataFileError(f"{path}: need at least 2 data rows, found {len(xs)}")
    return np.array(xs), np.array(ys)


def _looks_like_header(parts: Sequence[str]) -> bool:
    return all(p and not _is_number(p) for p in parts)


def _is_number(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def estimate_from_file(
    path: str | Path,
    va: float,
    eps_pe: float,
    scheme: Scheme | str = Scheme.GAUSSIAN,
    n_total: float | None = None,
    beta: float = DEFAULT_BETA,
    budget: SecurityBudget | None = None,
    dim_key_alphabet: int = 2,
) -> tuple[EstimationOutcome, KeyRateReport]:
    """Estimate the channel from disclosed pairs and bound the key rate of the rest.

    Without ``n_total`` the raw key is assumed as long as the disclosed sample.
    """
    x, y = read_pairs(path)
    outcome = estimate(x, y, va, eps_pe)
    m = outcome.m
    n_total = 2 * m if n_total is None else int(round(n_total))
    if n_total <= m:
        raise DomainError(f"block length N={n_total} leaves no raw key after disclosing m={m} samples")
    budget = (budget or SecurityBudget()).replace(eps_pe=eps_pe)
    plan = BlockPlan(n_total, n_total - m, m, dim_key_alphabet)
    report = keyrate_from_estimates(ProtocolSpec(scheme, va), outcome.t_hat, outcome.sigma2_hat, plan, budget, beta)
    return outcome, report


# -- figure tables -------------------------------------------------------------

@dataclass
class Table:
    columns: tuple[str, ...]
    rows: list[tuple]
    meta: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        for k, v in self.meta.items():
            buf.write(f"# {k}={v}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for r in self.rows:
            w.writerow([_fmt(v) for v in r])
        return buf.getvalue()


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def scan_table(scn: Scenario, axis: str, grid: Iterable[float], jobs: int = 1) -> Table:
    rows = [r.values() for r in scan(scn, axis, grid, jobs)]
    meta = scn.metadata()
    meta["axis"] = axis
    return Table((axis,) + ROW_COLUMNS, rows, meta)


def figure1_table(n_grid: Sequence[float] | None = None, eps_values: Sequence[float] = FIG1_EPS) -> Table:
    """Delta(n) against raw-key size for equal smoothing/PA parameters."""
    n_grid = np.logspace(4, 12, 81) if n_grid is None else n_grid
    rows = []
    for eps in eps_values:
        for n in n_grid:
            n = int(round(n))
            rows.append((eps, n, delta_n(BlockPlan(n, n, 0), SecurityBudget(0.0, 0.0, eps, eps))))
    return Table(("eps", "n", "delta_n"), rows, {"figure": 1, "dim_key_alphabet": 2})


def figure2_table(
    m_grid: Sequence[float] | None = None,
    losses_db: Sequence[float] = FIG2_LOSSES_DB,
    eps_pe: float = 1e-10,
) -> Table:
    """Effective excess noise against the number of estimation samples, perfect detection."""
    m_grid = np.logspace(6, 14, 81) if m_grid is None else m_grid
    rows = []
    for loss in losses_db:
        t = 10.0 ** (-loss / 10.0)
        dist = loss / 0.2
        for m in m_grid:
            rows.append((loss, dist, t, float(m), effective_excess_noise(t, m, eps_pe)))
    return Table(("loss_db", "distance_km", "transmission", "m", "delta_xi"), rows,
                 {"figure": 2, "eps_pe": eps_pe, "eta": 1.0})


def _distances(d_max: float, d_step: float) -> np.ndarray:
    return np.arange(0.0, d_max + 0.5 * d_step, d_step)


def _rate_columns():
    return ("n_total", "xi", "distance_km") + ROW_COLUMNS[:-1] + ("status",)


def figure3_table(
    base: Scenario | None = None,
    block_lengths: Sequence[float] = FIG_BLOCK_LENGTHS,
    xis: Sequence[float] = FIG3_XI,
    d_max: float = 120.0,
    d_step: float = 5.0,
    jobs: int = 1,
) -> Table:
    """Four-state finite-size key rate against distance, per block length and excess noise."""
    base = base or Scenario(scheme=Scheme.FOUR_STATE)
    rows = []
    for n_total in block_lengths:
        for xi in xis:
            scn = base.with_(n_total=n_total, xi=xi, va=None)
            for r in scan(scn, "distance", _distances(d_max, d_step), jobs):
                rows.append((n_total, xi) + r.values())
    meta = base.metadata()
    meta["figure"] = 3
    return Table(_rate_columns(), rows, meta)


def figure4_table(
    base: Scenario | None = None,
    block_lengths: Sequence[float] = FIG_BLOCK_LENGTHS,
    xi: float = FIG4_XI,
    schemes: Sequence[Scheme] = (Scheme.FOUR_STATE, Scheme.EIGHT_DIM),
    d_max: float = 120.0,
    d_step: float = 5.0,
    jobs: int = 1,
) -> Table:
    """Four-state against eight-dimensional key rate at a fixed excess noise."""
    base = base or Scenario()
    rows = []
    for scheme in schemes:
        for n_total in block_lengths:
            scn = base.with_(scheme=Scheme.parse(scheme), n_total=n_total, xi=xi, va=None)
            for r in scan(scn, "distance", _distances(d_max, d_step), jobs):
                rows.append((scn.scheme.value, n_total, xi) + r.values())
    meta = base.metadata()
    meta["figure"] = 4
    return Table(("scheme",) + _rate_columns(), rows, meta)
