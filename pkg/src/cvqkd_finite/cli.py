"""Command-line entry point: ``cvqkd-finite <command> [options]``.

Every command writes CSV with ``#``-prefixed metadata lines. Options may
also come from a ``key=value`` file given with ``--config``; flags on the
command line win.

Exit status: 0 success, 2 invalid input or non-computable configuration,
3 I/O failure.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import DataFileError, DomainError, QuadratureError
from .finite_size import SecurityBudget
from .modulation import ProtocolSpec, Scheme
from .montecarlo import TrialConfig, coverage_counts, estimator_distribution_check
from .scenario import (
    ROW_COLUMNS,
    Scenario,
    Table,
    epsilon_split_for,
    estimate_from_file,
    evaluate,
    figure1_table,
    figure2_table,
    figure3_table,
    figure4_table,
    scan_table,
)

log = logging.getLogger("cvqkd_finite")

EXIT_OK, EXIT_INPUT, EXIT_IO = 0, 2, 3


def parse_grid(text: str) -> np.ndarray:
    """``"a,b,c"`` | ``"lin:start:stop:num"`` | ``"log:start:stop:num"`` (endpoints as values)."""
    text = text.strip()
    if text.startswith(("lin:", "log:")):
        kind, start, stop, num = text.split(":")
        start, stop, num = float(start), float(stop), int(num)
        if kind == "lin":
            return np.linspace(start, stop, num)
        if start <= 0 or stop <= 0:
            raise DomainError("log grid endpoints must be positive")
        return np.logspace(math.log10(start), math.log10(stop), num)
    return np.array([float(v) for v in text.split(",") if v.strip()])


def read_config(path: str) -> dict:
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise DomainError(f"{path}:{lineno}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            out[key.lstrip("-").replace("-", "_")] = value
    return out


def _add_common(p: argparse.ArgumentParser, n_default: float | None = 1e10) -> None:
    g = p.add_argument_group("scenario")
    g.add_argument("--scheme", default="four-state", help="gaussian | two-state | four-state | eight-dim")
    g.add_argument("--va", type=float, default=None, help="modulation variance (omit to optimise)")
    ch = g.add_mutually_exclusive_group()
    ch.add_argument("--distance-km", type=float, default=None)
    ch.add_argument("--transmission", type=float, default=None, help="total transmission T, detector included")
    g.add_argument("--xi", type=float, default=0.005, help="excess noise, shot-noise units")
    g.add_argument("--N", dest="n_total", type=float, default=n_default, help="block length")
    g.add_argument("--m-fraction", type=float, default=0.5, help="fraction of N disclosed for estimation")
    g.add_argument("--beta", type=float, default=0.8)
    g.add_argument("--eta", type=float, default=0.6)
    for name in ("pe", "ec", "bar", "pa"):
        g.add_argument(f"--eps-{name}", type=float, default=1e-10)
    g.add_argument("--optimize-split", action="store_true",
                   help="re-split eps_bar + eps_pa to minimise Delta(n)")
    p.add_argument("--seed", type=int, default=12345)
    p.add_argument("--out", default=None, help="output CSV path (default stdout)")
    p.add_argument("--config", default=None, help="key=value file supplying defaults")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for scans")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cvqkd-finite", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("keyrate", help="finite-size key rate at one channel point")
    _add_common(p)

    p = sub.add_parser("scan", help="key rate along one axis")
    _add_common(p)
    p.add_argument("--axis", choices=("distance", "blocklength", "xi", "transmission"), required=True)
    p.add_argument("--grid", required=True, help='"a,b,c", "lin:0:100:21" or "log:1e8:1e14:7"')

    p = sub.add_parser("figure", help="data behind one of the four result figures")
    _add_common(p)
    p.add_argument("number", type=int, choices=(1, 2, 3, 4))
    p.add_argument("--d-max", type=float, default=120.0)
    p.add_argument("--d-step", type=float, default=5.0)

    p = sub.add_parser("mc-validate", help="Monte Carlo check of estimator laws and coverage")
    _add_common(p)
    p.add_argument("--m", type=int, default=10_000, help="samples per trial")
    p.add_argument("--trials", type=int, default=2000)
    p.add_argument("--coverage-trials", type=int, default=10_000)
    p.add_argument("--mc-eps-pe", type=float, default=0.05, help="eps_pe used for the coverage run")

    p = sub.add_parser("estimate", help="estimate the channel from an x,y data file")
    _add_common(p, n_default=None)
    p.add_argument("--data", required=True, help="two-column CSV of disclosed (x, y) pairs")
    return parser


def scenario_from_args(args) -> Scenario:
    n_total = 1e10 if args.n_total is None else args.n_total
    budget = SecurityBudget(args.eps_pe, args.eps_ec, args.eps_bar, args.eps_pa)
    scn = Scenario(
        scheme=Scheme.parse(args.scheme),
        va=args.va,
        distance_km=args.distance_km,
        transmission=args.transmission,
        xi=args.xi,
        n_total=n_total,
        m_fraction=args.m_fraction,
        beta=args.beta,
        eta=args.eta,
        budget=budget,
    )
    if args.optimize_split:
        eps_bar, eps_pa = epsilon_split_for(scn)
        scn = scn.with_(budget=budget.replace(eps_bar=eps_bar, eps_pa=eps_pa))
    return scn


def _emit(table: Table, out: str | None) -> None:
    text = table.to_csv()
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)
        log.info("wrote %d rows to %s", len(table.rows), out)


def cmd_keyrate(args) -> Table:
    scn = scenario_from_args(args)
    if scn.distance_km is None and scn.transmission is None:
        raise DomainError("keyrate needs --distance-km or --transmission")
    ch = scn.channel()
    row = evaluate(scn)
    cols = ("distance_km", "transmission") + ROW_COLUMNS
    vals = (ch.dist_km, ch.t_lin) + row.values()[1:]
    return Table(cols, [vals], scn.metadata())


def cmd_scan(args) -> Table:
    scn = scenario_from_args(args)
    if args.axis != "distance" and args.axis != "transmission" and scn.distance_km is None and scn.transmission is None:
        raise DomainError(f"scan along {args.axis} needs --distance-km or --transmission")
    return scan_table(scn, args.axis, parse_grid(args.grid), args.jobs)


def cmd_figure(args) -> Table:
    if args.number == 1:
        return figure1_table()
    if args.number == 2:
        return figure2_table(eps_pe=args.eps_pe)
    scn = scenario_from_args(args).with_(distance_km=None, transmission=None)
    if args.number == 3:
        return figure3_table(scn, d_max=args.d_max, d_step=args.d_step, jobs=args.jobs)
    return figure4_table(scn, d_max=args.d_max, d_step=args.d_step, jobs=args.jobs)


def cmd_mc_validate(args) -> Table:
    scn = scenario_from_args(args)
    ch = scn.channel() if (scn.distance_km is not None or scn.transmission is not None) else None
    if ch is None:
        raise DomainError("mc-validate needs --distance-km or --transmission")
    spec = ProtocolSpec(scn.scheme, args.va if args.va is not None else 1.0)
    cfg = TrialConfig.from_channel(spec, ch, args.m, args.trials, args.seed)
    chk = estimator_distribution_check(cfg)
    cov_cfg = TrialConfig.from_channel(spec, ch, args.m, args.coverage_trials, args.seed + 1)
    cov = coverage_counts(cov_cfg, args.mc_eps_pe)
    target = 1.0 - args.mc_eps_pe
    floor = target - 3.0 * cov.binomial_sd(target)
    rows = [
        ("ks_t_hat", chk.ks_t_stat, chk.ks_t_pvalue, "pass" if chk.ks_t_pvalue > 1e-3 else "fail"),
        ("ks_chi2_sigma2_hat", chk.ks_chi2_stat, chk.ks_chi2_pvalue, "pass" if chk.ks_chi2_pvalue > 1e-3 else "fail"),
        ("corr_t_sigma2", chk.corr_t_sigma2, 5.0 / math.sqrt(chk.trials),
         "pass" if abs(chk.corr_t_sigma2) < 5.0 / math.sqrt(chk.trials) else "fail"),
        ("coverage", cov.coverage, floor, "pass" if cov.coverage >= floor else "fail"),
    ]
    meta = scn.metadata()
    meta.update(va=spec.va, m=args.m, trials=args.trials, coverage_trials=args.coverage_trials,
                mc_eps_pe=args.mc_eps_pe, seed=args.seed)
    return Table(("check", "statistic", "reference", "result"), rows, meta)


def cmd_estimate(args) -> Table:
    scn = scenario_from_args(args)
    if args.va is None:
        raise DomainError("estimate needs --va (the modulation variance used for the data)")
    outcome, rep = estimate_from_file(args.data, args.va, args.eps_pe, scn.scheme, args.n_total,
                                      scn.beta, scn.budget)
    cols = ("m", "t_hat", "sigma2_hat", "t_min", "sigma2_max", "i_xy", "chi_worst", "delta_n", "rate", "status")
    vals = (outcome.m, outcome.t_hat, outcome.sigma2_hat, outcome.t_min, outcome.sigma2_max,
            rep.i_xy, rep.chi_ye, rep.delta_n, rep.rate, rep.status)
    meta = scn.metadata()
    meta["data"] = args.data
    return Table(cols, [vals], meta)


COMMANDS = {
    "keyrate": cmd_keyrate,
    "scan": cmd_scan,
    "figure": cmd_figure,
    "mc-validate": cmd_mc_validate,
    "estimate": cmd_estimate,
}


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> None:
    """Install values from ``--config`` as defaults of the chosen subcommand."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    pre.add_argument("command", nargs="?")
    known, _ = pre.parse_known_args(argv)
    if not known.config or known.command not in COMMANDS:
        return
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    sp = sub.choices[known.command]
    actions = {a.dest: a for a in sp._actions}
    defaults = {}
    for key, raw in read_config(known.config).items():
        key = "n_total" if key in ("N", "n") else key
        if key not in actions or key in ("config", "help"):
            raise DomainError(f"unknown config key {key!r} for command {known.command!r}")
        if isinstance(actions[key], argparse._StoreTrueAction):
            defaults[key] = raw.lower() in ("1", "true", "yes", "on")
        else:
            # string defaults go through the action's type converter
            defaults[key] = raw
    sp.set_defaults(**defaults)


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(message)s")
        table = COMMANDS[args.command](args)
        _emit(table, args.out)
    except (DataFileError, DomainError, QuadratureError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
