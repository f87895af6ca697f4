"""Command-line entry point: validate markets, price payoffs, solve requirements.

Commands: validate, price, arbitrage, requirement, portfolio, levelset,
properties. Output is JSON first (``--format table`` renders a cosmetic
text view); infinities are serialized as the strings "-inf"/"+inf" to stay
inside JSON. Exit codes: 0 success, 1 domain failure (validation failed,
arbitrage found, property violations), 2 usage or parse errors.

Given identical input files, flags and seed, the emitted JSON is
byte-identical across runs.
"""

from __future__ import annotations

import argparse
import dataclasses
import itertools
import json
import sys

import numpy as np

from . import verify
from .acceptance import AcceptanceParseError, AcceptanceSet, load_acceptance
from .market import (MarketError, MarketParseError, ValidatedMarket,
                     check_monotone_pricing, check_no_arbitrage, load_market,
                     validate_market)
from .riskmeasure import (DEFAULT_OPTIONS, SolveOptions, extreal_str,
                          is_finite, solve_rho)

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_USAGE = 2


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _emit(doc: dict, fmt: str) -> None:
    if fmt == "table":
        for line in _render_table(doc):
            print(line)
    else:
        print(json.dumps(doc, sort_keys=True, indent=2))


def _render_table(doc: dict, prefix: str = "") -> list[str]:
    lines = []
    for key in sorted(doc):
        value = doc[key]
        if isinstance(value, dict):
            lines.append(f"{prefix}{key}:")
            lines.extend(_render_table(value, prefix + "  "))
        else:
            lines.append(f"{prefix}{key}: {value}")
    return lines


def _read_file(path: str) -> str:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            return handle.read()
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}", EXIT_USAGE) from exc


def _load_validated_market(path: str, tol: float) -> ValidatedMarket:
    try:
        raw, numeraire = load_market(_read_file(path))
    except MarketParseError as exc:
        raise CliError(f"market parse error: {exc}", EXIT_USAGE) from exc
    try:
        return validate_market(raw, tol=tol, numeraire=numeraire)
    except MarketError as exc:
        raise CliError(f"{type(exc).__name__}: {exc}", EXIT_DOMAIN) from exc


def _load_acceptance_set(path: str, vm: ValidatedMarket) -> AcceptanceSet:
    try:
        return load_acceptance(_read_file(path), vm.space)
    except AcceptanceParseError as exc:
        raise CliError(f"acceptance parse error: {exc}", EXIT_USAGE) from exc


def _parse_vector(text: str, n: int, what: str) -> np.ndarray:
    try:
        values = [float(v) for v in text.replace(",", " ").split()]
    except ValueError as exc:
        raise CliError(f"{what} must be a list of numbers", EXIT_USAGE) from exc
    if len(values) != n:
        raise CliError(f"{what} needs {n} entries, got {len(values)}", EXIT_USAGE)
    arr = np.asarray(values)
    if not np.all(np.isfinite(arr)):
        raise CliError(f"{what} must be finite", EXIT_USAGE)
    return arr


def _options_from_args(args) -> SolveOptions:
    return dataclasses.replace(DEFAULT_OPTIONS, m_bracket_max=args.bracket_max,
                               lp_tol=args.tol)


def cmd_validate(args) -> int:
    vm = _load_validated_market(args.market, args.tol)
    arb = check_no_arbitrage(vm)
    monotone, violation = check_monotone_pricing(vm)
    doc = {
        "states": vm.n_states,
        "assets": vm.market.n_assets,
        "dim_eligible": vm.dim_m,
        "kernel_dim": int(vm.kernel_basis.shape[0]),
        "arbitrage": arb.kind,
        "free_lunch": arb.free_lunch,
        "free_lottery": arb.free_lottery,
        "monotone_pricing": monotone,
    }
    if arb.state_prices is not None:
        doc["state_prices"] = arb.state_prices.tolist()
    if arb.witness is not None:
        doc["witness"] = arb.witness.tolist()
    _emit(doc, args.format)
    return EXIT_OK if arb.kind == "none" else EXIT_DOMAIN


def cmd_price(args) -> int:
    vm = _load_validated_market(args.market, args.tol)
    payoff = _parse_vector(args.payoff, vm.n_states, "payoff")
    if not vm.in_m(payoff, args.tol):
        _emit({"error": "NotInSpan", "payoff": payoff.tolist()}, args.format)
        return EXIT_DOMAIN
    doc = {"payoff": payoff.tolist(), "price": vm.price(payoff)}
    _emit(doc, args.format)
    return EXIT_OK


def cmd_arbitrage(args) -> int:
    vm = _load_validated_market(args.market, args.tol)
    arb = check_no_arbitrage(vm)
    doc = {"kind": arb.kind, "free_lunch": arb.free_lunch,
           "free_lottery": arb.free_lottery}
    if arb.state_prices is not None:
        doc["state_prices"] = arb.state_prices.tolist()
        doc["min_state_price"] = arb.min_state_price
    for name, w in (("lunch_witness", arb.lunch_witness),
                    ("lottery_witness", arb.lottery_witness)):
        if w is not None:
            doc[name] = w.tolist()
    _emit(doc, args.format)
    return EXIT_OK if arb.kind == "none" else EXIT_DOMAIN


def _solve_requirement(args):
    vm = _load_validated_market(args.market, args.tol)
    a = _load_acceptance_set(args.acceptance, vm)
    x = _parse_vector(args.position, vm.n_states, "position")
    opts = _options_from_args(args)
    result = solve_rho(a, vm, x, opts)
    return vm, a, x, result


def cmd_requirement(args) -> int:
    vm, a, x, result = _solve_requirement(args)
    doc = {
        "position": x.tolist(),
        "value": extreal_str(result.value),
        "attained": result.attained,
        "strategy": result.strategy,
    }
    if result.optimal_payoff is not None:
        doc["payoff"] = result.optimal_payoff.tolist()
    _emit(doc, args.format)
    return EXIT_OK


def cmd_portfolio(args) -> int:
    vm, a, x, result = _solve_requirement(args)
    doc = {
        "position": x.tolist(),
        "value": extreal_str(result.value),
        "attained": result.attained,
        "strategy": result.strategy,
    }
    if result.attained and result.optimal_payoff is not None:
        weights = vm.portfolio_for(result.optimal_payoff)
        doc["payoff"] = result.optimal_payoff.tolist()
        doc["weights"] = weights.tolist()
        doc["cost"] = float(vm.market.prices @ weights)
    else:
        doc["weights"] = None
    _emit(doc, args.format)
    return EXIT_OK


def cmd_levelset(args) -> int:
    vm = _load_validated_market(args.market, args.tol)
    a = _load_acceptance_set(args.acceptance, vm)
    opts = _options_from_args(args)
    n = vm.n_states

    if args.points is not None:
        pts = json.loads(_read_file(args.points))
        points = [np.asarray(p, dtype=float) for p in pts]
    else:
        if n > 3:
            raise CliError("grid output needs 2 or 3 states; use --points", EXIT_USAGE)
        axis = np.linspace(args.lo, args.hi, args.grid)
        if args.grid ** n > 1_000_000:
            raise CliError("GridTooLarge: more than 1e6 grid points", EXIT_USAGE)
        points = [np.asarray(p) for p in itertools.product(*([axis] * n))]

    band = 10 * opts.bisect_tol
    classified = []
    for p in points:
        result = solve_rho(a, vm, p, opts)
        value = result.value
        # attained LP solves resolve the level exactly; bisection only to a band
        exact_strategy = result.strategy in ("direct_lp", "var_enum")
        boundary_tol = 1e-9 if exact_strategy else band
        if is_finite(value) and abs(value - args.level) <= boundary_tol:
            tag = "boundary"
        elif is_finite(value) and abs(value - args.level) <= band:
            tag = "inconclusive"
        elif value < args.level:
            tag = "below"
        else:
            tag = "above"
        classified.append({"point": p.tolist(), "value": extreal_str(value), "tag": tag})
    _emit({"level": args.level, "count": len(classified), "points": classified},
          args.format)
    return EXIT_OK


_SUITES = ("axioms", "levelsets", "domain", "degeneracy", "all")


def cmd_properties(args) -> int:
    vm = _load_validated_market(args.market, args.tol)
    a = _load_acceptance_set(args.acceptance, vm)
    opts = _options_from_args(args)
    if args.suite not in _SUITES:
        raise CliError(f"unknown suite {args.suite!r}", EXIT_USAGE)

    reports = []
    if args.suite in ("axioms", "all"):
        reports.append(verify.check_risk_measure_axioms(
            a, vm, trials=args.trials, seed=args.seed, opts=opts))
    if args.suite in ("levelsets", "all"):
        reports.append(verify.check_levelset_theorem(
            a, vm, grid=max(5, min(21, args.trials)), seed=args.seed, opts=opts))
    if args.suite in ("domain", "all"):
        reports.append(verify.check_domain_theorem(
            a, vm, trials=args.trials, seed=args.seed, opts=opts))
    if args.suite in ("degeneracy", "all"):
        reports.append(verify.check_degeneracy_lemmas(
            a, vm, grid=args.trials, seed=args.seed, opts=opts))

    doc = {"suite": args.suite, "seed": args.seed, "reports": [
        json.loads(r.to_json()) for r in reports]}
    doc["violations"] = sum(len(r.violations) for r in reports)
    doc["passed"] = doc["violations"] == 0
    _emit(doc, args.format)
    return EXIT_OK if doc["passed"] else EXIT_DOMAIN


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="capreq",
        description="Scenario-based capital requirements over one-period markets.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=float, default=1e-8,
                        help="feasibility tolerance (default 1e-8)")
    common.add_argument("--seed", type=int, default=0, help="sampling seed")
    common.add_argument("--bracket-max", type=float, default=DEFAULT_OPTIONS.m_bracket_max,
                        help="search bound certifying infinite values")
    common.add_argument("--format", choices=("json", "table"), default="json")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", parents=[common],
                       help="validate a market file and run arbitrage diagnostics")
    p.add_argument("market")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("price", parents=[common], help="price an eligible payoff")
    p.add_argument("market")
    p.add_argument("--payoff", required=True, help="comma/space separated values")
    p.set_defaults(func=cmd_price)

    p = sub.add_parser("arbitrage", parents=[common],
                       help="state prices or arbitrage witnesses")
    p.add_argument("market")
    p.set_defaults(func=cmd_arbitrage)

    p = sub.add_parser("requirement", parents=[common],
                       help="minimal cost of making a position acceptable")
    p.add_argument("market")
    p.add_argument("acceptance")
    p.add_argument("--position", required=True)
    p.set_defaults(func=cmd_requirement)

    p = sub.add_parser("portfolio", parents=[common],
                       help="requirement plus the optimal asset holdings")
    p.add_argument("market")
    p.add_argument("acceptance")
    p.add_argument("--position", required=True)
    p.set_defaults(func=cmd_portfolio)

    p = sub.add_parser("levelset", parents=[common],
                       help="classify grid points against a requirement level")
    p.add_argument("market")
    p.add_argument("acceptance")
    p.add_argument("--level", type=float, default=0.0)
    p.add_argument("--grid", type=int, default=11)
    p.add_argument("--lo", type=float, default=-5.0)
    p.add_argument("--hi", type=float, default=5.0)
    p.add_argument("--points", help="JSON file with an explicit point list")
    p.set_defaults(func=cmd_levelset)

    p = sub.add_parser("properties", parents=[common],
                       help="run a property suite against market + acceptance set")
    p.add_argument("market")
    p.add_argument("acceptance")
    p.add_argument("--suite", default="all", choices=_SUITES)
    p.add_argument("--trials", type=int, default=100)
    p.set_defaults(func=cmd_properties)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except CliError as exc:
        print(json.dumps({"error": str(exc)}, sort_keys=True), file=sys.stderr)
        return exc.code
    except (MarketError, AcceptanceParseError, verify.NotPolyhedral) as exc:
        print(json.dumps({"error": f"{type(exc).__name__}: {exc}"}, sort_keys=True),
              file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
