"""Command-line interface.

Subcommands::

    pbimpact validate <file.pb>
    pbimpact outcome <file.pb> --rule greedy|mes_core|mes_add1|mes_add1u|ug|es
    pbimpact metrics <file.pb> [--rules UG,ES] [--out DIR] [--format csv|json]
    pbimpact corpus <dir> [--jobs N] [--no-ballot-cells]
    pbimpact conjoint <dir>
    pbimpact selection-rate <dir> [--n 20]

Exit codes: 0 success, 1 usage error, 2 data/IO error. Diagnostics go to
standard error; results go to files and standard output. The default output
directory can be set with the ``PBIMPACT_OUT`` environment variable.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

from .analysis import AnalysisConfig, export_report, run_corpus, run_instance
from .errors import NoVoters, PbImpactError
from .metrics import budget_utilization
from .pabulib import parse_instance
from .rationals import format_rational, parse_rational
from .rules import (
    RuleId,
    equal_shares_add1,
    equal_shares_add1u,
    equal_shares_core,
    utilitarian_greedy,
)

__all__ = ["CliConfig", "main", "run"]

_ES_VARIANTS = {
    "core": RuleId.MES_CORE,
    "add1": RuleId.MES_ADD1,
    "add1u": RuleId.MES_ADD1U,
}


@dataclass(frozen=True)
class CliConfig:
    """Resolved command-line options shared by the analysis subcommands."""

    rules: tuple[RuleId, ...]
    es_variant: RuleId
    increment: Fraction
    mode: str
    out: Path
    format: str
    top_n: int
    jobs: int
    include_ballot_cells: bool

    def analysis(self) -> AnalysisConfig:
        return AnalysisConfig(
            es_variant=self.es_variant,
            increment=self.increment,
            mode=self.mode,
            top_n=self.top_n,
            include_ballot_cells=self.include_ballot_cells,
            jobs=self.jobs,
        )


class _Parser(argparse.ArgumentParser):
    """argparse with usage failures mapped to exit code 1."""

    def error(self, message):
        print(f"error: {message}", file=sys.stderr)
        self.print_usage(sys.stderr)
        raise SystemExit(1)


def _rational_arg(text: str) -> Fraction:
    try:
        value = parse_rational(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    return value


def _positive_rational_arg(text: str) -> Fraction:
    value = _rational_arg(text)
    if value <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return value


def _build_parser() -> _Parser:
    parser = _Parser(prog="pbimpact", description="Participatory budgeting impact analytics")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, corpus: bool = False):
        p.add_argument("--mode", choices=("strict", "lenient"), default="strict",
                       help="parse mode (default strict)")
        p.add_argument("--es-variant", choices=tuple(_ES_VARIANTS), default="add1u",
                       help="equal-shares completion (default add1u)")
        p.add_argument("--increment", type=_positive_rational_arg, default=Fraction(1),
                       help="endowment ladder step for add1/add1u (default 1)")
        p.add_argument("--out", default=None, help="output directory (default $PBIMPACT_OUT or ./pbimpact_out)")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        if corpus:
            p.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                           help="parallel workers (default: available parallelism)")
            p.add_argument("--no-ballot-cells", action="store_true",
                           help="skip per-voter metric cells (faster on large corpora)")

    p = sub.add_parser("validate", help="parse a .pb file and report a summary")
    p.add_argument("file")
    p.add_argument("--mode", choices=("strict", "lenient"), default="strict")

    p = sub.add_parser("outcome", help="compute one rule's winners for a .pb file")
    p.add_argument("file")
    p.add_argument("--rule", required=True,
                   choices=("greedy", "ug", "mes_core", "mes_add1", "mes_add1u", "es"))
    p.add_argument("--mode", choices=("strict", "lenient"), default="strict")
    p.add_argument("--increment", type=_positive_rational_arg, default=Fraction(1))
    p.add_argument("--endowment", type=_rational_arg, default=None,
                   help="per-voter endowment for mes_core (default budget/num_voters)")

    p = sub.add_parser("metrics", help="full metric report for one .pb file")
    p.add_argument("file")
    p.add_argument("--rules", default="UG,ES", help="comma list of UG,ES (default both)")
    add_common(p)

    p = sub.add_parser("corpus", help="corpus-wide analysis over a directory of .pb files")
    p.add_argument("dir")
    add_common(p, corpus=True)

    p = sub.add_parser("conjoint", help="conjoint regression of budget utilization")
    p.add_argument("dir")
    add_common(p, corpus=True)

    p = sub.add_parser("selection-rate", help="top-n selection rate curves")
    p.add_argument("dir")
    p.add_argument("--n", type=int, default=20)
    add_common(p, corpus=True)
    return parser


def _resolve_out(value: Optional[str]) -> Path:
    if value:
        return Path(value)
    return Path(os.environ.get("PBIMPACT_OUT", "pbimpact_out"))


def _config(args, top_n: Optional[int] = None) -> CliConfig:
    es_variant = _ES_VARIANTS[args.es_variant]
    return CliConfig(
        rules=(RuleId.GREEDY, es_variant),
        es_variant=es_variant,
        increment=args.increment,
        mode=args.mode,
        out=_resolve_out(args.out),
        format=args.format,
        top_n=top_n if top_n is not None else 20,
        jobs=getattr(args, "jobs", 1),
        include_ballot_cells=not getattr(args, "no_ballot_cells", False),
    )


def _read_instance(path: str, mode: str, warnings: list[str]):
    text = Path(path).read_text(encoding="utf-8")
    return parse_instance(text, mode, source_name=path, warnings=warnings)


def _cmd_validate(args) -> int:
    warnings: list[str] = []
    instance = _read_instance(args.file, args.mode, warnings)
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)
    print(
        f"ok: {args.file}: {len(instance.projects)} projects, {len(instance.ballots)} voters, "
        f"budget {format_rational(instance.budget)}, vote_type {instance.vote_type.value}"
    )
    return 0


def _cmd_outcome(args) -> int:
    warnings: list[str] = []
    instance = _read_instance(args.file, args.mode, warnings)
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)
    rule = args.rule
    increment = args.increment
    if rule in ("greedy", "ug"):
        outcome = utilitarian_greedy(instance)
    elif rule == "mes_core":
        if args.endowment is not None:
            endowment = args.endowment
        else:
            if not instance.ballots:
                raise NoVoters("mes_core needs voters to derive the default endowment")
            endowment = instance.budget / len(instance.ballots)
        outcome = equal_shares_core(instance, endowment)
    elif rule == "mes_add1":
        outcome = equal_shares_add1(instance, increment)
    else:  # mes_add1u or its alias "es"
        outcome = equal_shares_add1u(instance, increment)
    print(f"rule: {outcome.rule.value}")
    print(f"winners: {','.join(outcome.winners)}")
    print(f"total_cost: {format_rational(outcome.total_cost)}")
    print(f"budget: {format_rational(instance.budget)}")
    print(f"utilization: {float(budget_utilization(outcome, instance))}")
    if outcome.endowment_used is not None:
        print(f"endowment_used: {format_rational(outcome.endowment_used)}")
    return 0


def _filter_rules(report, keep):
    """Restrict an instance report to a subset of rules (losses need both)."""
    from dataclasses import replace

    if set(report.outcomes) <= set(keep):
        return report
    both = len([rule for rule in report.outcomes if rule in keep]) == 2
    return replace(
        report,
        outcomes={r: o for r, o in report.outcomes.items() if r in keep},
        cells={k: v for k, v in report.cells.items() if k[2] in keep},
        ballot_cells={k: v for k, v in report.ballot_cells.items() if k[2] in keep},
        ballot_means={k: v for k, v in report.ballot_means.items() if k[2] in keep},
        losses=report.losses if both else {},
        relative_losses=report.relative_losses if both else {},
        utilization={r: u for r, u in report.utilization.items() if r in keep},
    )


def _cmd_metrics(args) -> int:
    config = _config(args)
    wanted = {token.strip().upper() for token in args.rules.split(",") if token.strip()}
    unknown = wanted - {"UG", "ES"}
    if unknown or not wanted:
        raise PbImpactError(f"unknown rules {sorted(unknown)}; expected UG and/or ES")
    warnings: list[str] = []
    instance = _read_instance(args.file, args.mode, warnings)
    report = run_instance(
        instance,
        config.analysis(),
        instance_id=Path(args.file).stem,
        parse_warnings=warnings,
    )
    keep = set()
    if "UG" in wanted:
        keep.add(RuleId.GREEDY)
    if "ES" in wanted:
        keep.add(config.es_variant)
    report = _filter_rules(report, keep)
    for w in report.warnings:
        print(f"warning: {w}", file=sys.stderr)
    paths = export_report(report, config.format, config.out)
    for path in paths:
        print(path)
    return 0


def _cmd_corpus(args) -> int:
    config = _config(args)
    report = run_corpus(args.dir, config.analysis())
    for instance_id, error in sorted(report.errors.items()):
        print(f"error: {instance_id}: {error}", file=sys.stderr)
    print(
        f"corpus: {report.n_files} files, {report.n_instances} parsed, "
        f"{report.n_analyzed} analyzed with both rules",
        file=sys.stderr,
    )
    for path in export_report(report, config.format, config.out):
        print(path)
    return 0


def _cmd_conjoint(args) -> int:
    config = _config(args)
    report = run_corpus(args.dir, config.analysis())
    for rule in report.rules:
        fit = report.conjoint.get(rule)
        if fit is None or isinstance(fit, str):
            print(f"{rule.value}: no fit ({fit})")
            continue
        print(f"{rule.value}: R^2 = {fit.r_squared:.4f} on {fit.n} instances")
        names = ("intercept", *report.conjoint_predictors)
        for name, coef, p, imp in zip(names, fit.coefficients, fit.p_values, fit.relative_importance):
            print(f"  {name}: coefficient {coef:+.4f}, p {p:.3g}, relative importance {imp:+.3f}")
    for path in export_report(report, config.format, config.out):
        print(path, file=sys.stderr)
    return 0


def _cmd_selection_rate(args) -> int:
    config = _config(args, top_n=args.n)
    if args.n < 1:
        raise PbImpactError("--n must be at least 1")
    report = run_corpus(args.dir, config.analysis())
    for rule in report.rules:
        entries = report.selection_rates.get(rule, ())
        for rank, count, rate in entries:
            print(f"{rule.value}\t{rank}\t{count}\t{float(rate)}")
    for path in export_report(report, config.format, config.out):
        print(path, file=sys.stderr)
    return 0


_COMMANDS = {
    "validate": _cmd_validate,
    "outcome": _cmd_outcome,
    "metrics": _cmd_metrics,
    "corpus": _cmd_corpus,
    "conjoint": _cmd_conjoint,
    "selection-rate": _cmd_selection_rate,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Entry point; returns the process exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except (PbImpactError, OSError, UnicodeDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def run() -> None:
    """Console-script wrapper."""
    raise SystemExit(main())
