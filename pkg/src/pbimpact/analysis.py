"""Per-instance and corpus-wide analysis pipelines plus report export.

``run_instance`` evaluates both aggregation rules on one election and fills
every metric cell; ``run_corpus`` folds per-instance reports into the
corpus-level summaries: loss distributions, selection-rate curves, Pearson
correlations, paired t-tests, beneficiary representation and the conjoint
regression of budget utilization on winning area combinations.

Exports are deterministic: rows are emitted in a canonical key order, so two
runs over the same corpus produce byte-identical files regardless of how the
per-instance work was scheduled.
"""

from __future__ import annotations

import concurrent.futures
import csv
import io
import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Mapping, Optional, Sequence, Union

from .errors import (
    EmptyCorpus,
    NoUsableRows,
    PbImpactError,
    StatsError,
)
from .metrics import (
    MetricCalc,
    MetricKey,
    MetricLevel,
    MetricScope,
    MetricUnit,
    MetricValue,
    all_metric_keys,
    area_slice,
    ballot_slice,
    budget_utilization,
    impact_value,
    novelty_value,
    parse_metric_key,
)
from .model import (
    Beneficiary,
    ImpactArea,
    Instance,
    QuartileKind,
    QuartileLabel,
    VoteType,
    assign_quartile_labels,
    popularity_by_project,
    proposal_ratios,
)
from .pabulib import parse_instance, scan_corpus, serialize_instance
from .rationals import format_rational, parse_rational
from .rules import (
    ExclusivePair,
    Outcome,
    RuleId,
    equal_shares_add1,
    equal_shares_add1u,
    equal_shares_core,
    exclusive_winners,
    outcome_from_winners,
    utilitarian_greedy,
)
from .stats import LossSummary, OlsFit, TestResult, ols_fit, paired_t_test, pearson, summarize_losses

__all__ = [
    "DEFAULT_COMBOS",
    "AnalysisConfig",
    "InstanceReport",
    "CorpusReport",
    "ConjointDataset",
    "run_instance",
    "run_corpus",
    "build_conjoint_dataset",
    "export_report",
    "load_report",
]

# The four most frequent mutually-exclusive area combinations, each split
# into a low-cost and a high-cost indicator for the conjoint regression.
DEFAULT_COMBOS: tuple[frozenset[ImpactArea], ...] = (
    frozenset({ImpactArea.CULTURE, ImpactArea.EDUCATION}),
    frozenset(
        {ImpactArea.ENVIRONMENTAL_PROTECTION, ImpactArea.PUBLIC_SPACE, ImpactArea.URBAN_GREENERY}
    ),
    frozenset({ImpactArea.PUBLIC_SPACE, ImpactArea.PUBLIC_TRANSIT}),
    frozenset({ImpactArea.HEALTH, ImpactArea.PUBLIC_SPACE, ImpactArea.SPORT}),
)

_ES_RULES = {
    RuleId.MES_CORE: lambda instance, increment: equal_shares_core(
        instance, instance.budget / len(instance.ballots)
    ),
    RuleId.MES_ADD1: lambda instance, increment: equal_shares_add1(instance, increment),
    RuleId.MES_ADD1U: lambda instance, increment: equal_shares_add1u(instance, increment),
}

_OUTCOME_KEYS = tuple(k for k in all_metric_keys() if k.level is MetricLevel.OUTCOME)
_BALLOT_KEYS = tuple(k for k in all_metric_keys() if k.level is MetricLevel.BALLOT)
_RULE_ORDER = {rule: i for i, rule in enumerate(RuleId)}
_AREA_ORDER = {area: i for i, area in enumerate(ImpactArea)}
_KEY_ORDER = {key: i for i, key in enumerate(all_metric_keys())}


@dataclass(frozen=True)
class AnalysisConfig:
    """Knobs for the analysis pipeline."""

    es_variant: RuleId = RuleId.MES_ADD1U
    increment: Fraction = Fraction(1)
    mode: str = "strict"
    top_n: int = 20
    include_ballot_cells: bool = True
    jobs: int = 1
    combos: tuple[frozenset[ImpactArea], ...] = DEFAULT_COMBOS

    def __post_init__(self) -> None:
        if self.es_variant not in _ES_RULES:
            raise ValueError(f"es_variant must be an equal-shares rule, got {self.es_variant}")
        if self.increment <= 0:
            raise ValueError("increment must be positive")
        if self.top_n < 1:
            raise ValueError("top_n must be at least 1")
        if self.jobs < 1:
            raise ValueError("jobs must be at least 1")


@dataclass(frozen=True)
class InstanceReport:
    """All metric cells, losses and labels for one election instance.

    ``ballot_cells`` holds the per-voter values; ``ballot_means`` their
    per-instance voter means (numerator = sum of defined values, denominator
    = voter count), which is what losses and corpus pairing consume at the
    ballot level. ``losses`` only has entries where both rules' values are
    defined.
    """

    instance_id: str
    instance: Instance
    outcomes: Mapping[RuleId, Outcome]
    cells: Mapping[tuple[MetricKey, ImpactArea, RuleId], MetricValue]
    ballot_cells: Mapping[tuple[MetricKey, ImpactArea, RuleId, str], MetricValue]
    ballot_means: Mapping[tuple[MetricKey, ImpactArea, RuleId], MetricValue]
    losses: Mapping[tuple[MetricKey, ImpactArea], Fraction]
    relative_losses: Mapping[tuple[MetricKey, ImpactArea], Fraction]
    quartiles: Mapping[QuartileKind, Mapping[str, QuartileLabel]]
    utilization: Mapping[RuleId, Fraction]
    warnings: tuple[str, ...] = ()

    @property
    def rules(self) -> tuple[RuleId, ...]:
        return tuple(sorted(self.outcomes, key=_RULE_ORDER.__getitem__))


@dataclass(frozen=True)
class CorpusReport:
    """Corpus-wide aggregates; every cell records the n it was computed from.

    Test cells hold either a result or the name of the statistical
    precondition that failed (e.g. ``"ZeroVarianceDifferences"``).
    """

    n_files: int
    n_instances: int
    n_analyzed: int
    rules: tuple[RuleId, ...]
    summaries: Mapping[tuple[MetricKey, ImpactArea], LossSummary]
    selection_rates: Mapping[RuleId, tuple[tuple[int, int, Fraction], ...]]
    pearson_by_area: Mapping[tuple[ImpactArea, RuleId], Union[TestResult, str]]
    t_tests: Mapping[tuple[MetricKey, ImpactArea], Union[TestResult, str]]
    conjoint: Mapping[RuleId, Union[OlsFit, str]]
    conjoint_predictors: tuple[str, ...]
    beneficiaries: Mapping[tuple[Beneficiary, RuleId], MetricValue]
    beneficiary_relative_loss: Mapping[Beneficiary, Optional[Fraction]]
    area_instance_counts: Mapping[ImpactArea, int]
    errors: Mapping[str, str]
    warnings: tuple[str, ...] = ()


@dataclass(frozen=True)
class ConjointDataset:
    """Indicator design matrix and budget-utilization response for one rule."""

    rule: RuleId
    predictors: tuple[str, ...]
    rows: tuple[tuple[int, ...], ...]
    y: tuple[float, ...]
    instance_ids: tuple[str, ...]


def _degenerate_pair(rule: RuleId) -> ExclusivePair:
    return ExclusivePair(rule, rule, frozenset(), frozenset())


def run_instance(
    instance: Instance,
    config: AnalysisConfig = AnalysisConfig(),
    *,
    instance_id: str = "instance",
    winners_override: Optional[Mapping[RuleId, Sequence[str]]] = None,
    parse_warnings: Sequence[str] = (),
) -> InstanceReport:
    """Evaluate both rules and every metric cell for one instance.

    Non-approval instances get a greedy-only partial report with a warning
    (equal shares is undefined for them); ordinal instances get labels only.
    ``winners_override`` replaces the computed winner set of a rule with an
    externally given one, e.g. published election results.
    """
    warnings = list(parse_warnings)
    overrides = dict(winners_override or {})
    active_rules = (RuleId.GREEDY, config.es_variant)
    for rule in overrides:
        if rule not in active_rules:
            raise ValueError(f"override for inactive rule {rule.value!r}")

    outcomes: dict[RuleId, Outcome] = {}
    if instance.vote_type is VoteType.ORDINAL:
        warnings.append(f"{instance_id}: ordinal ballots, no aggregation rules applied")
    else:
        if RuleId.GREEDY in overrides:
            outcomes[RuleId.GREEDY] = outcome_from_winners(
                instance, RuleId.GREEDY, overrides[RuleId.GREEDY]
            )
        else:
            outcomes[RuleId.GREEDY] = utilitarian_greedy(instance)
        if config.es_variant in overrides:
            outcomes[config.es_variant] = outcome_from_winners(
                instance, config.es_variant, overrides[config.es_variant]
            )
        elif instance.vote_type is VoteType.APPROVAL:
            if instance.ballots:
                outcomes[config.es_variant] = _ES_RULES[config.es_variant](
                    instance, config.increment
                )
            else:
                warnings.append(f"{instance_id}: no voters, equal shares skipped")
        else:
            warnings.append(
                f"{instance_id}: {instance.vote_type.value} ballots, equal shares skipped"
            )

    have_both = len(outcomes) == 2
    if have_both:
        pair = exclusive_winners(outcomes[RuleId.GREEDY], outcomes[config.es_variant])
    elif outcomes:
        pair = _degenerate_pair(next(iter(outcomes)))
    else:
        pair = None

    cells: dict[tuple[MetricKey, ImpactArea, RuleId], MetricValue] = {}
    ballot_cells: dict[tuple[MetricKey, ImpactArea, RuleId, str], MetricValue] = {}
    ballot_means: dict[tuple[MetricKey, ImpactArea, RuleId], MetricValue] = {}
    pops = popularity_by_project(instance) if instance.vote_type is not VoteType.ORDINAL else {}

    if outcomes and instance.projects:
        ratios = {area: proposal_ratios(instance, area) for area in ImpactArea}
        for rule in sorted(outcomes, key=_RULE_ORDER.__getitem__):
            outcome = outcomes[rule]
            for area in ImpactArea:
                base = area_slice(instance, outcome, pair, area)
                for key in _OUTCOME_KEYS:
                    if key.scope is not MetricScope.IMPACT and not have_both:
                        continue
                    if key.scope is MetricScope.IMPACT:
                        value = impact_value(key, base, ratios[area], instance, pops)
                    else:
                        value = novelty_value(key, base, instance, pops)
                    cells[(key, area, rule)] = value
                if not config.include_ballot_cells:
                    continue
                sums: dict[MetricKey, Fraction] = {k: Fraction(0) for k in _BALLOT_KEYS}
                counts: dict[MetricKey, int] = {k: 0 for k in _BALLOT_KEYS}
                for ballot in instance.ballots:
                    voter_view = ballot_slice(base, ballot)
                    for key in _BALLOT_KEYS:
                        if key.scope is not MetricScope.IMPACT and not have_both:
                            continue
                        if key.scope is MetricScope.IMPACT:
                            value = impact_value(key, voter_view, ratios[area], instance, pops)
                        else:
                            value = novelty_value(key, voter_view, instance, pops)
                        ballot_cells[(key, area, rule, ballot.voter_id)] = value
                        if value.defined:
                            sums[key] += value.value
                            counts[key] += 1
                for key in _BALLOT_KEYS:
                    if key.scope is not MetricScope.IMPACT and not have_both:
                        continue
                    ballot_means[(key, area, rule)] = MetricValue(
                        sums[key], Fraction(counts[key])
                    )

    losses: dict[tuple[MetricKey, ImpactArea], Fraction] = {}
    relative: dict[tuple[MetricKey, ImpactArea], Fraction] = {}
    if have_both:
        ug, es = RuleId.GREEDY, config.es_variant
        for key in _OUTCOME_KEYS:
            for area in ImpactArea:
                a = cells.get((key, area, ug))
                b = cells.get((key, area, es))
                if a is None or b is None or not (a.defined and b.defined):
                    continue
                losses[(key, area)] = a.value - b.value
                if a.value != 0:
                    relative[(key, area)] = (a.value - b.value) / a.value
        for key in _BALLOT_KEYS:
            for area in ImpactArea:
                paired_diffs: list[Fraction] = []
                paired_ug: list[Fraction] = []
                for ballot in instance.ballots:
                    a = ballot_cells.get((key, area, ug, ballot.voter_id))
                    b = ballot_cells.get((key, area, es, ballot.voter_id))
                    if a is None or b is None or not (a.defined and b.defined):
                        continue
                    paired_diffs.append(a.value - b.value)
                    paired_ug.append(a.value)
                if not paired_diffs:
                    continue
                count = len(paired_diffs)
                losses[(key, area)] = sum(paired_diffs, Fraction(0)) / count
                mean_ug = sum(paired_ug, Fraction(0)) / count
                if mean_ug != 0:
                    relative[(key, area)] = losses[(key, area)] / mean_ug

    quartiles: dict[QuartileKind, Mapping[str, QuartileLabel]] = {}
    if instance.projects:
        quartiles[QuartileKind.COST] = assign_quartile_labels(instance, QuartileKind.COST)
        if instance.vote_type is not VoteType.ORDINAL:
            quartiles[QuartileKind.POPULARITY] = assign_quartile_labels(
                instance, QuartileKind.POPULARITY
            )

    utilization = {
        rule: budget_utilization(outcomes[rule], instance)
        for rule in sorted(outcomes, key=_RULE_ORDER.__getitem__)
    }
    return InstanceReport(
        instance_id=instance_id,
        instance=instance,
        outcomes=outcomes,
        cells=cells,
        ballot_cells=ballot_cells,
        ballot_means=ballot_means,
        losses=losses,
        relative_losses=relative,
        quartiles=quartiles,
        utilization=utilization,
        warnings=tuple(warnings),
    )


def build_conjoint_dataset(
    reports: Sequence[InstanceReport],
    combos: Optional[Sequence[frozenset[ImpactArea]]] = None,
    rule: RuleId = RuleId.MES_ADD1U,
) -> ConjointDataset:
    """Build the indicator design for predicting budget utilization.

    For each combo and cost level, the indicator is 1 iff the rule's winners
    contain at least one project whose area set equals the combo exactly and
    whose cost is below (low) or at/above (high) the instance's median
    project cost.
    """
    combo_list = [frozenset(c) for c in (combos if combos is not None else DEFAULT_COMBOS)]
    predictors = []
    for combo in combo_list:
        name = "+".join(sorted(area.value for area in combo))
        predictors.extend([f"{name}:low", f"{name}:high"])

    rows: list[tuple[int, ...]] = []
    responses: list[float] = []
    ids: list[str] = []
    for report in reports:
        if rule not in report.outcomes or not report.instance.projects:
            continue
        instance = report.instance
        costs = sorted(p.cost for p in instance.projects)
        mid = len(costs) // 2
        median = costs[mid] if len(costs) % 2 else (costs[mid - 1] + costs[mid]) / 2
        winners = [instance.project_by_id[pid] for pid in report.outcomes[rule].winners]
        row: list[int] = []
        for combo in combo_list:
            matches = [p for p in winners if p.areas == combo]
            row.append(int(any(p.cost < median for p in matches)))
            row.append(int(any(p.cost >= median for p in matches)))
        rows.append(tuple(row))
        responses.append(float(report.utilization[rule]))
        ids.append(report.instance_id)
    if not rows:
        raise NoUsableRows(f"no instance has a {rule.value} outcome")
    return ConjointDataset(rule, tuple(predictors), tuple(rows), tuple(responses), tuple(ids))


def _run_entry(payload):
    instance, config, instance_id, parse_warnings = payload
    try:
        return instance_id, run_instance(
            instance, config, instance_id=instance_id, parse_warnings=parse_warnings
        ), None
    except PbImpactError as exc:
        return instance_id, None, f"{type(exc).__name__}: {exc}"


def run_corpus(directory, config: AnalysisConfig = AnalysisConfig()) -> CorpusReport:
    """Scan, analyze and aggregate every .pb instance under ``directory``.

    Per-instance work may run in parallel (``config.jobs``); aggregation is a
    fold over reports sorted by instance id, so the result is independent of
    scheduling. Instances without any named area label are excluded from the
    per-area aggregates but still feed the selection-rate curves.
    """
    entries = scan_corpus(directory, config.mode)
    if not entries:
        raise EmptyCorpus(f"{directory}: no .pb files found")
    root = Path(directory)

    errors: dict[str, str] = {}
    warnings: list[str] = []
    jobs: list[tuple[Instance, AnalysisConfig, str, tuple[str, ...]]] = []
    for entry in entries:
        rel = entry.path.relative_to(root).as_posix()
        instance_id = rel[:-3] if rel.endswith(".pb") else rel
        if entry.instance is None:
            errors[instance_id] = entry.error or "unknown error"
            continue
        jobs.append((entry.instance, config, instance_id, entry.warnings))

    reports: list[InstanceReport] = []
    results = None
    if config.jobs > 1 and len(jobs) > 1:
        try:
            with concurrent.futures.ProcessPoolExecutor(max_workers=config.jobs) as pool:
                results = list(pool.map(_run_entry, jobs))
        except (OSError, PermissionError) as exc:  # sandboxed environments
            warnings.append(f"parallel execution unavailable ({exc}), ran sequentially")
            results = None
    if results is None:
        results = [_run_entry(job) for job in jobs]
    for instance_id, report, error in results:
        if report is None:
            errors[instance_id] = error
        else:
            reports.append(report)
    reports.sort(key=lambda r: r.instance_id)
    for report in reports:
        warnings.extend(report.warnings)

    rules = (RuleId.GREEDY, config.es_variant)
    analyzed = [r for r in reports if len(r.outcomes) == 2]
    labeled = [r for r in analyzed if r.instance.has_area_labels]

    area_counts = {
        area: sum(1 for r in labeled if r.instance.area_members[area]) for area in ImpactArea
    }

    summaries: dict[tuple[MetricKey, ImpactArea], LossSummary] = {}
    t_tests: dict[tuple[MetricKey, ImpactArea], Union[TestResult, str]] = {}
    for key in all_metric_keys():
        source = "cells" if key.level is MetricLevel.OUTCOME else "ballot_means"
        for area in ImpactArea:
            eligible = [r for r in labeled if r.instance.area_members[area]]
            loss_values = [float(r.losses[(key, area)]) for r in eligible if (key, area) in r.losses]
            if loss_values:
                summaries[(key, area)] = summarize_losses(loss_values)
            pairs = []
            for r in eligible:
                cells = getattr(r, source)
                a = cells.get((key, area, RuleId.GREEDY))
                b = cells.get((key, area, config.es_variant))
                if a is not None and b is not None and a.defined and b.defined:
                    pairs.append((float(a.value), float(b.value)))
            if pairs:
                try:
                    t_tests[(key, area)] = paired_t_test(
                        [p[0] for p in pairs], [p[1] for p in pairs]
                    )
                except StatsError as exc:
                    t_tests[(key, area)] = type(exc).__name__

    pearson_by_area: dict[tuple[ImpactArea, RuleId], Union[TestResult, str]] = {}
    cost_share = MetricKey(MetricLevel.OUTCOME, MetricCalc.SHARE, MetricUnit.COST)
    pop_share = MetricKey(MetricLevel.OUTCOME, MetricCalc.SHARE, MetricUnit.POPULARITY)
    for area in ImpactArea:
        eligible = [r for r in labeled if r.instance.area_members[area]]
        for rule in rules:
            xs, ys = [], []
            for r in eligible:
                a = r.cells.get((cost_share, area, rule))
                b = r.cells.get((pop_share, area, rule))
                if a is not None and b is not None and a.defined and b.defined:
                    xs.append(float(a.value))
                    ys.append(float(b.value))
            if not xs:
                continue
            try:
                pearson_by_area[(area, rule)] = pearson(xs, ys)
            except StatsError as exc:
                pearson_by_area[(area, rule)] = type(exc).__name__

    selection_rates: dict[RuleId, tuple[tuple[int, int, Fraction], ...]] = {}
    for rule in rules:
        pairs = [(r.instance, r.outcomes[rule]) for r in reports if rule in r.outcomes]
        if not pairs:
            continue
        hits = [0] * config.top_n
        counts = [0] * config.top_n
        for instance, outcome in pairs:
            pops = popularity_by_project(instance)
            ranked = sorted(instance.projects, key=lambda p: (-pops[p.id], p.id))
            winner_set = outcome.winner_set
            for k in range(min(config.top_n, len(ranked))):
                counts[k] += 1
                hits[k] += ranked[k].id in winner_set
        selection_rates[rule] = tuple(
            (k + 1, counts[k], Fraction(hits[k], counts[k]) if counts[k] else Fraction(0))
            for k in range(config.top_n)
        )

    beneficiaries: dict[tuple[Beneficiary, RuleId], MetricValue] = {}
    beneficiary_rel: dict[Beneficiary, Optional[Fraction]] = {}
    for ben in Beneficiary if analyzed else ():
        per_rule: dict[RuleId, MetricValue] = {}
        for rule in rules:
            winning = proposed = 0
            for r in analyzed:
                tagged = r.instance.beneficiary_members[ben]
                proposed += len(tagged)
                winning += len(tagged & r.outcomes[rule].winner_set)
            per_rule[rule] = MetricValue(Fraction(winning), Fraction(proposed))
            beneficiaries[(ben, rule)] = per_rule[rule]
        ug, es = per_rule[rules[0]], per_rule[rules[1]]
        if ug.defined and es.defined and ug.value != 0:
            beneficiary_rel[ben] = (ug.value - es.value) / ug.value
        else:
            beneficiary_rel[ben] = None

    conjoint: dict[RuleId, Union[OlsFit, str]] = {}
    predictors: tuple[str, ...] = ()
    for rule in rules:
        try:
            dataset = build_conjoint_dataset(analyzed, config.combos, rule)
            predictors = dataset.predictors
            conjoint[rule] = ols_fit(dataset.rows, dataset.y)
        except (StatsError, NoUsableRows) as exc:
            conjoint[rule] = type(exc).__name__
    if not predictors:
        combo_names = []
        for combo in config.combos:
            name = "+".join(sorted(area.value for area in combo))
            combo_names.extend([f"{name}:low", f"{name}:high"])
        predictors = tuple(combo_names)

    return CorpusReport(
        n_files=len(entries),
        n_instances=len(reports),
        n_analyzed=len(analyzed),
        rules=rules,
        summaries=summaries,
        selection_rates=selection_rates,
        pearson_by_area=pearson_by_area,
        t_tests=t_tests,
        conjoint=conjoint,
        conjoint_predictors=predictors,
        beneficiaries=beneficiaries,
        beneficiary_relative_loss=beneficiary_rel,
        area_instance_counts=area_counts,
        errors=errors,
        warnings=tuple(warnings),
    )


# ---------------------------------------------------------------------------
# Export and re-import
# ---------------------------------------------------------------------------

def _float_text(value) -> str:
    return "" if value is None else repr(float(value))


def _pair_text(mv: MetricValue) -> str:
    """Unreduced ``num/den`` provenance, falling back to the reduced value
    when either side has no exact decimal rendering."""
    num_text = format_rational(mv.numerator)
    den_text = format_rational(mv.denominator)
    if "/" in num_text or "/" in den_text:
        if not mv.defined:
            return "0/0"
        value = mv.value
        return f"{value.numerator}/{value.denominator}"
    return f"{num_text}/{den_text}"


def _sorted_cells(cells):
    return sorted(cells.items(), key=lambda kv: (_KEY_ORDER[kv[0][0]], _AREA_ORDER[kv[0][1]], _RULE_ORDER[kv[0][2]], *kv[0][3:]))


def _sorted_losses(losses):
    return sorted(losses.items(), key=lambda kv: (_KEY_ORDER[kv[0][0]], _AREA_ORDER[kv[0][1]]))


def _write_csv(path: Path, header: Sequence[str], rows) -> None:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    path.write_text(buffer.getvalue(), encoding="utf-8")


_METRIC_HEADER = ("instance", "area", "level", "calc", "unit", "rule", "value_rational", "value_float", "defined")


def _metric_row(instance_id: str, key: MetricKey, area: ImpactArea, rule: RuleId, mv: MetricValue):
    return (
        instance_id,
        area.value,
        key.level.value,
        key.flat_calc,
        key.unit.value,
        rule.value,
        _pair_text(mv),
        _float_text(mv.value) if mv.defined else "",
        "true" if mv.defined else "false",
    )


def _instance_csv(report: InstanceReport, outdir: Path) -> list[Path]:
    paths = []
    metrics_rows = [
        _metric_row(report.instance_id, key, area, rule, mv)
        for (key, area, rule), mv in _sorted_cells(report.cells)
    ]
    metrics_rows += [
        _metric_row(report.instance_id, key, area, rule, mv)
        for (key, area, rule), mv in _sorted_cells(report.ballot_means)
    ]
    path = outdir / "metrics.csv"
    _write_csv(path, _METRIC_HEADER, metrics_rows)
    paths.append(path)

    if report.ballot_cells:
        header = ("instance", "voter", "area", "level", "calc", "unit", "rule", "value_rational", "value_float", "defined")
        rows = [
            (report.instance_id, voter, *(_metric_row(report.instance_id, key, area, rule, mv)[1:]))
            for (key, area, rule, voter), mv in _sorted_cells(report.ballot_cells)
        ]
        path = outdir / "ballot_metrics.csv"
        _write_csv(path, header, rows)
        paths.append(path)

    loss_rows = []
    for (key, area), value in _sorted_losses(report.losses):
        loss_rows.append(
            (
                report.instance_id,
                area.value,
                key.level.value,
                key.flat_calc,
                key.unit.value,
                _float_text(value),
                _float_text(report.relative_losses.get((key, area))),
            )
        )
    path = outdir / "losses.csv"
    _write_csv(path, ("instance", "area", "level", "calc", "unit", "loss_float", "relative_loss_float"), loss_rows)
    paths.append(path)
    return paths


def _corpus_csv(report: CorpusReport, outdir: Path) -> list[Path]:
    paths = []
    summary_rows = []
    for (key, area), summary in _sorted_losses(report.summaries):
        summary_rows.append(
            (
                area.value,
                key.level.value,
                key.flat_calc,
                key.unit.value,
                summary.n,
                _float_text(summary.pct_positive),
                _float_text(summary.mean),
                _float_text(summary.mean_positive),
                _float_text(summary.mean_negative),
            )
        )
    path = outdir / "corpus_summary.csv"
    _write_csv(path, ("area", "level", "calc", "unit", "n", "pct_positive", "mean", "mean_pos", "mean_neg"), summary_rows)
    paths.append(path)

    rate_rows = []
    for rule in sorted(report.selection_rates, key=_RULE_ORDER.__getitem__):
        for rank, count, rate in report.selection_rates[rule]:
            rate_rows.append((rule.value, rank, count, _float_text(rate)))
    path = outdir / "selection_rate.csv"
    _write_csv(path, ("rule", "rank", "n", "rate"), rate_rows)
    paths.append(path)

    conjoint_rows = []
    for rule in sorted(report.conjoint, key=_RULE_ORDER.__getitem__):
        fit = report.conjoint[rule]
        if isinstance(fit, str):
            continue
        names = ("intercept", *report.conjoint_predictors)
        for name, coef, p, imp in zip(names, fit.coefficients, fit.p_values, fit.relative_importance):
            conjoint_rows.append((rule.value, name, _float_text(coef), _float_text(p), _float_text(imp), _float_text(fit.r_squared)))
    path = outdir / "conjoint.csv"
    _write_csv(path, ("rule", "predictor", "coefficient", "p_value", "relative_importance", "r_squared"), conjoint_rows)
    paths.append(path)

    pearson_rows = []
    for (area, rule) in sorted(report.pearson_by_area, key=lambda k: (_AREA_ORDER[k[0]], _RULE_ORDER[k[1]])):
        result = report.pearson_by_area[(area, rule)]
        if isinstance(result, str):
            pearson_rows.append((area.value, rule.value, "", "", "", result))
        else:
            pearson_rows.append((area.value, rule.value, result.n, _float_text(result.statistic), _float_text(result.p_value), ""))
    path = outdir / "pearson.csv"
    _write_csv(path, ("area", "rule", "n", "r", "p_value", "error"), pearson_rows)
    paths.append(path)

    t_rows = []
    for (key, area), result in _sorted_losses(report.t_tests):
        base = (area.value, key.level.value, key.flat_calc, key.unit.value)
        if isinstance(result, str):
            t_rows.append((*base, "", "", "", result))
        else:
            t_rows.append((*base, result.n, _float_text(result.statistic), _float_text(result.p_value), ""))
    path = outdir / "t_tests.csv"
    _write_csv(path, ("area", "level", "calc", "unit", "n", "statistic", "p_value", "error"), t_rows)
    paths.append(path)

    ben_rows = []
    ben_order = {ben: i for i, ben in enumerate(Beneficiary)}
    for (ben, rule) in sorted(report.beneficiaries, key=lambda k: (ben_order[k[0]], _RULE_ORDER[k[1]])):
        mv = report.beneficiaries[(ben, rule)]
        ben_rows.append(
            (
                ben.value,
                rule.value,
                format_rational(mv.denominator),
                format_rational(mv.numerator),
                _float_text(mv.value) if mv.defined else "",
                _float_text(report.beneficiary_relative_loss.get(ben)),
            )
        )
    path = outdir / "beneficiaries.csv"
    _write_csv(path, ("beneficiary", "rule", "proposed", "winning", "representation", "relative_loss"), ben_rows)
    paths.append(path)
    return paths


def _frac_text(value: Optional[Fraction]) -> Optional[str]:
    return None if value is None else format_rational(value)


def _mv_payload(mv: MetricValue) -> dict:
    return {"num": format_rational(mv.numerator), "den": format_rational(mv.denominator)}


def _mv_from(payload: dict) -> MetricValue:
    return MetricValue(parse_rational(payload["num"]), parse_rational(payload["den"]))


def _outcome_payload(outcome: Outcome) -> dict:
    return {
        "rule": outcome.rule.value,
        "winners": list(outcome.winners),
        "payments": {
            voter: {pid: format_rational(amount) for pid, amount in sorted(per.items())}
            for voter, per in sorted(outcome.payments.items())
        },
        "endowment_used": _frac_text(outcome.endowment_used),
        "total_cost": format_rational(outcome.total_cost),
        "leftover": format_rational(outcome.leftover),
    }


def _outcome_from(payload: dict) -> Outcome:
    endowment = payload["endowment_used"]
    return Outcome(
        rule=RuleId(payload["rule"]),
        winners=tuple(payload["winners"]),
        payments={
            voter: {pid: parse_rational(amount) for pid, amount in per.items()}
            for voter, per in payload["payments"].items()
        },
        endowment_used=None if endowment is None else parse_rational(endowment),
        total_cost=parse_rational(payload["total_cost"]),
        leftover=parse_rational(payload["leftover"]),
    )


def _test_payload(result: Union[TestResult, str]) -> dict:
    if isinstance(result, str):
        return {"error": result}
    return {"statistic": result.statistic, "p_value": result.p_value, "df": result.df, "n": result.n}


def _test_from(payload: dict) -> Union[TestResult, str]:
    if "error" in payload:
        return payload["error"]
    return TestResult(payload["statistic"], payload["p_value"], payload["df"], payload["n"])


def _fit_payload(fit: Union[OlsFit, str]) -> dict:
    if isinstance(fit, str):
        return {"error": fit}
    return {
        "coefficients": list(fit.coefficients),
        "r_squared": fit.r_squared,
        "p_values": list(fit.p_values),
        "relative_importance": list(fit.relative_importance),
        "n": fit.n,
    }


def _fit_from(payload: dict) -> Union[OlsFit, str]:
    if "error" in payload:
        return payload["error"]
    return OlsFit(
        coefficients=tuple(payload["coefficients"]),
        r_squared=payload["r_squared"],
        p_values=tuple(payload["p_values"]),
        relative_importance=tuple(payload["relative_importance"]),
        n=payload["n"],
    )


def _instance_report_payload(report: InstanceReport) -> dict:
    losses = []
    for (key, area), value in _sorted_losses(report.losses):
        losses.append(
            {
                "key": str(key),
                "area": area.value,
                "loss": format_rational(value),
                "relative": _frac_text(report.relative_losses.get((key, area))),
            }
        )
    return {
        "kind": "instance_report",
        "instance_id": report.instance_id,
        "instance_pb": serialize_instance(report.instance),
        "outcomes": [
            _outcome_payload(report.outcomes[rule])
            for rule in sorted(report.outcomes, key=_RULE_ORDER.__getitem__)
        ],
        "cells": [
            {"key": str(key), "area": area.value, "rule": rule.value, **_mv_payload(mv)}
            for (key, area, rule), mv in _sorted_cells(report.cells)
        ],
        "ballot_cells": [
            {"key": str(key), "area": area.value, "rule": rule.value, "voter": voter, **_mv_payload(mv)}
            for (key, area, rule, voter), mv in _sorted_cells(report.ballot_cells)
        ],
        "ballot_means": [
            {"key": str(key), "area": area.value, "rule": rule.value, **_mv_payload(mv)}
            for (key, area, rule), mv in _sorted_cells(report.ballot_means)
        ],
        "losses": losses,
        "quartiles": {
            kind.value: {pid: label.level for pid, label in sorted(labels.items())}
            for kind, labels in sorted(report.quartiles.items(), key=lambda kv: kv[0].value)
        },
        "utilization": {
            rule.value: format_rational(report.utilization[rule])
            for rule in sorted(report.utilization, key=_RULE_ORDER.__getitem__)
        },
        "warnings": list(report.warnings),
    }


def _instance_report_from(payload: dict) -> InstanceReport:
    losses = {}
    relative = {}
    for row in payload["losses"]:
        key = (parse_metric_key(row["key"]), ImpactArea(row["area"]))
        losses[key] = parse_rational(row["loss"])
        if row["relative"] is not None:
            relative[key] = parse_rational(row["relative"])
    return InstanceReport(
        instance_id=payload["instance_id"],
        instance=parse_instance(payload["instance_pb"]),
        outcomes={RuleId(o["rule"]): _outcome_from(o) for o in payload["outcomes"]},
        cells={
            (parse_metric_key(c["key"]), ImpactArea(c["area"]), RuleId(c["rule"])): _mv_from(c)
            for c in payload["cells"]
        },
        ballot_cells={
            (parse_metric_key(c["key"]), ImpactArea(c["area"]), RuleId(c["rule"]), c["voter"]): _mv_from(c)
            for c in payload["ballot_cells"]
        },
        ballot_means={
            (parse_metric_key(c["key"]), ImpactArea(c["area"]), RuleId(c["rule"])): _mv_from(c)
            for c in payload["ballot_means"]
        },
        losses=losses,
        relative_losses=relative,
        quartiles={
            QuartileKind(kind): {
                pid: QuartileLabel(QuartileKind(kind), level) for pid, level in labels.items()
            }
            for kind, labels in payload["quartiles"].items()
        },
        utilization={RuleId(r): parse_rational(u) for r, u in payload["utilization"].items()},
        warnings=tuple(payload["warnings"]),
    )


def _corpus_report_payload(report: CorpusReport) -> dict:
    ben_order = {ben: i for i, ben in enumerate(Beneficiary)}
    return {
        "kind": "corpus_report",
        "n_files": report.n_files,
        "n_instances": report.n_instances,
        "n_analyzed": report.n_analyzed,
        "rules": [rule.value for rule in report.rules],
        "summaries": [
            {
                "key": str(key),
                "area": area.value,
                "pct_positive": format_rational(summary.pct_positive),
                "mean": summary.mean,
                "mean_positive": summary.mean_positive,
                "mean_negative": summary.mean_negative,
                "n": summary.n,
            }
            for (key, area), summary in _sorted_losses(report.summaries)
        ],
        "selection_rates": {
            rule.value: [[rank, count, format_rational(rate)] for rank, count, rate in entries]
            for rule, entries in sorted(report.selection_rates.items(), key=lambda kv: _RULE_ORDER[kv[0]])
        },
        "pearson": [
            {"area": area.value, "rule": rule.value, **_test_payload(result)}
            for (area, rule), result in sorted(
                report.pearson_by_area.items(), key=lambda kv: (_AREA_ORDER[kv[0][0]], _RULE_ORDER[kv[0][1]])
            )
        ],
        "t_tests": [
            {"key": str(key), "area": area.value, **_test_payload(result)}
            for (key, area), result in _sorted_losses(report.t_tests)
        ],
        "conjoint": {
            rule.value: _fit_payload(fit)
            for rule, fit in sorted(report.conjoint.items(), key=lambda kv: _RULE_ORDER[kv[0]])
        },
        "conjoint_predictors": list(report.conjoint_predictors),
        "beneficiaries": [
            {"beneficiary": ben.value, "rule": rule.value, **_mv_payload(mv)}
            for (ben, rule), mv in sorted(
                report.beneficiaries.items(), key=lambda kv: (ben_order[kv[0][0]], _RULE_ORDER[kv[0][1]])
            )
        ],
        "beneficiary_relative_loss": {
            ben.value: _frac_text(value)
            for ben, value in sorted(report.beneficiary_relative_loss.items(), key=lambda kv: ben_order[kv[0]])
        },
        "area_instance_counts": {
            area.value: count
            for area, count in sorted(report.area_instance_counts.items(), key=lambda kv: _AREA_ORDER[kv[0]])
        },
        "errors": dict(sorted(report.errors.items())),
        "warnings": list(report.warnings),
    }


def _corpus_report_from(payload: dict) -> CorpusReport:
    return CorpusReport(
        n_files=payload["n_files"],
        n_instances=payload["n_instances"],
        n_analyzed=payload["n_analyzed"],
        rules=tuple(RuleId(r) for r in payload["rules"]),
        summaries={
            (parse_metric_key(row["key"]), ImpactArea(row["area"])): LossSummary(
                pct_positive=parse_rational(row["pct_positive"]),
                mean=row["mean"],
                mean_positive=row["mean_positive"],
                mean_negative=row["mean_negative"],
                n=row["n"],
            )
            for row in payload["summaries"]
        },
        selection_rates={
            RuleId(rule): tuple((rank, count, parse_rational(rate)) for rank, count, rate in entries)
            for rule, entries in payload["selection_rates"].items()
        },
        pearson_by_area={
            (ImpactArea(row["area"]), RuleId(row["rule"])): _test_from(row)
            for row in payload["pearson"]
        },
        t_tests={
            (parse_metric_key(row["key"]), ImpactArea(row["area"])): _test_from(row)
            for row in payload["t_tests"]
        },
        conjoint={RuleId(rule): _fit_from(fit) for rule, fit in payload["conjoint"].items()},
        conjoint_predictors=tuple(payload["conjoint_predictors"]),
        beneficiaries={
            (Beneficiary(row["beneficiary"]), RuleId(row["rule"])): _mv_from(row)
            for row in payload["beneficiaries"]
        },
        beneficiary_relative_loss={
            Beneficiary(ben): None if value is None else parse_rational(value)
            for ben, value in payload["beneficiary_relative_loss"].items()
        },
        area_instance_counts={
            ImpactArea(area): count for area, count in payload["area_instance_counts"].items()
        },
        errors=dict(payload["errors"]),
        warnings=tuple(payload["warnings"]),
    )


def export_report(
    report: Union[InstanceReport, CorpusReport],
    format: str = "csv",
    out: Union[str, Path] = "pbimpact_out",
) -> list[Path]:
    """Write a report to ``out`` and return the written file paths.

    CSV mode writes one file per table (schemas in the README); JSON mode
    writes a single file mirroring the report structure, which
    :func:`load_report` restores to an equal report. Output is byte-stable
    for identical inputs.
    """
    outdir = Path(out)
    outdir.mkdir(parents=True, exist_ok=True)
    if format == "csv":
        if isinstance(report, InstanceReport):
            return _instance_csv(report, outdir)
        return _corpus_csv(report, outdir)
    if format == "json":
        if isinstance(report, InstanceReport):
            payload = _instance_report_payload(report)
            path = outdir / "instance_report.json"
        else:
            payload = _corpus_report_payload(report)
            path = outdir / "corpus_report.json"
        path.write_text(json.dumps(payload, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
        return [path]
    raise ValueError(f"unknown export format {format!r}")


def load_report(path: Union[str, Path]) -> Union[InstanceReport, CorpusReport]:
    """Re-parse a JSON export into a structurally equal report."""
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    kind = payload.get("kind")
    if kind == "instance_report":
        return _instance_report_from(payload)
    if kind == "corpus_report":
        return _corpus_report_from(payload)
    raise ValueError(f"{path}: not a report export (kind={kind!r})")
