"""Impact and novelty metrics over winning outcomes and individual ballots.

For an impact area l, a rule f with winners W_f and exclusive winners Ŵ_f,
and a measure m (total cost, project count, or total popularity):

* share            m(P_l ∩ W_f) / m(W_f)
* representation   m(P_l ∩ W_f) / m(P_l)
* proportionality  share / r_l   with r_l the area's proposal-set ratio
* within-novelty   m(P_l ∩ Ŵ_f) / m(P_l ∩ W_f)
* between-novelty  m(P_l ∩ Ŵ_f) / m(Ŵ_f)

Ballot-level variants intersect the numerator set with the voter's approved
projects B_v and keep the same denominators. Popularity is not measured at
the ballot level because it already aggregates all ballots.

Every value is an exact rational carried as an unreduced numerator and
denominator, so provenance like 1000/1000 survives into reports. A zero
denominator yields ``defined == False`` instead of an error, which lets
corpus aggregation skip exactly the instances where an area has nothing to
measure.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Sequence

from .errors import (
    DivisionByZero,
    EmptyCorpus,
    InvalidKey,
    UndefinedOperand,
    UnknownVoter,
)
from .model import (
    Ballot,
    Beneficiary,
    ImpactArea,
    Instance,
    ProposalRatios,
    popularity_by_project,
)
from .rules import ExclusivePair, Outcome, RuleId

__all__ = [
    "MetricLevel",
    "MetricCalc",
    "MetricUnit",
    "MetricScope",
    "MetricKey",
    "MetricValue",
    "AreaSlice",
    "all_metric_keys",
    "area_slice",
    "ballot_slice",
    "impact_value",
    "novelty_value",
    "loss",
    "relative_loss",
    "budget_utilization",
    "beneficiary_representation",
    "top_n_selection_rate",
]


class MetricLevel(str, enum.Enum):
    OUTCOME = "outcome"
    BALLOT = "ballot"


class MetricCalc(str, enum.Enum):
    SHARE = "share"
    REPRESENTATION = "representation"
    PROPORTIONALITY = "proportionality"


class MetricUnit(str, enum.Enum):
    COST = "cost"
    PROJECTS = "projects"
    POPULARITY = "popularity"


class MetricScope(str, enum.Enum):
    IMPACT = "impact"
    WITHIN_NOVELTY = "within_novelty"
    BETWEEN_NOVELTY = "between_novelty"


@dataclass(frozen=True)
class MetricKey:
    """One cell coordinate of the metric framework.

    Invalid combinations are rejected: popularity has no ballot level, and
    the novelty scopes exist only for the share calculation.
    """

    level: MetricLevel
    calc: MetricCalc
    unit: MetricUnit
    scope: MetricScope = MetricScope.IMPACT

    def __post_init__(self) -> None:
        if self.level is MetricLevel.BALLOT and self.unit is MetricUnit.POPULARITY:
            raise InvalidKey("popularity is not measured at the ballot level")
        if self.scope is not MetricScope.IMPACT and self.calc is not MetricCalc.SHARE:
            raise InvalidKey("novelty metrics exist only as shares")

    @property
    def flat_calc(self) -> str:
        """Calculation name with the novelty scopes flattened in (CSV style)."""
        return self.calc.value if self.scope is MetricScope.IMPACT else self.scope.value

    def __str__(self) -> str:
        return f"{self.level.value}.{self.flat_calc}.{self.unit.value}"


def all_metric_keys() -> tuple[MetricKey, ...]:
    """Every valid key, in canonical report order."""
    keys = []
    for level in MetricLevel:
        units = [MetricUnit.COST, MetricUnit.PROJECTS]
        if level is MetricLevel.OUTCOME:
            units.append(MetricUnit.POPULARITY)
        for scope in MetricScope:
            calcs = list(MetricCalc) if scope is MetricScope.IMPACT else [MetricCalc.SHARE]
            for calc in calcs:
                for unit in units:
                    keys.append(MetricKey(level, calc, unit, scope))
    return tuple(keys)


def parse_metric_key(text: str) -> MetricKey:
    """Inverse of ``str(key)`` (used by report deserialization)."""
    level, flat, unit = text.split(".")
    if flat in (MetricScope.WITHIN_NOVELTY.value, MetricScope.BETWEEN_NOVELTY.value):
        return MetricKey(MetricLevel(level), MetricCalc.SHARE, MetricUnit(unit), MetricScope(flat))
    return MetricKey(MetricLevel(level), MetricCalc(flat), MetricUnit(unit))


@dataclass(frozen=True)
class MetricValue:
    """An exact metric result with numerator/denominator provenance.

    The components are kept unreduced; ``value`` is their exact quotient and
    ``defined`` is False exactly when the denominator is zero.
    """

    numerator: Fraction
    denominator: Fraction

    @property
    def defined(self) -> bool:
        return self.denominator != 0

    @property
    def value(self) -> Optional[Fraction]:
        return self.numerator / self.denominator if self.defined else None


_UNDEFINED = MetricValue(Fraction(0), Fraction(0))


@dataclass(frozen=True)
class AreaSlice:
    """All intersection sets needed to evaluate one (area, rule[, voter]) cell."""

    area: ImpactArea
    rule: RuleId
    voter: Optional[str]
    winners_in_area: frozenset[str]
    exclusive_in_area: frozenset[str]
    ballot_winners_in_area: Optional[frozenset[str]]
    ballot_exclusive_in_area: Optional[frozenset[str]]
    all_winners: frozenset[str]
    all_exclusive: frozenset[str]
    proposed_in_area: frozenset[str]


def area_slice(
    instance: Instance,
    outcome: Outcome,
    exclusive: ExclusivePair,
    area: ImpactArea,
    voter: Optional[str] = None,
) -> AreaSlice:
    """Intersect the area's proposal set with winners and exclusive winners.

    With ``voter`` given, the ballot-restricted sets are filled in as well.
    """
    proposed = instance.area_members[area]
    winners = outcome.winner_set
    exclusive_set = exclusive.side(outcome.rule)
    base = AreaSlice(
        area=area,
        rule=outcome.rule,
        voter=None,
        winners_in_area=proposed & winners,
        exclusive_in_area=proposed & exclusive_set,
        ballot_winners_in_area=None,
        ballot_exclusive_in_area=None,
        all_winners=winners,
        all_exclusive=exclusive_set,
        proposed_in_area=proposed,
    )
    if voter is None:
        return base
    ballot = instance.ballot_by_voter.get(voter)
    if ballot is None:
        raise UnknownVoter(f"no ballot for voter {voter!r}")
    return ballot_slice(base, ballot)


def ballot_slice(base: AreaSlice, ballot: Ballot) -> AreaSlice:
    """Restrict an outcome-level slice to one voter's approved projects."""
    return AreaSlice(
        area=base.area,
        rule=base.rule,
        voter=ballot.voter_id,
        winners_in_area=base.winners_in_area,
        exclusive_in_area=base.exclusive_in_area,
        ballot_winners_in_area=base.winners_in_area & ballot.approved,
        ballot_exclusive_in_area=base.exclusive_in_area & ballot.approved,
        all_winners=base.all_winners,
        all_exclusive=base.all_exclusive,
        proposed_in_area=base.proposed_in_area,
    )


def _measure(
    ids: Iterable[str],
    unit: MetricUnit,
    instance: Instance,
    pops: Optional[Mapping[str, Fraction]],
) -> Fraction:
    if unit is MetricUnit.PROJECTS:
        return Fraction(sum(1 for _ in ids))
    if unit is MetricUnit.COST:
        return sum((instance.project_by_id[pid].cost for pid in ids), Fraction(0))
    if pops is None:
        pops = popularity_by_project(instance)
    return sum((pops[pid] for pid in ids), Fraction(0))


def _numerator_set(key: MetricKey, slice_: AreaSlice, exclusive: bool) -> frozenset[str]:
    if key.level is MetricLevel.BALLOT:
        chosen = slice_.ballot_exclusive_in_area if exclusive else slice_.ballot_winners_in_area
        if chosen is None:
            raise InvalidKey("ballot-level key needs a slice built with a voter")
        return chosen
    return slice_.exclusive_in_area if exclusive else slice_.winners_in_area


def impact_value(
    key: MetricKey,
    slice_: AreaSlice,
    ratios: ProposalRatios,
    instance: Instance,
    pops: Optional[Mapping[str, Fraction]] = None,
) -> MetricValue:
    """Evaluate a share/representation/proportionality cell on a slice.

    ``pops`` may pass a precomputed popularity map to avoid recounting
    ballots in tight loops.
    """
    if key.scope is not MetricScope.IMPACT:
        raise InvalidKey("use novelty_value for novelty scopes")
    numerator_ids = _numerator_set(key, slice_, exclusive=False)
    num = _measure(numerator_ids, key.unit, instance, pops)
    if key.calc is MetricCalc.SHARE:
        return MetricValue(num, _measure(slice_.all_winners, key.unit, instance, pops))
    if key.calc is MetricCalc.REPRESENTATION:
        return MetricValue(num, _measure(slice_.proposed_in_area, key.unit, instance, pops))
    share = MetricValue(num, _measure(slice_.all_winners, key.unit, instance, pops))
    if not share.defined:
        return _UNDEFINED
    r = {
        MetricUnit.COST: ratios.r_cost,
        MetricUnit.PROJECTS: ratios.r_projects,
        MetricUnit.POPULARITY: ratios.r_popularity,
    }[key.unit]
    return MetricValue(share.value, r)


def novelty_value(
    key: MetricKey,
    slice_: AreaSlice,
    instance: Instance,
    pops: Optional[Mapping[str, Fraction]] = None,
) -> MetricValue:
    """Evaluate a within- or between-novelty share cell on a slice."""
    if key.scope is MetricScope.IMPACT:
        raise InvalidKey("use impact_value for the impact scope")
    numerator_ids = _numerator_set(key, slice_, exclusive=True)
    if key.scope is MetricScope.WITHIN_NOVELTY:
        denominator_ids = slice_.winners_in_area
    else:
        denominator_ids = slice_.all_exclusive
    return MetricValue(
        _measure(numerator_ids, key.unit, instance, pops),
        _measure(denominator_ids, key.unit, instance, pops),
    )


def loss(value_ug: MetricValue, value_es: MetricValue) -> Fraction:
    """Impact/novelty loss UG - ES; positive means greedy outperforms."""
    if not (value_ug.defined and value_es.defined):
        raise UndefinedOperand("loss needs both metric values to be defined")
    return value_ug.value - value_es.value


def relative_loss(value_ug: MetricValue, value_es: MetricValue) -> Fraction:
    """Loss relative to the greedy value, (UG - ES) / UG."""
    difference = loss(value_ug, value_es)
    if value_ug.value == 0:
        raise DivisionByZero("relative loss needs a nonzero greedy value")
    return difference / value_ug.value


def budget_utilization(outcome: Outcome, instance: Instance) -> Fraction:
    """Total winning cost over the instance budget."""
    if instance.budget == 0:
        return Fraction(0)
    return outcome.total_cost / instance.budget


def beneficiary_representation(
    instance: Instance, outcome: Outcome, beneficiary: Beneficiary
) -> MetricValue:
    """Fraction of the beneficiary's proposed projects that win."""
    tagged = instance.beneficiary_members[beneficiary]
    return MetricValue(
        Fraction(len(tagged & outcome.winner_set)), Fraction(len(tagged))
    )


def top_n_selection_rate(
    per_instance_outcomes: Sequence[tuple[Instance, Outcome]], n: int
) -> list[Fraction]:
    """Selection rate of each instance's k-th most popular project, k = 1..n.

    Projects are ranked per instance by (popularity desc, id asc); entry k is
    the fraction of instances whose rank-k project wins, with instances that
    have fewer than k projects excluded from that entry's denominator (a rank
    that no instance reaches yields 0).
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if not per_instance_outcomes:
        raise EmptyCorpus("selection rates need at least one instance")
    hits = [0] * n
    counts = [0] * n
    for instance, outcome in per_instance_outcomes:
        pops = popularity_by_project(instance)
        ranked = sorted(instance.projects, key=lambda p: (-pops[p.id], p.id))
        winners = outcome.winner_set
        for k in range(min(n, len(ranked))):
            counts[k] += 1
            if ranked[k].id in winners:
                hits[k] += 1
    return [
        Fraction(h, c) if c else Fraction(0) for h, c in zip(hits, counts)
    ]
