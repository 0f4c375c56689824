"""Ballot aggregation rules: utilitarian greedy and the method of equal shares.

All arithmetic is exact rational, so tie-breaking is deterministic:

* greedy considers projects by (popularity desc, cost asc, id asc) and
  skips-and-continues past anything that does not fit the remaining budget;
* equal shares buys the affordable project with the smallest per-supporter
  price rho, breaking ties by more supporters, then id.

The add1 completion re-runs the core rule on a ladder of growing per-voter
endowments and keeps the last budget-feasible outcome; add1u finishes with a
utilitarian-greedy fill of the leftover budget.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Sequence

from .errors import InstanceMismatch, NonApprovalUnsupported, NoVoters, OrdinalUnsupported
from .model import Instance, Project, VoteType, popularity_by_project

__all__ = [
    "RuleId",
    "Outcome",
    "ExclusivePair",
    "COMPLETION_PAYER",
    "utilitarian_greedy",
    "equal_shares_core",
    "equal_shares_add1",
    "equal_shares_add1u",
    "exclusive_winners",
    "outcome_from_winners",
    "completion_winners",
]

# Reserved payer key for add1u's greedy completion purchases, which are not
# attributed to individual voters.
COMPLETION_PAYER = "completion"


class RuleId(str, enum.Enum):
    GREEDY = "greedy"
    MES_CORE = "mes_core"
    MES_ADD1 = "mes_add1"
    MES_ADD1U = "mes_add1u"


MES_RULES = (RuleId.MES_CORE, RuleId.MES_ADD1, RuleId.MES_ADD1U)


@dataclass(frozen=True)
class Outcome:
    """A rule's winner set with payment provenance.

    ``winners`` is in selection order. ``payments`` maps voter id to
    project id to the exact amount paid (equal shares only; greedy pays from
    the common budget and has no per-voter payments). ``endowment_used`` is
    the per-voter endowment the equal-shares phase ran with.

    ``leftover`` is ``budget - total_cost`` and is negative only for
    outcomes that were never budget-constrained: winner sets fixed from
    external sources and MES cores at caller-chosen oversized endowments.
    """

    rule: RuleId
    winners: tuple[str, ...]
    payments: Mapping[str, Mapping[str, Fraction]]
    endowment_used: Optional[Fraction]
    total_cost: Fraction
    leftover: Fraction

    @property
    def winner_set(self) -> frozenset[str]:
        return frozenset(self.winners)

    @property
    def budget(self) -> Fraction:
        return self.total_cost + self.leftover


@dataclass(frozen=True)
class ExclusivePair:
    """Projects selected by exactly one of two rules on the same instance."""

    rule_a: RuleId
    rule_b: RuleId
    only_a: frozenset[str]
    only_b: frozenset[str]

    def side(self, rule: RuleId) -> frozenset[str]:
        """Exclusive winners of ``rule``, which must be one of the pair."""
        if rule == self.rule_a:
            return self.only_a
        if rule == self.rule_b:
            return self.only_b
        raise ValueError(f"rule {rule.value!r} is not part of this pair")


def _build_outcome(
    instance: Instance,
    rule: RuleId,
    winners: Sequence[str],
    payments: Mapping[str, Mapping[str, Fraction]],
    endowment: Optional[Fraction],
) -> Outcome:
    total = sum((instance.project_by_id[pid].cost for pid in winners), Fraction(0))
    return Outcome(
        rule=rule,
        winners=tuple(winners),
        payments={v: dict(m) for v, m in payments.items()},
        endowment_used=endowment,
        total_cost=total,
        leftover=instance.budget - total,
    )


def _greedy_queue(projects: Iterable[Project], pops: Mapping[str, Fraction]) -> list[Project]:
    """Greedy consideration order; zero-popularity projects are excluded."""
    return sorted(
        (p for p in projects if pops[p.id] > 0),
        key=lambda p: (-pops[p.id], p.cost, p.id),
    )


def utilitarian_greedy(instance: Instance) -> Outcome:
    """Select projects by descending popularity while the budget allows.

    A project that does not fit the remaining budget is skipped and the scan
    continues with the next one (skip-and-continue, not first-misfit stop).
    Raises :class:`OrdinalUnsupported` for ordinal instances; cumulative and
    scoring instances use score sums as popularity.
    """
    if instance.vote_type is VoteType.ORDINAL:
        raise OrdinalUnsupported("utilitarian greedy needs per-project popularity")
    pops = popularity_by_project(instance)
    winners: list[str] = []
    remaining = instance.budget
    for project in _greedy_queue(instance.projects, pops):
        if project.cost <= remaining:
            winners.append(project.id)
            remaining -= project.cost
    return _build_outcome(instance, RuleId.GREEDY, winners, {}, None)


def _price_per_supporter(budgets: Sequence[Fraction], cost: Fraction) -> Optional[Fraction]:
    """Minimal rho with sum(min(budget_i, rho)) == cost, or None if unaffordable.

    Solved exactly on the sorted budgets: supporters below rho pay their whole
    budget, the rest split the remainder evenly.
    """
    if sum(budgets) < cost:
        return None
    ordered = sorted(budgets)
    paid = Fraction(0)
    k = len(ordered)
    for j, b in enumerate(ordered):
        rho = (cost - paid) / (k - j)
        if rho <= b:
            return rho
        paid += b
    raise AssertionError("unreachable: affordability was checked above")


def _mes_select(
    instance: Instance, endowment: Fraction
) -> tuple[list[str], dict[str, dict[str, Fraction]]]:
    """One run of the equal-shares core at a fixed per-voter endowment."""
    budgets = {b.voter_id: endowment for b in instance.ballots}
    supporters: dict[str, list[str]] = {p.id: [] for p in instance.projects}
    for ballot in instance.ballots:
        for pid in ballot.approved:
            supporters[pid].append(ballot.voter_id)

    winners: list[str] = []
    payments: dict[str, dict[str, Fraction]] = {}
    remaining = {p.id: p for p in instance.projects}
    while True:
        best: Optional[tuple[Fraction, int, str]] = None
        for pid, project in remaining.items():
            voters = supporters[pid]
            rho = _price_per_supporter([budgets[v] for v in voters], project.cost)
            if rho is None:
                continue
            key = (rho, -len(voters), pid)
            if best is None or key < best:
                best = key
        if best is None:
            break
        rho, _, pid = best
        winners.append(pid)
        del remaining[pid]
        for voter in supporters[pid]:
            paid = min(budgets[voter], rho)
            budgets[voter] -= paid
            if paid > 0:
                payments.setdefault(voter, {})[pid] = paid
    return winners, payments


def _require_approval(instance: Instance) -> None:
    if instance.vote_type is not VoteType.APPROVAL:
        raise NonApprovalUnsupported(
            f"equal shares is only defined for approval ballots, got {instance.vote_type.value}"
        )


def equal_shares_core(instance: Instance, endowment: Fraction) -> Outcome:
    """Method of equal shares at a fixed per-voter endowment.

    Every voter starts with ``endowment``; repeatedly, the affordable project
    with the smallest per-supporter price rho is bought, each supporter paying
    ``min(budget, rho)``; the rule stops when nothing is affordable.
    """
    _require_approval(instance)
    if endowment < 0:
        raise ValueError("endowment must be non-negative")
    winners, payments = _mes_select(instance, endowment)
    return _build_outcome(instance, RuleId.MES_CORE, winners, payments, endowment)


def _add1_ladder(
    instance: Instance, increment: Fraction
) -> tuple[list[str], dict[str, dict[str, Fraction]], Fraction]:
    """Raise the per-voter endowment from budget/|V| in ``increment`` steps.

    Returns the selection at the largest endowment whose outcome still fits
    the instance budget; the ladder stops at the first infeasible outcome or
    once the endowment exceeds the whole budget.
    """
    _require_approval(instance)
    if increment <= 0:
        raise ValueError("increment must be positive")
    if not instance.ballots:
        raise NoVoters("add1 derives the base endowment from the number of voters")
    supported = sum(1 for p in instance.projects if any(p.id in b.approved for b in instance.ballots))
    endowment = instance.budget / len(instance.ballots)
    best = (*_mes_select(instance, endowment), endowment)
    # Once every supported project is selected, larger endowments cannot
    # change the winner set, so the ladder can stop early.
    while len(best[0]) < supported:
        endowment += increment
        if endowment > instance.budget:
            break
        winners, payments = _mes_select(instance, endowment)
        total = sum((instance.project_by_id[pid].cost for pid in winners), Fraction(0))
        if total > instance.budget:
            break
        best = (winners, payments, endowment)
    return best


def equal_shares_add1(instance: Instance, increment: Fraction = Fraction(1)) -> Outcome:
    """Equal shares with the budget-increment completion.

    The core rule runs at the base endowment budget/|V| and again at each
    endowment raised by ``increment`` (1 currency unit by default); the last
    outcome whose total cost fits the budget wins and its endowment is
    recorded as ``endowment_used``.
    """
    winners, payments, endowment = _add1_ladder(instance, increment)
    return _build_outcome(instance, RuleId.MES_ADD1, winners, payments, endowment)


def equal_shares_add1u(instance: Instance, increment: Fraction = Fraction(1)) -> Outcome:
    """add1 followed by a utilitarian-greedy fill of the leftover budget.

    The completion scans the unselected projects in greedy order with the same
    skip rule; its purchases are paid by the reserved :data:`COMPLETION_PAYER`
    rather than attributed to voters.
    """
    winners, payments, endowment = _add1_ladder(instance, increment)
    chosen = set(winners)
    total = sum((instance.project_by_id[pid].cost for pid in winners), Fraction(0))
    leftover = instance.budget - total
    pops = popularity_by_project(instance)
    completion: dict[str, Fraction] = {}
    for project in _greedy_queue(instance.projects, pops):
        if project.id in chosen:
            continue
        if project.cost <= leftover:
            winners = [*winners, project.id]
            chosen.add(project.id)
            leftover -= project.cost
            completion[project.id] = project.cost
    if completion:
        payments = {**payments, COMPLETION_PAYER: completion}
    return _build_outcome(instance, RuleId.MES_ADD1U, winners, payments, endowment)


def exclusive_winners(a: Outcome, b: Outcome) -> ExclusivePair:
    """Winner sets selected by exactly one of two outcomes of one instance."""
    if a.budget != b.budget:
        raise InstanceMismatch(
            "outcomes disagree on the instance budget; they cannot come from the same election"
        )
    return ExclusivePair(
        rule_a=a.rule,
        rule_b=b.rule,
        only_a=a.winner_set - b.winner_set,
        only_b=b.winner_set - a.winner_set,
    )


def outcome_from_winners(
    instance: Instance, rule: RuleId, winners: Iterable[str]
) -> Outcome:
    """Wrap an externally given winner set (e.g. published results) as an Outcome.

    No feasibility or payment information is implied; metrics only need the
    winner sets.
    """
    winner_list = list(winners)
    unknown = [pid for pid in winner_list if pid not in instance.project_by_id]
    if unknown:
        raise ValueError(f"unknown project ids {unknown}")
    if len(set(winner_list)) != len(winner_list):
        raise ValueError("duplicate winner ids")
    return _build_outcome(instance, rule, winner_list, {}, None)


def completion_winners(outcome: Outcome) -> frozenset[str]:
    """Projects bought by the add1u greedy completion phase."""
    return frozenset(outcome.payments.get(COMPLETION_PAYER, {}))
