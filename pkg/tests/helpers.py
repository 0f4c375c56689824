"""Shared fixtures and independent oracles used across the test suite."""

from __future__ import annotations

import random
from fractions import Fraction as F

from pbimpact.model import (
    Ballot,
    ImpactArea,
    Instance,
    NAMED_AREAS,
    NAMED_BENEFICIARIES,
    Project,
    popularity_by_project,
)
from pbimpact.rules import COMPLETION_PAYER, Outcome

# The 11-voter, 5-project example election: budget 1000, three impact areas.
TOY_VOTES = {
    "1": "AB", "2": "ABC", "3": "AB", "4": "ABC", "5": "ABC", "6": "AB",
    "7": "CDE", "8": "D", "9": "DE", "10": "CDE", "11": "A",
}

TOY_PB_TEXT = """META
key;value
budget;1000
vote_type;approval
num_projects;5
num_votes;11
description;toy election
PROJECTS
project_id;cost;category;name
A;700;Education;
B;400;Welfare, Health;
C;250;Health;
D;200;Education, Health;
E;100;Education, Welfare;
VOTES
voter_id;vote
1;A,B
2;A,B,C
3;A,B
4;A,B,C
5;A,B,C
6;A,B
7;C,D,E
8;D
9;D,E
10;C,D,E
11;A
"""


def build_toy(budget: F = F(1000)) -> Instance:
    area = ImpactArea
    projects = (
        Project("A", F(700), frozenset({area.EDUCATION})),
        Project("B", F(400), frozenset({area.WELFARE, area.HEALTH})),
        Project("C", F(250), frozenset({area.HEALTH})),
        Project("D", F(200), frozenset({area.EDUCATION, area.HEALTH})),
        Project("E", F(100), frozenset({area.EDUCATION, area.WELFARE})),
    )
    ballots = tuple(Ballot(v, frozenset(ids)) for v, ids in TOY_VOTES.items())
    return Instance(budget, projects, ballots, meta={"description": "toy election"})


def random_instance(
    rng: random.Random,
    max_projects: int = 8,
    max_voters: int = 8,
    money_scale: int = 20,
    with_labels: bool = True,
) -> Instance:
    """A small random approval election with rational costs."""
    n_projects = rng.randint(1, max_projects)
    projects = []
    for i in range(n_projects):
        cost = F(rng.randint(1, money_scale), rng.choice([1, 1, 1, 2, 4, 5]))
        areas: frozenset = frozenset()
        beneficiaries: frozenset = frozenset()
        if with_labels:
            areas = frozenset(rng.sample(NAMED_AREAS, rng.randint(0, 2)))
            beneficiaries = frozenset(rng.sample(NAMED_BENEFICIARIES, rng.randint(0, 2)))
        projects.append(Project(f"p{i:02d}", cost, areas, beneficiaries))
    ids = [p.id for p in projects]
    ballots = []
    for v in range(rng.randint(1, max_voters)):
        ballots.append(Ballot(f"v{v:02d}", frozenset(rng.sample(ids, rng.randint(1, len(ids))))))
    budget = F(rng.randint(1, 2 * money_scale), rng.choice([1, 1, 2]))
    return Instance(budget, tuple(projects), tuple(ballots))


def scale_instance(instance: Instance, k: F) -> Instance:
    """Multiply every cost and the budget by k > 0."""
    projects = tuple(
        Project(p.id, p.cost * k, p.areas, p.beneficiaries, p.name) for p in instance.projects
    )
    return Instance(instance.budget * k, projects, instance.ballots, instance.vote_type,
                    dict(instance.meta))


def greedy_oracle(instance: Instance) -> list[str]:
    """Naive reference: repeatedly take the best remaining supported project.

    Independent of the production single-scan implementation; ordering is
    (popularity desc, cost asc, id asc) with skip-and-continue semantics.
    """
    pops = popularity_by_project(instance)
    candidates = {p.id: p for p in instance.projects if pops[p.id] > 0}
    remaining = instance.budget
    winners = []
    while candidates:
        best = min(candidates.values(), key=lambda p: (-pops[p.id], p.cost, p.id))
        del candidates[best.id]
        if best.cost <= remaining:
            winners.append(best.id)
            remaining -= best.cost
    return winners


def rho_oracle(budgets: list[F], cost: F) -> F | None:
    """Independent per-supporter price: breakpoint search over g(rho).

    g(rho) = sum(min(b, rho)) is piecewise linear and nondecreasing; the
    price is the minimal root of g(rho) == cost.
    """
    if sum(budgets, F(0)) < cost:
        return None

    def g(rho: F) -> F:
        return sum((min(b, rho) for b in budgets), F(0))

    lower = F(0)
    for point in sorted(set(budgets)):
        if g(point) >= cost:
            break
        lower = point
    paid_below = sum((b for b in budgets if b <= lower), F(0))
    payers = sum(1 for b in budgets if b > lower)
    return (cost - paid_below) / payers


def check_mes_invariants(instance: Instance, outcome: Outcome) -> None:
    """Replay an equal-shares outcome and verify every invariant exactly.

    Checks payment conservation, approver-only payments, the per-voter
    endowment cap, per-round price minimality (via the independent
    :func:`rho_oracle`) and exact per-voter payment amounts. The add1u
    completion phase is exempt from the voter-payment checks apart from
    conservation through the reserved completion payer.
    """
    endowment = outcome.endowment_used
    assert endowment is not None, "equal-shares outcome must record its endowment"
    completion = set(outcome.payments.get(COMPLETION_PAYER, {}))
    mes_winners = [w for w in outcome.winners if w not in completion]

    approvers = {
        p.id: sorted(b.voter_id for b in instance.ballots if p.id in b.approved)
        for p in instance.projects
    }
    paid_for: dict[str, dict[str, F]] = {}
    for voter, per_project in outcome.payments.items():
        if voter == COMPLETION_PAYER:
            continue
        for pid, amount in per_project.items():
            paid_for.setdefault(pid, {})[voter] = amount

    budgets = {b.voter_id: endowment for b in instance.ballots}
    selected: set[str] = set()
    for pid in mes_winners:
        cost = instance.project_by_id[pid].cost
        payments = paid_for.get(pid, {})
        assert set(payments) <= set(approvers[pid]), f"{pid}: non-approver paid"
        assert sum(payments.values(), F(0)) == cost, f"{pid}: payments do not cover the cost"
        rho = rho_oracle([budgets[v] for v in approvers[pid]], cost)
        assert rho is not None, f"{pid}: selected while unaffordable"
        for other in instance.projects:
            if other.id in selected or other.id == pid:
                continue
            rho_other = rho_oracle([budgets[v] for v in approvers[other.id]], other.cost)
            assert rho_other is None or rho <= rho_other, (
                f"{pid}: rho {rho} not minimal, {other.id} had {rho_other}"
            )
        for voter in approvers[pid]:
            expected = min(budgets[voter], rho)
            assert payments.get(voter, F(0)) == expected, f"{pid}: voter {voter} paid wrong amount"
            budgets[voter] -= expected
        selected.add(pid)

    for voter, left in budgets.items():
        assert left >= 0, f"voter {voter} overspent the endowment"
        spent = sum(
            (amount for pid_map in [outcome.payments.get(voter, {})] for amount in pid_map.values()),
            F(0),
        )
        assert spent <= endowment, f"voter {voter} exceeded the endowment"

    for pid in completion:
        assert outcome.payments[COMPLETION_PAYER][pid] == instance.project_by_id[pid].cost
