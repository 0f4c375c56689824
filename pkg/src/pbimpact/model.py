"""Core election model: instances, projects, ballots and per-instance descriptives.

Everything monetary is an exact :class:`~fractions.Fraction`; the model never
touches binary floating point. All types are immutable after construction and
safe to share across threads.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Mapping, Optional

from .errors import EmptyInstance, OrdinalUnsupported

__all__ = [
    "VoteType",
    "ImpactArea",
    "Beneficiary",
    "NAMED_AREAS",
    "NAMED_BENEFICIARIES",
    "Project",
    "Ballot",
    "Instance",
    "ProposalRatios",
    "QuartileKind",
    "QuartileLabel",
    "popularity",
    "popularity_by_project",
    "proposal_ratios",
    "assign_quartile_labels",
]


class VoteType(str, enum.Enum):
    APPROVAL = "approval"
    CUMULATIVE = "cumulative"
    SCORING = "scoring"
    ORDINAL = "ordinal"


class ImpactArea(str, enum.Enum):
    """The nine project impact areas plus a catch-all bucket.

    Projects with no recognized category belong to the ``other`` bucket only;
    they still count toward whole-instance totals.
    """

    EDUCATION = "education"
    HEALTH = "health"
    WELFARE = "welfare"
    CULTURE = "culture"
    PUBLIC_TRANSIT = "public_transit"
    PUBLIC_SPACE = "public_space"
    URBAN_GREENERY = "urban_greenery"
    ENVIRONMENTAL_PROTECTION = "environmental_protection"
    SPORT = "sport"
    OTHER = "other"


class Beneficiary(str, enum.Enum):
    """The eight beneficiary groups plus a catch-all bucket."""

    FAMILIES_WITH_CHILDREN = "families_with_children"
    STUDENTS = "students"
    DISABLED_PEOPLE = "disabled_people"
    CHILDREN = "children"
    ADULTS = "adults"
    ANIMALS = "animals"
    YOUTH = "youth"
    ELDERLY = "elderly"
    OTHER = "other"


NAMED_AREAS: tuple[ImpactArea, ...] = tuple(
    area for area in ImpactArea if area is not ImpactArea.OTHER
)
NAMED_BENEFICIARIES: tuple[Beneficiary, ...] = tuple(
    ben for ben in Beneficiary if ben is not Beneficiary.OTHER
)


@dataclass(frozen=True)
class Project:
    """One proposed project with its exact cost and labels."""

    id: str
    cost: Fraction
    areas: frozenset[ImpactArea] = frozenset()
    beneficiaries: frozenset[Beneficiary] = frozenset()
    name: str = ""

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("project id must be non-empty")
        if self.cost <= 0:
            raise ValueError(f"project {self.id!r}: cost must be positive")


@dataclass(frozen=True)
class Ballot:
    """One voter's ballot.

    ``scores`` is present for cumulative/scoring ballots and is keyed exactly
    by the approved project ids.
    """

    voter_id: str
    approved: frozenset[str]
    scores: Optional[Mapping[str, Fraction]] = None

    def __post_init__(self) -> None:
        if not self.voter_id:
            raise ValueError("voter id must be non-empty")
        if not self.approved:
            raise ValueError(f"voter {self.voter_id!r}: ballot approves nothing")
        if self.scores is not None:
            if set(self.scores) != set(self.approved):
                raise ValueError(
                    f"voter {self.voter_id!r}: scores must cover exactly the approved projects"
                )
            if any(s < 0 for s in self.scores.values()):
                raise ValueError(f"voter {self.voter_id!r}: scores must be non-negative")


@dataclass(frozen=True)
class Instance:
    """One participatory budgeting election.

    ``projects`` is normalized to id order on construction so iteration is
    deterministic; ``ballots`` keeps its given order. ``meta`` carries any
    extra file metadata (the required keys live in typed fields).
    """

    budget: Fraction
    projects: tuple[Project, ...]
    ballots: tuple[Ballot, ...] = ()
    vote_type: VoteType = VoteType.APPROVAL
    meta: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "projects", tuple(sorted(self.projects, key=lambda p: p.id)))
        object.__setattr__(self, "ballots", tuple(self.ballots))
        if self.budget < 0:
            raise ValueError("budget must be non-negative")
        ids = [p.id for p in self.projects]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate project ids")
        voters = [b.voter_id for b in self.ballots]
        if len(set(voters)) != len(voters):
            raise ValueError("duplicate voter ids")
        known = set(ids)
        for ballot in self.ballots:
            unknown = ballot.approved - known
            if unknown:
                raise ValueError(
                    f"voter {ballot.voter_id!r}: ballot references unknown projects {sorted(unknown)}"
                )

    @cached_property
    def project_by_id(self) -> Mapping[str, Project]:
        return {p.id: p for p in self.projects}

    @cached_property
    def ballot_by_voter(self) -> Mapping[str, Ballot]:
        return {b.voter_id: b for b in self.ballots}

    @cached_property
    def total_cost(self) -> Fraction:
        return sum((p.cost for p in self.projects), Fraction(0))

    @cached_property
    def area_members(self) -> Mapping[ImpactArea, frozenset[str]]:
        """Project ids per impact area; unlabeled projects fall into OTHER."""
        members: dict[ImpactArea, set[str]] = {area: set() for area in ImpactArea}
        for p in self.projects:
            if not p.areas:
                members[ImpactArea.OTHER].add(p.id)
            for area in p.areas:
                members[area].add(p.id)
        return {area: frozenset(ids) for area, ids in members.items()}

    @cached_property
    def beneficiary_members(self) -> Mapping[Beneficiary, frozenset[str]]:
        """Project ids per beneficiary; untagged projects fall into OTHER."""
        members: dict[Beneficiary, set[str]] = {ben: set() for ben in Beneficiary}
        for p in self.projects:
            if not p.beneficiaries:
                members[Beneficiary.OTHER].add(p.id)
            for ben in p.beneficiaries:
                members[ben].add(p.id)
        return {ben: frozenset(ids) for ben, ids in members.items()}

    @property
    def has_area_labels(self) -> bool:
        """True when at least one project carries a named impact area."""
        return any(p.areas - {ImpactArea.OTHER} for p in self.projects)


def popularity_by_project(instance: Instance) -> dict[str, Fraction]:
    """Votes received per project: approval count, or score sums.

    Raises :class:`OrdinalUnsupported` for ordinal ballots, whose positional
    votes have no single popularity number here.
    """
    if instance.vote_type is VoteType.ORDINAL:
        raise OrdinalUnsupported("popularity is undefined for ordinal ballots")
    pops = {p.id: Fraction(0) for p in instance.projects}
    if instance.vote_type is VoteType.APPROVAL:
        for ballot in instance.ballots:
            for pid in ballot.approved:
                pops[pid] += 1
    else:
        for ballot in instance.ballots:
            scores = ballot.scores or {}
            for pid in ballot.approved:
                pops[pid] += scores.get(pid, Fraction(0))
    return pops


def popularity(project: Project, instance: Instance) -> Fraction:
    """Votes received by one project (see :func:`popularity_by_project`)."""
    if project.id not in instance.project_by_id:
        raise ValueError(f"project {project.id!r} is not part of the instance")
    return popularity_by_project(instance)[project.id]


@dataclass(frozen=True)
class ProposalRatios:
    """Prevalence of one impact area within the whole proposal set.

    ``r_cost``, ``r_projects`` and ``r_popularity`` are the area's fraction of
    total proposed cost, project count and received votes. Each lies in [0, 1].
    """

    area: ImpactArea
    r_cost: Fraction
    r_projects: Fraction
    r_popularity: Fraction


def proposal_ratios(instance: Instance, area: ImpactArea) -> ProposalRatios:
    """Compute the area's proposal-set ratios with exact arithmetic.

    An instance without ballots has zero total popularity; the popularity
    ratio is then 0 (there is nothing to apportion).
    """
    if not instance.projects:
        raise EmptyInstance("proposal ratios need at least one project")
    member_ids = instance.area_members[area]
    members = [instance.project_by_id[pid] for pid in member_ids]
    total = instance.total_cost
    r_cost = sum((p.cost for p in members), Fraction(0)) / total
    r_projects = Fraction(len(members), len(instance.projects))
    pops = popularity_by_project(instance)
    total_pop = sum(pops.values(), Fraction(0))
    if total_pop == 0:
        r_popularity = Fraction(0)
    else:
        r_popularity = sum((pops[pid] for pid in member_ids), Fraction(0)) / total_pop
    return ProposalRatios(area, r_cost, r_projects, r_popularity)


class QuartileKind(str, enum.Enum):
    COST = "cost"
    POPULARITY = "popularity"


_LEVEL_NAMES = {
    QuartileKind.COST: ("very cheap", "cheap", "expensive", "very expensive"),
    QuartileKind.POPULARITY: ("unpopular", "quite popular", "popular", "very popular"),
}


@dataclass(frozen=True)
class QuartileLabel:
    """Per-instance quartile membership of a project's cost or popularity."""

    kind: QuartileKind
    level: int

    def __post_init__(self) -> None:
        if self.level not in (0, 1, 2, 3):
            raise ValueError("quartile level must be 0..3")

    @property
    def display_name(self) -> str:
        return _LEVEL_NAMES[self.kind][self.level]


def assign_quartile_labels(
    instance: Instance, kind: QuartileKind
) -> dict[str, QuartileLabel]:
    """Label every project with its within-instance cost/popularity quartile.

    Thresholds are nearest-rank percentiles (1-based index ``ceil(q*n)`` over
    the ascending values) at q = 0.25, 0.5, 0.75, so they are always attained
    values and equal values always share a level: level 0 for v <= Q1, 1 for
    Q1 < v <= Q2, 2 for Q2 < v <= Q3, 3 above Q3.
    """
    kind = QuartileKind(kind)
    if not instance.projects:
        raise EmptyInstance("quartile labels need at least one project")
    if kind is QuartileKind.COST:
        values = {p.id: p.cost for p in instance.projects}
    else:
        values = popularity_by_project(instance)  # raises OrdinalUnsupported
    ordered = sorted(values.values())
    n = len(ordered)
    q1, q2, q3 = (
        ordered[math.ceil(q * n) - 1] for q in (Fraction(1, 4), Fraction(1, 2), Fraction(3, 4))
    )

    def level(v: Fraction) -> int:
        if v <= q1:
            return 0
        if v <= q2:
            return 1
        if v <= q3:
            return 2
        return 3

    return {pid: QuartileLabel(kind, level(v)) for pid, v in values.items()}
