"""Shared builders for the demo scripts."""

from fractions import Fraction

from pbimpact import Ballot, ImpactArea, Instance, Project


def build_toy_election(budget: Fraction = Fraction(1000)) -> Instance:
    """The 11-voter, 5-project election used across the demos."""
    area = ImpactArea
    projects = (
        Project("A", Fraction(700), frozenset({area.EDUCATION})),
        Project("B", Fraction(400), frozenset({area.WELFARE, area.HEALTH})),
        Project("C", Fraction(250), frozenset({area.HEALTH})),
        Project("D", Fraction(200), frozenset({area.EDUCATION, area.HEALTH})),
        Project("E", Fraction(100), frozenset({area.EDUCATION, area.WELFARE})),
    )
    votes = {
        "1": "AB", "2": "ABC", "3": "AB", "4": "ABC", "5": "ABC", "6": "AB",
        "7": "CDE", "8": "D", "9": "DE", "10": "CDE", "11": "A",
    }
    ballots = tuple(Ballot(v, frozenset(ids)) for v, ids in votes.items())
    return Instance(budget, projects, ballots)
