"""Utilitarian greedy versus the method of equal shares.

The example election: 11 voters, 5 projects, budget 1000. Greedy walks the
projects by popularity and buys whatever still fits. Equal shares gives each
voter an equal slice of the budget and only buys a project when its
supporters can cover the cost together, which redirects money from one big
popular project to several smaller ones.
"""

from fractions import Fraction

from pbimpact import (
    Ballot,
    ImpactArea,
    Instance,
    Project,
    equal_shares_add1,
    equal_shares_add1u,
    equal_shares_core,
    utilitarian_greedy,
)

AREA = ImpactArea
projects = (
    Project("A", Fraction(700), frozenset({AREA.EDUCATION})),
    Project("B", Fraction(400), frozenset({AREA.WELFARE, AREA.HEALTH})),
    Project("C", Fraction(250), frozenset({AREA.HEALTH})),
    Project("D", Fraction(200), frozenset({AREA.EDUCATION, AREA.HEALTH})),
    Project("E", Fraction(100), frozenset({AREA.EDUCATION, AREA.WELFARE})),
)
votes = {
    "1": "AB", "2": "ABC", "3": "AB", "4": "ABC", "5": "ABC", "6": "AB",
    "7": "CDE", "8": "D", "9": "DE", "10": "CDE", "11": "A",
}
ballots = tuple(Ballot(v, frozenset(ids)) for v, ids in votes.items())
toy = Instance(Fraction(1000), projects, ballots)

greedy = utilitarian_greedy(toy)
print(f"greedy winners   {greedy.winners}  cost {greedy.total_cost}  leftover {greedy.leftover}")
# A (7 votes, 700) fits; B (6 votes, 400) does not fit the remaining 300 and
# is skipped; C (5 votes, 250) fits; D and E are too expensive for the rest.

core = equal_shares_core(toy, Fraction(1000, 11))
print(f"\nequal shares at the base endowment of 1000/11 per voter:")
print(f"core winners     {core.winners}  cost {core.total_cost}")
for voter in ("7", "9", "10"):
    payments = {pid: str(amount) for pid, amount in core.payments[voter].items()}
    print(f"  voter {voter:>2} pays {payments}")
# E costs 100 and has 3 supporters, so each pays 100/3: the cheapest
# per-supporter price on the board, bought first. C follows at 50 per head.
# The rest of the money is too scattered to buy anything else.

# The add1 completion raises everyone's endowment in steps of 1 until the
# selection would blow the budget, then keeps the last feasible outcome.
add1 = equal_shares_add1(toy)
print(f"\nadd1 winners     {add1.winners}  cost {add1.total_cost}"
      f"  endowment used {add1.endowment_used}")

# add1u additionally spends the leftover on a greedy pass; here the only
# unselected project A costs 700, far more than the 50 left over.
add1u = equal_shares_add1u(toy)
print(f"add1u winners    {add1u.winners}  cost {add1u.total_cost}  leftover {add1u.leftover}")

# Equal shares sacrifices A, the most popular and most expensive project,
# for proportional coverage of the smaller ones: exactly the behavior the
# impact metrics in the next demo quantify.
