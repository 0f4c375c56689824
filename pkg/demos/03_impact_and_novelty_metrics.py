"""The impact and novelty metric framework, cell by cell.

For an impact area l and a rule f with winners W_f, with m() measuring cost,
project count or popularity:

    share            m(P_l & W_f) / m(W_f)        how much of the outcome
    representation   m(P_l & W_f) / m(P_l)        how much of the area won
    proportionality  share / proposal-set ratio   over/under-representation
    within-novelty   m(P_l & X_f) / m(P_l & W_f)  X_f = exclusive winners
    between-novelty  m(P_l & X_f) / m(X_f)

Loss is the greedy value minus the equal-shares value: positive numbers
favor greedy, negative numbers favor equal shares.
"""

from fractions import Fraction

from pbimpact import (
    AnalysisConfig,
    ImpactArea,
    MetricCalc,
    MetricKey,
    MetricLevel,
    MetricScope,
    MetricUnit,
    RuleId,
    run_instance,
)
from demos_common import build_toy_election

toy = build_toy_election()

# Fix the winner sets to the published example pair so the numbers below
# match the worked table: greedy takes {A, B}, equal shares {A, D, E}.
report = run_instance(
    toy,
    AnalysisConfig(),
    instance_id="toy",
    winners_override={RuleId.GREEDY: ["A", "B"], RuleId.MES_ADD1U: ["A", "D", "E"]},
)

LV, CA, UN, SC = MetricLevel, MetricCalc, MetricUnit, MetricScope
AREAS = (ImpactArea.EDUCATION, ImpactArea.WELFARE, ImpactArea.HEALTH)


def show(key: MetricKey, label: str) -> None:
    print(f"\n{label}")
    for area in AREAS:
        cells = []
        for rule in (RuleId.GREEDY, RuleId.MES_ADD1U):
            mv = report.cells[(key, area, rule)]
            cells.append(f"{rule.value:<10} {mv.numerator}/{mv.denominator}")
        print(f"  {area.value:<10} " + "   ".join(cells))


show(MetricKey(LV.OUTCOME, CA.SHARE, UN.COST), "cost share: area's slice of the winning money")
show(MetricKey(LV.OUTCOME, CA.REPRESENTATION, UN.PROJECTS),
     "projects representation: fraction of the area's proposals that won")
show(MetricKey(LV.OUTCOME, CA.SHARE, UN.COST, SC.WITHIN_NOVELTY),
     "within-novelty (cost): exclusively-won money inside the area's winnings")
show(MetricKey(LV.OUTCOME, CA.SHARE, UN.POPULARITY, SC.BETWEEN_NOVELTY),
     "between-novelty (popularity): the area's slice of all exclusive winners")

# Education cost share: greedy puts 700 of its 1100 into education, equal
# shares all 1000 of its 1000, so greedy loses 700/1100 - 1 = -4/11.
loss = report.losses[(MetricKey(LV.OUTCOME, CA.SHARE, UN.COST), ImpactArea.EDUCATION)]
print(f"\neducation cost-share loss (greedy minus equal shares): {loss} = {float(loss):.4f}")
assert loss == Fraction(-4, 11)

# Ballot-level cells restrict the numerator to one voter's approved
# projects; voter 1 approved A and B only.
ballot_key = MetricKey(LV.BALLOT, CA.SHARE, UN.COST)
for rule in (RuleId.GREEDY, RuleId.MES_ADD1U):
    mv = report.ballot_cells[(ballot_key, ImpactArea.EDUCATION, rule, "1")]
    print(f"voter 1 education cost share under {rule.value}: {mv.numerator}/{mv.denominator}")

# Undefined cells stay undefined instead of becoming zeros, so corpus
# aggregation can skip areas with nothing proposed.
empty = report.cells[(MetricKey(LV.OUTCOME, CA.REPRESENTATION, UN.COST), ImpactArea.SPORT,
                      RuleId.GREEDY)]
print(f"\nsport has no proposals, its representation is undefined: defined={empty.defined}")
