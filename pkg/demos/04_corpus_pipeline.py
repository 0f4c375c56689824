"""Corpus-scale analysis: losses, selection rates, t-tests and exports.

Builds a small synthetic corpus on disk, runs the full pipeline over it and
writes the CSV reports. On a real Pabulib snapshot the same two calls do the
whole job:

    report = run_corpus("path/to/pabulib", AnalysisConfig(jobs=8))
    export_report(report, "csv", "out/")
"""

import random
import tempfile
from pathlib import Path

from pbimpact import (
    AnalysisConfig,
    ImpactArea,
    MetricCalc,
    MetricKey,
    MetricLevel,
    MetricUnit,
    RuleId,
    export_report,
    run_corpus,
    serialize_instance,
)
from demos_common import build_toy_election
from fractions import Fraction

from pbimpact import Ballot, Instance, Project

rng = random.Random(7)


def random_election(seed: int) -> Instance:
    """A toy-like election with jittered costs so instances differ."""
    rng = random.Random(seed)
    area_pool = list(ImpactArea)[:-1]
    projects = []
    for i in range(rng.randint(4, 7)):
        cost = Fraction(rng.randint(5, 60))
        areas = frozenset(rng.sample(area_pool, rng.randint(1, 2)))
        projects.append(Project(f"p{i}", cost, areas))
    ids = [p.id for p in projects]
    ballots = tuple(
        Ballot(f"v{j}", frozenset(rng.sample(ids, rng.randint(1, len(ids)))))
        for j in range(rng.randint(5, 9))
    )
    return Instance(Fraction(rng.randint(40, 120)), tuple(projects), ballots)


with tempfile.TemporaryDirectory() as workdir:
    corpus_dir = Path(workdir) / "corpus"
    corpus_dir.mkdir()
    (corpus_dir / "toy.pb").write_text(serialize_instance(build_toy_election()))
    for i in range(11):
        text = serialize_instance(random_election(100 + i))
        (corpus_dir / f"election_{i:02d}.pb").write_text(text)

    config = AnalysisConfig(es_variant=RuleId.MES_ADD1U, top_n=5, jobs=1)
    report = run_corpus(corpus_dir, config)
    print(f"{report.n_files} files, {report.n_instances} parsed, "
          f"{report.n_analyzed} analyzed with both rules\n")

    print("selection rate of the k-th most popular project:")
    print(f"{'rank':>4} {'greedy':>8} {'equal shares':>13}")
    greedy_rates = dict((r, rate) for r, _, rate in report.selection_rates[RuleId.GREEDY])
    es_rates = dict((r, rate) for r, _, rate in report.selection_rates[RuleId.MES_ADD1U])
    for rank in sorted(greedy_rates):
        print(f"{rank:>4} {float(greedy_rates[rank]):>8.2f} {float(es_rates[rank]):>13.2f}")

    cost_share = MetricKey(MetricLevel.OUTCOME, MetricCalc.SHARE, MetricUnit.COST)
    print("\nmean cost-share loss (greedy minus equal shares) per area:")
    for area in ImpactArea:
        summary = report.summaries.get((cost_share, area))
        if summary is not None:
            print(f"  {area.value:<25} {summary.mean:+.4f}  (n={summary.n}, "
                  f"positive in {float(summary.pct_positive):.0%})")

    paths = export_report(report, "csv", Path(workdir) / "out")
    print("\nwrote reports:")
    for path in paths:
        print(f"  {path.name}: {len(path.read_text().splitlines()) - 1} rows")
