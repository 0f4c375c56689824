import random
from fractions import Fraction as F

import pytest

from helpers import TOY_PB_TEXT, random_instance
from pbimpact.analysis import (
    DEFAULT_COMBOS,
    AnalysisConfig,
    build_conjoint_dataset,
    export_report,
    load_report,
    run_corpus,
    run_instance,
)
from pbimpact.errors import EmptyCorpus, NoUsableRows
from pbimpact.metrics import (
    MetricCalc,
    MetricKey,
    MetricLevel,
    MetricScope,
    MetricUnit,
)
from pbimpact.model import (
    Ballot,
    Beneficiary,
    ImpactArea,
    Instance,
    Project,
    QuartileKind,
    VoteType,
)
from pbimpact.rules import RuleId
from pbimpact.stats import TestResult as StatTestResult

KEY = MetricKey
LV, CA, UN, SC = MetricLevel, MetricCalc, MetricUnit, MetricScope
COST_SHARE = KEY(LV.OUTCOME, CA.SHARE, UN.COST)
TOY_OVERRIDES = {RuleId.GREEDY: ["A", "B"], RuleId.MES_ADD1U: ["A", "D", "E"]}


@pytest.fixture
def toy_report(toy):
    return run_instance(toy, AnalysisConfig(), instance_id="toy", winners_override=TOY_OVERRIDES)


class TestRunInstance:
    def test_override_reproduces_published_cells(self, toy_report):
        es = RuleId.MES_ADD1U
        cell = toy_report.cells[(COST_SHARE, ImpactArea.EDUCATION, es)]
        assert (cell.numerator, cell.denominator) == (F(1000), F(1000))
        ballot = toy_report.ballot_cells[
            (KEY(LV.BALLOT, CA.SHARE, UN.COST), ImpactArea.EDUCATION, es, "1")
        ]
        assert (ballot.numerator, ballot.denominator) == (F(700), F(1000))
        assert toy_report.losses[(COST_SHARE, ImpactArea.EDUCATION)] == F(-4, 11)

    def test_quartiles_and_utilization(self, toy_report):
        assert toy_report.quartiles[QuartileKind.COST]["A"].level == 3
        assert toy_report.quartiles[QuartileKind.POPULARITY]["E"].level == 0
        assert toy_report.utilization[RuleId.MES_ADD1U] == 1
        assert toy_report.utilization[RuleId.GREEDY] == F(1100, 1000)

    def test_single_unanimous_project_all_losses_zero(self):
        instance = Instance(
            F(10),
            (Project("only", F(10), frozenset({ImpactArea.SPORT})),),
            tuple(Ballot(f"v{i}", frozenset({"only"})) for i in range(3)),
        )
        report = run_instance(instance, AnalysisConfig())
        assert report.outcomes[RuleId.GREEDY].winners == ("only",)
        assert report.outcomes[RuleId.MES_ADD1U].winners == ("only",)
        assert report.losses
        assert all(value == 0 for value in report.losses.values())

    def test_es_superset_leaves_ug_without_novelty(self, toy):
        report = run_instance(
            toy,
            AnalysisConfig(),
            winners_override={RuleId.GREEDY: ["A"], RuleId.MES_ADD1U: ["A", "D", "E"]},
        )
        for (key, area, rule), mv in report.cells.items():
            if rule is RuleId.GREEDY and key.scope is not SC.IMPACT and mv.defined:
                assert mv.numerator == 0
        for (key, area, rule, voter), mv in report.ballot_cells.items():
            if rule is RuleId.GREEDY and key.scope is not SC.IMPACT and mv.defined:
                assert mv.numerator == 0

    def test_non_approval_gets_greedy_only_partial(self):
        projects = (Project("a", F(5)), Project("b", F(5)))
        ballots = (Ballot("v", frozenset({"a"}), {"a": F(3)}),)
        instance = Instance(F(5), projects, ballots, VoteType.CUMULATIVE)
        report = run_instance(instance, AnalysisConfig())
        assert set(report.outcomes) == {RuleId.GREEDY}
        assert any("equal shares skipped" in w for w in report.warnings)
        assert report.losses == {}
        assert all(key[0].scope is SC.IMPACT for key in report.cells)

    def test_ordinal_gets_labels_only(self):
        instance = Instance(F(5), (Project("a", F(5)),), (), VoteType.ORDINAL)
        report = run_instance(instance, AnalysisConfig())
        assert report.outcomes == {}
        assert report.cells == {}
        assert QuartileKind.COST in report.quartiles
        assert QuartileKind.POPULARITY not in report.quartiles

    def test_ballot_cells_toggle(self, toy):
        report = run_instance(toy, AnalysisConfig(include_ballot_cells=False))
        assert report.ballot_cells == {}
        assert report.ballot_means == {}

    def test_ballot_mean_matches_manual_average(self, toy_report, toy):
        key = KEY(LV.BALLOT, CA.SHARE, UN.PROJECTS)
        area, rule = ImpactArea.EDUCATION, RuleId.MES_ADD1U
        values = [
            toy_report.ballot_cells[(key, area, rule, b.voter_id)] for b in toy.ballots
        ]
        defined = [v.value for v in values if v.defined]
        mean_cell = toy_report.ballot_means[(key, area, rule)]
        assert mean_cell.value == sum(defined, F(0)) / len(defined)


class TestConjointDataset:
    def combo_instance(self, areas, cost, other_costs=(100, 50)):
        projects = [Project("combo", F(cost), frozenset(areas))]
        projects += [Project(f"f{i}", F(c)) for i, c in enumerate(other_costs)]
        ballots = (Ballot("v", frozenset({"combo"})),)
        return Instance(F(1000), tuple(projects), ballots)

    def report_with_winner(self, instance, winners):
        return run_instance(
            instance,
            AnalysisConfig(),
            winners_override={RuleId.GREEDY: winners, RuleId.MES_ADD1U: winners},
        )

    def test_low_cost_combo_match(self):
        instance = self.combo_instance({ImpactArea.CULTURE, ImpactArea.EDUCATION}, 10)
        dataset = build_conjoint_dataset(
            [self.report_with_winner(instance, ["combo"])], DEFAULT_COMBOS, RuleId.MES_ADD1U
        )
        assert dataset.predictors[0] == "culture+education:low"
        assert dataset.rows[0][0] == 1
        assert sum(dataset.rows[0]) == 1

    def test_no_matching_winners_all_zero(self):
        instance = self.combo_instance({ImpactArea.SPORT}, 10)
        dataset = build_conjoint_dataset(
            [self.report_with_winner(instance, ["combo"])], DEFAULT_COMBOS, RuleId.MES_ADD1U
        )
        assert set(dataset.rows[0]) == {0}

    def test_superset_tagging_matches_no_combo(self):
        instance = self.combo_instance(
            {ImpactArea.CULTURE, ImpactArea.EDUCATION, ImpactArea.SPORT}, 10
        )
        dataset = build_conjoint_dataset(
            [self.report_with_winner(instance, ["combo"])], DEFAULT_COMBOS, RuleId.MES_ADD1U
        )
        assert set(dataset.rows[0]) == {0}

    def test_high_cost_combo_match(self):
        instance = self.combo_instance({ImpactArea.PUBLIC_SPACE, ImpactArea.PUBLIC_TRANSIT}, 500)
        dataset = build_conjoint_dataset(
            [self.report_with_winner(instance, ["combo"])], DEFAULT_COMBOS, RuleId.MES_ADD1U
        )
        idx = dataset.predictors.index("public_space+public_transit:high")
        assert dataset.rows[0][idx] == 1

    def test_y_is_utilization(self):
        instance = self.combo_instance({ImpactArea.CULTURE, ImpactArea.EDUCATION}, 10)
        dataset = build_conjoint_dataset(
            [self.report_with_winner(instance, ["combo"])], None, RuleId.MES_ADD1U
        )
        assert dataset.y[0] == pytest.approx(10 / 1000)

    def test_no_usable_rows(self, toy):
        report = run_instance(toy, AnalysisConfig())
        with pytest.raises(NoUsableRows):
            build_conjoint_dataset([report], DEFAULT_COMBOS, RuleId.MES_ADD1)


UNLABELED = """META
key;value
budget;30
vote_type;approval
num_projects;2
num_votes;2
PROJECTS
project_id;cost
u1;10
u2;20
VOTES
voter_id;vote
v1;u1
v2;u1,u2
"""


class TestRunCorpus:
    def test_single_instance_aggregation_identity(self, tmp_path, toy):
        (tmp_path / "toy.pb").write_text(TOY_PB_TEXT, encoding="utf-8")
        corpus = run_corpus(tmp_path, AnalysisConfig())
        report = run_instance(toy, AnalysisConfig(), instance_id="toy")
        for (key, area), summary in corpus.summaries.items():
            assert summary.n == 1
            assert summary.mean == pytest.approx(float(report.losses[(key, area)]))
        assert corpus.n_analyzed == 1

    def test_duplicated_corpus_flags_zero_variance(self, tmp_path):
        (tmp_path / "a.pb").write_text(TOY_PB_TEXT, encoding="utf-8")
        (tmp_path / "b.pb").write_text(TOY_PB_TEXT, encoding="utf-8")
        corpus = run_corpus(tmp_path, AnalysisConfig())
        assert corpus.n_analyzed == 2
        values = set()
        for cell in corpus.t_tests.values():
            values.add(cell if isinstance(cell, str) else "ok")
        assert values == {"ZeroVarianceDifferences"}
        for summary in corpus.summaries.values():
            assert summary.n == 2

    def test_mixed_labeled_and_unlabeled(self, tmp_path):
        (tmp_path / "toy.pb").write_text(TOY_PB_TEXT, encoding="utf-8")
        (tmp_path / "plain.pb").write_text(UNLABELED, encoding="utf-8")
        corpus = run_corpus(tmp_path, AnalysisConfig())
        assert corpus.n_analyzed == 2
        # both instances feed the selection-rate curve
        rank1 = corpus.selection_rates[RuleId.GREEDY][0]
        assert rank1[1] == 2
        # but only the labeled toy reaches area summaries
        assert all(summary.n == 1 for summary in corpus.summaries.values())
        assert corpus.area_instance_counts[ImpactArea.EDUCATION] == 1
        assert corpus.area_instance_counts[ImpactArea.OTHER] == 0

    def test_error_records_do_not_abort(self, corpus_dir):
        corpus = run_corpus(corpus_dir, AnalysisConfig())
        assert corpus.n_files == 3
        assert corpus.n_instances == 2
        assert list(corpus.errors) == ["z_bad"]

    def test_empty_corpus_raises(self, tmp_path):
        with pytest.raises(EmptyCorpus):
            run_corpus(tmp_path, AnalysisConfig())

    def test_all_malformed_yields_header_only_exports(self, tmp_path):
        (tmp_path / "bad.pb").write_text("nope", encoding="utf-8")
        corpus = run_corpus(tmp_path, AnalysisConfig())
        out = tmp_path / "out"
        paths = export_report(corpus, "csv", out)
        for path in paths:
            assert len(path.read_text(encoding="utf-8").splitlines()) == 1

    def test_parallel_matches_sequential(self, tmp_path):
        rng = random.Random(2024)
        from pbimpact.pabulib import serialize_instance

        for i in range(6):
            text = serialize_instance(random_instance(rng))
            (tmp_path / f"r{i}.pb").write_text(text, encoding="utf-8")
        sequential = run_corpus(tmp_path, AnalysisConfig(jobs=1))
        parallel = run_corpus(tmp_path, AnalysisConfig(jobs=3))
        assert sequential == parallel
        out_a, out_b = tmp_path / "a_out", tmp_path / "b_out"
        export_report(sequential, "csv", out_a)
        export_report(parallel, "csv", out_b)
        for path in out_a.iterdir():
            assert path.read_bytes() == (out_b / path.name).read_bytes()

    def test_beneficiary_pooling(self, tmp_path):
        text = TOY_PB_TEXT.replace("A;700;Education;", "A;700;Education;Students")
        text = text.replace("project_id;cost;category;name", "project_id;cost;category;target")
        (tmp_path / "toy.pb").write_text(text, encoding="utf-8")
        corpus = run_corpus(tmp_path, AnalysisConfig())
        mv = corpus.beneficiaries[(Beneficiary.STUDENTS, RuleId.GREEDY)]
        assert (mv.numerator, mv.denominator) == (F(1), F(1))


class TestExports:
    def test_metrics_csv_contains_published_cell_row(self, toy_report, tmp_path):
        paths = export_report(toy_report, "csv", tmp_path)
        names = [p.name for p in paths]
        assert names == ["metrics.csv", "ballot_metrics.csv", "losses.csv"]
        content = (tmp_path / "metrics.csv").read_text(encoding="utf-8")
        lines = content.splitlines()
        assert lines[0] == "instance,area,level,calc,unit,rule,value_rational,value_float,defined"
        assert "toy,education,outcome,share,cost,mes_add1u,1000/1000,1.0,true" in lines

    def test_losses_csv_schema(self, toy_report, tmp_path):
        export_report(toy_report, "csv", tmp_path)
        lines = (tmp_path / "losses.csv").read_text(encoding="utf-8").splitlines()
        assert lines[0] == "instance,area,level,calc,unit,loss_float,relative_loss_float"
        assert any(line.startswith("toy,education,outcome,share,cost,") for line in lines)

    def test_undefined_cells_exported_not_omitted(self, toy_report, tmp_path):
        export_report(toy_report, "csv", tmp_path)
        lines = (tmp_path / "metrics.csv").read_text(encoding="utf-8").splitlines()
        assert any(line.endswith(",0/0,,false") for line in lines)

    def test_instance_json_round_trip(self, toy_report, tmp_path):
        paths = export_report(toy_report, "json", tmp_path)
        assert load_report(paths[0]) == toy_report

    def test_corpus_json_round_trip(self, corpus_dir, tmp_path):
        corpus = run_corpus(corpus_dir, AnalysisConfig())
        paths = export_report(corpus, "json", tmp_path)
        restored = load_report(paths[0])
        assert restored == corpus
        assert isinstance(
            restored.t_tests[(COST_SHARE, ImpactArea.EDUCATION)], (StatTestResult, str)
        )

    def test_byte_stable_repeated_export(self, toy_report, tmp_path):
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        export_report(toy_report, "csv", out_a)
        export_report(toy_report, "csv", out_b)
        for path in out_a.iterdir():
            assert path.read_bytes() == (out_b / path.name).read_bytes()

    def test_corpus_csv_schemas(self, corpus_dir, tmp_path):
        corpus = run_corpus(corpus_dir, AnalysisConfig())
        paths = export_report(corpus, "csv", tmp_path)
        headers = {
            "corpus_summary.csv": "area,level,calc,unit,n,pct_positive,mean,mean_pos,mean_neg",
            "selection_rate.csv": "rule,rank,n,rate",
            "conjoint.csv": "rule,predictor,coefficient,p_value,relative_importance,r_squared",
            "pearson.csv": "area,rule,n,r,p_value,error",
            "t_tests.csv": "area,level,calc,unit,n,statistic,p_value,error",
            "beneficiaries.csv": "beneficiary,rule,proposed,winning,representation,relative_loss",
        }
        assert {p.name for p in paths} == set(headers)
        for path in paths:
            first = path.read_text(encoding="utf-8").splitlines()[0]
            assert first == headers[path.name]

    def test_unknown_format_rejected(self, toy_report, tmp_path):
        with pytest.raises(ValueError):
            export_report(toy_report, "xml", tmp_path)
