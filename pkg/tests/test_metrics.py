import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from claimtagger.baselines import last_sentence_baseline
from claimtagger.corpus import Abstract, LabeledAbstract
from claimtagger.errors import ContractError
from claimtagger.metrics import (
    ComparisonRow,
    build_comparison,
    cohen_kappa,
    evaluate_model,
    fleiss_kappa,
    prf1,
)


class TestPrf1:
    def test_perfect(self):
        r = prf1([True, False, True], [True, False, True])
        assert (r.precision, r.recall, r.f1) == (1.0, 1.0, 1.0)
        assert not r.degenerate

    def test_worked_example(self):
        # tp=2 fp=1 fn=1 -> everything 2/3
        r = prf1([1, 1, 1, 0, 0], [1, 1, 0, 1, 0])
        assert r.precision == pytest.approx(2 / 3)
        assert r.recall == pytest.approx(2 / 3)
        assert r.f1 == pytest.approx(2 / 3)
        assert (r.counts.tp, r.counts.fp, r.counts.fn, r.counts.tn) == (2, 1, 1, 1)

    def test_degenerate_no_positive_predictions(self):
        r = prf1([False, False], [True, False])
        assert (r.precision, r.recall, r.f1) == (0.0, 0.0, 0.0)
        assert r.degenerate

    def test_length_mismatch(self):
        with pytest.raises(ContractError):
            prf1([True], [True, False])

    def test_f1_between_min_and_max(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            preds = rng.integers(0, 2, size=30).astype(bool)
            golds = rng.integers(0, 2, size=30).astype(bool)
            r = prf1(preds, golds)
            if r.precision > 0 and r.recall > 0:
                assert min(r.precision, r.recall) - 1e-12 <= r.f1 <= max(r.precision, r.recall) + 1e-12

    @given(st.lists(st.tuples(st.booleans(), st.booleans()), min_size=1, max_size=40),
           st.randoms())
    @settings(max_examples=50, deadline=None)
    def test_permutation_invariant(self, pairs, rnd):
        preds, golds = zip(*pairs)
        base = prf1(preds, golds)
        shuffled = list(pairs)
        rnd.shuffle(shuffled)
        p2, g2 = zip(*shuffled)
        again = prf1(p2, g2)
        assert (again.precision, again.recall, again.f1) == (base.precision, base.recall, base.f1)


class TestCohenKappa:
    def test_identical_sequences(self):
        assert cohen_kappa([0, 1, 0, 1], [0, 1, 0, 1]) == pytest.approx(1.0)

    def test_worked_example(self):
        # both-yes 20, both-no 60, 10+10 discordant:
        # p_o = 0.8, marginals 0.3/0.7 each, p_e = 0.58, kappa = 0.22/0.42
        a = [1] * 20 + [0] * 60 + [1] * 10 + [0] * 10
        b = [1] * 20 + [0] * 60 + [0] * 10 + [1] * 10
        assert cohen_kappa(a, b) == pytest.approx(0.22 / 0.42, abs=1e-12)
        assert cohen_kappa(a, b) == pytest.approx(0.5238, abs=1e-4)

    def test_constant_identical_raters(self):
        assert cohen_kappa(["x"] * 5, ["x"] * 5) == 1.0

    def test_empty_rejected(self):
        with pytest.raises(ContractError):
            cohen_kappa([], [])

    @given(st.lists(st.sampled_from([0, 1, 2]), min_size=1, max_size=60), st.data())
    @settings(max_examples=60, deadline=None)
    def test_self_agreement_and_symmetry(self, a, data):
        assert cohen_kappa(a, a) == pytest.approx(1.0)
        b = data.draw(st.lists(st.sampled_from([0, 1, 2]), min_size=len(a), max_size=len(a)))
        assert cohen_kappa(a, b) == pytest.approx(cohen_kappa(b, a), abs=1e-12)


class TestFleissKappa:
    def test_all_raters_agree_mixed_categories(self):
        counts = np.array([[3, 0], [0, 3], [3, 0], [0, 3]])
        assert fleiss_kappa(counts) == pytest.approx(1.0)

    def test_unanimous_two_items(self):
        assert fleiss_kappa(np.array([[3, 0], [0, 3]])) == pytest.approx(1.0)

    def test_four_item_worked_example(self):
        # independent arithmetic: plain loops over the published formula
        counts = np.array([
            [2, 1],
            [3, 0],
            [1, 2],
            [0, 3],
        ])
        n = 3
        per_item = []
        for row in counts:
            agree = (sum(v * v for v in row) - n) / (n * (n - 1))
            per_item.append(agree)
        p_bar = sum(per_item) / len(per_item)
        totals = counts.sum(axis=0) / counts.sum()
        p_e = sum(t * t for t in totals)
        expected = (p_bar - p_e) / (1 - p_e)
        assert fleiss_kappa(counts) == pytest.approx(expected, abs=1e-12)
        # frozen value from the arithmetic above: exactly 1/3
        assert fleiss_kappa(counts) == pytest.approx(1 / 3, abs=1e-9)

    def test_inconsistent_row_sums_rejected(self):
        with pytest.raises(ContractError):
            fleiss_kappa(np.array([[2, 1], [1, 1]]))

    def test_single_rater_rejected(self):
        with pytest.raises(ContractError):
            fleiss_kappa(np.array([[1, 0]]))

    def test_two_rater_binary_agrees_with_cohen_when_marginals_coincide(self):
        # different chance models in general, but identical here because both
        # raters have the same marginal (0.3 yes / 0.7 no): kappa = 11/21
        a = [1] * 20 + [0] * 60 + [1] * 10 + [0] * 10
        b = [1] * 20 + [0] * 60 + [0] * 10 + [1] * 10
        counts = np.array([[int(x) + int(y), 2 - int(x) - int(y)] for x, y in zip(a, b)])
        fk = fleiss_kappa(counts)
        ck = cohen_kappa(a, b)
        assert fk == pytest.approx(ck, abs=1e-9)
        assert fk == pytest.approx(11 / 21, abs=1e-12)


def _corpus_with_known_positions():
    return [
        LabeledAbstract(Abstract(id="a", title="", sentences=["1", "2", "3"]),
                        claim_labels=[False, False, True]),
        LabeledAbstract(Abstract(id="b", title="", sentences=["1", "2"]),
                        claim_labels=[True, False]),
        LabeledAbstract(Abstract(id="c", title="", sentences=["1", "2", "3", "4"]),
                        claim_labels=[False, False, False, True]),
    ]


class TestEvaluateModel:
    def test_oracle_predictor_is_exact(self):
        corpus = _corpus_with_known_positions()
        golds = {la.abstract.id: la.claim_labels for la in corpus}
        report = evaluate_model(lambda a: golds[a.id], corpus)
        assert report.exact_match_fraction == 1.0
        assert report.metrics.f1 == 1.0
        assert report.problem_abstracts == []

    def test_all_negative_predictor(self):
        corpus = _corpus_with_known_positions()
        report = evaluate_model(lambda a: [False] * len(a.sentences), corpus)
        assert report.metrics.recall == 0.0
        assert report.metrics.degenerate

    def test_last_sentence_counts_match_hand_tally(self):
        corpus = _corpus_with_known_positions()
        report = evaluate_model(last_sentence_baseline, corpus)
        # hand tally: gold positives at a3, b1, c4; predictions a3, b2, c4
        assert (report.metrics.counts.tp, report.metrics.counts.fp,
                report.metrics.counts.fn) == (2, 1, 1)
        assert report.exact_match_fraction == pytest.approx(2 / 3)
        assert report.problem_abstracts == [("b", 2)]


class TestComparison:
    def test_single_row_renders_with_header(self):
        report = build_comparison([ComparisonRow("rule-based", "test", 0.1, 0.2, 0.15)],
                                  seed=7, dataset_hash="abc", config_hash="def")
        text = report.render_text()
        lines = text.splitlines()
        assert lines[0].startswith("# seed=7")
        assert "Model" in lines[1] and "F1" in lines[1]
        assert "rule-based" in lines[3]

    def test_validation_precedes_test(self):
        rows = [ComparisonRow("m", "test", 0.5, 0.5, 0.5),
                ComparisonRow("m", "validation", 0.6, 0.6, 0.6)]
        report = build_comparison(rows)
        ordered = report.sorted_rows()
        assert [r.split for r in ordered] == ["validation", "test"]

    def test_golden_render(self):
        report = build_comparison(
            [ComparisonRow("rule-based", "test", 0.315, 0.322, 0.319)],
            seed=13, dataset_hash="d1a2", config_hash="c3f4")
        expected = (
            "# seed=13 dataset=d1a2 config=c3f4\n"
            "Model                              Split        Precision    Recall        F1\n"
            "-----------------------------------------------------------------------------\n"
            "rule-based                         test             0.315     0.322     0.319\n"
        )
        assert report.render_text() == expected

    def test_jsonl_round_trip_fields(self):
        import json

        report = build_comparison([ComparisonRow("m", "val", 0.1, 0.2, 0.3)],
                                  seed=1, dataset_hash="x", config_hash="y")
        lines = report.render_jsonl().splitlines()
        assert json.loads(lines[0])["meta"]["seed"] == 1
        row = json.loads(lines[1])
        assert row["f1"] == 0.3

    def test_empty_rejected(self):
        with pytest.raises(ContractError):
            build_comparison([])
