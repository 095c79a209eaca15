"""Metric tests: chunk extraction golden cases and report arithmetic."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from slu.metrics import AlignmentError, evaluate, extract_chunks


class TestExtractChunks:
    def test_b_then_i_single_chunk(self):
        assert extract_chunks(["O", "B-movie-type", "I-movie-type"]) == {
            ("movie-type", 1, 2)
        }

    def test_all_outside(self):
        assert extract_chunks(["O", "O", "O"]) == set()

    def test_bare_i_tags_start_chunks(self):
        # Leniency rule: I-x without an open x chunk behaves like B-x.
        assert extract_chunks(["I-a", "I-a", "O", "I-a"]) == {("a", 0, 1), ("a", 3, 3)}

    def test_adjacent_b_tags_are_separate_chunks(self):
        assert extract_chunks(["B-a", "B-a"]) == {("a", 0, 0), ("a", 1, 1)}

    def test_type_change_closes_chunk(self):
        assert extract_chunks(["B-a", "I-b"]) == {("a", 0, 0), ("b", 1, 1)}

    def test_chunk_open_at_sequence_end(self):
        assert extract_chunks(["O", "B-x", "I-x"]) == {("x", 1, 2)}
        assert extract_chunks(["B-x"]) == {("x", 0, 0)}

    def test_type_with_internal_dash_preserved(self):
        assert extract_chunks(["B-depart-time.start", "I-depart-time.start"]) == {
            ("depart-time.start", 0, 1)
        }

    def test_empty_sequence(self):
        assert extract_chunks([]) == set()


class TestEvaluate:
    def test_identical_inputs_score_one(self):
        sents = [("X", ["O", "B-a", "I-a"]), ("Y", ["B-b"])]
        rep = evaluate(sents, sents)
        assert rep.slot_f1 == 1.0
        assert rep.slot_precision == 1.0
        assert rep.slot_recall == 1.0
        assert rep.intent_accuracy == 1.0
        assert rep.overall_accuracy == 1.0
        assert rep.correct_sentences == 2

    def test_hand_counted_partial_credit(self):
        gold = [("X", ["B-a", "I-a", "O", "B-b"])]  # chunks: (a,0,1), (b,3,3)
        pred = [("X", ["B-a", "O", "O", "B-c"])]    # chunks: (a,0,0), (c,3,3)
        rep = evaluate(pred, gold)
        # No predicted chunk matches exactly: (a,0,0) has the wrong span.
        assert rep.correct_chunks == 0
        assert rep.gold_chunks == 2
        assert rep.pred_chunks == 2
        assert rep.slot_f1 == 0.0
        assert rep.intent_accuracy == 1.0
        assert rep.overall_accuracy == 0.0  # tags differ despite intent match

    def test_half_precision_recall(self):
        gold = [("X", ["B-a", "O", "B-b", "O"])]
        pred = [("X", ["B-a", "O", "B-c", "O"])]
        rep = evaluate(pred, gold)
        assert rep.correct_chunks == 1
        assert rep.slot_precision == 0.5
        assert rep.slot_recall == 0.5
        assert rep.slot_f1 == 0.5

    def test_overall_requires_both_parts(self):
        gold = [("X", ["B-a"]), ("Y", ["O"]), ("Z", ["B-c"])]
        pred = [("X", ["B-a"]), ("Y", ["B-q"]), ("W", ["B-c"])]
        rep = evaluate(pred, gold)
        assert rep.intent_accuracy == pytest.approx(2 / 3)
        assert rep.overall_accuracy == pytest.approx(1 / 3)
        assert rep.overall_accuracy <= rep.intent_accuracy

    def test_no_chunks_anywhere_gives_zero_f1(self):
        rep = evaluate([("X", ["O"])], [("X", ["O"])])
        assert rep.slot_f1 == 0.0  # 2PR/(P+R) with P+R == 0
        assert rep.overall_accuracy == 1.0

    def test_length_mismatch_names_sentence(self):
        with pytest.raises(AlignmentError, match="sentence 1"):
            evaluate([("X", ["O"]), ("X", ["O", "O"])],
                     [("X", ["O"]), ("X", ["O"])])

    def test_count_mismatch_rejected(self):
        with pytest.raises(AlignmentError, match="count"):
            evaluate([("X", ["O"])], [])


TAG_TYPES = ("a", "bb", "loc.start")


@st.composite
def tagged_sentences(draw):
    n_sent = draw(st.integers(1, 4))
    sents = []
    for _ in range(n_sent):
        n = draw(st.integers(1, 7))
        tags = []
        for _ in range(n):
            kind = draw(st.sampled_from(["O", "B", "I"]))
            if kind == "O":
                tags.append("O")
            else:
                tags.append(f"{kind}-{draw(st.sampled_from(TAG_TYPES))}")
        intent = draw(st.sampled_from(["X", "Y", "Z"]))
        sents.append((intent, tags))
    return sents


class TestProperties:
    @given(tagged_sentences())
    @settings(max_examples=80, deadline=None)
    def test_self_evaluation_is_perfect(self, sents):
        rep = evaluate(sents, sents)
        assert rep.intent_accuracy == 1.0
        assert rep.overall_accuracy == 1.0
        if rep.gold_chunks:
            assert rep.slot_f1 == 1.0

    @given(tagged_sentences(), tagged_sentences())
    @settings(max_examples=60, deadline=None)
    def test_overall_bounded_by_intent_accuracy(self, a, b):
        if len(a) != len(b) or any(len(x[1]) != len(y[1]) for x, y in zip(a, b)):
            return
        rep = evaluate(a, b)
        assert rep.overall_accuracy <= rep.intent_accuracy + 1e-12
        assert 0.0 <= rep.slot_f1 <= 1.0
