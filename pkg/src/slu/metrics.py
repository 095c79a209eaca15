"""Evaluation: chunk-level slot F1, intent accuracy, and whole-sentence
(semantic frame) accuracy.

Chunk extraction follows the standard CoNLL evaluation script's rules,
including its leniency: an I-x tag with no open x chunk starts one. A chunk
is identified by (type, start, end) with an inclusive end index, so F1
credits only exact span-and-type matches.
"""

from __future__ import annotations

from dataclasses import dataclass


class AlignmentError(ValueError):
    """Prediction/gold sequences disagree in count or length."""


def extract_chunks(tags: list[str]) -> set[tuple[str, int, int]]:
    """BIO tag list -> set of (type, start_index, end_index_inclusive)."""
    chunks: set[tuple[str, int, int]] = set()
    cur_type: str | None = None
    start = 0
    for i, tag in enumerate(tags):
        if tag == "O":
            if cur_type is not None:
                chunks.add((cur_type, start, i - 1))
                cur_type = None
            continue
        prefix, _, ctype = tag.partition("-")
        if prefix == "B" or ctype != cur_type:
            if cur_type is not None:
                chunks.add((cur_type, start, i - 1))
            cur_type, start = ctype, i
    if cur_type is not None:
        chunks.add((cur_type, start, len(tags) - 1))
    return chunks


@dataclass
class EvalReport:
    slot_f1: float
    slot_precision: float
    slot_recall: float
    intent_accuracy: float
    overall_accuracy: float
    gold_chunks: int
    pred_chunks: int
    correct_chunks: int
    sentences: int
    correct_sentences: int

    def to_pairs(self) -> list[tuple[str, str]]:
        """Ordered key/value rows for machine-parseable report files."""
        return [
            ("slot_f1", f"{self.slot_f1:.6f}"),
            ("slot_precision", f"{self.slot_precision:.6f}"),
            ("slot_recall", f"{self.slot_recall:.6f}"),
            ("intent_accuracy", f"{self.intent_accuracy:.6f}"),
            ("overall_accuracy", f"{self.overall_accuracy:.6f}"),
            ("gold_chunks", str(self.gold_chunks)),
            ("pred_chunks", str(self.pred_chunks)),
            ("correct_chunks", str(self.correct_chunks)),
            ("sentences", str(self.sentences)),
            ("correct_sentences", str(self.correct_sentences)),
        ]


Sentence = tuple[str, list[str]]  # (intent, BIO tags)


def evaluate(pred: list[Sentence], gold: list[Sentence]) -> EvalReport:
    """Score predictions against references.

    Slot P/R/F1 count exact chunk matches; a sentence counts toward overall
    accuracy only when its intent and its entire tag sequence both match.
    """
    if len(pred) != len(gold):
        raise AlignmentError(
            f"sentence count mismatch: {len(pred)} predictions vs {len(gold)} references"
        )
    gold_chunks = pred_chunks = correct_chunks = 0
    intent_correct = 0
    sentence_correct = 0
    for i, ((p_intent, p_tags), (g_intent, g_tags)) in enumerate(zip(pred, gold)):
        if len(p_tags) != len(g_tags):
            raise AlignmentError(
                f"sentence {i}: {len(p_tags)} predicted tags vs {len(g_tags)} reference tags"
            )
        p_set = extract_chunks(p_tags)
        g_set = extract_chunks(g_tags)
        gold_chunks += len(g_set)
        pred_chunks += len(p_set)
        correct_chunks += len(p_set & g_set)
        intent_ok = p_intent == g_intent
        intent_correct += intent_ok
        sentence_correct += intent_ok and p_tags == g_tags
    n = len(gold)
    precision = correct_chunks / pred_chunks if pred_chunks else 0.0
    recall = correct_chunks / gold_chunks if gold_chunks else 0.0
    denom = precision + recall
    f1 = 2 * precision * recall / denom if denom else 0.0
    return EvalReport(
        slot_f1=f1,
        slot_precision=precision,
        slot_recall=recall,
        intent_accuracy=intent_correct / n if n else 0.0,
        overall_accuracy=sentence_correct / n if n else 0.0,
        gold_chunks=gold_chunks,
        pred_chunks=pred_chunks,
        correct_chunks=correct_chunks,
        sentences=n,
        correct_sentences=sentence_correct,
    )
