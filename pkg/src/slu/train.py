"""Training loop: epoch shuffling, joint loss, early stopping on dev
overall accuracy, and best-model checkpointing."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .checkpoint import Checkpoint
from .config import Config, ConfigError
from .data import Batch, Utterance, Vocab, build_vocab, make_batches
from .metrics import EvalReport, evaluate
from .model import JointModel
from .optim import Adam, clip_global_norm


class DivergenceError(RuntimeError):
    """Training produced a non-finite loss."""


@dataclass
class EpochStats:
    epoch: int
    mean_loss: float
    dev: EvalReport


@dataclass
class TrainResult:
    model: JointModel
    checkpoint: Checkpoint
    best_epoch: int
    best_dev: EvalReport
    history: list[EpochStats] = field(default_factory=list)


def evaluate_model(model: JointModel, batches: list[Batch]) -> EvalReport:
    """Evaluation-mode decode over batches, scored against their own gold."""
    pred: list[tuple[str, list[str]]] = []
    gold: list[tuple[str, list[str]]] = []
    vocab = model.vocab
    for batch in batches:
        pred.extend(model.predict_batch(batch))
        for b in range(batch.size):
            n = batch.lengths[b]
            gold.append((
                vocab.id2intent[batch.intent_ids[b]],
                [vocab.id2slot[s] for s in batch.slot_ids[b, :n]],
            ))
    return evaluate(pred, gold)


def _improved(report: EvalReport, best: EvalReport | None) -> bool:
    """Strictly better overall accuracy, then strictly better slot F1.

    Strict comparisons make the earliest epoch win exact ties.
    """
    if best is None:
        return True
    if report.overall_accuracy != best.overall_accuracy:
        return report.overall_accuracy > best.overall_accuracy
    return report.slot_f1 > best.slot_f1


def train(
    config: Config,
    train_data: list[Utterance],
    dev_data: list[Utterance],
    vocab: Vocab | None = None,
    pretrained: np.ndarray | None = None,
    log: Callable[[str], None] | None = None,
) -> TrainResult:
    """Fit a model and return it wound back to its best dev epoch."""
    if not train_data or not dev_data:
        raise ConfigError("training and dev splits must both be non-empty")
    if vocab is None:
        vocab = build_vocab(train_data)
    model = JointModel(config, vocab, pretrained=pretrained)
    optimizer = Adam(model.params(), lr=config.lr,
                     weight_decay=config.weight_decay)
    dev_batches = make_batches(dev_data, vocab, config.batch_size)

    best_dev: EvalReport | None = None
    best_epoch = -1
    best_params: dict[str, np.ndarray] | None = None
    since_improvement = 0
    history: list[EpochStats] = []

    for epoch in range(config.max_epochs):
        batches = make_batches(train_data, vocab, config.batch_size,
                               shuffle_seed=config.seed + epoch)
        losses = []
        for bi, batch in enumerate(batches):
            loss = model.loss(batch, training=True)
            value = loss.item()
            if not np.isfinite(value):
                raise DivergenceError(
                    f"non-finite loss {value} at epoch {epoch}, batch {bi}"
                )
            optimizer.zero_grad()
            loss.backward()
            if config.clip_norm > 0:
                clip_global_norm(optimizer.params, config.clip_norm)
            optimizer.step()
            losses.append(value)

        dev_report = evaluate_model(model, dev_batches)
        history.append(EpochStats(epoch, float(np.mean(losses)), dev_report))
        if log is not None:
            log(
                f"epoch {epoch}: loss {np.mean(losses):.4f} "
                f"dev overall {dev_report.overall_accuracy:.4f} "
                f"slot F1 {dev_report.slot_f1:.4f} "
                f"intent acc {dev_report.intent_accuracy:.4f}"
            )

        if _improved(dev_report, best_dev):
            best_dev = dev_report
            best_epoch = epoch
            best_params = model.state_arrays()
            since_improvement = 0
        else:
            since_improvement += 1
        if since_improvement >= config.patience:
            break

    model.load_state_arrays(best_params)
    checkpoint = Checkpoint(
        config=config,
        vocab=vocab,
        params=best_params,
        best_dev=_report_dict(best_dev),
        epoch=best_epoch,
    )
    return TrainResult(model, checkpoint, best_epoch, best_dev, history)


def _report_dict(report: EvalReport) -> dict:
    return {
        "slot_f1": report.slot_f1,
        "slot_precision": report.slot_precision,
        "slot_recall": report.slot_recall,
        "intent_accuracy": report.intent_accuracy,
        "overall_accuracy": report.overall_accuracy,
        "gold_chunks": report.gold_chunks,
        "pred_chunks": report.pred_chunks,
        "correct_chunks": report.correct_chunks,
        "sentences": report.sentences,
        "correct_sentences": report.correct_sentences,
    }


def predict_dataset(model: JointModel, data: list[Utterance]
                    ) -> list[tuple[str, list[str]]]:
    """Decode a dataset in file order (unshuffled batches preserve it)."""
    batches = make_batches(data, model.vocab, model.config.batch_size)
    out: list[tuple[str, list[str]]] = []
    for batch in batches:
        out.extend(model.predict_batch(batch))
    return out
