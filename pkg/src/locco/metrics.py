"""Exact-match accuracy and exact set-match triple F1."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

from .logical_forms import LogicalForm, TripleSet


class LengthMismatch(ValueError):
    pass


@dataclass
class MatchReport:
    f1: float
    precision: float
    recall: float
    matched: int = 0
    predicted: int = 0
    gold: int = 0
    per_example: list[tuple[int, int, int]] = field(default_factory=list)

    def as_rows(self, iteration, split: str) -> list[tuple]:
        return [(iteration, split, name, getattr(self, name)) for name in ("f1", "precision", "recall")]


def _check(preds, golds):
    if len(preds) != len(golds):
        raise LengthMismatch(f"{len(preds)} predictions vs {len(golds)} gold forms")


def exact_match_accuracy(preds: Sequence[Optional[LogicalForm]], golds: Sequence[LogicalForm]) -> float:
    """Fraction of structurally equal pairs; a ``None`` prediction (unparseable) is wrong."""
    _check(preds, golds)
    if not golds:
        return 0.0
    return sum(p is not None and p == g for p, g in zip(preds, golds)) / len(golds)


def triple_f1(preds: Sequence[Optional[TripleSet]], golds: Sequence[TripleSet]) -> MatchReport:
    """Micro-averaged exact set match over all triples in the corpus.

    Triple components are whitespace-normalized on construction, so equality
    here is exact string equality after normalization.
    """
    _check(preds, golds)
    per_example = []
    for pred, gold in zip(preds, golds):
        p = pred.triples if pred is not None else frozenset()
        per_example.append((len(p & gold.triples), len(p), len(gold.triples)))
    matched = sum(m for m, _, _ in per_example)
    n_pred = sum(n for _, n, _ in per_example)
    n_gold = sum(n for _, _, n in per_example)
    precision = matched / n_pred if n_pred else 0.0
    recall = matched / n_gold if n_gold else 0.0
    f1 = 2 * precision * recall / (precision + recall) if matched else 0.0
    return MatchReport(f1, precision, recall, matched, n_pred, n_gold, per_example)


def format_metric_line(iteration, split: str, metric: str, value: float) -> str:
    return f"{iteration},{split},{metric},{value!r}"
