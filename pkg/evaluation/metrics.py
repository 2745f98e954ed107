"""Positive-class precision, recall and F1."""
from dataclasses import dataclass, asdict

import numpy as np
from django.core.exceptions import ValidationError
from sklearn.metrics import confusion_matrix

from corpus.text import tokenize

DEFAULT_LENGTH_EDGES = (10, 20, 30)


@dataclass
class EvalReport:
    tp: int
    fp: int
    fn: int
    tn: int
    precision: float
    recall: float
    f1: float
    p_value: float = None

    @property
    def support(self):
        return self.tp + self.fp + self.fn + self.tn

    def to_dict(self):
        return asdict(self)


def _as_labels(values, name):
    array = np.asarray(values)
    if array.ndim != 1 or array.size == 0:
        raise ValidationError(f"{name} must be a non-empty vector", code='shape')
    if not np.isin(array, (0, 1)).all():
        raise ValidationError(f"{name} must only contain 0 and 1", code='label')
    return array.astype(np.int64)


def prf1(preds, golds):
    preds, golds = _as_labels(preds, 'preds'), _as_labels(golds, 'golds')
    if preds.shape != golds.shape:
        raise ValidationError(f"{len(preds)} predictions for {len(golds)} gold labels", code='length')
    tn, fp, fn, tp = (int(v) for v in confusion_matrix(golds, preds, labels=[0, 1]).ravel())
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return EvalReport(tp=tp, fp=fp, fn=fn, tn=tn, precision=precision, recall=recall, f1=f1)


def score_abstentions(preds, golds):
    """Replace abstentions (None) by the wrong label so they count as errors."""
    return [(1 - gold) if pred is None else pred for pred, gold in zip(preds, golds)]


def mark_significant(p_value, alpha=0.05):
    return '*' if p_value is not None and p_value < alpha else ''


def length_bucket(n_tokens, edges=DEFAULT_LENGTH_EDGES):
    lower = 0
    for edge in edges:
        if n_tokens <= edge:
            return f"{lower + 1 if lower else 0}-{edge}"
        lower = edge
    return f">{edges[-1]}"


def breakdown_by_length(preds, golds, texts, edges=DEFAULT_LENGTH_EDGES):
    """EvalReport per context-length bucket (token counts), in bucket order."""
    if not len(preds) == len(golds) == len(texts):
        raise ValidationError("preds, golds and texts must be aligned", code='length')
    buckets = {}
    for pred, gold, text in zip(preds, golds, texts):
        buckets.setdefault(length_bucket(len(tokenize(text)), edges), []).append((pred, gold))
    order = [length_bucket(e, edges) for e in edges] + [f">{edges[-1]}"]
    return {
        name: prf1([p for p, _ in buckets[name]], [g for _, g in buckets[name]])
        for name in order if name in buckets
    }
