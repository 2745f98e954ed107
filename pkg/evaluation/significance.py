"""Approximate randomization test on the positive-class F1 difference."""
import logging

import numpy as np
from django.core.exceptions import ValidationError

from .metrics import _as_labels

logger = logging.getLogger(__name__)

MIN_PERMUTATIONS = 1000
CHUNK = 1000


def _f1_rows(preds, golds):
    positive_gold = golds == 1
    tp = ((preds == 1) & positive_gold).sum(axis=-1)
    fp = ((preds == 1) & ~positive_gold).sum(axis=-1)
    fn = ((preds == 0) & positive_gold).sum(axis=-1)
    denominator = 2 * tp + fp + fn
    return np.where(denominator > 0, 2 * tp / np.maximum(denominator, 1), 0.0)


def significance(preds_a, preds_b, golds, n_perm=10000, seed=0):
    """Two-sided p-value; each permutation swaps a sample's two predictions with probability 1/2."""
    a, b, g = _as_labels(preds_a, 'preds_a'), _as_labels(preds_b, 'preds_b'), _as_labels(golds, 'golds')
    if not a.shape == b.shape == g.shape:
        raise ValidationError("prediction and gold vectors must have equal lengths", code='length')
    if n_perm < MIN_PERMUTATIONS:
        raise ValidationError(f"n_perm must be >= {MIN_PERMUTATIONS}, got {n_perm}", code='n_perm')

    observed = abs(float(_f1_rows(a, g) - _f1_rows(b, g)))
    rng = np.random.default_rng(seed)
    hits = 0
    for start in range(0, n_perm, CHUNK):
        size = min(CHUNK, n_perm - start)
        swap = rng.random((size, a.size)) < 0.5
        delta = _f1_rows(np.where(swap, b, a), g) - _f1_rows(np.where(swap, a, b), g)
        hits += int((np.abs(delta) >= observed - 1e-12).sum())

    p_value = (1 + hits) / (1 + n_perm)
    logger.debug("significance: |delta|=%.4f hits=%d p=%.4f", observed, hits, p_value)
    return p_value
