"""Class-conditional word statistics for a labeled dataset.

The KL value is the symmetrized (Jeffreys) divergence between add-alpha
smoothed word distributions of the positive and negative class.
"""
import json
import logging
from collections import Counter
from dataclasses import dataclass, asdict

import numpy as np
from django.core.exceptions import ValidationError

from corpus.samples import class_counts
from corpus.text import tokenize

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class WordDist:
    probs: dict
    vocab: frozenset
    alpha: float

    def vector(self, order):
        return np.array([self.probs[w] for w in order], dtype=np.float64)


@dataclass(frozen=True)
class Lexicon:
    terms: frozenset

    def __post_init__(self):
        if any(not term.strip() for term in self.terms):
            raise ValidationError("lexicon terms must be non-empty", code='lexicon')

    @classmethod
    def from_terms(cls, terms):
        return cls(frozenset(term.strip().lower() for term in terms))

    @classmethod
    def load(cls, path):
        with open(path, encoding='utf-8') as f:
            return cls.from_terms(line for line in f if line.strip())


@dataclass
class StatReport:
    positives: int
    negatives: int
    kl: float
    hurtful_fraction_pos: float
    hurtful_fraction_neg: float
    alpha: float = 1.0
    vocab_size: int = 0

    def __post_init__(self):
        if self.kl < 0:
            raise ValidationError(f"kl must be non-negative, got {self.kl}", code='kl')

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, payload):
        return cls(**json.loads(payload))


def corpus_vocab(samples):
    vocab = set()
    for sample in samples:
        vocab.update(tokenize(sample.text))
    return vocab


def word_distribution(samples, label, alpha=1.0, union_vocab=None):
    """Add-alpha smoothed word distribution of one class over ``union_vocab``."""
    if alpha <= 0:
        raise ValidationError(f"alpha must be positive, got {alpha}", code='alpha')
    members = [s for s in samples if s.label == label]
    if not members:
        raise ValidationError(f"no samples with label {label}", code='empty_class')

    counts = Counter()
    for sample in members:
        counts.update(tokenize(sample.text))
    vocab = frozenset(union_vocab) if union_vocab is not None else frozenset(counts)
    unknown = set(counts) - vocab
    if unknown:
        raise ValidationError(f"union vocabulary misses {len(unknown)} tokens of class {label}", code='vocab')

    total = sum(counts.values())
    denominator = total + alpha * len(vocab)
    probs = {word: (counts[word] + alpha) / denominator for word in vocab}
    return WordDist(probs=probs, vocab=vocab, alpha=alpha)


def symmetric_kl(p, q):
    """KL(p||q) + KL(q||p), natural log."""
    if p.vocab != q.vocab:
        raise ValidationError("distributions are over different vocabularies", code='vocab')
    order = sorted(p.vocab)
    pv, qv = p.vector(order), q.vector(order)
    log_ratio = np.log(pv) - np.log(qv)
    value = float(np.sum((pv - qv) * log_ratio))
    return max(value, 0.0)


def _contains(tokens, term_tokens):
    width = len(term_tokens)
    return any(tokens[i:i + width] == term_tokens for i in range(len(tokens) - width + 1))


def hurtful_fraction(samples, lexicon, label):
    members = [s for s in samples if s.label == label]
    if not members:
        raise ValidationError(f"no samples with label {label}", code='empty_class')
    terms = [tokenize(term) for term in lexicon.terms]
    terms = [t for t in terms if t]
    single = {t[0] for t in terms if len(t) == 1}
    multi = [t for t in terms if len(t) > 1]

    hits = 0
    for sample in members:
        tokens = tokenize(sample.text)
        if single.intersection(tokens) or any(_contains(tokens, t) for t in multi):
            hits += 1
    return hits / len(members)


def dataset_report(samples, lexicon, alpha=1.0):
    vocab = corpus_vocab(samples)
    pos = word_distribution(samples, 1, alpha, vocab)
    neg = word_distribution(samples, 0, alpha, vocab)
    positives, negatives = class_counts(samples)
    report = StatReport(
        positives=positives,
        negatives=negatives,
        kl=symmetric_kl(pos, neg),
        hurtful_fraction_pos=hurtful_fraction(samples, lexicon, 1),
        hurtful_fraction_neg=hurtful_fraction(samples, lexicon, 0),
        alpha=alpha,
        vocab_size=len(vocab),
    )
    logger.info("dataset report: P=%d N=%d kl=%.4f", positives, negatives, report.kl)
    return report

