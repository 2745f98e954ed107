"""Multinomial Naive Bayes over word n-grams with add-alpha smoothing.

The smoothed vocabulary has one reserved slot for n-grams never seen in
training, so per class the conditional probabilities of all seen n-grams plus
the unseen slot sum to one.
"""
import abc
import json
import logging
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

from django.core.exceptions import ValidationError

from .ngrams import DEFAULT_N_SET, extract_ngrams

logger = logging.getLogger(__name__)

MODEL_FORMAT = 'codemix-ngram-nb'
MODEL_VERSION = 1


@dataclass(frozen=True)
class NGramNB:
    n_set: frozenset
    class_priors: dict
    cond_logprob: dict
    unseen_logprob: dict
    alpha: float
    vocab: frozenset

    def logprob(self, label, gram):
        return self.cond_logprob[label].get(gram, self.unseen_logprob[label])

    def to_dict(self):
        return {
            'format': MODEL_FORMAT,
            'version': MODEL_VERSION,
            'n_set': sorted(self.n_set),
            'alpha': self.alpha,
            'class_priors': {str(c): v for c, v in self.class_priors.items()},
            'unseen_logprob': {str(c): v for c, v in self.unseen_logprob.items()},
            'cond_logprob': {str(c): table for c, table in self.cond_logprob.items()},
        }

    @classmethod
    def from_dict(cls, payload):
        if payload.get('format') != MODEL_FORMAT or payload.get('version') != MODEL_VERSION:
            raise ValidationError(
                f"unsupported model file (format={payload.get('format')!r}, version={payload.get('version')!r})",
                code='model_format',
            )
        cond = {int(c): dict(table) for c, table in payload['cond_logprob'].items()}
        return cls(
            n_set=frozenset(payload['n_set']),
            class_priors={int(c): v for c, v in payload['class_priors'].items()},
            cond_logprob=cond,
            unseen_logprob={int(c): v for c, v in payload['unseen_logprob'].items()},
            alpha=payload['alpha'],
            vocab=frozenset(cond[0]),
        )


def fit_nb(train, n_set=DEFAULT_N_SET, alpha=1.0):
    if alpha <= 0:
        raise ValidationError(f"alpha must be positive, got {alpha}", code='alpha')
    doc_counts = Counter(s.label for s in train)
    if doc_counts[0] == 0 or doc_counts[1] == 0:
        raise ValidationError("Naive Bayes needs both classes in the training set", code='single_class')

    gram_counts = {0: Counter(), 1: Counter()}
    for sample in train:
        gram_counts[sample.label].update(extract_ngrams(sample.text, n_set))
    vocab = frozenset(gram_counts[0]) | frozenset(gram_counts[1])
    slots = len(vocab) + 1

    n_docs = doc_counts[0] + doc_counts[1]
    priors, cond, unseen = {}, {}, {}
    for label in (0, 1):
        priors[label] = math.log(doc_counts[label] / n_docs)
        denominator = sum(gram_counts[label].values()) + alpha * slots
        cond[label] = {g: math.log((gram_counts[label][g] + alpha) / denominator) for g in vocab}
        unseen[label] = math.log(alpha / denominator)

    logger.info("fitted n-gram NB: %d docs, %d n-grams, n_set=%s", n_docs, len(vocab), sorted(n_set))
    return NGramNB(frozenset(n_set), priors, cond, unseen, alpha, vocab)


def class_score(model, label, grams):
    return model.class_priors[label] + sum(count * model.logprob(label, g) for g, count in grams.items())


def predict_nb(model, text):
    """Return (label, log_odds); ties go to the negative class."""
    grams = extract_ngrams(text, model.n_set)
    log_odds = class_score(model, 1, grams) - class_score(model, 0, grams)
    return (1 if log_odds > 0 else 0), log_odds


def save_model(model, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(model.to_dict(), f, ensure_ascii=False, sort_keys=True)


def load_model(path):
    with open(path, encoding='utf-8') as f:
        return NGramNB.from_dict(json.load(f))


class TextClassifier(abc.ABC):
    """fit/predict surface shared by the statistical baselines."""

    name = 'base'

    @abc.abstractmethod
    def fit(self, samples):
        ...

    @abc.abstractmethod
    def predict(self, text):
        """Return (label, score) where score > 0 favours the positive class."""


class NaiveBayesClassifier(TextClassifier):
    name = 'nb'

    def __init__(self, n_set=DEFAULT_N_SET, alpha=1.0):
        self.n_set = frozenset(n_set)
        self.alpha = alpha
        self.model = None

    def fit(self, samples):
        self.model = fit_nb(samples, self.n_set, self.alpha)
        return self

    def predict(self, text):
        if self.model is None:
            raise ValidationError("classifier is not fitted", code='not_fitted')
        return predict_nb(self.model, text)


CLASSIFIERS = {NaiveBayesClassifier.name: NaiveBayesClassifier}
