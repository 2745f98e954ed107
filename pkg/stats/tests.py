import math
import random

from django.core.exceptions import ValidationError
from django.test import SimpleTestCase

from corpus.samples import Sample

from .distributions import (
    Lexicon, StatReport, WordDist, corpus_vocab, dataset_report, hurtful_fraction, symmetric_kl,
    word_distribution,
)


def kl_oracle(p, q):
    total = 0.0
    for word in p.vocab:
        total += p.probs[word] * math.log(p.probs[word] / q.probs[word])
        total += q.probs[word] * math.log(q.probs[word] / p.probs[word])
    return total


def labeled(texts_and_labels):
    return [Sample(id=str(i), text=text, task='hate', label=label) for i, (text, label) in enumerate(texts_and_labels)]


class SymmetricKLTests(SimpleTestCase):

    def test_worked_example(self):
        vocab = frozenset({'a', 'b'})
        p = WordDist({'a': 0.5, 'b': 0.5}, vocab, 1.0)
        q = WordDist({'a': 0.9, 'b': 0.1}, vocab, 1.0)
        self.assertAlmostEqual(symmetric_kl(p, q), 0.8789, delta=1e-3)

    def test_identical_distributions_give_zero(self):
        samples = labeled([('same words here', 1), ('same words here', 0)])
        vocab = corpus_vocab(samples)
        p = word_distribution(samples, 1, union_vocab=vocab)
        q = word_distribution(samples, 0, union_vocab=vocab)
        self.assertEqual(symmetric_kl(p, q), 0.0)

    def test_matches_summation_oracle_on_random_corpora(self):
        rng = random.Random(0)
        words = ['w%d' % i for i in range(12)]
        for _ in range(100):
            pairs = [(' '.join(rng.choices(words, k=rng.randint(1, 6))), label) for label in (0, 1)]
            pairs += [(' '.join(rng.choices(words, k=rng.randint(1, 6))), rng.randint(0, 1)) for _ in range(6)]
            samples = labeled(pairs)
            vocab = corpus_vocab(samples)
            alpha = rng.choice([0.5, 1.0, 2.0])
            p = word_distribution(samples, 1, alpha, vocab)
            q = word_distribution(samples, 0, alpha, vocab)
            self.assertAlmostEqual(symmetric_kl(p, q), kl_oracle(p, q), delta=1e-9)

    def test_different_vocabularies_are_rejected(self):
        p = WordDist({'a': 1.0}, frozenset({'a'}), 1.0)
        q = WordDist({'b': 1.0}, frozenset({'b'}), 1.0)
        with self.assertRaises(ValidationError):
            symmetric_kl(p, q)


class WordDistributionTests(SimpleTestCase):

    def test_smoothed_probabilities_sum_to_one(self):
        samples = labeled([('bhai mast joke', 1), ('boring meeting', 0)])
        dist = word_distribution(samples, 1, alpha=1.0, union_vocab=corpus_vocab(samples))
        self.assertAlmostEqual(sum(dist.probs.values()), 1.0, places=12)
        self.assertAlmostEqual(dist.probs['boring'], 1 / 8)
        self.assertAlmostEqual(dist.probs['mast'], 2 / 8)

    def test_alpha_must_be_positive(self):
        with self.assertRaises(ValidationError):
            word_distribution(labeled([('x', 1)]), 1, alpha=0)

    def test_missing_class_is_an_error(self):
        with self.assertRaises(ValidationError):
            word_distribution(labeled([('x', 1)]), 0)


class HurtfulFractionTests(SimpleTestCase):

    def test_single_and_multiword_terms(self):
        samples = labeled([
            ('tu pagal hai', 1),
            ('ekdum bakwas insaan', 1),
            ('bakwas', 1),
            ('accha din', 1),
            ('nice day', 0),
        ])
        lexicon = Lexicon.from_terms(['Pagal', 'bakwas insaan'])
        self.assertEqual(hurtful_fraction(samples, lexicon, 1), 0.5)
        self.assertEqual(hurtful_fraction(samples, lexicon, 0), 0.0)

    def test_empty_lexicon_matches_nothing(self):
        samples = labeled([('tu pagal hai', 1), ('nice day', 0)])
        self.assertEqual(hurtful_fraction(samples, Lexicon.from_terms([]), 1), 0.0)

    def test_fraction_grows_with_the_lexicon(self):
        samples = labeled([('tu pagal hai', 1), ('ekdum bakwas insaan', 1), ('ullu ka pattha', 1), ('accha din', 1)])
        terms = ['pagal', 'bakwas insaan', 'ullu', 'din']
        fractions = [hurtful_fraction(samples, Lexicon.from_terms(terms[:k]), 1) for k in range(len(terms) + 1)]
        self.assertEqual(fractions, [0.0, 0.25, 0.5, 0.75, 1.0])
        self.assertEqual(fractions, sorted(fractions))


class DatasetReportTests(SimpleTestCase):

    def test_report_fields_and_json_round_trip(self):
        samples = labeled([('tu pagal hai', 1), ('pagal log', 1), ('nice day', 0)])
        report = dataset_report(samples, Lexicon.from_terms(['pagal']))
        self.assertEqual((report.positives, report.negatives), (2, 1))
        self.assertEqual(report.hurtful_fraction_pos, 1.0)
        self.assertEqual(report.vocab_size, 6)
        self.assertGreater(report.kl, 0)
        self.assertEqual(StatReport.from_json(report.to_json()), report)
