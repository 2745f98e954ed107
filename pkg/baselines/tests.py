import math
import os
import random
import tempfile
from collections import Counter

from django.core.exceptions import ValidationError
from django.test import SimpleTestCase

from corpus.samples import Sample

from .naive_bayes import CLASSIFIERS, fit_nb, load_model, predict_nb, save_model
from .ngrams import extract_ngrams


def labeled(pairs):
    return [Sample(id=str(i), text=text, task='humor', label=label) for i, (text, label) in enumerate(pairs)]


def posterior_oracle(train, text, n_set, alpha):
    """Log posterior per class by direct counting, no shared code with the model."""
    counts = {0: Counter(), 1: Counter()}
    docs = Counter()
    for sample in train:
        docs[sample.label] += 1
        counts[sample.label].update(extract_ngrams(sample.text, n_set))
    vocab = set(counts[0]) | set(counts[1])
    scores = {}
    for label in (0, 1):
        total = sum(counts[label].values())
        score = math.log(docs[label] / len(train))
        for gram, count in extract_ngrams(text, n_set).items():
            seen = counts[label][gram] if gram in vocab else 0
            score += count * math.log((seen + alpha) / (total + alpha * (len(vocab) + 1)))
        scores[label] = score
    return scores


class NGramTests(SimpleTestCase):

    def test_extracts_joined_ngrams(self):
        grams = extract_ngrams('Bhai, kya baat!', {1, 2})
        self.assertEqual(grams, Counter({'bhai': 1, 'kya': 1, 'baat': 1, 'bhai_kya': 1, 'kya_baat': 1}))

    def test_short_text_has_no_long_grams(self):
        self.assertEqual(extract_ngrams('hello', {3}), Counter())


class NaiveBayesTests(SimpleTestCase):

    def setUp(self):
        self.train = labeled([
            ('bhai kya joke hai', 1),
            ('hasi nahi ruk rahi', 1),
            ('kal meeting hai', 0),
            ('train late hai', 0),
        ])

    def test_conditional_probabilities_include_unseen_slot(self):
        model = fit_nb(self.train, n_set={1})
        for label in (0, 1):
            mass = sum(math.exp(v) for v in model.cond_logprob[label].values())
            mass += math.exp(model.unseen_logprob[label])
            self.assertAlmostEqual(mass, 1.0, places=12)

    def test_class_priors_follow_document_counts(self):
        model = fit_nb(self.train + labeled([('aur ek joke', 1), ('hasi', 1)]), n_set={1})
        self.assertAlmostEqual(model.class_priors[1], math.log(4 / 6))
        skewed = fit_nb(labeled([('a', 1), ('b', 1), ('c', 1), ('d', 0)]), n_set={1})
        self.assertAlmostEqual(skewed.class_priors[1], math.log(3 / 4))
        self.assertAlmostEqual(skewed.class_priors[0], math.log(1 / 4))

    def test_predicts_training_classes(self):
        model = fit_nb(self.train)
        self.assertEqual(predict_nb(model, 'kya joke')[0], 1)
        self.assertEqual(predict_nb(model, 'meeting late')[0], 0)

    def test_unseen_text_scores_with_unseen_slot(self):
        model = fit_nb(labeled([('a', 1), ('b', 0), ('c', 0)]), n_set={1})
        label, log_odds = predict_nb(model, 'zzz')
        self.assertEqual(label, 0)
        # priors 1/3 vs 2/3, unseen slot alpha/(1 + 4) vs alpha/(2 + 4)
        self.assertAlmostEqual(log_odds, math.log(1 / 2) + math.log(6 / 5))

    def test_single_class_training_set_is_rejected(self):
        with self.assertRaises(ValidationError):
            fit_nb(labeled([('a', 1), ('b', 1)]))

    def test_duplicating_training_set_keeps_labels(self):
        doubled = self.train + labeled([(s.text, s.label) for s in self.train])
        once, twice = fit_nb(self.train), fit_nb(doubled)
        for text in ('kya joke hai', 'meeting hai', 'naya text'):
            self.assertEqual(predict_nb(once, text)[0], predict_nb(twice, text)[0])

    def test_matches_posterior_oracle_on_random_documents(self):
        rng = random.Random(7)
        words = ['w%d' % i for i in range(10)]
        train = labeled([(' '.join(rng.choices(words, k=rng.randint(1, 5))), i % 2) for i in range(30)])
        n_set = {1, 2}
        model = fit_nb(train, n_set=n_set, alpha=1.0)
        for _ in range(100):
            text = ' '.join(rng.choices(words, k=rng.randint(1, 6)))
            scores = posterior_oracle(train, text, n_set, 1.0)
            expected = 1 if scores[1] - scores[0] > 0 else 0
            label, log_odds = predict_nb(model, text)
            self.assertEqual(label, expected)
            self.assertAlmostEqual(log_odds, scores[1] - scores[0], places=9)

    def test_saved_model_predicts_the_same(self):
        model = fit_nb(self.train)
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'nb.json')
            save_model(model, path)
            loaded = load_model(path)
        self.assertEqual(loaded.vocab, model.vocab)
        self.assertEqual(predict_nb(loaded, 'kya joke'), predict_nb(model, 'kya joke'))

    def test_classifier_registry(self):
        classifier = CLASSIFIERS['nb']().fit(self.train)
        self.assertEqual(classifier.predict('kya joke')[0], 1)

    def test_unfitted_classifier_raises(self):
        with self.assertRaises(ValidationError):
            CLASSIFIERS['nb']().predict('text')
