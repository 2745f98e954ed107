import os
import random
import tempfile

from django.core.exceptions import ValidationError
from django.test import SimpleTestCase

from corpus.samples import Sample

from .metrics import breakdown_by_length, length_bucket, mark_significant, prf1, score_abstentions
from .predictions import align, read_predictions, write_predictions
from .significance import significance


def counted(preds, golds):
    tp = sum(1 for p, g in zip(preds, golds) if p == 1 and g == 1)
    fp = sum(1 for p, g in zip(preds, golds) if p == 1 and g == 0)
    fn = sum(1 for p, g in zip(preds, golds) if p == 0 and g == 1)
    tn = sum(1 for p, g in zip(preds, golds) if p == 0 and g == 0)
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return tp, fp, fn, tn, precision, recall, f1


class PRF1Tests(SimpleTestCase):

    def test_matches_brute_force_counting(self):
        rng = random.Random(0)
        for _ in range(1000):
            n = rng.randint(1, 30)
            preds = [rng.randint(0, 1) for _ in range(n)]
            golds = [rng.randint(0, 1) for _ in range(n)]
            report = prf1(preds, golds)
            self.assertEqual(
                (report.tp, report.fp, report.fn, report.tn, report.precision, report.recall, report.f1),
                counted(preds, golds),
            )

    def test_all_positive_sarcasm_test_split(self):
        golds = [1] * 50 + [0] * 475
        report = prf1([1] * len(golds), golds)
        self.assertAlmostEqual(report.f1, 0.1739, delta=5e-4)
        self.assertEqual(report.recall, 1.0)
        self.assertEqual(report.support, 525)

    def test_no_positive_predictions_gives_zero(self):
        report = prf1([0, 0, 0], [1, 0, 1])
        self.assertEqual((report.precision, report.recall, report.f1), (0.0, 0.0, 0.0))

    def test_invalid_inputs(self):
        with self.assertRaises(ValidationError):
            prf1([], [])
        with self.assertRaises(ValidationError):
            prf1([1, 0], [1])
        with self.assertRaises(ValidationError):
            prf1([1, 2], [1, 0])


class AbstentionTests(SimpleTestCase):

    def test_abstentions_count_as_wrong(self):
        self.assertEqual(score_abstentions([None, 1, None], [1, 1, 0]), [0, 1, 1])
        report = prf1(score_abstentions([None, None], [1, 0]), [1, 0])
        self.assertEqual(report.f1, 0.0)

    def test_significance_marker(self):
        self.assertEqual(mark_significant(0.01), '*')
        self.assertEqual(mark_significant(0.05), '')
        self.assertEqual(mark_significant(None), '')


class LengthBreakdownTests(SimpleTestCase):

    def test_bucket_names(self):
        self.assertEqual([length_bucket(n) for n in (0, 10, 11, 20, 30, 31)],
                         ['0-10', '0-10', '11-20', '11-20', '21-30', '>30'])

    def test_reports_per_bucket_in_order(self):
        texts = ['short text', ' '.join(['word'] * 15), 'another short one', ' '.join(['w'] * 40)]
        buckets = breakdown_by_length([1, 0, 1, 1], [1, 1, 0, 1], texts)
        self.assertEqual(list(buckets), ['0-10', '11-20', '>30'])
        self.assertEqual(buckets['0-10'].tp, 1)
        self.assertEqual(buckets['0-10'].fp, 1)
        self.assertEqual(buckets['11-20'].fn, 1)


class SignificanceTests(SimpleTestCase):

    def test_identical_systems_give_p_one(self):
        rng = random.Random(1)
        preds = [rng.randint(0, 1) for _ in range(50)]
        golds = [rng.randint(0, 1) for _ in range(50)]
        self.assertEqual(significance(preds, list(preds), golds, n_perm=1000), 1.0)

    def test_perfect_against_constant_is_significant(self):
        golds = [1, 0] * 100
        self.assertLess(significance(golds, [0] * 200, golds, n_perm=10000, seed=0), 0.05)

    def test_deterministic_for_seed(self):
        rng = random.Random(2)
        golds = [rng.randint(0, 1) for _ in range(60)]
        a = [g if rng.random() < 0.8 else 1 - g for g in golds]
        b = [g if rng.random() < 0.7 else 1 - g for g in golds]
        self.assertEqual(significance(a, b, golds, seed=3), significance(a, b, golds, seed=3))

    def test_needs_enough_permutations(self):
        with self.assertRaises(ValidationError):
            significance([1], [0], [1], n_perm=999)


class PredictionFileTests(SimpleTestCase):

    def test_written_predictions_align_with_gold_order(self):
        gold = [Sample(id=f"s{i}", text=f"text {i}", task='humor', label=i % 2) for i in range(3)]
        records = [{'id': 's2', 'task': 'humor', 'pred': 0, 'prob': 0.2},
                   {'id': 's0', 'task': 'humor', 'pred': 1, 'prob': 0.9},
                   {'id': 's1', 'task': 'humor', 'pred': 1, 'prob': 0.7}]
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'preds.jsonl')
            write_predictions(records, path)
            loaded = read_predictions(path)
        self.assertEqual(align(loaded, gold), [1, 1, 0])
        with self.assertRaisesMessage(ValidationError, "'s2'"):
            align(loaded[:2], gold)
