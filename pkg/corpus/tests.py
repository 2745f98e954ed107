import json
import os
import tempfile
from fractions import Fraction

from django.core.exceptions import ValidationError
from django.test import SimpleTestCase

from encoder.tokenizer import build_vocab

from .multitask import batch_iter, build_multitask_view, export_multitask_view, single_task_rows
from .samples import IGNORE, CorpusParseError, Origin, Sample, class_counts, load_jsonl, save_jsonl
from .splitting import SplitSpec, mix_native, stratified_split
from .synthetic import make_pattern_suite, make_pattern_task
from .text import tokenize
from .translation import Translator, translate_pool


def make_samples(positives, negatives, task='humor', prefix='cm', origin=Origin.CODE_MIXED.value):
    labels = [1] * positives + [0] * negatives
    return [
        Sample(id=f"{prefix}-{i}", text=f"text number {i}", task=task, label=label, origin=origin)
        for i, label in enumerate(labels)
    ]


def write_lines(directory, lines):
    path = os.path.join(directory, 'data.jsonl')
    with open(path, 'w', encoding='utf-8') as f:
        f.write('\n'.join(lines) + '\n')
    return path


RECORD = {'id': 'h1', 'text': 'Yaar kya joke hai', 'task': 'humor', 'label': 1,
          'origin': 'code_mixed', 'dataset': 'humor-cm'}


class SampleTests(SimpleTestCase):

    def test_rejects_labels_outside_binary_and_ignore(self):
        with self.assertRaises(ValidationError):
            Sample(id='x', text='hello', task='humor', label=2)
        with self.assertRaises(ValidationError):
            Sample(id='x', text='hello', task='humor', label=True)

    def test_rejects_non_integer_labels(self):
        for label in (1.0, 0.0, '1', None):
            with self.assertRaisesMessage(ValidationError, 'label must be one of'):
                Sample(id='x', text='hello', task='humor', label=label)

    def test_float_label_in_file_is_rejected(self):
        record = dict(RECORD, label=1.0)
        with tempfile.TemporaryDirectory() as tmp:
            path = write_lines(tmp, [json.dumps(record)])
            with self.assertRaisesMessage(ValidationError, 'line 1'):
                load_jsonl(path)

    def test_rejects_empty_text_and_unknown_task(self):
        with self.assertRaises(ValidationError):
            Sample(id='x', text='   ', task='humor', label=1)
        with self.assertRaises(ValidationError):
            Sample(id='x', text='hello', task='irony', label=1)

    def test_ignore_label_is_allowed(self):
        self.assertEqual(Sample(id='x', text='hello', task='hate', label=IGNORE).label, 999)

    def test_class_counts(self):
        self.assertEqual(class_counts(make_samples(3, 5)), (3, 5))


class LoadJsonlTests(SimpleTestCase):

    def test_round_trips_records_in_file_order(self):
        with tempfile.TemporaryDirectory() as tmp:
            samples = make_samples(2, 2)
            path = os.path.join(tmp, 'out', 'samples.jsonl')
            save_jsonl(samples, path)
            self.assertEqual(load_jsonl(path), samples)

    def test_malformed_line_names_line_number(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = write_lines(tmp, [json.dumps(RECORD), '{not json'])
            with self.assertRaisesMessage(CorpusParseError, 'line 2'):
                load_jsonl(path)

    def test_missing_field_is_reported(self):
        record = dict(RECORD)
        del record['origin']
        with tempfile.TemporaryDirectory() as tmp:
            path = write_lines(tmp, [json.dumps(record)])
            with self.assertRaisesMessage(CorpusParseError, 'missing fields origin'):
                load_jsonl(path)

    def test_duplicate_ids_are_rejected(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = write_lines(tmp, [json.dumps(RECORD), json.dumps(RECORD)])
            with self.assertRaisesMessage(ValidationError, "duplicate id 'h1'"):
                load_jsonl(path)

    def test_invalid_label_carries_line_number(self):
        record = dict(RECORD, label=5)
        with tempfile.TemporaryDirectory() as tmp:
            path = write_lines(tmp, [json.dumps(record)])
            with self.assertRaisesMessage(ValidationError, 'line 1'):
                load_jsonl(path)


class TokenizeTests(SimpleTestCase):

    def test_lowercases_and_strips_edge_punctuation(self):
        self.assertEqual(tokenize('Wah!!! Kya "BAAT" hai... , :)'), ['wah', 'kya', 'baat', 'hai'])

    def test_keeps_inner_punctuation(self):
        self.assertEqual(tokenize("don't co-op"), ["don't", 'co-op'])


class StratifiedSplitTests(SimpleTestCase):

    def setUp(self):
        self.samples = make_samples(1759, 1192)

    def test_default_rounding_floors_val_and_test(self):
        self.assertEqual(SplitSpec().rounding, 'floor')
        train, val, test = stratified_split(self.samples, SplitSpec())
        self.assertEqual(class_counts(train), (1409, 954))
        self.assertEqual(class_counts(val), (175, 119))
        self.assertEqual(class_counts(test), (175, 119))

    def test_nearest_rounding_matches_published_val_and_test(self):
        # Published humor split: train 1407/953, val and test 176/119 (2951 total).
        # Those parts add up to 2950, so train keeps one more negative here.
        train, val, test = stratified_split(self.samples, SplitSpec(rounding='nearest'))
        self.assertEqual(class_counts(val), (176, 119))
        self.assertEqual(class_counts(test), (176, 119))
        self.assertEqual(class_counts(train), (1407, 954))

    def test_sarcasm_test_counts(self):
        sarcasm = make_samples(504, 4746, task='sarcasm')
        _, val, test = stratified_split(sarcasm, SplitSpec())
        self.assertEqual(class_counts(val), (50, 474))
        self.assertEqual(class_counts(test), (50, 474))
        _, _, test = stratified_split(sarcasm, SplitSpec(rounding='nearest'))
        self.assertEqual(class_counts(test), (50, 475))

    def test_parts_partition_input_and_keep_its_order(self):
        parts = stratified_split(self.samples, SplitSpec(seed=7))
        ids = [s.id for part in parts for s in part]
        self.assertCountEqual(ids, [s.id for s in self.samples])
        position = {s.id: i for i, s in enumerate(self.samples)}
        for part in parts:
            indices = [position[s.id] for s in part]
            self.assertEqual(indices, sorted(indices))

    def test_same_seed_same_split_and_other_seed_differs(self):
        first = stratified_split(self.samples, SplitSpec(seed=3))
        again = stratified_split(self.samples, SplitSpec(seed=3))
        other = stratified_split(self.samples, SplitSpec(seed=4))
        self.assertEqual(first, again)
        self.assertNotEqual([s.id for s in first[1]], [s.id for s in other[1]])

    def test_ratios_must_sum_to_one(self):
        with self.assertRaises(ValidationError):
            SplitSpec(Fraction(8, 10), Fraction(1, 10), Fraction(2, 10))

    def test_float_ratios_are_exact(self):
        spec = SplitSpec(0.8, 0.1, 0.1)
        self.assertEqual(spec.val_ratio, Fraction(1, 10))

    def test_empty_class_is_an_error(self):
        with self.assertRaisesMessage(ValidationError, 'negative'):
            stratified_split(make_samples(10, 0), SplitSpec())


class MixNativeTests(SimpleTestCase):

    def setUp(self):
        self.cm_train = make_samples(1407, 953)
        self.pool = make_samples(1500, 1500, prefix='en', origin=Origin.NATIVE_EN.value)

    def test_humor_mixing_counts(self):
        mixed = mix_native(self.cm_train, self.pool, 1180, seed=13)
        self.assertEqual(class_counts(mixed), (2587, 2133))
        self.assertEqual(mixed[:len(self.cm_train)], self.cm_train)
        self.assertEqual(len({s.id for s in mixed}), len(mixed))

    def test_zero_per_class_is_identity(self):
        self.assertEqual(mix_native(self.cm_train, self.pool, 0, seed=1), self.cm_train)

    def test_shortfall_names_missing_count(self):
        with self.assertRaisesMessage(ValidationError, 'short by 998499'):
            mix_native(self.cm_train, self.pool, 999999, seed=1)

    def test_samples_already_in_train_are_not_drawn(self):
        pool = self.cm_train[:5] + make_samples(5, 5, prefix='en', origin=Origin.NATIVE_EN.value)
        mixed = mix_native(self.cm_train, pool, 5, seed=2)
        self.assertEqual(len({s.id for s in mixed}), len(mixed))
        self.assertEqual(class_counts(mixed), (1412, 958))

    def test_deterministic_for_seed(self):
        self.assertEqual(mix_native(self.cm_train, self.pool, 10, 5), mix_native(self.cm_train, self.pool, 10, 5))


class MultiTaskViewTests(SimpleTestCase):

    def setUp(self):
        self.sets = {
            'humor': make_samples(2, 1, task='humor', prefix='h'),
            'sarcasm': make_samples(1, 1, task='sarcasm', prefix='s'),
            'hate': make_samples(1, 2, task='hate', prefix='x'),
        }

    def test_every_row_has_exactly_one_gold_label(self):
        rows = build_multitask_view(self.sets)
        self.assertEqual(len(rows), 8)
        for row in rows:
            self.assertEqual(list(row.labels), ['humor', 'sarcasm', 'hate'])
            self.assertEqual(sum(1 for v in row.labels.values() if v != IGNORE), 1)
        self.assertEqual(rows[3].labels, {'humor': IGNORE, 'sarcasm': 1, 'hate': IGNORE})
        self.assertEqual(rows[3].task, 'sarcasm')

    def test_needs_two_tasks(self):
        with self.assertRaises(ValidationError):
            build_multitask_view({'humor': self.sets['humor']})

    def test_export_writes_literal_ignore_label(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'view.jsonl')
            export_multitask_view(build_multitask_view(self.sets), path)
            with open(path, encoding='utf-8') as f:
                first = json.loads(f.readline())
        self.assertEqual(first['sarcasm'], 999)
        self.assertEqual(first['humor'], 1)

    def test_single_task_rows_keep_one_slot(self):
        rows = single_task_rows(self.sets['hate'])
        self.assertEqual(rows[0].labels, {'hate': 1})


class BatchIterTests(SimpleTestCase):

    def setUp(self):
        suite = make_pattern_suite(['humor', 'sarcasm'], 10, seed=1)
        self.rows = build_multitask_view(suite)
        self.tokenizer = build_vocab([s for samples in suite.values() for s in samples])

    def test_covers_every_row_once_with_short_last_batch(self):
        batches = list(batch_iter(self.rows, 6, seed=3, tokenizer=self.tokenizer, seq_len=12))
        self.assertEqual([len(b) for b in batches], [6, 6, 6, 2])
        seen = [i for b in batches for i in b.row_indices]
        self.assertCountEqual(seen, range(len(self.rows)))
        self.assertEqual(batches[0].token_ids.shape, (6, 12))
        self.assertEqual(batches[0].tasks, ['humor', 'sarcasm'])

    def test_order_depends_on_seed_only(self):
        first = [b.row_indices for b in batch_iter(self.rows, 4, 5, self.tokenizer, 12)]
        again = [b.row_indices for b in batch_iter(self.rows, 4, 5, self.tokenizer, 12)]
        self.assertEqual(first, again)

    def test_tasks_share_batches(self):
        suite = make_pattern_suite(['humor', 'sarcasm'], 32, seed=2)
        rows = build_multitask_view(suite)
        tokenizer = build_vocab([s for samples in suite.values() for s in samples])
        for seed in range(100):
            mixed = [
                len({rows[i].task for i in batch.row_indices}) > 1
                for batch in batch_iter(rows, 8, seed, tokenizer, 12)
            ]
            self.assertTrue(any(mixed), f"seed {seed}")

    def test_bad_batch_size_fails_before_iteration(self):
        with self.assertRaises(ValidationError):
            batch_iter(self.rows, 0, 1, self.tokenizer, 12)


class SyntheticTests(SimpleTestCase):

    def test_balanced_and_deterministic(self):
        samples = make_pattern_task('humor', 20, seed=4)
        self.assertEqual(class_counts(samples), (10, 10))
        self.assertEqual(samples, make_pattern_task('humor', 20, seed=4))

    def test_task_vocabularies_are_disjoint(self):
        suite = make_pattern_suite(['humor', 'hate'], 10, seed=0)
        humor = {t for s in suite['humor'] for t in tokenize(s.text)}
        hate = {t for s in suite['hate'] for t in tokenize(s.text)}
        self.assertFalse(humor & hate)


class ShoutingTranslator(Translator):

    def translate(self, text, source='en', target='hi'):
        return text.upper()


class TranslationTests(SimpleTestCase):

    def test_translated_pool_keeps_labels(self):
        pool = make_samples(1, 1, prefix='en', origin=Origin.NATIVE_EN.value)
        translated = translate_pool(pool, ShoutingTranslator())
        self.assertEqual([s.id for s in translated], ['en-0-hi', 'en-1-hi'])
        self.assertEqual([s.label for s in translated], [1, 0])
        self.assertEqual(translated[0].origin, 'native_hi_translated')
        self.assertEqual(translated[0].text, 'TEXT NUMBER 0')
