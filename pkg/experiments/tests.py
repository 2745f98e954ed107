import io
import json
import os
import tempfile
from unittest import mock

import torch
from django.test import TestCase

from corpus.samples import Origin, Sample, save_jsonl
from corpus.synthetic import make_pattern_task
from mtl.checkpoints import load_model
from mtl.network import build_mtl_model
from prompting.clients import CompletionClient

from .cli import run
from .models import ExperimentRun


class RejectingClient(CompletionClient):
    name = 'rejecting'

    def send(self, prompt):
        raise PermissionError('401 invalid api key')


class SilentClient(CompletionClient):
    name = 'silent'

    def send(self, prompt):
        raise TimeoutError('no answer')


class ExperimentCommandTests(TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)

    def path(self, *parts):
        return os.path.join(self.tmp.name, *parts)

    def invoke(self, *argv):
        stdout, stderr = io.StringIO(), io.StringIO()
        code = run(list(argv), stdout=stdout, stderr=stderr)
        output = stdout.getvalue().strip()
        return code, (json.loads(output) if output else None), stderr.getvalue()

    def write_humor(self, n=60):
        path = self.path('humor.jsonl')
        save_jsonl(make_pattern_task('humor', n, seed=1), path)
        return path

    def test_split_baseline_eval_and_significance(self):
        code, result, _ = self.invoke('split', '--data', self.write_humor(), '--out', self.path('split'))
        self.assertEqual(code, 0)
        self.assertEqual(result['summary']['val'], {'positives': 3, 'negatives': 3})

        code, result, _ = self.invoke('train-baseline', '--train', self.path('split', 'train.jsonl'),
                                      '--test', self.path('split', 'test.jsonl'), '--out', self.path('nb'))
        self.assertEqual(code, 0)
        self.assertGreaterEqual(result['summary']['report']['f1'], 0.8)
        self.assertTrue(os.path.exists(self.path('nb', 'model.json')))
        self.assertTrue(os.path.exists(self.path('nb', 'manifest.json')))

        code, result, _ = self.invoke('eval', '--predictions', self.path('nb', 'predictions.jsonl'),
                                      '--gold', self.path('split', 'test.jsonl'), '--by-length',
                                      '--out', self.path('eval'))
        self.assertEqual(code, 0)
        self.assertEqual(list(result['summary']['by_length']), ['0-10'])

        predictions = self.path('nb', 'predictions.jsonl')
        code, result, _ = self.invoke('significance', '--a', predictions, '--b', predictions,
                                      '--gold', self.path('split', 'test.jsonl'), '--n-perm', '1000',
                                      '--out', self.path('sig'))
        self.assertEqual(code, 0)
        self.assertEqual(result['summary']['p_value'], 1.0)
        self.assertEqual(result['summary']['significant'], '')

    def test_split_outputs_are_reproducible(self):
        data = self.write_humor()
        self.invoke('split', '--data', data, '--out', self.path('a'))
        self.invoke('split', '--data', data, '--out', self.path('b'))
        for name in ('train.jsonl', 'val.jsonl', 'test.jsonl'):
            with open(self.path('a', name), 'rb') as a, open(self.path('b', name), 'rb') as b:
                self.assertEqual(a.read(), b.read())

    def test_stats_reports_counts_and_kl(self):
        lexicon = self.path('hurt.txt')
        with open(lexicon, 'w', encoding='utf-8') as f:
            f.write('humor_p0\n')
        code, result, _ = self.invoke('stats', '--data', self.write_humor(), '--lexicon', lexicon,
                                      '--out', self.path('stats'))
        self.assertEqual(code, 0)
        self.assertEqual((result['summary']['positives'], result['summary']['negatives']), (30, 30))
        self.assertGreater(result['summary']['kl'], 0)
        self.assertEqual(result['summary']['hurtful_fraction_neg'], 0.0)

    def test_mix_shortfall_exits_with_validation_code(self):
        cm = self.path('cm.jsonl')
        native = self.path('native.jsonl')
        save_jsonl(make_pattern_task('humor', 10, seed=1), cm)
        save_jsonl([Sample(id=f"en-{i}", text='plain english text', task='humor', label=i % 2,
                           origin=Origin.NATIVE_EN.value) for i in range(6)], native)
        code, result, stderr = self.invoke('mix', '--cm-train', cm, '--native', native, '--per-class', '999999',
                                           '--out', self.path('mix'))
        self.assertEqual(code, 1)
        self.assertIsNone(result)
        self.assertIn('short by 999996', stderr)
        self.assertEqual(ExperimentRun.objects.get(verb='mix').status, 'invalid')

    def test_unknown_verb_prints_usage(self):
        code, _, stderr = self.invoke('dance')
        self.assertEqual(code, 1)
        self.assertIn('usage:', stderr)

    def test_missing_input_file_is_a_runtime_failure(self):
        code, _, stderr = self.invoke('stats', '--data', self.path('missing.jsonl'), '--out', self.path('stats'))
        self.assertEqual(code, 2)
        self.assertIn('stats failed', stderr)
        self.assertEqual(ExperimentRun.objects.get(verb='stats').status, 'failed')

    def test_train_mtl_on_synthetic_tasks(self):
        out = self.path('mtl')
        code, result, _ = self.invoke(
            'train-mtl', '--synthetic', '--synthetic-size', '60', '--tasks', 'humor,sarcasm', '--gate',
            '--lambda', '5e-3', '--seeds', '2', '--max-epochs', '2', '--layers', '2', '--bottom', '1',
            '--hidden', '16', '--heads', '2', '--out', out,
        )
        self.assertEqual(code, 0)
        summary = result['summary']
        self.assertEqual([run['seed'] for run in summary['per_seed']], [13, 42])
        self.assertEqual(set(summary['mean']), {'humor', 'sarcasm'})
        self.assertEqual(summary['config']['reg_lambda'], 5e-3)
        for seed in (13, 42):
            for name in ('model.pt', 'history.jsonl', 'predictions.jsonl'):
                self.assertTrue(os.path.exists(os.path.join(out, f"seed-{seed}", name)))
        with open(os.path.join(out, 'manifest.json'), encoding='utf-8') as f:
            manifest = json.load(f)
        self.assertEqual(manifest['verb'], 'train-mtl')
        self.assertEqual(manifest['train_config']['seeds'], [13, 42])
        self.assertIn('torch', manifest['versions'])
        self.assertTrue(manifest['config']['freeze_bottom'])
        self.assertTrue(summary['freeze_bottom'])
        run_row = ExperimentRun.objects.get(run_id=result['run_id'])
        self.assertEqual(run_row.status, 'succeeded')

        trained = load_model(os.path.join(out, 'seed-13', 'model.pt'))
        initial = build_mtl_model(trained.geometry, ['humor', 'sarcasm'], seed=13)
        for before, after in zip(initial.encoder.bottom_parameters(), trained.encoder.bottom_parameters()):
            self.assertTrue(torch.equal(before, after))

    def test_train_mtl_can_train_the_bottom_module(self):
        out = self.path('mtl-unfrozen')
        code, result, _ = self.invoke(
            'train-mtl', '--synthetic', '--synthetic-size', '40', '--tasks', 'humor,hate', '--no-freeze-bottom',
            '--seeds', '1', '--max-epochs', '1', '--layers', '2', '--bottom', '1', '--hidden', '8', '--heads', '2',
            '--out', out,
        )
        self.assertEqual(code, 0)
        self.assertFalse(result['summary']['freeze_bottom'])
        trained = load_model(os.path.join(out, 'seed-13', 'model.pt'))
        initial = build_mtl_model(trained.geometry, ['humor', 'hate'], seed=13)
        self.assertFalse(all(
            torch.equal(before, after)
            for before, after in zip(initial.encoder.bottom_parameters(), trained.encoder.bottom_parameters())
        ))

    def test_train_mtl_needs_two_tasks(self):
        code, _, _ = self.invoke('train-mtl', '--synthetic', '--synthetic-size', '20', '--tasks', 'humor',
                                 '--max-epochs', '1', '--out', self.path('one'))
        self.assertEqual(code, 1)

    def test_train_single_with_partial_freezing(self):
        code, result, _ = self.invoke(
            'train-single', '--synthetic', '--synthetic-size', '40', '--task', 'hate', '--trainable-top', '1',
            '--seeds', '1', '--max-epochs', '1', '--layers', '2', '--bottom', '1', '--hidden', '8', '--heads', '2',
            '--out', self.path('single'),
        )
        self.assertEqual(code, 0)
        self.assertEqual(result['summary']['task'], 'hate')
        self.assertEqual(len(result['summary']['per_seed']), 1)

    def test_gradcheck_passes(self):
        code, result, _ = self.invoke('gradcheck', '--out', self.path('gradcheck'))
        self.assertEqual(code, 0)
        self.assertLessEqual(result['summary']['max_rel_error'], 1e-4)
        self.assertEqual(result['summary']['frozen_max_abs'], 0.0)
        self.assertEqual(result['summary']['trainable_bottom'], 0)

    def test_prompting_verbs_with_mock_client(self):
        train = self.path('train.jsonl')
        queries = self.path('queries.jsonl')
        save_jsonl(make_pattern_task('humor', 12, seed=2), train)
        save_jsonl(make_pattern_task('humor', 4, seed=3), queries)

        code, result, _ = self.invoke('shots', '--train', train, '--k', '2', '--out', self.path('shots'))
        self.assertEqual(code, 0)
        self.assertEqual(len(result['summary']['shots']), 2)

        code, result, _ = self.invoke('prompt-render', '--task', 'humor', '--k', '2', '--train', train,
                                      '--queries', queries, '--out', self.path('render'))
        self.assertEqual(code, 0)
        with open(self.path('render', 'prompts.jsonl'), encoding='utf-8') as f:
            prompts = [json.loads(line) for line in f]
        self.assertEqual(len(prompts), 4)
        self.assertIn('### Examples', prompts[0]['prompt'])

        code, result, _ = self.invoke('prompt-run', '--task', 'humor', '--k', '2', '--train', train,
                                      '--queries', queries, '--client', 'mock', '--out', self.path('run'))
        self.assertEqual(code, 0)
        self.assertEqual(result['summary']['client'], 'mock')
        self.assertEqual(result['summary']['report']['tp'] + result['summary']['report']['fn'], 2)
        self.assertTrue(os.path.exists(self.path('run', 'transcript.jsonl')))

    def test_prompt_run_client_errors_are_runtime_failures(self):
        train = self.path('train.jsonl')
        save_jsonl(make_pattern_task('humor', 6, seed=2), train)
        for client, message in ((RejectingClient(), '401'), (SilentClient(), 'answered none of 6')):
            with mock.patch('experiments.pipelines.get_completion_client', return_value=client):
                code, result, stderr = self.invoke('prompt-run', '--task', 'humor', '--train', train,
                                                   '--queries', train, '--out', self.path(client.name))
            self.assertEqual(code, 2)
            self.assertIsNone(result)
            self.assertIn(message, stderr)

    def test_bad_shot_count_is_a_validation_error(self):
        train = self.path('train.jsonl')
        save_jsonl(make_pattern_task('humor', 6, seed=2), train)
        code, _, _ = self.invoke('prompt-render', '--task', 'humor', '--k', '3', '--train', train,
                                 '--queries', train, '--out', self.path('render'))
        self.assertEqual(code, 1)
