import json
import os
import tempfile
import unittest

import torch
from django.conf import settings
from django.core.exceptions import ValidationError
from django.test import SimpleTestCase

from corpus.multitask import batch_iter, build_multitask_view, encode_rows
from corpus.splitting import SplitSpec, stratified_split
from corpus.synthetic import make_pattern_suite
from encoder.network import EncoderGeometry
from encoder.tokenizer import build_vocab
from evaluation.metrics import EvalReport
from mtl.network import build_mtl_model, freeze_bottom

from .config import TrainConfig, load_config
from .gradcheck import grad_check, relative_error
from .loop import (
    EarlyStopper, TrainingData, TrainingDivergedError, evaluate, loss_config_for, make_optimizer, predict, train,
    training_step,
)
from .seeds import aggregate, run_seeds

TASKS = ['humor', 'sarcasm']


def synthetic_data(n, tasks=TASKS, seed=0):
    suite = make_pattern_suite(tasks, n, seed)
    spec = SplitSpec(seed=seed)
    parts = {task: stratified_split(samples, spec) for task, samples in suite.items()}
    train_rows, val_rows, test_rows = (
        build_multitask_view({task: parts[task][i] for task in tasks}) for i in range(3)
    )
    tokenizer = build_vocab([s for task in tasks for s in parts[task][0]])
    return TrainingData(train_rows, val_rows, tokenizer, tasks[0]), test_rows


def geometry_for(tokenizer, **overrides):
    values = dict(vocab_size=len(tokenizer), num_layers=2, bottom_layers=1, hidden=32, heads=2, max_positions=16)
    values.update(overrides)
    return EncoderGeometry(**values)


def weight_distance(model, reg_layer='last'):
    weights = list(model.regularized_weights(reg_layer).values())
    return float(torch.linalg.vector_norm(weights[0] - weights[1]))


class EarlyStopperTests(SimpleTestCase):

    def test_stops_after_patience_without_strict_improvement(self):
        stopper = EarlyStopper(4)
        decisions = [stopper.update(score, epoch) for epoch, score in enumerate([.5, .6, .6, .6, .6, .6], start=1)]
        self.assertEqual([stop for _, stop in decisions], [False] * 5 + [True])
        self.assertEqual(stopper.best_epoch, 2)
        self.assertEqual(stopper.best_score, .6)

    def test_patience_must_be_positive(self):
        with self.assertRaises(ValidationError):
            EarlyStopper(0)


class TrainConfigTests(SimpleTestCase):

    def test_defaults_come_from_settings(self):
        cfg = TrainConfig()
        self.assertEqual(cfg.seeds, tuple(settings.CODEMIX['DEFAULT_SEEDS']))
        self.assertEqual(cfg.patience, 4)
        self.assertEqual(cfg.off_grid(), [])

    def test_invalid_values_are_rejected(self):
        for changes in ({'patience': 0}, {'optimizer': 'adam'}, {'scheduler_gamma': 1.5}, {'seeds': ()}):
            with self.assertRaises(ValidationError):
                TrainConfig(**changes)

    def test_replace_ignores_unset_overrides(self):
        cfg = TrainConfig().replace(lr=3e-3, batch_size=None)
        self.assertEqual((cfg.lr, cfg.batch_size), (3e-3, 32))
        self.assertEqual(cfg.off_grid(), [])

    def test_unknown_config_keys_are_rejected(self):
        with self.assertRaisesMessage(ValidationError, 'learning_rate'):
            TrainConfig.from_dict({'learning_rate': 0.1})

    def test_off_grid_config_file_logs_warning(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'config.json')
            with open(path, 'w', encoding='utf-8') as f:
                json.dump({'lr': 0.5, 'batch_size': 16, 'seeds': [1]}, f)
            with self.assertLogs('trainer.config', level='WARNING') as logs:
                cfg = load_config(path)
        self.assertEqual(cfg.seeds, (1,))
        self.assertIn('lr', logs.output[0])


class TrainingLoopTests(SimpleTestCase):

    def setUp(self):
        self.data, self.test_rows = synthetic_data(40)
        self.geometry = geometry_for(self.data.tokenizer, hidden=8)

    def test_zero_epochs_returns_model_unchanged(self):
        model = build_mtl_model(self.geometry, TASKS, seed=1)
        before = {k: v.clone() for k, v in model.state_dict().items()}
        model, history = train(model, self.data, TrainConfig(max_epochs=0))
        self.assertEqual(history.epochs, [])
        self.assertIsNone(history.chosen_epoch)
        for name, tensor in model.state_dict().items():
            self.assertTrue(torch.equal(tensor, before[name]))

    def test_history_records_every_epoch(self):
        cfg = TrainConfig(lr=3e-3, seq_len=12, batch_size=16, max_epochs=3, patience=4, seeds=(5,))
        model, history = train(build_mtl_model(self.geometry, TASKS, seed=5), self.data, cfg)
        self.assertEqual([r.epoch for r in history.epochs], [1, 2, 3])
        self.assertEqual(set(history.epochs[0].val_f1), set(TASKS))
        self.assertAlmostEqual(history.epochs[1].lr, 3e-3 * 0.9)
        self.assertEqual(history.best_val_f1, max(history.val_scores('humor')))
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'history.jsonl')
            history.write(path)
            with open(path, encoding='utf-8') as f:
                self.assertEqual(len(f.readlines()), 3)

    def test_same_seed_gives_identical_parameters(self):
        cfg = TrainConfig(optimizer='sgd', lr=0.05, seq_len=12, batch_size=8, max_epochs=2, seeds=(7,))
        first, _ = train(freeze_bottom(build_mtl_model(self.geometry, TASKS, seed=7)), self.data, cfg)
        second, _ = train(freeze_bottom(build_mtl_model(self.geometry, TASKS, seed=7)), self.data, cfg)
        for (name, a), b in zip(first.state_dict().items(), second.state_dict().values()):
            self.assertTrue(torch.equal(a, b), name)

    def test_predict_returns_labeled_rows_per_task(self):
        model = build_mtl_model(self.geometry, TASKS, seed=1)
        out = predict(model, self.test_rows, self.data.tokenizer, 12)
        for task in TASKS:
            expected = [r.sample_id for r in self.test_rows if r.labels[task] != 999]
            self.assertEqual(out[task].ids, expected)
            for pred, prob in zip(out[task].preds, out[task].probs):
                self.assertTrue(0.0 <= prob <= 1.0)
                self.assertEqual(pred, int(prob > 0.5))

    def test_non_finite_loss_names_epoch_and_step(self):
        model = build_mtl_model(self.geometry, TASKS, seed=1)
        with torch.no_grad():
            model.heads['humor'].weight.fill_(float('nan'))
        cfg = TrainConfig(seq_len=12, batch_size=16, max_epochs=1)
        with self.assertRaisesMessage(TrainingDivergedError, 'epoch 1 step 1'):
            train(model, self.data, cfg)

    def test_run_seeds_averages_test_metrics(self):
        cfg = TrainConfig(lr=3e-3, seq_len=12, batch_size=16, max_epochs=1, seeds=(1, 2))

        def setup(seed):
            return build_mtl_model(self.geometry, TASKS, seed=seed), self.data, self.test_rows

        summary = run_seeds(cfg, cfg.seeds, setup)
        self.assertEqual([run.seed for run in summary.runs], [1, 2])
        f1s = [run.reports['humor'].f1 for run in summary.runs]
        self.assertAlmostEqual(summary.mean['humor']['f1'], sum(f1s) / 2)
        self.assertEqual(summary.to_dict()['per_seed'][0]['seed'], 1)


class AggregateTests(SimpleTestCase):

    def test_mean_over_seeds(self):
        def report(f1):
            return EvalReport(tp=1, fp=0, fn=0, tn=1, precision=f1, recall=f1, f1=f1)

        mean = aggregate([{'humor': report(0.8)}, {'humor': report(0.6), 'hate': report(0.5)}])
        self.assertAlmostEqual(mean['humor']['f1'], 0.7)
        self.assertAlmostEqual(mean['hate']['recall'], 0.5)


class GradCheckTests(SimpleTestCase):

    def setUp(self):
        suite = make_pattern_suite(TASKS, 8, seed=0)
        self.rows = build_multitask_view(suite)
        tokenizer = build_vocab([s for samples in suite.values() for s in samples])
        self.geometry = EncoderGeometry(vocab_size=len(tokenizer), num_layers=2, bottom_layers=1, hidden=4, heads=2,
                                        max_positions=16, init_std=0.2)
        self.batch = encode_rows(self.rows, list(range(len(self.rows))), tokenizer, 12, TASKS)
        self.loss_cfg = loss_config_for(self.rows, TrainConfig())

    def test_tiny_gated_model_matches_finite_differences(self):
        model = freeze_bottom(build_mtl_model(self.geometry, TASKS, seed=0))
        result = grad_check(model, self.batch, self.loss_cfg, step=1e-5, n_coords=200, seed=0)
        self.assertGreaterEqual(result.checked, 200)
        self.assertLessEqual(result.max_rel_error, 1e-4)
        self.assertEqual(result.frozen_max_abs, 0.0)
        self.assertEqual(result.trainable_bottom, 0)

    def test_unfrozen_bottom_is_reported(self):
        model = build_mtl_model(self.geometry, TASKS, seed=0)
        result = grad_check(model, self.batch, self.loss_cfg, step=1e-5, n_coords=10, seed=0)
        self.assertEqual(result.trainable_bottom, len(list(model.encoder.bottom_parameters())))
        self.assertGreater(result.frozen_max_abs, 0.0)

    def test_relative_error_has_a_floor(self):
        self.assertEqual(relative_error(0.0, 0.0), 0.0)
        self.assertAlmostEqual(relative_error(1e-9, 0.0), 1e-3)
        self.assertAlmostEqual(relative_error(2.0, 1.0), 0.5)


class SoftSharingTests(SimpleTestCase):

    def test_penalty_pulls_task_modules_together(self):
        data, _ = synthetic_data(100)
        geometry = geometry_for(data.tokenizer, num_layers=3, bottom_layers=1)
        for seed in (13, 42, 2025):
            distances = {}
            for reg_lambda in (0.0, 0.5):
                cfg = TrainConfig(optimizer='sgd', lr=0.05, reg_lambda=reg_lambda, seq_len=12, batch_size=16)
                model = build_mtl_model(geometry, TASKS, seed=seed)
                optimizer = make_optimizer(model, cfg)
                loss_cfg = loss_config_for(data.train_rows, cfg)
                for epoch in range(3):
                    for batch in batch_iter(data.train_rows, cfg.batch_size, seed + epoch, data.tokenizer, 12):
                        training_step(model, batch, loss_cfg, optimizer)
                distances[reg_lambda] = weight_distance(model)
            self.assertLess(distances[0.5], distances[0.0], f"seed {seed}")


class SyntheticConvergenceTests(SimpleTestCase):

    def test_gated_model_learns_both_tasks(self):
        data, _ = synthetic_data(400)
        cfg = TrainConfig(lr=3e-3, seq_len=12, batch_size=32, max_epochs=30, patience=10, seeds=(13,))
        model, history = train(build_mtl_model(geometry_for(data.tokenizer), TASKS, seed=13), data, cfg)
        reports = evaluate(model, data.val_rows, data.tokenizer, cfg.seq_len)
        for task in TASKS:
            self.assertGreaterEqual(reports[task].f1, 0.95, f"{task}: {history.to_records()}")

    def test_gate_ablation_completes(self):
        data, _ = synthetic_data(100)
        cfg = TrainConfig(lr=3e-3, seq_len=12, batch_size=32, max_epochs=2, seeds=(13,))
        model = build_mtl_model(geometry_for(data.tokenizer), TASKS, gate_enabled=False, seed=13)
        _, history = train(model, data, cfg)
        self.assertEqual(len(history.epochs), 2)
        self.assertEqual(set(history.epochs[-1].val_f1), set(TASKS))


@unittest.skipUnless(settings.CODEMIX['SLOW_TESTS'], 'set CODEMIX_SLOW_TESTS=1 for full-size runs')
class FullSizeAcceptanceTests(SimpleTestCase):

    def test_full_size_convergence_for_default_seeds(self):
        data, _ = synthetic_data(2000)
        cfg = TrainConfig(lr=3e-3, seq_len=16, batch_size=32, max_epochs=30, patience=10)
        for seed in cfg.seeds:
            for gate_enabled in (True, False):
                model = build_mtl_model(geometry_for(data.tokenizer, num_layers=6, bottom_layers=4, hidden=64,
                                                     heads=4), TASKS, gate_enabled=gate_enabled, seed=seed)
                model, _ = train(model, data, cfg, seed=seed)
                reports = evaluate(model, data.val_rows, data.tokenizer, cfg.seq_len)
                if gate_enabled:
                    for task in TASKS:
                        self.assertGreaterEqual(reports[task].f1, 0.95)
                else:
                    self.assertEqual(set(reports), set(TASKS))

    def test_full_size_soft_sharing_effect(self):
        data, _ = synthetic_data(2000)
        geometry = geometry_for(data.tokenizer, num_layers=6, bottom_layers=4, hidden=64, heads=4)
        for seed in settings.CODEMIX['DEFAULT_SEEDS']:
            distances = {}
            for reg_lambda in (0.0, 0.5):
                cfg = TrainConfig(optimizer='sgd', lr=0.05, reg_lambda=reg_lambda, seq_len=16, max_epochs=3,
                                  patience=10, seeds=(seed,))
                model, _ = train(build_mtl_model(geometry, TASKS, seed=seed), data, cfg)
                distances[reg_lambda] = weight_distance(model)
            self.assertLess(distances[0.5], distances[0.0])
