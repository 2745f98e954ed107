import os
import tempfile

import torch
from django.core.exceptions import ValidationError
from django.test import SimpleTestCase

from corpus.multitask import MultiTaskBatch, build_multitask_view, encode_rows
from corpus.samples import IGNORE
from corpus.synthetic import make_pattern_suite
from encoder.network import EncoderGeometry, run_layers
from encoder.tokenizer import build_vocab
from trainer.config import TrainConfig
from trainer.loop import loss_config_for, make_optimizer, training_step

from .checkpoints import load_model, save_model
from .gating import TaskGate, gate, gate_coefficients
from .losses import JointLossConfig, TaskLossSpec, joint_loss, soft_sharing_penalty, task_loss
from .network import (
    build_mtl_model, build_single_task_model, forward_mtl, freeze_bottom, trainable_parameters,
)

TASKS = ['humor', 'sarcasm']


def small_setup(tasks=TASKS, n=8, seed=0):
    suite = make_pattern_suite(tasks, n, seed)
    rows = build_multitask_view(suite)
    tokenizer = build_vocab([s for samples in suite.values() for s in samples])
    geometry = EncoderGeometry(vocab_size=len(tokenizer), num_layers=3, bottom_layers=1, hidden=8, heads=2,
                               max_positions=16)
    return rows, tokenizer, geometry


class GateTests(SimpleTestCase):

    def setUp(self):
        generator = torch.Generator().manual_seed(0)
        self.d = 6
        self.weight = torch.randn(self.d, 2 * self.d, generator=generator, dtype=torch.float64)
        self.bias = torch.randn(self.d, generator=generator, dtype=torch.float64)
        self.generator = generator

    def test_equal_inputs_pass_through(self):
        h = torch.randn(5, self.d, generator=self.generator, dtype=torch.float64)
        self.assertLessEqual(float((gate(h, h.clone(), self.weight, self.bias) - h).abs().max()), 1e-12)

    def test_zero_parameters_give_the_mean(self):
        a = torch.randn(5, self.d, generator=self.generator, dtype=torch.float64)
        b = torch.randn(5, self.d, generator=self.generator, dtype=torch.float64)
        out = gate(a, b, torch.zeros_like(self.weight), torch.zeros_like(self.bias))
        self.assertLessEqual(float((out - (a + b) / 2).abs().max()), 1e-12)

    def test_output_stays_within_coordinatewise_envelope(self):
        a = torch.randn(1000, self.d, generator=self.generator, dtype=torch.float64) * 3
        b = torch.randn(1000, self.d, generator=self.generator, dtype=torch.float64) * 3
        out = gate(a, b, self.weight, self.bias)
        self.assertTrue(bool((out >= torch.minimum(a, b) - 1e-12).all()))
        self.assertTrue(bool((out <= torch.maximum(a, b) + 1e-12).all()))

    def test_coefficients_are_probabilities(self):
        a = torch.randn(3, self.d, generator=self.generator, dtype=torch.float64)
        alpha = gate_coefficients(a, -a, self.weight, self.bias)
        self.assertTrue(bool(((alpha > 0) & (alpha < 1)).all()))

    def test_two_unit_gate_by_hand(self):
        h_bert = torch.tensor([1.0, 0.0], dtype=torch.float64)
        h_task = torch.tensor([0.0, 1.0], dtype=torch.float64)
        weight = torch.tensor([[1.0, 0.0, 0.0, 1.0], [1.0, 0.0, 0.0, 1.0]], dtype=torch.float64)
        bias = torch.zeros(2, dtype=torch.float64)
        alpha = gate_coefficients(h_bert, h_task, weight, bias)
        out = gate(h_bert, h_task, weight, bias)
        self.assertTrue(torch.allclose(alpha, torch.tensor([0.8808, 0.8808], dtype=torch.float64), atol=1e-4))
        self.assertTrue(torch.allclose(out, torch.tensor([0.8808, 0.1192], dtype=torch.float64), atol=1e-4))

    def test_shape_mismatch_is_rejected(self):
        with self.assertRaises(ValueError):
            gate(torch.zeros(2, 4), torch.zeros(2, 5), torch.zeros(4, 8), torch.zeros(4))
        with self.assertRaises(ValueError):
            gate(torch.zeros(2, 4), torch.zeros(2, 4), torch.zeros(4, 4), torch.zeros(4))

    def test_task_gate_module_uses_projection_weights(self):
        module = TaskGate(4)
        self.assertEqual(tuple(module.proj.weight.shape), (4, 8))
        a, b = torch.randn(2, 4), torch.randn(2, 4)
        self.assertTrue(torch.equal(module(a, b), gate(a, b, module.proj.weight, module.proj.bias)))


class LossTests(SimpleTestCase):

    def test_class_weights_from_counts(self):
        spec = TaskLossSpec.from_counts('humor', 3, 1)
        self.assertEqual(spec.class_weights, (0.75, 0.25))
        with self.assertRaises(ValidationError):
            TaskLossSpec.from_counts('humor', 0, 4)

    def test_all_ignored_rows_give_exactly_zero(self):
        logits = torch.randn(4, 2, requires_grad=True)
        loss = task_loss(logits, torch.full((4,), IGNORE), (0.5, 0.5))
        self.assertEqual(float(loss), 0.0)

    def test_ignored_rows_are_masked_out(self):
        logits = torch.randn(4, 2)
        labels = torch.tensor([1, IGNORE, 0, IGNORE])
        expected = torch.nn.functional.cross_entropy(logits[[0, 2]], labels[[0, 2]])
        self.assertTrue(torch.allclose(task_loss(logits, labels), expected))

    def test_weighted_loss_averages_over_labeled_rows(self):
        logits = torch.zeros(2, 2)
        loss = task_loss(logits, torch.tensor([1, 0]), (0.25, 0.75))
        self.assertAlmostEqual(float(loss), (0.25 + 0.75) * torch.log(torch.tensor(2.0)).item() / 2, places=6)

    def test_soft_sharing_penalty_sums_pairwise_frobenius_distances(self):
        weights = {'a': torch.zeros(2, 2), 'b': torch.ones(2, 2), 'c': torch.ones(2, 2)}
        self.assertAlmostEqual(float(soft_sharing_penalty(weights, 0.5)), 0.5 * (2 + 2 + 0))
        self.assertEqual(float(soft_sharing_penalty(weights, 0.0)), 0.0)

    def test_penalty_of_a_single_row_difference(self):
        weights = {'a': torch.tensor([[3.0, 4.0]]), 'b': torch.zeros(1, 2)}
        self.assertAlmostEqual(float(soft_sharing_penalty(weights, 0.1)), 0.5, places=6)

    def test_config_validation(self):
        with self.assertRaises(ValidationError):
            JointLossConfig(reg_lambda=-1)
        with self.assertRaises(ValidationError):
            JointLossConfig(reg_layer='first')


class GatedModelTests(SimpleTestCase):

    def setUp(self):
        self.rows, self.tokenizer, self.geometry = small_setup()
        self.batch = encode_rows(self.rows, list(range(len(self.rows))), self.tokenizer, 12, TASKS)

    def test_forward_gives_logits_per_task(self):
        model = build_mtl_model(self.geometry, TASKS, seed=1)
        logits = forward_mtl(model, self.batch)
        self.assertEqual(list(logits), TASKS)
        self.assertEqual(logits['humor'].shape, (len(self.rows), 2))

    def test_gate_ablation_feeds_task_vector_directly(self):
        gated = build_mtl_model(self.geometry, TASKS, gate_enabled=True, seed=1)
        plain = build_mtl_model(self.geometry, TASKS, gate_enabled=False, seed=1)
        features, _ = plain.represent(self.batch.token_ids, self.batch.attention_mask)
        gated_features, h_bert = gated.represent(self.batch.token_ids, self.batch.attention_mask)
        bottom = plain.encoder.encode_bottom(self.batch.token_ids, self.batch.attention_mask)
        h_task = run_layers(plain.task_tops['humor'], bottom, self.batch.attention_mask)[:, 0]
        self.assertTrue(torch.equal(features['humor'], h_task))
        self.assertFalse(torch.allclose(gated_features['humor'], features['humor']))
        self.assertEqual(h_bert.shape, features['humor'].shape)

    def test_two_unit_forward_by_hand(self):
        # A LayerNorm with zero weight emits its bias, so each top module's CLS vector is fixed.
        geometry = EncoderGeometry(vocab_size=4, num_layers=2, bottom_layers=1, hidden=2, heads=1, max_positions=4)
        batch = MultiTaskBatch(torch.tensor([[2, 3]]), torch.tensor([[1, 1]]),
                               {'humor': torch.tensor([1]), 'sarcasm': torch.tensor([IGNORE])}, [0])
        logits = {}
        for gate_enabled in (True, False):
            model = build_mtl_model(geometry, TASKS, gate_enabled=gate_enabled, seed=0)
            with torch.no_grad():
                model.encoder.top[-1].ffn_norm.weight.zero_()
                model.encoder.top[-1].ffn_norm.bias.copy_(torch.tensor([1.0, 0.0]))
                for task in TASKS:
                    model.task_tops[task][-1].ffn_norm.weight.zero_()
                    model.task_tops[task][-1].ffn_norm.bias.copy_(torch.tensor([0.0, 1.0]))
                    model.heads[task].weight.copy_(torch.eye(2))
                    model.heads[task].bias.zero_()
                model.gates['humor'].proj.weight.copy_(torch.tensor([[1.0, 0.0, 0.0, 1.0], [1.0, 0.0, 0.0, 1.0]]))
                model.gates['humor'].proj.bias.zero_()
                model.gates['sarcasm'].proj.weight.zero_()
                model.gates['sarcasm'].proj.bias.zero_()
            logits[gate_enabled] = forward_mtl(model, batch)

        self.assertTrue(torch.allclose(logits[True]['humor'], torch.tensor([[0.8808, 0.1192]]), atol=1e-4))
        self.assertTrue(torch.allclose(logits[True]['sarcasm'], torch.tensor([[0.5, 0.5]]), atol=1e-6))
        for task in TASKS:
            self.assertTrue(torch.allclose(logits[False][task], torch.tensor([[0.0, 1.0]]), atol=1e-6))

    def test_unknown_batch_task_is_rejected(self):
        model = build_mtl_model(self.geometry, ['humor', 'hate'], seed=1)
        with self.assertRaises(ValidationError):
            forward_mtl(model, self.batch)

    def test_regularized_layers(self):
        model = build_mtl_model(self.geometry, TASKS, seed=1)
        last = model.regularized_weights('last')
        second = model.regularized_weights('second_last')
        self.assertIs(last['humor'], model.task_tops['humor'][-1].ffn_out.weight)
        self.assertIs(second['sarcasm'], model.task_tops['sarcasm'][-2].ffn_out.weight)

    def test_second_last_needs_two_top_layers(self):
        geometry = EncoderGeometry(vocab_size=10, num_layers=2, bottom_layers=1, hidden=4, heads=2)
        model = build_mtl_model(geometry, TASKS)
        with self.assertRaises(ValidationError):
            model.regularized_weights('second_last')

    def test_copy_init_matches_shared_top(self):
        model = build_mtl_model(self.geometry, TASKS, seed=1, top_init='copy')
        for a, b in zip(model.task_tops['humor'].parameters(), model.encoder.top.parameters()):
            self.assertTrue(torch.equal(a, b))

    def test_freeze_bottom_marks_embeddings_and_bottom_layers(self):
        model = freeze_bottom(build_mtl_model(self.geometry, TASKS, seed=1))
        frozen = {id(p) for p in model.encoder.bottom_parameters()}
        trainable = {id(p) for p in trainable_parameters(model)}
        self.assertFalse(frozen & trainable)
        self.assertEqual(len(frozen) + len(trainable), len(list(model.parameters())))

    def test_freeze_all_but_last_k_layers(self):
        model = freeze_bottom(build_single_task_model(self.geometry, 'humor'), trainable_top=1)
        trainable = {id(p) for p in trainable_parameters(model)}
        expected = {id(p) for p in model.encoder.layers[-1].parameters()} | {id(p) for p in model.head.parameters()}
        self.assertEqual(trainable, expected)

    def test_ignore_labels_leave_head_untouched_under_sgd(self):
        model = build_mtl_model(self.geometry, TASKS, seed=2)
        humor_only = [i for i, row in enumerate(self.rows) if row.task == 'humor']
        batch = encode_rows(self.rows, humor_only, self.tokenizer, 12, TASKS)
        self.assertTrue(bool((batch.labels['sarcasm'] == IGNORE).all()))

        cfg = TrainConfig(optimizer='sgd', lr=0.1)
        before = [p.detach().clone() for p in model.heads['sarcasm'].parameters()]
        breakdown = training_step(model, batch, loss_config_for(self.rows, cfg), make_optimizer(model, cfg))
        self.assertEqual(float(breakdown.per_task['sarcasm']), 0.0)
        for old, new in zip(before, model.heads['sarcasm'].parameters()):
            self.assertTrue(torch.equal(old, new))

    def test_joint_loss_penalty_from_model_weights(self):
        model = build_mtl_model(self.geometry, TASKS, seed=1)
        with torch.no_grad():
            for weight in model.regularized_weights('last').values():
                weight.zero_()
            model.regularized_weights('last')['humor'][0, :2] = torch.tensor([3.0, 4.0])
        breakdown = joint_loss(forward_mtl(model, self.batch), self.batch.labels, JointLossConfig(reg_lambda=0.1),
                               model)
        self.assertAlmostEqual(float(breakdown.reg), 0.5, places=6)

    def test_joint_loss_ignores_row_order(self):
        model = build_mtl_model(self.geometry, TASKS, seed=1)
        order = list(reversed(range(len(self.rows))))
        shuffled = encode_rows(self.rows, order, self.tokenizer, 12, TASKS)
        cfg = JointLossConfig(reg_lambda=5e-3, task_specs=(TaskLossSpec('humor', (0.5, 0.5)),
                                                           TaskLossSpec('sarcasm', (0.4, 0.6))))
        original = joint_loss(forward_mtl(model, self.batch), self.batch.labels, cfg, model)
        reordered = joint_loss(forward_mtl(model, shuffled), shuffled.labels, cfg, model)
        self.assertAlmostEqual(float(original.total), float(reordered.total), places=5)
        for task in TASKS:
            self.assertAlmostEqual(float(original.per_task[task]), float(reordered.per_task[task]), places=5)

    def test_optimizer_step_leaves_frozen_bottom_untouched(self):
        model = freeze_bottom(build_mtl_model(self.geometry, TASKS, seed=3))
        bottom = [p.detach().clone() for p in model.encoder.bottom_parameters()]
        heads = [p.detach().clone() for p in model.heads.parameters()]
        cfg = TrainConfig(lr=0.1)
        training_step(model, self.batch, loss_config_for(self.rows, cfg), make_optimizer(model, cfg))
        for old, new in zip(bottom, model.encoder.bottom_parameters()):
            self.assertTrue(torch.equal(old, new))
        self.assertFalse(all(torch.equal(old, new) for old, new in zip(heads, model.heads.parameters())))

    def test_joint_loss_adds_penalty(self):
        model = build_mtl_model(self.geometry, TASKS, seed=1)
        logits = forward_mtl(model, self.batch)
        without = joint_loss(logits, self.batch.labels, JointLossConfig(reg_lambda=0.0), model)
        with_reg = joint_loss(logits, self.batch.labels, JointLossConfig(reg_lambda=0.5), model)
        self.assertEqual(float(without.reg), 0.0)
        self.assertGreater(float(with_reg.reg), 0.0)
        self.assertAlmostEqual(float(with_reg.total - without.total), float(with_reg.reg), places=5)


class CheckpointTests(SimpleTestCase):

    def test_mtl_round_trip_keeps_predictions(self):
        rows, tokenizer, geometry = small_setup()
        batch = encode_rows(rows, list(range(len(rows))), tokenizer, 12, TASKS)
        model = build_mtl_model(geometry, TASKS, gate_enabled=False, seed=4).eval()
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'mtl.pt')
            save_model(model, path)
            loaded = load_model(path).eval()
            with self.assertRaises(ValidationError):
                load_model(path, kind='single')
        self.assertFalse(loaded.gate_enabled)
        for task in TASKS:
            self.assertTrue(torch.equal(forward_mtl(loaded, batch)[task], forward_mtl(model, batch)[task]))

    def test_single_task_round_trip(self):
        _, _, geometry = small_setup()
        model = build_single_task_model(geometry, 'hate', seed=4)
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'single.pt')
            save_model(model, path)
            loaded = load_model(path, kind='single')
        self.assertEqual(loaded.tasks, ['hate'])
        self.assertTrue(torch.equal(loaded.head.weight, model.head.weight))
