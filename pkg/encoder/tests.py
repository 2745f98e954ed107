import os
import tempfile

import torch
from django.core.exceptions import ValidationError
from django.test import SimpleTestCase

from .checkpoints import load_encoder, save_encoder
from .network import Encoder, EncoderGeometry, build_encoder, forward_encoder
from .tokenizer import CLS_ID, PAD_ID, UNK_ID, Tokenizer, build_vocab


class TokenizerTests(SimpleTestCase):

    def setUp(self):
        self.tokenizer = build_vocab(['bhai bhai joke', 'joke hai', 'bhai'], max_len=16)

    def test_vocab_orders_by_frequency_then_token(self):
        self.assertEqual(self.tokenizer.vocab, {'[PAD]': 0, '[UNK]': 1, '[CLS]': 2, 'bhai': 3, 'joke': 4, 'hai': 5})

    def test_encode_pads_and_masks(self):
        ids, mask = self.tokenizer.encode('Bhai naya joke', 6)
        self.assertEqual(ids, [CLS_ID, 3, UNK_ID, 4, PAD_ID, PAD_ID])
        self.assertEqual(mask, [1, 1, 1, 1, 0, 0])

    def test_encode_truncates_after_cls(self):
        ids, mask = self.tokenizer.encode('bhai joke hai bhai', 3)
        self.assertEqual(ids, [CLS_ID, 3, 4])
        self.assertEqual(mask, [1, 1, 1])

    def test_sequence_length_bounds(self):
        with self.assertRaises(ValidationError):
            self.tokenizer.encode('bhai', 1)
        with self.assertRaises(ValidationError):
            self.tokenizer.encode('bhai', 17)

    def test_min_freq_drops_rare_tokens(self):
        self.assertNotIn('hai', build_vocab(['bhai bhai joke', 'joke hai'], min_freq=2).vocab)

    def test_save_and_load(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'tokenizer.json')
            self.tokenizer.save(path)
            self.assertEqual(Tokenizer.load(path), self.tokenizer)

    def test_special_ids_are_enforced(self):
        with self.assertRaises(ValidationError):
            Tokenizer({'[PAD]': 1, '[UNK]': 0, '[CLS]': 2})


class EncoderTests(SimpleTestCase):

    def setUp(self):
        self.geometry = EncoderGeometry(vocab_size=20, num_layers=3, bottom_layers=2, hidden=8, heads=2,
                                        max_positions=16)
        self.encoder = build_encoder(self.geometry, seed=3)
        self.token_ids = torch.tensor([[2, 5, 6, 7, 0, 0], [2, 9, 0, 0, 0, 0]])
        self.mask = (self.token_ids != 0).long()

    def test_geometry_defaults_and_validation(self):
        self.assertEqual(self.geometry.ffn, 32)
        self.assertEqual(self.geometry.top_layers, 1)
        with self.assertRaises(ValidationError):
            EncoderGeometry(vocab_size=10, hidden=10, heads=3)
        with self.assertRaises(ValidationError):
            EncoderGeometry(vocab_size=10, num_layers=2, bottom_layers=2)

    def test_forward_returns_bottom_and_final_cls_vectors(self):
        bottom, full = forward_encoder(self.encoder, self.token_ids, self.mask)
        self.assertEqual(bottom.shape, (2, 8))
        self.assertEqual(full.shape, (2, 8))
        self.assertFalse(torch.allclose(bottom, full))

    def test_padding_does_not_change_cls_vector(self):
        _, short = self.encoder(self.token_ids[:, :4], self.mask[:, :4])
        _, padded = self.encoder(self.token_ids, self.mask)
        self.assertTrue(torch.allclose(short, padded, atol=1e-6))

    def test_rows_are_encoded_independently(self):
        order = torch.tensor([1, 0])
        bottom, full = self.encoder(self.token_ids, self.mask)
        bottom_swapped, full_swapped = self.encoder(self.token_ids[order], self.mask[order])
        self.assertTrue(torch.allclose(bottom_swapped, bottom[order], atol=1e-6))
        self.assertTrue(torch.allclose(full_swapped, full[order], atol=1e-6))

    def test_same_seed_same_weights(self):
        other = build_encoder(self.geometry, seed=3)
        for a, b in zip(self.encoder.parameters(), other.parameters()):
            self.assertTrue(torch.equal(a, b))

    def test_bottom_parameters_cover_embeddings_and_bottom_layers(self):
        bottom = {id(p) for p in self.encoder.bottom_parameters()}
        top = {id(p) for p in self.encoder.top.parameters()}
        self.assertFalse(bottom & top)
        self.assertEqual(len(bottom) + len(top), len(list(self.encoder.parameters())))

    def test_bad_batches_are_rejected(self):
        with self.assertRaises(ValueError):
            self.encoder(self.token_ids, self.mask[:, :3])
        with self.assertRaises(ValueError):
            self.encoder(self.token_ids, torch.zeros_like(self.mask))

    def test_pretrained_weights_are_not_supported(self):
        with self.assertRaises(NotImplementedError):
            Encoder.from_pretrained('muril-base-cased')

    def test_checkpoint_round_trip(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'encoder.pt')
            save_encoder(self.encoder, path)
            loaded = load_encoder(path)
        self.assertEqual(loaded.geometry, self.geometry)
        loaded.eval()
        self.encoder.eval()
        self.assertTrue(torch.equal(loaded(self.token_ids, self.mask)[1], self.encoder(self.token_ids, self.mask)[1]))
