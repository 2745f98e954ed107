"""A small post-norm transformer encoder split into a bottom and a top module.

Layers ``0..B-1`` (plus the embeddings) form the bottom module shared by all
tasks; layers ``B..L-1`` form the top module that multi-task models replicate.
Sentences are pooled by the hidden vector at the CLS position.
"""
import contextlib
import math
from dataclasses import dataclass, asdict

import torch
import torch.nn as nn
import torch.nn.functional as F
from django.core.exceptions import ValidationError


@dataclass(frozen=True)
class EncoderGeometry:
    vocab_size: int
    num_layers: int = 6
    bottom_layers: int = 4
    hidden: int = 64
    heads: int = 4
    ffn: int = 0
    max_positions: int = 256
    init_std: float = 0.02
    layer_norm_eps: float = 1e-5

    def __post_init__(self):
        if self.hidden % self.heads:
            raise ValidationError(f"hidden {self.hidden} is not divisible by heads {self.heads}", code='geometry')
        if not 0 <= self.bottom_layers < self.num_layers:
            raise ValidationError(
                f"bottom_layers must be in [0, {self.num_layers}), got {self.bottom_layers}", code='geometry')
        if self.ffn <= 0:
            object.__setattr__(self, 'ffn', 4 * self.hidden)

    @property
    def top_layers(self):
        return self.num_layers - self.bottom_layers

    def to_dict(self):
        return asdict(self)


@contextlib.contextmanager
def seeded(seed):
    """Run a block under a fixed torch seed without disturbing the global RNG."""
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        yield


def init_weights(module, std):
    if isinstance(module, nn.Linear):
        nn.init.normal_(module.weight, mean=0.0, std=std)
        if module.bias is not None:
            nn.init.zeros_(module.bias)
    elif isinstance(module, nn.Embedding):
        nn.init.normal_(module.weight, mean=0.0, std=std)
    elif isinstance(module, nn.LayerNorm):
        nn.init.ones_(module.weight)
        nn.init.zeros_(module.bias)


class EncoderLayer(nn.Module):

    def __init__(self, hidden, heads, ffn, eps=1e-5):
        super().__init__()
        self.heads = heads
        self.head_dim = hidden // heads
        self.query = nn.Linear(hidden, hidden)
        self.key = nn.Linear(hidden, hidden)
        self.value = nn.Linear(hidden, hidden)
        self.attn_out = nn.Linear(hidden, hidden)
        self.attn_norm = nn.LayerNorm(hidden, eps=eps)
        self.ffn_in = nn.Linear(hidden, ffn)
        self.ffn_out = nn.Linear(ffn, hidden)
        self.ffn_norm = nn.LayerNorm(hidden, eps=eps)

    @property
    def output_weight(self):
        """The layer's last weight matrix; soft sharing regularizes this one."""
        return self.ffn_out.weight

    def _split(self, x):
        batch, seq, _ = x.shape
        return x.view(batch, seq, self.heads, self.head_dim).transpose(1, 2)

    def forward(self, x, mask):
        batch, seq, hidden = x.shape
        q, k, v = self._split(self.query(x)), self._split(self.key(x)), self._split(self.value(x))
        scores = q @ k.transpose(-2, -1) / math.sqrt(self.head_dim)
        scores = scores.masked_fill(mask[:, None, None, :] == 0, float('-inf'))
        context = torch.softmax(scores, dim=-1) @ v
        context = context.transpose(1, 2).reshape(batch, seq, hidden)
        x = self.attn_norm(x + self.attn_out(context))
        return self.ffn_norm(x + self.ffn_out(F.gelu(self.ffn_in(x))))


def build_layers(geometry, count):
    return nn.ModuleList(
        EncoderLayer(geometry.hidden, geometry.heads, geometry.ffn, geometry.layer_norm_eps)
        for _ in range(count)
    )


def run_layers(layers, hidden, mask):
    for layer in layers:
        hidden = layer(hidden, mask)
    return hidden


class Encoder(nn.Module):

    def __init__(self, geometry):
        super().__init__()
        self.geometry = geometry
        self.token_embedding = nn.Embedding(geometry.vocab_size, geometry.hidden)
        self.position_embedding = nn.Embedding(geometry.max_positions, geometry.hidden)
        self.embed_norm = nn.LayerNorm(geometry.hidden, eps=geometry.layer_norm_eps)
        self.layers = build_layers(geometry, geometry.num_layers)
        self.apply(lambda m: init_weights(m, geometry.init_std))

    @classmethod
    def from_pretrained(cls, name_or_path):
        raise NotImplementedError(
            f"loading pretrained encoder weights ({name_or_path}) is not supported; "
            "encoders are randomly initialized"
        )

    @property
    def bottom(self):
        return self.layers[:self.geometry.bottom_layers]

    @property
    def top(self):
        return self.layers[self.geometry.bottom_layers:]

    def bottom_parameters(self):
        yield from self.token_embedding.parameters()
        yield from self.position_embedding.parameters()
        yield from self.embed_norm.parameters()
        for layer in self.bottom:
            yield from layer.parameters()

    def embed(self, token_ids):
        positions = torch.arange(token_ids.shape[1], device=token_ids.device)
        return self.embed_norm(self.token_embedding(token_ids) + self.position_embedding(positions)[None])

    def encode_bottom(self, token_ids, mask):
        """Hidden states after the bottom module, every position."""
        return run_layers(self.bottom, self.embed(token_ids), mask)

    def forward(self, token_ids, mask):
        return forward_encoder(self, token_ids, mask)


def check_batch(encoder, token_ids, mask):
    if token_ids.dim() != 2 or token_ids.shape != mask.shape:
        raise ValueError(
            f"token_ids {tuple(token_ids.shape)} and mask {tuple(mask.shape)} must be equal 2-d shapes")
    if token_ids.shape[1] > encoder.geometry.max_positions:
        raise ValueError(
            f"sequence length {token_ids.shape[1]} exceeds max_positions {encoder.geometry.max_positions}")
    if bool((mask.sum(dim=1) == 0).any()):
        raise ValueError("every row needs at least one unmasked position")


def forward_encoder(encoder, token_ids, mask):
    """Return the CLS vectors after the bottom module and after the full stack."""
    check_batch(encoder, token_ids, mask)
    bottom = encoder.encode_bottom(token_ids, mask)
    full = run_layers(encoder.top, bottom, mask)
    return bottom[:, 0], full[:, 0]


def build_encoder(geometry, seed=0, dtype=torch.float32):
    with seeded(seed):
        encoder = Encoder(geometry)
    return encoder.to(dtype)
