"""Multi-task and single-task classifiers built on the shared encoder.

The gated model replicates the encoder's top module once per task. Every
replica reads the bottom module's output; the encoder's own top module is the
shared replica whose CLS vector feeds each task's gate.
"""
import logging

import torch.nn as nn
from django.core.exceptions import ValidationError

from encoder.network import Encoder, build_layers, check_batch, init_weights, run_layers, seeded

from .gating import TaskGate

logger = logging.getLogger(__name__)

REG_LAYERS = ('last', 'second_last')
TOP_INITS = ('random', 'copy')


class GatedMultiTaskModel(nn.Module):

    def __init__(self, geometry, tasks, gate_enabled=True, top_init='random'):
        super().__init__()
        if len(tasks) < 1:
            raise ValidationError("at least one task is required", code='tasks')
        if top_init not in TOP_INITS:
            raise ValidationError(f"top_init must be one of {TOP_INITS}", code='top_init')
        self.geometry = geometry
        self.tasks = list(tasks)
        self.gate_enabled = gate_enabled
        self.encoder = Encoder(geometry)
        self.task_tops = nn.ModuleDict({t: build_layers(geometry, geometry.top_layers) for t in self.tasks})
        self.gates = nn.ModuleDict({t: TaskGate(geometry.hidden) for t in self.tasks})
        self.heads = nn.ModuleDict({t: nn.Linear(geometry.hidden, 2) for t in self.tasks})
        for module in (self.task_tops, self.gates, self.heads):
            module.apply(lambda m: init_weights(m, geometry.init_std))
        if top_init == 'copy':
            for top in self.task_tops.values():
                top.load_state_dict(self.encoder.top.state_dict())

    def represent(self, token_ids, mask):
        """Per-task head inputs plus the shared replica's CLS vector."""
        check_batch(self.encoder, token_ids, mask)
        bottom = self.encoder.encode_bottom(token_ids, mask)
        h_bert = run_layers(self.encoder.top, bottom, mask)[:, 0]
        features = {}
        for task in self.tasks:
            h_task = run_layers(self.task_tops[task], bottom, mask)[:, 0]
            features[task] = self.gates[task](h_bert, h_task) if self.gate_enabled else h_task
        return features, h_bert

    def forward(self, token_ids, mask):
        features, _ = self.represent(token_ids, mask)
        return {task: self.heads[task](features[task]) for task in self.tasks}

    def regularized_weights(self, reg_layer='last'):
        index = _reg_index(reg_layer, self.geometry.top_layers)
        return {task: self.task_tops[task][index].output_weight for task in self.tasks}

    def describe(self):
        return {
            'kind': 'mtl',
            'geometry': self.geometry.to_dict(),
            'tasks': self.tasks,
            'gate_enabled': self.gate_enabled,
        }


class SingleTaskModel(nn.Module):
    """Encoder plus one linear head on the final CLS vector."""

    def __init__(self, geometry, task):
        super().__init__()
        self.geometry = geometry
        self.tasks = [task]
        self.encoder = Encoder(geometry)
        self.head = nn.Linear(geometry.hidden, 2)
        init_weights(self.head, geometry.init_std)

    def forward(self, token_ids, mask):
        _, full = self.encoder(token_ids, mask)
        return {self.tasks[0]: self.head(full)}

    def regularized_weights(self, reg_layer='last'):
        return {}

    def describe(self):
        return {'kind': 'single', 'geometry': self.geometry.to_dict(), 'tasks': self.tasks}


def _reg_index(reg_layer, top_layers):
    if reg_layer not in REG_LAYERS:
        raise ValidationError(f"reg_layer must be one of {REG_LAYERS}, got {reg_layer!r}", code='reg_layer')
    index = -1 if reg_layer == 'last' else -2
    if top_layers < -index:
        raise ValidationError(f"reg_layer {reg_layer!r} needs at least {-index} top layers", code='reg_layer')
    return index


def build_mtl_model(geometry, tasks, gate_enabled=True, seed=0, top_init='random'):
    with seeded(seed):
        return GatedMultiTaskModel(geometry, tasks, gate_enabled=gate_enabled, top_init=top_init)


def build_single_task_model(geometry, task, seed=0):
    with seeded(seed):
        return SingleTaskModel(geometry, task)


def forward_mtl(model, batch):
    """Logits of every task for every row of ``batch``."""
    unknown = [task for task in batch.labels if task not in model.tasks]
    if unknown:
        raise ValidationError(f"batch carries tasks unknown to the model: {unknown}", code='task')
    return model(batch.token_ids, batch.attention_mask)


def freeze_bottom(model, trainable_top=None):
    """Mark the bottom module non-trainable.

    With ``trainable_top=k`` everything except the last ``k`` encoder layers is
    frozen instead (embeddings included).
    """
    encoder = model.encoder
    frozen_layers = encoder.geometry.bottom_layers
    if trainable_top is not None:
        if not 0 <= trainable_top <= encoder.geometry.num_layers:
            raise ValidationError(f"trainable_top out of range: {trainable_top}", code='trainable_top')
        frozen_layers = encoder.geometry.num_layers - trainable_top

    frozen = [encoder.token_embedding, encoder.position_embedding, encoder.embed_norm]
    frozen.extend(encoder.layers[:frozen_layers])
    for module in frozen:
        for param in module.parameters():
            param.requires_grad_(False)
            param.grad = None
    logger.debug("froze embeddings and %d encoder layers", frozen_layers)
    return model


def trainable_parameters(model):
    return [p for p in model.parameters() if p.requires_grad]
