"""Epoch loop shared by single-task and multi-task training.

Model selection uses positive-class validation F1 of the primary task; the
best epoch's parameters are restored when training ends.
"""
import copy
import json
import logging
import time
from collections import Counter
from dataclasses import dataclass, field, asdict
from pathlib import Path

import torch
from django.core.exceptions import ValidationError

from corpus.multitask import batch_iter, encode_rows
from corpus.samples import IGNORE
from evaluation.metrics import prf1
from mtl.losses import JointLossConfig, TaskLossSpec, joint_loss
from mtl.network import forward_mtl, trainable_parameters

logger = logging.getLogger(__name__)


class TrainingDivergedError(RuntimeError):
    pass


@dataclass
class TrainingData:
    train_rows: list
    val_rows: list
    tokenizer: object
    primary_task: str = ''

    def tasks(self):
        found = []
        for row in self.train_rows:
            for task in row.labels:
                if task not in found:
                    found.append(task)
        return found


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_f1: dict
    lr: float


@dataclass
class TrainHistory:
    epochs: list = field(default_factory=list)
    chosen_epoch: int = None
    best_val_f1: float = None
    wall_time: float = 0.0
    stopped_early: bool = False

    def val_scores(self, task):
        return [record.val_f1[task] for record in self.epochs]

    def to_records(self):
        return [asdict(record) for record in self.epochs]

    def write(self, path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', encoding='utf-8') as f:
            for record in self.to_records():
                f.write(json.dumps(record, sort_keys=True) + '\n')


class EarlyStopper:
    """Stops after ``patience`` consecutive epochs without a strictly better score."""

    def __init__(self, patience):
        if patience < 1:
            raise ValidationError(f"patience must be >= 1, got {patience}", code='patience')
        self.patience = patience
        self.best_score = None
        self.best_epoch = None
        self.stale = 0

    def update(self, score, epoch):
        """Record an epoch; returns (improved, should_stop)."""
        if self.best_score is None or score > self.best_score:
            self.best_score, self.best_epoch, self.stale = score, epoch, 0
            return True, False
        self.stale += 1
        return False, self.stale >= self.patience


def loss_config_for(rows, cfg):
    specs = []
    counts = {}
    for row in rows:
        for task, label in row.labels.items():
            if label != IGNORE:
                counts.setdefault(task, Counter())[label] += 1
    for task, counter in counts.items():
        specs.append(TaskLossSpec.from_counts(task, counter[1], counter[0]))
    return JointLossConfig(reg_lambda=cfg.reg_lambda, reg_layer=cfg.reg_layer, task_specs=tuple(specs))


def make_optimizer(model, cfg):
    params = trainable_parameters(model)
    if cfg.optimizer == 'sgd':
        return torch.optim.SGD(params, lr=cfg.lr)
    return torch.optim.AdamW(params, lr=cfg.lr, weight_decay=cfg.weight_decay)


def epoch_seed(seed, epoch):
    return seed * 10007 + epoch


def training_step(model, batch, loss_cfg, optimizer):
    optimizer.zero_grad(set_to_none=True)
    breakdown = joint_loss(forward_mtl(model, batch), batch.labels, loss_cfg, model)
    if not torch.isfinite(breakdown.total):
        per_task = {task: float(value) for task, value in breakdown.per_task.items()}
        raise TrainingDivergedError(f"non-finite loss {float(breakdown.total)} (per task {per_task}, reg {float(breakdown.reg)})")
    breakdown.total.backward()
    optimizer.step()
    return breakdown


@dataclass
class TaskPredictions:
    ids: list = field(default_factory=list)
    preds: list = field(default_factory=list)
    probs: list = field(default_factory=list)
    golds: list = field(default_factory=list)


@torch.no_grad()
def predict(model, rows, tokenizer, seq_len, batch_size=64):
    """Labels and positive-class probabilities for each task's labeled rows, in row order."""
    was_training = model.training
    model.eval()
    out = {task: TaskPredictions() for task in model.tasks}
    for start in range(0, len(rows), batch_size):
        indices = list(range(start, min(start + batch_size, len(rows))))
        batch = encode_rows(rows, indices, tokenizer, seq_len, [])
        logits = model(batch.token_ids, batch.attention_mask)
        for task, task_logits in logits.items():
            probs = torch.softmax(task_logits, dim=-1)[:, 1].tolist()
            for i, prob in zip(indices, probs):
                gold = rows[i].labels.get(task, IGNORE)
                if gold == IGNORE:
                    continue
                record = out[task]
                record.ids.append(rows[i].sample_id)
                record.preds.append(1 if prob > 0.5 else 0)
                record.probs.append(prob)
                record.golds.append(gold)
    model.train(was_training)
    return out


def evaluate(model, rows, tokenizer, seq_len):
    return {
        task: prf1(p.preds, p.golds)
        for task, p in predict(model, rows, tokenizer, seq_len).items()
        if p.golds
    }


def train(model, data, cfg, seed=None):
    """Train ``model`` in place and return (model, history) with the best epoch restored."""
    seed = cfg.seeds[0] if seed is None else seed
    history = TrainHistory()
    if cfg.max_epochs == 0:
        return model, history
    if not data.train_rows or not data.val_rows:
        raise ValidationError("training needs non-empty train and validation rows", code='empty')
    primary = cfg.primary_task or data.primary_task or data.tasks()[0]

    torch.manual_seed(seed)
    loss_cfg = loss_config_for(data.train_rows, cfg)
    optimizer = make_optimizer(model, cfg)
    scheduler = torch.optim.lr_scheduler.ExponentialLR(optimizer, gamma=cfg.scheduler_gamma)
    stopper = EarlyStopper(cfg.patience)
    best_state = copy.deepcopy(model.state_dict())
    started = time.monotonic()

    for epoch in range(1, cfg.max_epochs + 1):
        model.train()
        lr = optimizer.param_groups[0]['lr']
        total, steps = 0.0, 0
        batches = batch_iter(data.train_rows, cfg.batch_size, epoch_seed(seed, epoch), data.tokenizer, cfg.seq_len)
        for step, batch in enumerate(batches, start=1):
            try:
                breakdown = training_step(model, batch, loss_cfg, optimizer)
            except TrainingDivergedError as exc:
                raise TrainingDivergedError(f"epoch {epoch} step {step}: {exc}") from None
            total += float(breakdown.total)
            steps += 1
        scheduler.step()

        reports = evaluate(model, data.val_rows, data.tokenizer, cfg.seq_len)
        if primary not in reports:
            raise ValidationError(f"validation rows carry no labels for primary task {primary!r}", code='empty')
        val_f1 = {task: report.f1 for task, report in reports.items()}
        history.epochs.append(EpochRecord(epoch=epoch, train_loss=total / max(steps, 1), val_f1=val_f1, lr=lr))
        logger.info("epoch=%d loss=%.4f val_f1=%s", epoch, total / max(steps, 1),
                    {t: round(v, 4) for t, v in val_f1.items()})

        improved, stop = stopper.update(val_f1[primary], epoch)
        if improved:
            best_state = copy.deepcopy(model.state_dict())
        if stop:
            history.stopped_early = True
            logger.info("early stop after epoch %d (best epoch %d)", epoch, stopper.best_epoch)
            break

    model.load_state_dict(best_state)
    history.chosen_epoch = stopper.best_epoch
    history.best_val_f1 = stopper.best_score
    history.wall_time = time.monotonic() - started
    return model, history
