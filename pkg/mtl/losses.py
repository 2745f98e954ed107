import itertools
from dataclasses import dataclass, field

import torch
import torch.nn.functional as F
from django.core.exceptions import ValidationError

from corpus.samples import IGNORE

from .network import REG_LAYERS


@dataclass(frozen=True)
class TaskLossSpec:
    """Inverse-frequency class weights: w_pos = N/(P+N), w_neg = P/(P+N)."""
    task: str
    class_weights: tuple

    def __post_init__(self):
        if len(self.class_weights) != 2 or any(w <= 0 for w in self.class_weights):
            raise ValidationError(f"class weights of {self.task} must be two positive reals", code='weights')

    @classmethod
    def from_counts(cls, task, positives, negatives):
        if positives <= 0 or negatives <= 0:
            raise ValidationError(
                f"task {task} needs both classes to weight the loss (P={positives}, N={negatives})",
                code='weights')
        total = positives + negatives
        return cls(task, (positives / total, negatives / total))


@dataclass(frozen=True)
class JointLossConfig:
    reg_lambda: float = 5e-3
    reg_layer: str = 'last'
    task_specs: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if self.reg_lambda < 0:
            raise ValidationError(f"lambda must be non-negative, got {self.reg_lambda}", code='lambda')
        if self.reg_layer not in REG_LAYERS:
            raise ValidationError(f"reg_layer must be one of {REG_LAYERS}", code='reg_layer')

    def weights_for(self, task):
        for spec in self.task_specs:
            if spec.task == task:
                return spec.class_weights
        return None


@dataclass
class LossBreakdown:
    total: torch.Tensor
    per_task: dict
    reg: torch.Tensor


def task_loss(logits, labels, class_weights=None):
    """Class-weighted cross-entropy averaged over rows that are not IGNORE."""
    keep = labels != IGNORE
    count = int(keep.sum())
    if count == 0:
        return logits.new_zeros(())
    weight = None
    if class_weights is not None:
        weight = torch.tensor(class_weights, dtype=logits.dtype, device=logits.device)
    return F.cross_entropy(logits[keep], labels[keep], weight=weight, reduction='sum') / count


def soft_sharing_penalty(weights, reg_lambda, reference=None):
    """lambda times the summed Frobenius distance over unordered task pairs."""
    matrices = list(weights.values())
    if reg_lambda == 0 or len(matrices) < 2:
        if reference is not None:
            return reference.new_zeros(())
        return matrices[0].new_zeros(()) if matrices else torch.zeros(())
    distance = sum(torch.linalg.vector_norm(a - b) for a, b in itertools.combinations(matrices, 2))
    return reg_lambda * distance


def joint_loss(logits, labels, cfg, model):
    per_task = {}
    for task, task_logits in logits.items():
        if task in labels:
            per_task[task] = task_loss(task_logits, labels[task], cfg.weights_for(task))
    reference = next(iter(logits.values()))
    reg = soft_sharing_penalty(model.regularized_weights(cfg.reg_layer), cfg.reg_lambda, reference)
    total = reg + sum(per_task.values())
    return LossBreakdown(total=total, per_task=per_task, reg=reg)
