"""Central-difference check of joint-loss gradients in float64."""
import copy
import logging
from dataclasses import dataclass

import numpy as np
import torch

from mtl.losses import joint_loss
from mtl.network import forward_mtl

logger = logging.getLogger(__name__)

# Denominator floor so that near-zero gradients are compared absolutely.
REL_FLOOR = 1e-6


@dataclass
class GradCheckResult:
    max_rel_error: float
    checked: int
    worst: tuple
    frozen_max_abs: float
    trainable_bottom: int = 0


def relative_error(analytic, numeric):
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), REL_FLOOR)


def grad_check(model, batch, loss_cfg, step=1e-5, n_coords=200, seed=0):
    """Compare autograd gradients with central differences on sampled coordinates.

    At least one coordinate of every trainable tensor is checked. Every tensor
    of the encoder bottom module is inspected after the backward pass:
    ``trainable_bottom`` counts those still marked trainable and
    ``frozen_max_abs`` is the largest gradient entry that reached any of them.
    """
    model = copy.deepcopy(model).double()
    model.train()

    def loss_value():
        return joint_loss(forward_mtl(model, batch), batch.labels, loss_cfg, model).total

    model.zero_grad(set_to_none=True)
    loss_value().backward()

    bottom = list(model.encoder.bottom_parameters())
    trainable_bottom = sum(1 for param in bottom if param.requires_grad)
    frozen_max = max((float(param.grad.abs().max()) for param in bottom if param.grad is not None), default=0.0)

    named = list(model.named_parameters())
    trainable = [(name, p) for name, p in named if p.requires_grad]
    analytic = {
        name: (p.grad.detach().clone() if p.grad is not None else torch.zeros_like(p)).view(-1)
        for name, p in trainable
    }

    rng = np.random.default_rng(seed)
    coords = [(name, int(rng.integers(p.numel()))) for name, p in trainable]
    pool = [(name, i) for name, p in trainable for i in range(p.numel())]
    chosen = set(coords)
    remaining = [c for c in pool if c not in chosen]
    extra = max(0, n_coords - len(coords))
    if extra and remaining:
        picks = rng.choice(len(remaining), size=min(extra, len(remaining)), replace=False)
        coords.extend(remaining[i] for i in sorted(picks))

    params = dict(trainable)
    worst, max_err = None, 0.0
    with torch.no_grad():
        for name, index in coords:
            flat = params[name].view(-1)
            original = flat[index].item()
            flat[index] = original + step
            plus = loss_value().item()
            flat[index] = original - step
            minus = loss_value().item()
            flat[index] = original
            numeric = (plus - minus) / (2 * step)
            err = relative_error(analytic[name][index].item(), numeric)
            if err >= max_err:
                max_err, worst = err, (name, index)

    logger.info("grad check: %d coordinates, max relative error %.3e at %s", len(coords), max_err, worst)
    return GradCheckResult(max_rel_error=max_err, checked=len(coords), worst=worst, frozen_max_abs=frozen_max,
                           trainable_bottom=trainable_bottom)
