import torch
import torch.nn as nn


def gate_coefficients(h_bert, h_task, weight, bias):
    """alpha = sigmoid(W [h_bert ; h_task] + b), one coefficient per hidden unit."""
    hidden = h_bert.shape[-1]
    if h_task.shape != h_bert.shape:
        raise ValueError(f"h_bert {tuple(h_bert.shape)} and h_task {tuple(h_task.shape)} differ")
    if tuple(weight.shape) != (hidden, 2 * hidden) or tuple(bias.shape) != (hidden,):
        raise ValueError(
            f"gate expects W {(hidden, 2 * hidden)} and b {(hidden,)}, "
            f"got {tuple(weight.shape)} and {tuple(bias.shape)}")
    return torch.sigmoid(torch.cat([h_bert, h_task], dim=-1) @ weight.T + bias)


def gate(h_bert, h_task, weight, bias):
    """Coordinatewise convex combination alpha * h_bert + (1 - alpha) * h_task."""
    alpha = gate_coefficients(h_bert, h_task, weight, bias)
    return alpha * h_bert + (1 - alpha) * h_task


class TaskGate(nn.Module):
    """Per-task gate; ``proj.weight`` is the D x 2D gate matrix."""

    def __init__(self, hidden):
        super().__init__()
        self.proj = nn.Linear(2 * hidden, hidden)

    def forward(self, h_bert, h_task):
        return gate(h_bert, h_task, self.proj.weight, self.proj.bias)
