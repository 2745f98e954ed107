import json
import logging
import random
from dataclasses import dataclass, field
from pathlib import Path

import torch
from django.core.exceptions import ValidationError

from .samples import IGNORE

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MultiTaskRow:
    """A text with one label slot per task; absent labels carry IGNORE."""
    text: str
    labels: dict
    sample_id: str = ''

    def __post_init__(self):
        if not any(value != IGNORE for value in self.labels.values()):
            raise ValidationError(f"row {self.sample_id!r} has no task label", code='all_ignored')

    @property
    def task(self):
        """The task this row carries a gold label for (first one, by task order)."""
        for name, value in self.labels.items():
            if value != IGNORE:
                return name
        return None


@dataclass
class MultiTaskBatch:
    token_ids: torch.Tensor
    attention_mask: torch.Tensor
    labels: dict
    row_indices: list = field(default_factory=list)

    def __len__(self):
        return self.token_ids.shape[0]

    @property
    def tasks(self):
        return list(self.labels)


def build_multitask_view(task_sets):
    """Restructure per-task sample lists into rows labeled for every task.

    ``task_sets`` maps task name to samples of that task; the mapping order
    fixes the task order of every row.
    """
    tasks = list(task_sets)
    if len(tasks) < 2:
        raise ValidationError(f"a multitask view needs at least two tasks, got {tasks}", code='tasks')

    rows = []
    for task, samples in task_sets.items():
        for sample in samples:
            if sample.task != task:
                raise ValidationError(
                    f"sample {sample.id!r} belongs to task {sample.task!r}, listed under {task!r}",
                    code='task',
                )
            if sample.label not in (0, 1):
                raise ValidationError(f"sample {sample.id!r} has no gold label", code='label')
            labels = {name: IGNORE for name in tasks}
            labels[task] = sample.label
            rows.append(MultiTaskRow(text=sample.text, labels=labels, sample_id=sample.id))

    logger.debug("built multitask view: %d rows over %s", len(rows), tasks)
    return rows


def single_task_rows(samples):
    """Rows for single-task training: one label slot, the sample's own task."""
    return [MultiTaskRow(text=s.text, labels={s.task: s.label}, sample_id=s.id) for s in samples]


def export_multitask_view(rows, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        for row in rows:
            record = {'id': row.sample_id, 'text': row.text}
            record.update(row.labels)
            f.write(json.dumps(record, ensure_ascii=False) + '\n')


def _tasks_of(rows):
    tasks = []
    for row in rows:
        for name in row.labels:
            if name not in tasks:
                tasks.append(name)
    return tasks


def encode_rows(rows, indices, tokenizer, seq_len, tasks):
    encoded = [tokenizer.encode(rows[i].text, seq_len) for i in indices]
    token_ids = torch.tensor([ids for ids, _ in encoded], dtype=torch.long)
    attention_mask = torch.tensor([mask for _, mask in encoded], dtype=torch.long)
    labels = {
        task: torch.tensor([rows[i].labels.get(task, IGNORE) for i in indices], dtype=torch.long)
        for task in tasks
    }
    return MultiTaskBatch(token_ids, attention_mask, labels, list(indices))


def batch_iter(rows, batch_size, seed, tokenizer, seq_len=128):
    """Lazily encode batches over one global permutation of ``rows``.

    Rows of different tasks share batches; the last batch may be short.
    """
    if batch_size <= 0:
        raise ValidationError(f"batch_size must be positive, got {batch_size}", code='batch_size')

    tasks = _tasks_of(rows)
    order = list(range(len(rows)))
    random.Random(seed).shuffle(order)
    return (
        encode_rows(rows, order[start:start + batch_size], tokenizer, seq_len, tasks)
        for start in range(0, len(order), batch_size)
    )
