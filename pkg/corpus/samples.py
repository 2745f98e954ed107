import json
import logging
from dataclasses import dataclass, asdict
from pathlib import Path

from django.core.exceptions import ValidationError
from django.db import models

logger = logging.getLogger(__name__)

# Sentinel for "no gold label for this task"; exported verbatim.
IGNORE = 999

LABEL_VALUES = (0, 1, IGNORE)

REQUIRED_FIELDS = ('id', 'text', 'task', 'label', 'origin', 'dataset')


class Task(models.TextChoices):
    HUMOR = 'humor', 'Humor'
    SARCASM = 'sarcasm', 'Sarcasm'
    HATE = 'hate', 'Hate'


class Origin(models.TextChoices):
    CODE_MIXED = 'code_mixed', 'Code-mixed'
    NATIVE_EN = 'native_en', 'Native English'
    NATIVE_HI_TRANSLATED = 'native_hi_translated', 'Hindi (translated)'


class CorpusParseError(ValidationError):
    """A record file line that is not a well-formed record."""


@dataclass(frozen=True)
class Sample:
    """One labeled text instance."""
    id: str
    text: str
    task: str
    label: int
    origin: str = Origin.CODE_MIXED.value
    dataset: str = ''

    def __post_init__(self):
        if self.task not in Task.values:
            raise ValidationError(f"unknown task {self.task!r}", code='task')
        if type(self.label) is not int or self.label not in LABEL_VALUES:
            raise ValidationError(f"label must be one of {LABEL_VALUES}, got {self.label!r}", code='label')
        if self.origin not in Origin.values:
            raise ValidationError(f"unknown origin {self.origin!r}", code='origin')
        if not isinstance(self.text, str) or not self.text.strip():
            raise ValidationError(f"sample {self.id!r} has empty text", code='text')

    def to_dict(self):
        return asdict(self)


def class_counts(samples):
    """Return (P, N): number of positive and negative samples."""
    positives = sum(1 for s in samples if s.label == 1)
    negatives = sum(1 for s in samples if s.label == 0)
    return positives, negatives


def load_jsonl(path):
    """Read samples from a line-delimited record file, in file order."""
    samples = []
    seen = set()
    with open(path, encoding='utf-8') as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusParseError(f"{path}: line {lineno}: malformed record ({exc.msg})", code='parse')
            if not isinstance(record, dict):
                raise CorpusParseError(f"{path}: line {lineno}: record must be an object", code='parse')
            missing = [name for name in REQUIRED_FIELDS if name not in record]
            if missing:
                raise CorpusParseError(f"{path}: line {lineno}: missing fields {', '.join(missing)}", code='parse')

            try:
                sample = Sample(
                    id=str(record['id']),
                    text=record['text'],
                    task=record['task'],
                    label=record['label'],
                    origin=record['origin'],
                    dataset=record['dataset'],
                )
            except ValidationError as exc:
                raise ValidationError(f"{path}: line {lineno}: {exc.messages[0]}", code=exc.code)

            if sample.id in seen:
                raise ValidationError(f"{path}: line {lineno}: duplicate id {sample.id!r}", code='duplicate')
            seen.add(sample.id)
            samples.append(sample)

    logger.debug("loaded %d samples from %s", len(samples), path)
    return samples


def save_jsonl(samples, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        for sample in samples:
            f.write(json.dumps(sample.to_dict(), ensure_ascii=False) + '\n')
