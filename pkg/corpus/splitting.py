import logging
import math
import random
from dataclasses import dataclass
from fractions import Fraction

from django.core.exceptions import ValidationError

from .samples import class_counts

logger = logging.getLogger(__name__)

CLASS_NAMES = {0: 'negative', 1: 'positive'}

ROUNDING_MODES = ('nearest', 'floor')


def _as_fraction(value):
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        return Fraction(str(value))
    return Fraction(value)


@dataclass(frozen=True)
class SplitSpec:
    """Train/val/test ratios (exact rationals) plus the shuffle seed.

    ``rounding`` decides how per-class val/test sizes are derived from
    ``ratio * class_count``: ``nearest`` rounds half up, ``floor`` truncates.
    The remainder of each class always goes to train.
    """
    train_ratio: Fraction = Fraction(8, 10)
    val_ratio: Fraction = Fraction(1, 10)
    test_ratio: Fraction = Fraction(1, 10)
    seed: int = 13
    rounding: str = 'floor'

    def __post_init__(self):
        for name in ('train_ratio', 'val_ratio', 'test_ratio'):
            ratio = _as_fraction(getattr(self, name))
            if not 0 <= ratio <= 1:
                raise ValidationError(f"{name} must lie in [0, 1], got {ratio}", code='ratio')
            object.__setattr__(self, name, ratio)
        total = self.train_ratio + self.val_ratio + self.test_ratio
        if total != 1:
            raise ValidationError(f"split ratios must sum to 1, got {total}", code='ratio')
        if self.rounding not in ROUNDING_MODES:
            raise ValidationError(f"rounding must be one of {ROUNDING_MODES}", code='rounding')

    def part_size(self, ratio, count):
        exact = ratio * count
        if self.rounding == 'floor':
            return math.floor(exact)
        return math.floor(exact + Fraction(1, 2))


def stratified_split(samples, spec):
    """Split one task's samples into (train, val, test), stratified by label.

    Each part keeps the input order of its members.
    """
    tasks = {s.task for s in samples}
    if len(tasks) > 1:
        raise ValidationError(f"stratified_split expects one task, got {sorted(tasks)}", code='task')
    if any(s.label not in (0, 1) for s in samples):
        raise ValidationError("stratified_split expects labels in {0, 1}", code='label')

    by_class = {0: [], 1: []}
    for index, sample in enumerate(samples):
        by_class[sample.label].append(index)

    rng = random.Random(spec.seed)
    assignment = {}
    for label in (0, 1):
        members = by_class[label]
        if not members:
            raise ValidationError(f"class {CLASS_NAMES[label]} is empty", code='empty_class')
        shuffled = list(members)
        rng.shuffle(shuffled)
        n_val = spec.part_size(spec.val_ratio, len(members))
        n_test = spec.part_size(spec.test_ratio, len(members))
        if n_val + n_test > len(members):
            n_test = len(members) - n_val
        for index in shuffled[:n_val]:
            assignment[index] = 'val'
        for index in shuffled[n_val:n_val + n_test]:
            assignment[index] = 'test'
        for index in shuffled[n_val + n_test:]:
            assignment[index] = 'train'

    parts = {'train': [], 'val': [], 'test': []}
    for index, sample in enumerate(samples):
        parts[assignment[index]].append(sample)

    logger.info(
        "split %d samples: train=%s val=%s test=%s",
        len(samples), class_counts(parts['train']), class_counts(parts['val']), class_counts(parts['test']),
    )
    return parts['train'], parts['val'], parts['test']


def mix_native(cm_train, native_pool, per_class, seed):
    """Add ``per_class`` random native positives and negatives to a code-mixed train set.

    Sampling is without replacement. Pool samples whose id already occurs in
    ``cm_train`` are never drawn.
    """
    if per_class < 0:
        raise ValidationError(f"per_class must be >= 0, got {per_class}", code='per_class')
    if per_class == 0:
        return list(cm_train)

    present = {s.id for s in cm_train}
    rng = random.Random(seed)
    added = []
    for label in (1, 0):
        candidates = [s for s in native_pool if s.label == label and s.id not in present]
        if len(candidates) < per_class:
            shortfall = per_class - len(candidates)
            raise ValidationError(
                f"native pool has {len(candidates)} {CLASS_NAMES[label]} samples but "
                f"{per_class} were requested (short by {shortfall})",
                code='shortfall',
            )
        picked = rng.sample(range(len(candidates)), per_class)
        added.extend(candidates[i] for i in sorted(picked))

    logger.info("mixed %d native samples (%d per class) into %d code-mixed samples",
                len(added), per_class, len(cm_train))
    return list(cm_train) + added
