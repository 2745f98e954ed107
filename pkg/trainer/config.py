import json
import logging
from dataclasses import dataclass, asdict, field, fields

from django.conf import settings
from django.core.exceptions import ValidationError

logger = logging.getLogger(__name__)

OPTIMIZERS = ('sgd', 'adamw')


def _grid():
    return settings.CODEMIX['GRID']


def _default_seeds():
    return tuple(settings.CODEMIX['DEFAULT_SEEDS'])


@dataclass
class TrainConfig:
    """Training hyperparameters; field names double as config-file keys."""
    lr: float = 2e-5
    optimizer: str = 'adamw'
    scheduler_gamma: float = 0.9
    batch_size: int = 32
    seq_len: int = 128
    patience: int = 4
    max_epochs: int = 30
    seeds: tuple = field(default_factory=_default_seeds)
    reg_lambda: float = 5e-3
    reg_layer: str = 'last'
    weight_decay: float = 0.01
    primary_task: str = ''

    def __post_init__(self):
        self.seeds = tuple(self.seeds)
        self.validate()

    def validate(self):
        if self.patience < 1:
            raise ValidationError(f"patience must be >= 1, got {self.patience}", code='patience')
        if self.lr <= 0:
            raise ValidationError(f"lr must be positive, got {self.lr}", code='lr')
        if self.optimizer not in OPTIMIZERS:
            raise ValidationError(f"optimizer must be one of {OPTIMIZERS}, got {self.optimizer!r}", code='optimizer')
        if not 0 < self.scheduler_gamma <= 1:
            raise ValidationError(f"scheduler_gamma must be in (0, 1], got {self.scheduler_gamma}", code='gamma')
        if self.batch_size <= 0:
            raise ValidationError(f"batch_size must be positive, got {self.batch_size}", code='batch_size')
        if self.seq_len < 2:
            raise ValidationError(f"seq_len must be >= 2, got {self.seq_len}", code='seq_len')
        if self.max_epochs < 0:
            raise ValidationError(f"max_epochs must be >= 0, got {self.max_epochs}", code='max_epochs')
        if self.reg_lambda < 0:
            raise ValidationError(f"reg_lambda must be >= 0, got {self.reg_lambda}", code='lambda')
        if not self.seeds:
            raise ValidationError("at least one seed is required", code='seeds')

    def off_grid(self):
        """Names of fields whose value lies outside the reference configuration grid."""
        grid = _grid()
        checks = {
            'lr': (self.lr, grid['LEARNING_RATES']),
            'optimizer': (self.optimizer, grid['OPTIMIZERS']),
            'scheduler_gamma': (self.scheduler_gamma, grid['SCHEDULER_GAMMAS']),
            'batch_size': (self.batch_size, grid['BATCH_SIZES']),
            'seq_len': (self.seq_len, grid['SEQUENCE_LENGTHS']),
            'reg_lambda': (self.reg_lambda, grid['LAMBDAS']),
        }
        return [name for name, (value, allowed) in checks.items() if value not in allowed]

    def replace(self, **changes):
        values = asdict(self)
        values.update({k: v for k, v in changes.items() if v is not None})
        return TrainConfig(**values)

    def to_dict(self):
        values = asdict(self)
        values['seeds'] = list(self.seeds)
        return values

    @classmethod
    def from_dict(cls, values):
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(values) - known)
        if unknown:
            raise ValidationError(f"unknown config keys: {', '.join(unknown)}", code='config')
        return cls(**values)


def load_config(path):
    with open(path, encoding='utf-8') as f:
        try:
            values = json.load(f)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: invalid config file ({exc.msg})", code='config')
    config = TrainConfig.from_dict(values)
    off = config.off_grid()
    if off:
        logger.warning("config %s is off the reference grid for: %s", path, ', '.join(off))
    return config
