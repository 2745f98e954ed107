import logging
from pathlib import Path

import torch
from django.core.exceptions import ValidationError

from .network import Encoder, EncoderGeometry

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = 'codemix-checkpoint'
CHECKPOINT_VERSION = 1


def save_checkpoint(module, path, kind, config, **extra):
    """Write every tensor of ``module`` with its shape, tagged with format and version."""
    state = {name: tensor.detach().cpu() for name, tensor in module.state_dict().items()}
    payload = {
        'format': CHECKPOINT_FORMAT,
        'version': CHECKPOINT_VERSION,
        'kind': kind,
        'config': config,
        'shapes': {name: list(tensor.shape) for name, tensor in state.items()},
        'state_dict': state,
    }
    payload.update(extra)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save(payload, path)
    logger.info("saved %s checkpoint (%d tensors) to %s", kind, len(state), path)


def load_checkpoint(path, kind):
    payload = torch.load(path, map_location='cpu', weights_only=True)
    if payload.get('format') != CHECKPOINT_FORMAT or payload.get('version') != CHECKPOINT_VERSION:
        raise ValidationError(f"{path} is not a {CHECKPOINT_FORMAT} v{CHECKPOINT_VERSION} file", code='checkpoint')
    if payload.get('kind') != kind:
        raise ValidationError(f"{path} holds a {payload.get('kind')!r} checkpoint, expected {kind!r}",
                              code='checkpoint')
    for name, tensor in payload['state_dict'].items():
        if list(tensor.shape) != payload['shapes'][name]:
            raise ValidationError(f"{path}: tensor {name} does not match its recorded shape", code='checkpoint')
    return payload


def save_encoder(encoder, path):
    save_checkpoint(encoder, path, 'encoder', encoder.geometry.to_dict())


def load_encoder(path):
    payload = load_checkpoint(path, 'encoder')
    encoder = Encoder(EncoderGeometry(**payload['config']))
    encoder.to(next(iter(payload['state_dict'].values())).dtype)
    encoder.load_state_dict(payload['state_dict'])
    return encoder
