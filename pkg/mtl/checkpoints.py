from encoder.checkpoints import load_checkpoint, save_checkpoint
from encoder.network import EncoderGeometry

from .network import GatedMultiTaskModel, SingleTaskModel


def save_model(model, path):
    """Encoder checkpoint layout extended with task tops, gates, heads and the gate flag."""
    description = model.describe()
    save_checkpoint(model, path, description['kind'], description,
                    gate_enabled=description.get('gate_enabled', False))


def load_model(path, kind='mtl'):
    payload = load_checkpoint(path, kind)
    config = payload['config']
    geometry = EncoderGeometry(**config['geometry'])
    if kind == 'mtl':
        model = GatedMultiTaskModel(geometry, config['tasks'], gate_enabled=payload['gate_enabled'])
    else:
        model = SingleTaskModel(geometry, config['tasks'][0])
    model.to(next(iter(payload['state_dict'].values())).dtype)
    model.load_state_dict(payload['state_dict'])
    return model
