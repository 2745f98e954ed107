import json
import platform
from importlib import metadata
from pathlib import Path

from django.utils import timezone

PACKAGES = ('Django', 'torch', 'numpy', 'scikit-learn', 'openai', 'google-genai')


def package_versions():
    versions = {'python': platform.python_version()}
    for name in PACKAGES:
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = None
    return versions


def build_manifest(verb, argv, config, seed):
    """Everything needed to re-run a command: its arguments, resolved config, seed and versions."""
    return {
        'verb': verb,
        'argv': list(argv),
        'config': config,
        'seed': seed,
        'versions': package_versions(),
        'created_at': timezone.now().isoformat(),
    }


def write_manifest(manifest, out_dir):
    path = Path(out_dir) / 'manifest.json'
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
    return path
