from dataclasses import dataclass

from django.conf import settings
from django.core.exceptions import ValidationError
from django.template.loader import render_to_string

from corpus.samples import Task

from .parsing import label_name

DEFINITIONS = {
    Task.HUMOR: 'Decide whether the input is humorous, i.e. meant to amuse through jokes, wordplay or exaggeration.',
    Task.SARCASM: 'Decide whether the input is sarcastic, i.e. it says the opposite of what it means to mock or criticise.',
    Task.HATE: 'Decide whether the input is hateful, i.e. it attacks or demeans a person or a group.',
}


@dataclass(frozen=True)
class PromptConfig:
    task: str
    k: int = 0
    template_id: str = 'kshot'
    seed: int = 0

    def __post_init__(self):
        if self.task not in Task.values:
            raise ValidationError(f"unknown task {self.task!r}", code='task')
        grid = settings.CODEMIX['GRID']['SHOT_COUNTS']
        if self.k not in grid:
            raise ValidationError(f"k must be one of {grid}, got {self.k}", code='k')


def render_prompt(cfg, shots, query):
    """System prompt, k labeled exemplars, then the query (its label is never shown)."""
    if len(shots) != cfg.k:
        raise ValidationError(f"expected {cfg.k} shots, got {len(shots)}", code='shots')
    exemplars = []
    for shot in shots:
        if shot.label not in (0, 1):
            raise ValidationError(f"shot {shot.id!r} has no label", code='shot_label')
        exemplars.append({'text': shot.text, 'label': label_name(cfg.task, shot.label)})
    task = Task(cfg.task)
    return render_to_string(f"prompting/{cfg.template_id}.txt", {
        'definition': DEFINITIONS[task],
        'positive': label_name(task, 1),
        'negative': label_name(task, 0),
        'shots': exemplars,
        'query': query.text,
    })
