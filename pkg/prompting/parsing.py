from django.core.exceptions import ValidationError

from corpus.samples import Task

# Surface forms written into prompts; the first of each list is canonical.
POSITIVE_FORMS = {
    Task.HUMOR: ('humorous',),
    Task.SARCASM: ('sarcastic',),
    Task.HATE: ('hateful',),
}
NEGATIVE_FORMS = {
    Task.HUMOR: ('non-humorous', 'non humorous', 'not humorous'),
    Task.SARCASM: ('not sarcastic', 'non-sarcastic', 'non sarcastic'),
    Task.HATE: ('non-hateful', 'non hateful', 'not hateful'),
}


def label_name(task, label):
    if label not in (0, 1):
        raise ValidationError(f"label must be 0 or 1, got {label!r}", code='label')
    forms = POSITIVE_FORMS if label == 1 else NEGATIVE_FORMS
    return forms[Task(task)][0]


def parse_label(response, task):
    """1, 0, or None (abstain). Negative forms are matched first."""
    text = (response or '').lower()
    task = Task(task)
    if any(form in text for form in NEGATIVE_FORMS[task]):
        return 0
    if any(form in text for form in POSITIVE_FORMS[task]):
        return 1
    return None
