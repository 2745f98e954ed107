import json
from pathlib import Path

from django.core.exceptions import ValidationError

FIELDS = ('id', 'task', 'pred', 'prob')


def write_predictions(records, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        for record in records:
            f.write(json.dumps({name: record[name] for name in FIELDS}, ensure_ascii=False) + '\n')


def read_predictions(path):
    records = []
    with open(path, encoding='utf-8') as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"{path}: line {lineno}: malformed record ({exc.msg})", code='parse')
            missing = [name for name in FIELDS if name not in record]
            if missing:
                raise ValidationError(f"{path}: line {lineno}: missing fields {', '.join(missing)}", code='parse')
            records.append(record)
    return records


def align(records, samples):
    """Predictions ordered like ``samples`` (matched by id); every sample needs one."""
    by_id = {str(r['id']): r for r in records}
    missing = [s.id for s in samples if s.id not in by_id]
    if missing:
        raise ValidationError(f"{len(missing)} samples have no prediction (first: {missing[0]!r})", code='missing')
    return [by_id[s.id]['pred'] for s in samples]
