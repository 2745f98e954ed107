import hashlib
import json
from pathlib import Path

FIELDS = ('query_id', 'prompt_hash', 'response', 'parsed_label')


def prompt_hash(prompt):
    return hashlib.sha256(prompt.encode('utf-8')).hexdigest()


def transcript_entry(query, prompt, response, parsed_label):
    return {
        'query_id': query.id,
        'prompt_hash': prompt_hash(prompt),
        'response': response,
        'parsed_label': parsed_label,
    }


def write_transcript(entries, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        for entry in entries:
            f.write(json.dumps({name: entry[name] for name in FIELDS}, ensure_ascii=False) + '\n')
