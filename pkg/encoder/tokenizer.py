import json
from collections import Counter
from pathlib import Path

from django.core.exceptions import ValidationError

from corpus.text import tokenize

PAD, UNK, CLS = '[PAD]', '[UNK]', '[CLS]'
PAD_ID, UNK_ID, CLS_ID = 0, 1, 2
SPECIALS = (PAD, UNK, CLS)


class Tokenizer:
    """Word-level tokenizer with PAD=0, UNK=1, CLS=2 and dense ids."""

    def __init__(self, vocab, max_len=256):
        for token, expected in zip(SPECIALS, (PAD_ID, UNK_ID, CLS_ID)):
            if vocab.get(token) != expected:
                raise ValidationError(f"special token {token} must have id {expected}", code='vocab')
        if sorted(vocab.values()) != list(range(len(vocab))):
            raise ValidationError("token ids must be dense from 0", code='vocab')
        self.vocab = dict(vocab)
        self.max_len = max_len

    def __len__(self):
        return len(self.vocab)

    def __eq__(self, other):
        return isinstance(other, Tokenizer) and self.vocab == other.vocab and self.max_len == other.max_len

    def encode(self, text, seq_len):
        """Return (token_ids, mask) of length ``seq_len``, starting with CLS."""
        if seq_len < 2:
            raise ValidationError(f"seq_len must be >= 2, got {seq_len}", code='seq_len')
        if seq_len > self.max_len:
            raise ValidationError(f"seq_len {seq_len} exceeds max_len {self.max_len}", code='seq_len')
        ids = [CLS_ID] + [self.vocab.get(token, UNK_ID) for token in tokenize(text)]
        ids = ids[:seq_len]
        mask = [1] * len(ids) + [0] * (seq_len - len(ids))
        ids = ids + [PAD_ID] * (seq_len - len(ids))
        return ids, mask

    def save(self, path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', encoding='utf-8') as f:
            json.dump({'vocab': self.vocab, 'max_len': self.max_len}, f, ensure_ascii=False)

    @classmethod
    def load(cls, path):
        with open(path, encoding='utf-8') as f:
            payload = json.load(f)
        return cls(payload['vocab'], payload['max_len'])


def build_vocab(corpus, min_freq=1, max_len=256):
    """Tokenizer over tokens seen at least ``min_freq`` times.

    Ids after the specials follow frequency (descending), then the token itself.
    """
    if not corpus:
        raise ValidationError("cannot build a vocabulary from an empty corpus", code='empty')
    counts = Counter()
    for item in corpus:
        counts.update(tokenize(item if isinstance(item, str) else item.text))
    kept = sorted((t for t, c in counts.items() if c >= min_freq), key=lambda t: (-counts[t], t))
    vocab = {token: i for i, token in enumerate(SPECIALS)}
    for token in kept:
        vocab[token] = len(vocab)
    return Tokenizer(vocab, max_len=max_len)
