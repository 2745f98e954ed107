import unicodedata


def _is_punct(ch):
    return unicodedata.category(ch).startswith('P')


def strip_punct(token):
    start, end = 0, len(token)
    while start < end and _is_punct(token[start]):
        start += 1
    while end > start and _is_punct(token[end - 1]):
        end -= 1
    return token[start:end]


def tokenize(text):
    """Lowercase, split on whitespace and strip leading/trailing punctuation.

    Tokens that are pure punctuation disappear.
    """
    tokens = []
    for raw in text.lower().split():
        token = strip_punct(raw)
        if token:
            tokens.append(token)
    return tokens
