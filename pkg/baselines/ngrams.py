from collections import Counter

from corpus.text import tokenize

DEFAULT_N_SET = frozenset({1, 2, 3})


def extract_ngrams(text, n_set=DEFAULT_N_SET):
    """Word n-grams of every size in ``n_set``, joined with ``_``, as a multiset."""
    tokens = tokenize(text)
    grams = Counter()
    for n in sorted(n_set):
        if n <= 0:
            continue
        for i in range(len(tokens) - n + 1):
            grams['_'.join(tokens[i:i + n])] += 1
    return grams
