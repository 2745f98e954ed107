"""Few-shot exemplar selection by clustering the training texts.

Texts become length-normalized term-frequency vectors; k-means with k
clusters picks the sample nearest each centroid. A class-balancing pass then
caps either class at ceil(k/2) shots.
"""
import logging
import math

import numpy as np
from django.core.exceptions import ValidationError
from sklearn.cluster import KMeans
from sklearn.feature_extraction.text import CountVectorizer
from sklearn.preprocessing import normalize

from corpus.text import tokenize

logger = logging.getLogger(__name__)

MAX_ITER = 100


def term_frequencies(texts):
    vectorizer = CountVectorizer(tokenizer=tokenize, lowercase=False, token_pattern=None)
    return normalize(vectorizer.fit_transform(texts), norm='l1').toarray()


def _balance(chosen, distances, labels, k):
    """Swap the farthest surplus shots for the nearest unused opposite-class samples."""
    cap = math.ceil(k / 2)
    for label in (0, 1):
        while sum(1 for i in chosen if labels[i] == label) > cap:
            surplus = [(distances[i, slot], slot) for slot, i in enumerate(chosen) if labels[i] == label]
            _, slot = max(surplus)
            used = set(chosen)
            candidates = [j for j in range(len(labels)) if labels[j] != label and j not in used]
            if not candidates:
                return chosen
            chosen[slot] = min(candidates, key=lambda j: (distances[j, slot], j))
    return chosen


def select_shots(train, k, seed):
    if k == 0:
        return []
    if k < 0 or k > len(train):
        raise ValidationError(f"cannot select {k} shots from {len(train)} training samples", code='k')

    features = term_frequencies([s.text for s in train])
    kmeans = KMeans(n_clusters=k, n_init=1, max_iter=MAX_ITER, random_state=seed).fit(features)
    distances = kmeans.transform(features)

    chosen = []
    for slot in range(k):
        order = np.argsort(distances[:, slot], kind='stable')
        chosen.append(next(int(i) for i in order if int(i) not in chosen))

    labels = [s.label for s in train]
    if k >= 2 and len(set(labels)) > 1:
        chosen = _balance(chosen, distances, labels, k)

    shots = [train[i] for i in chosen]
    logger.debug("selected shots %s", [s.id for s in shots])
    return shots
