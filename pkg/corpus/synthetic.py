import random

from .samples import Sample, Origin


def make_pattern_task(task, n, seed, vocab_per_class=10, min_len=4, max_len=10):
    """A balanced, easily separable task over a vocabulary private to ``task``.

    Positive texts draw most tokens from ``<task>_p*``, negative texts from
    ``<task>_n*``; both sprinkle in ``<task>_f*`` filler tokens.
    """
    rng = random.Random(f"{task}:{seed}")
    positive = [f"{task}_p{i}" for i in range(vocab_per_class)]
    negative = [f"{task}_n{i}" for i in range(vocab_per_class)]
    filler = [f"{task}_f{i}" for i in range(vocab_per_class)]

    samples = []
    for i in range(n):
        label = 1 if i % 2 == 0 else 0
        own = positive if label else negative
        length = rng.randint(min_len, max_len)
        tokens = [rng.choice(own) if rng.random() < 0.7 else rng.choice(filler) for _ in range(length)]
        tokens[rng.randrange(length)] = rng.choice(own)
        samples.append(Sample(
            id=f"{task}-{i:05d}",
            text=' '.join(tokens),
            task=task,
            label=label,
            origin=Origin.CODE_MIXED.value,
            dataset='synthetic',
        ))
    return samples


def make_pattern_suite(tasks, n, seed):
    return {task: make_pattern_task(task, n, seed) for task in tasks}
