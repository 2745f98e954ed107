import logging
from dataclasses import dataclass, field

from .loop import evaluate, train

logger = logging.getLogger(__name__)

METRICS = ('f1', 'precision', 'recall')


@dataclass
class SeedRun:
    seed: int
    reports: dict
    history: object = None
    model: object = None


@dataclass
class SeedSummary:
    runs: list = field(default_factory=list)
    mean: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            'per_seed': [
                {'seed': run.seed, 'chosen_epoch': getattr(run.history, 'chosen_epoch', None),
                 'tasks': {task: report.to_dict() for task, report in run.reports.items()}}
                for run in self.runs
            ],
            'mean': self.mean,
        }


def aggregate(per_seed_reports):
    """Mean of each metric per task over a list of {task: EvalReport} mappings."""
    tasks = []
    for reports in per_seed_reports:
        tasks.extend(t for t in reports if t not in tasks)
    mean = {}
    for task in tasks:
        present = [reports[task] for reports in per_seed_reports if task in reports]
        mean[task] = {m: sum(getattr(r, m) for r in present) / len(present) for m in METRICS}
    return mean


def run_seeds(cfg, seeds, setup):
    """Train once per seed and average test metrics.

    ``setup(seed)`` returns ``(model, training_data, test_rows)`` for that seed.
    """
    seeds = list(seeds)
    if not seeds:
        raise ValueError("run_seeds needs at least one seed")
    summary = SeedSummary()
    for seed in seeds:
        model, data, test_rows = setup(seed)
        model, history = train(model, data, cfg, seed=seed)
        reports = evaluate(model, test_rows, data.tokenizer, cfg.seq_len)
        summary.runs.append(SeedRun(seed=seed, reports=reports, history=history, model=model))
        logger.info("seed=%d test_f1=%s", seed, {t: round(r.f1, 4) for t, r in reports.items()})
    summary.mean = aggregate([run.reports for run in summary.runs])
    return summary
