"""One function per experiment verb.

Every pipeline takes the parsed options and an output directory, writes its
artifacts there and returns a JSON-serializable summary.
"""
import json
import logging
from fractions import Fraction
from pathlib import Path

import numpy as np
from django.conf import settings
from django.core.exceptions import ValidationError

from baselines.naive_bayes import fit_nb, predict_nb, save_model as save_nb
from corpus.multitask import build_multitask_view, encode_rows, single_task_rows
from corpus.samples import Task, class_counts, load_jsonl, save_jsonl
from corpus.splitting import SplitSpec, mix_native, stratified_split
from corpus.synthetic import make_pattern_suite
from encoder.network import EncoderGeometry
from encoder.tokenizer import build_vocab
from evaluation.metrics import breakdown_by_length, mark_significant, prf1
from evaluation.predictions import align, read_predictions, write_predictions
from evaluation.significance import significance as significance_test
from mtl.checkpoints import save_model
from mtl.network import build_mtl_model, build_single_task_model, freeze_bottom
from prompting.clients import get_completion_client
from prompting.runner import run_prompting
from prompting.shots import select_shots
from prompting.templates import PromptConfig, render_prompt
from prompting.transcripts import prompt_hash, write_transcript
from stats.distributions import Lexicon, dataset_report
from trainer.config import TrainConfig, load_config
from trainer.gradcheck import grad_check
from trainer.loop import TrainingData, loss_config_for, predict
from trainer.seeds import run_seeds

logger = logging.getLogger(__name__)

# Synthetic pattern tasks train a randomly initialized encoder, so they start
# from a faster learning rate and shorter sequences than the pretrained grid.
SYNTHETIC_DEFAULTS = {'lr': 3e-3, 'seq_len': 16, 'batch_size': 32}

GRADCHECK_TOLERANCE = 1e-4


def _write_json(payload, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(payload, f, indent=2, sort_keys=True)


def _counts(samples):
    positives, negatives = class_counts(samples)
    return {'positives': positives, 'negatives': negatives}


def _parse_ratios(text):
    parts = [Fraction(p.strip()) for p in text.split(',')]
    if len(parts) != 3:
        raise ValidationError(f"--ratios needs three comma-separated values, got {text!r}", code='ratio')
    return parts


def _split_spec(opts):
    train, val, test = _parse_ratios(opts['ratios'])
    return SplitSpec(train, val, test, seed=opts['split_seed'], rounding=opts['rounding'])


def _task_list(text):
    tasks = [t.strip() for t in text.split(',') if t.strip()]
    unknown = [t for t in tasks if t not in Task.values]
    if unknown:
        raise ValidationError(f"unknown tasks {unknown} (expected {', '.join(Task.values)})", code='task')
    return tasks


def default_seeds(count):
    seeds = list(settings.CODEMIX['DEFAULT_SEEDS'])
    while len(seeds) < count:
        seeds.append(seeds[-1] + 1)
    return seeds[:count]


def train_config(opts):
    cfg = load_config(opts['config']) if opts.get('config') else TrainConfig()
    if opts.get('synthetic') and not opts.get('config'):
        cfg = cfg.replace(**SYNTHETIC_DEFAULTS)
    cfg = cfg.replace(
        lr=opts.get('lr'),
        optimizer=opts.get('optimizer'),
        batch_size=opts.get('batch_size'),
        seq_len=opts.get('seq_len'),
        max_epochs=opts.get('max_epochs'),
        patience=opts.get('patience'),
        reg_lambda=opts.get('reg_lambda'),
        reg_layer=opts.get('reg_layer'),
        primary_task=opts.get('primary_task'),
    )
    if opts.get('seeds'):
        cfg = cfg.replace(seeds=default_seeds(opts['seeds']))
    return cfg


def _geometry(opts, vocab_size):
    return EncoderGeometry(
        vocab_size=vocab_size,
        num_layers=opts['layers'],
        bottom_layers=opts['bottom'],
        hidden=opts['hidden'],
        heads=opts['heads'],
    )


def _task_splits(opts, tasks):
    """{task: (train, val, test)} from per-task data files or synthetic pattern tasks."""
    spec = _split_spec(opts)
    if opts.get('synthetic'):
        sets = make_pattern_suite(tasks, opts['synthetic_size'], settings.CODEMIX['SEED'])
    else:
        sets = {}
        for path in opts.get('data') or []:
            for sample in load_jsonl(path):
                sets.setdefault(sample.task, []).append(sample)
        missing = [t for t in tasks if t not in sets]
        if missing:
            raise ValidationError(f"no data given for tasks {missing}", code='task')
    return {task: stratified_split(sets[task], spec) for task in tasks}


def _prediction_records(model, rows, tokenizer, seq_len):
    records = []
    for task, out in predict(model, rows, tokenizer, seq_len).items():
        for sample_id, pred, prob in zip(out.ids, out.preds, out.probs):
            records.append({'id': sample_id, 'task': task, 'pred': pred, 'prob': prob})
    return records


def _save_seed_runs(summary, out, test_rows, tokenizer, seq_len):
    for run in summary.runs:
        seed_dir = out / f"seed-{run.seed}"
        save_model(run.model, seed_dir / 'model.pt')
        run.history.write(seed_dir / 'history.jsonl')
        write_predictions(_prediction_records(run.model, test_rows, tokenizer, seq_len), seed_dir / 'predictions.jsonl')


def stats(opts, out):
    samples = load_jsonl(opts['data'])
    lexicon = Lexicon.load(opts['lexicon']) if opts.get('lexicon') else Lexicon(frozenset())
    report = dataset_report(samples, lexicon, alpha=opts['alpha'])
    _write_json(report.to_dict(), out / 'report.json')
    return report.to_dict()


def split(opts, out):
    train, val, test = stratified_split(load_jsonl(opts['data']), _split_spec(opts))
    parts = {'train': train, 'val': val, 'test': test}
    for name, samples in parts.items():
        save_jsonl(samples, out / f"{name}.jsonl")
    return {name: _counts(samples) for name, samples in parts.items()}


def mix(opts, out):
    cm_train = load_jsonl(opts['cm_train'])
    mixed = mix_native(cm_train, load_jsonl(opts['native']), opts['per_class'], opts['seed'])
    save_jsonl(mixed, out / 'train.jsonl')
    return {'code_mixed': _counts(cm_train), 'mixed': _counts(mixed), 'per_class': opts['per_class']}


def train_baseline(opts, out):
    n_set = frozenset(int(n) for n in opts['n_set'].split(','))
    model = fit_nb(load_jsonl(opts['train']), n_set=n_set, alpha=opts['alpha'])
    save_nb(model, out / 'model.json')

    test = load_jsonl(opts['test'])
    records = []
    for sample in test:
        label, log_odds = predict_nb(model, sample.text)
        prob = float(np.exp(-np.logaddexp(0.0, -log_odds)))
        records.append({'id': sample.id, 'task': sample.task, 'pred': label, 'prob': prob})
    write_predictions(records, out / 'predictions.jsonl')
    report = prf1([r['pred'] for r in records], [s.label for s in test])
    return {'n_set': sorted(n_set), 'alpha': opts['alpha'], 'report': report.to_dict()}


def train_single(opts, out):
    cfg = train_config(opts)
    task = opts['task']
    train, val, test = _task_splits(opts, [task])[task]
    if opts.get('native'):
        train = mix_native(train, load_jsonl(opts['native']), opts['per_class'], cfg.seeds[0])

    tokenizer = build_vocab(train)
    tokenizer.save(out / 'tokenizer.json')
    geometry = _geometry(opts, len(tokenizer))
    train_rows, val_rows, test_rows = (single_task_rows(part) for part in (train, val, test))

    def setup(seed):
        model = build_single_task_model(geometry, task, seed=seed)
        if opts.get('trainable_top') is not None:
            freeze_bottom(model, trainable_top=opts['trainable_top'])
        return model, TrainingData(train_rows, val_rows, tokenizer, task), test_rows

    summary = run_seeds(cfg, cfg.seeds, setup)
    _save_seed_runs(summary, out, test_rows, tokenizer, cfg.seq_len)
    result = {'task': task, 'train': _counts(train), 'config': cfg.to_dict(), **summary.to_dict()}
    _write_json(result, out / 'summary.json')
    return result


def train_mtl(opts, out):
    cfg = train_config(opts)
    tasks = _task_list(opts['tasks'])
    if len(tasks) < 2:
        raise ValidationError(f"train-mtl needs at least two tasks, got {tasks}", code='tasks')
    splits = _task_splits(opts, tasks)

    tokenizer = build_vocab([s for task in tasks for s in splits[task][0]])
    tokenizer.save(out / 'tokenizer.json')
    geometry = _geometry(opts, len(tokenizer))
    train_rows, val_rows, test_rows = (
        build_multitask_view({task: splits[task][part] for task in tasks}) for part in range(3)
    )
    primary = cfg.primary_task or tasks[0]

    def setup(seed):
        model = build_mtl_model(geometry, tasks, gate_enabled=opts['gate'], seed=seed, top_init=opts['top_init'])
        if opts['freeze_bottom']:
            freeze_bottom(model)
        return model, TrainingData(train_rows, val_rows, tokenizer, primary), test_rows

    summary = run_seeds(cfg, cfg.seeds, setup)
    _save_seed_runs(summary, out, test_rows, tokenizer, cfg.seq_len)
    result = {'tasks': tasks, 'gate': opts['gate'], 'freeze_bottom': opts['freeze_bottom'], 'config': cfg.to_dict(),
              **summary.to_dict()}
    _write_json(result, out / 'summary.json')
    return result


def evaluate(opts, out):
    records = read_predictions(opts['predictions'])
    gold = load_jsonl(opts['gold'])
    if opts.get('task'):
        records = [r for r in records if r['task'] == opts['task']]
        gold = [s for s in gold if s.task == opts['task']]
    preds = align(records, gold)
    golds = [s.label for s in gold]
    result = {'report': prf1(preds, golds).to_dict()}
    if opts.get('by_length'):
        buckets = breakdown_by_length(preds, golds, [s.text for s in gold])
        result['by_length'] = {name: report.to_dict() for name, report in buckets.items()}
    _write_json(result, out / 'report.json')
    return result


def significance(opts, out):
    gold = load_jsonl(opts['gold'])
    preds_a = align(read_predictions(opts['a']), gold)
    preds_b = align(read_predictions(opts['b']), gold)
    golds = [s.label for s in gold]
    p_value = significance_test(preds_a, preds_b, golds, n_perm=opts['n_perm'], seed=opts['seed'])
    result = {
        'f1_a': prf1(preds_a, golds).f1,
        'f1_b': prf1(preds_b, golds).f1,
        'p_value': p_value,
        'significant': mark_significant(p_value),
        'n_perm': opts['n_perm'],
    }
    _write_json(result, out / 'significance.json')
    return result


def _prompt_config(opts):
    return PromptConfig(task=opts['task'], k=opts['k'], seed=opts['seed'])


def prompt_render(opts, out):
    cfg = _prompt_config(opts)
    chosen = select_shots(load_jsonl(opts['train']), cfg.k, cfg.seed)
    queries = load_jsonl(opts['queries'])
    out.mkdir(parents=True, exist_ok=True)
    with open(out / 'prompts.jsonl', 'w', encoding='utf-8') as f:
        for query in queries:
            prompt = render_prompt(cfg, chosen, query)
            record = {'query_id': query.id, 'prompt_hash': prompt_hash(prompt), 'prompt': prompt}
            f.write(json.dumps(record, ensure_ascii=False) + '\n')
    return {'task': cfg.task, 'k': cfg.k, 'shots': [s.id for s in chosen], 'prompts': len(queries)}


def shots(opts, out):
    chosen = select_shots(load_jsonl(opts['train']), opts['k'], opts['seed'])
    save_jsonl(chosen, out / 'shots.jsonl')
    return {'k': opts['k'], 'seed': opts['seed'], 'shots': [s.id for s in chosen]}


def prompt_run(opts, out):
    cfg = _prompt_config(opts)
    client = get_completion_client(opts.get('client'), task=cfg.task, seed=cfg.seed)
    result = run_prompting(cfg, load_jsonl(opts['train']), load_jsonl(opts['queries']), client,
                           max_workers=opts['workers'])
    write_transcript(result.transcript, out / 'transcript.jsonl')
    if result.transcript and result.failed == len(result.transcript):
        raise RuntimeError(f"{client.name} answered none of {result.failed} requests")
    summary = {
        'task': cfg.task,
        'k': cfg.k,
        'client': client.name,
        'shots': [s.id for s in result.shots],
        'abstentions': result.abstentions,
        'failed_requests': result.failed,
        'report': result.report.to_dict(),
    }
    _write_json(summary, out / 'report.json')
    return summary


def gradcheck(opts, out):
    """Gradient check on a tiny two-task gated model with a frozen bottom module."""
    tasks = ['humor', 'sarcasm']
    suite = make_pattern_suite(tasks, 8, opts['seed'])
    rows = build_multitask_view(suite)
    tokenizer = build_vocab([s for samples in suite.values() for s in samples])
    geometry = EncoderGeometry(vocab_size=len(tokenizer), num_layers=2, bottom_layers=1, hidden=4, heads=2,
                               max_positions=16, init_std=0.2)
    model = freeze_bottom(build_mtl_model(geometry, tasks, seed=opts['seed']))
    batch = encode_rows(rows, list(range(len(rows))), tokenizer, 12, tasks)
    loss_cfg = loss_config_for(rows, TrainConfig(reg_lambda=opts['reg_lambda']))

    result = grad_check(model, batch, loss_cfg, step=opts['step'], n_coords=opts['n_coords'], seed=opts['seed'])
    summary = {
        'max_rel_error': result.max_rel_error,
        'checked': result.checked,
        'worst': list(result.worst) if result.worst else None,
        'frozen_max_abs': result.frozen_max_abs,
        'trainable_bottom': result.trainable_bottom,
        'tolerance': GRADCHECK_TOLERANCE,
    }
    _write_json(summary, out / 'gradcheck.json')
    if result.max_rel_error > GRADCHECK_TOLERANCE or result.frozen_max_abs != 0 or result.trainable_bottom:
        raise RuntimeError(f"gradient check failed: {summary}")
    return summary


PIPELINES = {
    'stats': stats,
    'split': split,
    'mix': mix,
    'train-baseline': train_baseline,
    'train-single': train_single,
    'train-mtl': train_mtl,
    'eval': evaluate,
    'significance': significance,
    'prompt-render': prompt_render,
    'shots': shots,
    'gradcheck': gradcheck,
    'prompt-run': prompt_run,
}
