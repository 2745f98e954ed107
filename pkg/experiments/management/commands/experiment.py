import argparse
import json
import logging
from pathlib import Path

from django.conf import settings
from django.core.exceptions import ValidationError
from django.core.management.base import BaseCommand, CommandError

from experiments.manifest import build_manifest, write_manifest
from experiments.models import ExperimentRun
from experiments.pipelines import PIPELINES

logger = logging.getLogger(__name__)

BASE_OPTIONS = {'verbosity', 'settings', 'pythonpath', 'traceback', 'no_color', 'force_color',
                'skip_checks', 'stdout', 'stderr'}


def _data_options(parser):
    parser.add_argument('--data', action='append', help='Per-task record file (repeatable)')
    parser.add_argument('--synthetic', action='store_true', help='Use synthetic pattern tasks instead of --data')
    parser.add_argument('--synthetic-size', type=int, default=2000)
    parser.add_argument('--ratios', default='0.8,0.1,0.1', help='train,val,test ratios')
    parser.add_argument('--split-seed', type=int, default=settings.CODEMIX['SEED'])
    parser.add_argument('--rounding', choices=['floor', 'nearest'], default='floor',
                        help='floor truncates per-class val/test sizes; nearest rounds half up')


def _train_options(parser):
    parser.add_argument('--config', help='JSON training config; flags below override it')
    parser.add_argument('--seeds', type=int, help='Number of seeds to run')
    parser.add_argument('--lr', type=float)
    parser.add_argument('--optimizer', choices=['sgd', 'adamw'])
    parser.add_argument('--batch-size', type=int)
    parser.add_argument('--seq-len', type=int)
    parser.add_argument('--max-epochs', type=int)
    parser.add_argument('--patience', type=int)
    parser.add_argument('--lambda', dest='reg_lambda', type=float)
    parser.add_argument('--reg-layer', choices=['last', 'second_last'])
    parser.add_argument('--primary-task')
    parser.add_argument('--layers', type=int, default=6)
    parser.add_argument('--bottom', type=int, default=4)
    parser.add_argument('--hidden', type=int, default=64)
    parser.add_argument('--heads', type=int, default=4)


def _prompt_options(parser):
    parser.add_argument('--task', required=True)
    parser.add_argument('--k', type=int, default=0)
    parser.add_argument('--train', required=True, help='Record file the shots are drawn from')
    parser.add_argument('--queries', required=True)
    parser.add_argument('--seed', type=int, default=0)


class Command(BaseCommand):
    help = 'Run one code-mixed classification experiment and print a JSON summary'

    def run_from_argv(self, argv):
        self.argv = argv[2:]
        super().run_from_argv(argv)

    def add_arguments(self, parser):
        verbs = parser.add_subparsers(dest='verb', required=True)

        def verb(name, help_text):
            sub = verbs.add_parser(name, help=help_text)
            sub.add_argument('--out', help='Output directory (default: CODEMIX_OUTPUT_DIR/<verb>)')
            return sub

        sub = verb('stats', 'Class counts, symmetric KL and hurtful-word fractions')
        sub.add_argument('--data', required=True)
        sub.add_argument('--lexicon')
        sub.add_argument('--alpha', type=float, default=1.0)

        sub = verb('split', 'Stratified train/val/test split of one task')
        sub.add_argument('--data', required=True)
        sub.add_argument('--ratios', default='0.8,0.1,0.1')
        sub.add_argument('--split-seed', type=int, default=settings.CODEMIX['SEED'])
        sub.add_argument('--rounding', choices=['floor', 'nearest'], default='floor',
                            help='floor truncates per-class val/test sizes; nearest rounds half up')

        sub = verb('mix', 'Add native samples to a code-mixed train set')
        sub.add_argument('--cm-train', required=True)
        sub.add_argument('--native', required=True)
        sub.add_argument('--per-class', type=int, required=True)
        sub.add_argument('--seed', type=int, default=settings.CODEMIX['SEED'])

        sub = verb('train-baseline', 'Fit and score the n-gram Naive Bayes baseline')
        sub.add_argument('--train', required=True)
        sub.add_argument('--test', required=True)
        sub.add_argument('--n-set', default='1,2,3')
        sub.add_argument('--alpha', type=float, default=1.0)

        sub = verb('train-single', 'Fine-tune a single-task encoder classifier')
        _data_options(sub)
        _train_options(sub)
        sub.add_argument('--task', required=True)
        sub.add_argument('--native', help='Native pool mixed into the train split')
        sub.add_argument('--per-class', type=int, default=0)
        sub.add_argument('--trainable-top', type=int, help='Freeze all but the last k encoder layers')

        sub = verb('train-mtl', 'Train the gated multi-task model')
        _data_options(sub)
        _train_options(sub)
        sub.add_argument('--tasks', required=True, help='Comma-separated task names')
        sub.add_argument('--gate', action=argparse.BooleanOptionalAction, default=True)
        sub.add_argument('--top-init', choices=['random', 'copy'], default='random')
        sub.add_argument('--freeze-bottom', action=argparse.BooleanOptionalAction, default=True,
                         help='Keep embeddings and bottom layers fixed (--no-freeze-bottom trains them)')

        sub = verb('eval', 'Score a predictions file against gold records')
        sub.add_argument('--predictions', required=True)
        sub.add_argument('--gold', required=True)
        sub.add_argument('--task')
        sub.add_argument('--by-length', action='store_true')

        sub = verb('significance', 'Approximate randomization test between two systems')
        sub.add_argument('--a', required=True)
        sub.add_argument('--b', required=True)
        sub.add_argument('--gold', required=True)
        sub.add_argument('--n-perm', type=int, default=10000)
        sub.add_argument('--seed', type=int, default=0)

        sub = verb('prompt-render', 'Render k-shot prompts for a query file')
        _prompt_options(sub)

        sub = verb('shots', 'Select k-shot exemplars by clustering')
        sub.add_argument('--train', required=True)
        sub.add_argument('--k', type=int, required=True)
        sub.add_argument('--seed', type=int, default=0)

        sub = verb('gradcheck', 'Finite-difference check of the joint-loss gradients')
        sub.add_argument('--seed', type=int, default=0)
        sub.add_argument('--step', type=float, default=1e-5)
        sub.add_argument('--n-coords', type=int, default=200)
        sub.add_argument('--lambda', dest='reg_lambda', type=float, default=5e-3)

        sub = verb('prompt-run', 'Prompt a completion client and score its labels')
        _prompt_options(sub)
        sub.add_argument('--client', help='mock, openai or gemini (default from settings)')
        sub.add_argument('--workers', type=int, default=4)

    def handle(self, *args, **options):
        verb = options['verb']
        opts = {k: v for k, v in options.items() if k not in BASE_OPTIONS and k != 'verb'}
        out = Path(opts.pop('out') or Path(settings.CODEMIX['OUTPUT_DIR']) / verb)
        out.mkdir(parents=True, exist_ok=True)

        seed = opts.get('seed', opts.get('split_seed', settings.CODEMIX['SEED']))
        manifest = build_manifest(verb, getattr(self, 'argv', None) or [verb], opts, seed)
        write_manifest(manifest, out)
        run = ExperimentRun.objects.create(verb=verb, argv=manifest['argv'], manifest=manifest, output_dir=str(out))

        try:
            summary = PIPELINES[verb](opts, out)
        except ValidationError as e:
            message = '; '.join(e.messages)
            run.finish('invalid', message)
            raise CommandError(message, returncode=1)
        except Exception as e:
            logger.exception("%s failed", verb)
            run.finish('failed', str(e))
            raise CommandError(f"{verb} failed: {e}", returncode=2)

        if 'config' in summary:
            manifest['train_config'] = summary['config']
            write_manifest(manifest, out)
        run.manifest = manifest
        run.finish('succeeded')
        logger.info("%s run %s wrote %s", verb, run.run_id, out)
        self.stdout.write(json.dumps({'run_id': str(run.run_id), 'verb': verb, 'out': str(out), 'summary': summary},
                                     sort_keys=True))
