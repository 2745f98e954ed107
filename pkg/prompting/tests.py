import json
import os
import tempfile
import threading
import time
from pathlib import Path

from django.core.exceptions import ImproperlyConfigured, ValidationError
from django.test import SimpleTestCase, override_settings

from corpus.samples import Sample
from corpus.synthetic import make_pattern_task

from .clients import CompletionClient, MockCompletionClient, get_completion_client, send_all
from .parsing import label_name, parse_label
from .runner import run_prompting
from .shots import select_shots
from .templates import PromptConfig, render_prompt
from .transcripts import prompt_hash, write_transcript

FIXTURES = Path(__file__).resolve().parent / 'fixtures'


def humor(sid, text, label):
    return Sample(id=sid, text=text, task='humor', label=label)


TRAIN = [
    humor('t0', 'yaar ye joke toh ekdum mast tha', 1),
    humor('t1', 'bhai tera dance dekh ke hasi aa gayi', 1),
    humor('t2', 'pet dard ho gaya hans hans ke', 1),
    humor('t3', 'mummy ne bola padhai kar, maine meme banaya', 1),
    humor('t4', 'comedy circus se zyada funny ghar hai', 1),
    humor('t5', 'chai ke bina subah adhoori lol', 1),
    humor('t6', 'sir ne joke maara aur class so gayi', 1),
    humor('t7', 'meri life ek sitcom hai bas laugh track missing', 1),
    humor('t8', 'kal office mein meeting hai at 10 baje', 0),
    humor('t9', 'train aaj bhi late hai platform 3 par', 0),
]


class RenderPromptTests(SimpleTestCase):

    def test_two_shot_prompt_matches_golden_file(self):
        shots = [humor('g1', 'Yaar ye joke toh ekdum mast tha', 1),
                 humor('g2', 'Kal office mein meeting hai at 10 baje', 0)]
        query = humor('q1', 'Bhai tu toh comedy king nikla', 1)
        prompt = render_prompt(PromptConfig(task='humor', k=2), shots, query)
        golden = (FIXTURES / 'golden_humor_2shot.txt').read_text(encoding='utf-8')
        self.assertEqual(prompt, golden)

    def test_zero_shot_prompt_has_no_examples(self):
        prompt = render_prompt(PromptConfig(task='sarcasm'), [], humor('q', 'Wah kya service hai', 0))
        self.assertNotIn('### Examples', prompt)
        self.assertIn('"sarcastic" or "not sarcastic"', prompt)
        self.assertTrue(prompt.endswith('Input: Wah kya service hai\nLabel:\n'))

    def test_text_is_not_html_escaped(self):
        prompt = render_prompt(PromptConfig(task='hate'), [], humor('q', 'tum & tumhara "dost" <3', 1))
        self.assertIn('tum & tumhara "dost" <3', prompt)

    def test_different_queries_render_differently(self):
        cfg = PromptConfig(task='humor', k=2)
        first = render_prompt(cfg, TRAIN[7:9], humor('q', 'chai pe charcha', 1))
        second = render_prompt(cfg, TRAIN[7:9], humor('q', 'chai pe charcha!', 1))
        self.assertNotEqual(first, second)
        self.assertEqual(first, render_prompt(cfg, TRAIN[7:9], humor('q', 'chai pe charcha', 1)))

    def test_shot_count_must_match_k(self):
        with self.assertRaises(ValidationError):
            render_prompt(PromptConfig(task='humor', k=2), TRAIN[:1], TRAIN[2])

    def test_k_must_be_on_the_shot_grid(self):
        with self.assertRaises(ValidationError):
            PromptConfig(task='humor', k=3)


class ParseLabelTests(SimpleTestCase):

    def test_negative_form_containing_positive_form(self):
        self.assertEqual(parse_label('Label: non-humorous', 'humor'), 0)
        self.assertEqual(parse_label('This one is NOT SARCASTIC.', 'sarcasm'), 0)

    def test_positive_forms(self):
        self.assertEqual(parse_label('Humorous', 'humor'), 1)
        self.assertEqual(parse_label('label: hateful', 'hate'), 1)

    def test_label_names_round_trip(self):
        for task in ('humor', 'sarcasm', 'hate'):
            for label in (0, 1):
                self.assertEqual(parse_label(label_name(task, label), task), label)

    def test_unrecognized_response_abstains(self):
        self.assertIsNone(parse_label('I cannot decide', 'humor'))
        self.assertIsNone(parse_label('', 'hate'))
        self.assertIsNone(parse_label(None, 'sarcasm'))


class SelectShotsTests(SimpleTestCase):

    def test_zero_shots(self):
        self.assertEqual(select_shots(TRAIN, 0, seed=0), [])

    def test_too_many_shots(self):
        with self.assertRaises(ValidationError):
            select_shots(TRAIN[:3], 4, seed=0)

    def test_classes_are_balanced(self):
        shots = select_shots(TRAIN, 4, seed=0)
        self.assertEqual(len({s.id for s in shots}), 4)
        self.assertEqual(sorted(s.label for s in shots), [0, 0, 1, 1])

    def test_deterministic_for_seed(self):
        self.assertEqual(select_shots(TRAIN, 2, seed=5), select_shots(TRAIN, 2, seed=5))

    def test_covers_both_vocabulary_clusters(self):
        shots = select_shots(make_pattern_task('humor', 20, seed=0), 4, seed=0)
        self.assertTrue(any('humor_p' in s.text for s in shots))
        self.assertTrue(any('humor_n' in s.text for s in shots))


class FlakyClient(CompletionClient):
    name = 'flaky'

    def send(self, prompt):
        if 'fail' in prompt:
            raise TimeoutError('no answer')
        return f"echo {prompt}"


class RejectingClient(CompletionClient):
    name = 'rejecting'

    def send(self, prompt):
        raise PermissionError('401 invalid api key')


class HangingClient(CompletionClient):
    name = 'hanging'

    def __init__(self):
        self.release = threading.Event()

    def send(self, prompt):
        if prompt == 'hang':
            self.release.wait(30)
        return f"echo {prompt}"


class ClientTests(SimpleTestCase):

    def test_mock_is_deterministic_and_parseable(self):
        client = MockCompletionClient(task='hate', seed=3)
        response = client.send('some prompt')
        self.assertEqual(response, MockCompletionClient(task='hate', seed=3).send('some prompt'))
        self.assertIn(parse_label(response, 'hate'), (0, 1))
        self.assertTrue(client.is_mock)

    def test_default_client_is_mock(self):
        self.assertIsInstance(get_completion_client(), MockCompletionClient)

    @override_settings(OPENAI_API_KEY=None)
    def test_real_client_needs_a_key(self):
        with self.assertRaisesMessage(ImproperlyConfigured, 'OPENAI_API_KEY'):
            get_completion_client('openai')

    def test_unknown_client(self):
        with self.assertRaises(ImproperlyConfigured):
            get_completion_client('claude-local')

    def test_send_all_keeps_order_and_drops_timeouts(self):
        with self.assertLogs('prompting.clients', level='WARNING'):
            responses = send_all(FlakyClient(), ['a', 'fail', 'c'], max_workers=3, timeout=5)
        self.assertEqual(responses, ['echo a', None, 'echo c'])

    def test_send_all_raises_other_errors(self):
        with self.assertRaisesMessage(PermissionError, '401'):
            send_all(RejectingClient(), ['a', 'b'], max_workers=2, timeout=5)

    def test_send_all_does_not_wait_for_hung_requests(self):
        client = HangingClient()
        self.addCleanup(client.release.set)
        started = time.monotonic()
        with self.assertLogs('prompting.clients', level='WARNING'):
            responses = send_all(client, ['a', 'hang', 'b'], max_workers=3, timeout=1.0)
        self.assertLess(time.monotonic() - started, 5)
        self.assertEqual(responses, ['echo a', None, 'echo b'])

    def test_send_all_with_no_prompts(self):
        self.assertEqual(send_all(FlakyClient(), []), [])


class RunPromptingTests(SimpleTestCase):

    def test_mock_run_scores_every_query(self):
        queries = [humor('q0', 'ye toh kamaal ka joke hai', 1), humor('q1', 'bijli ka bill bharna hai', 0),
                   humor('q2', 'hasi se lot pot', 1)]
        result = run_prompting(PromptConfig(task='humor', k=2, seed=1), TRAIN, queries, MockCompletionClient('humor'))
        self.assertEqual([e['query_id'] for e in result.transcript], ['q0', 'q1', 'q2'])
        self.assertEqual(result.report.support, 3)
        self.assertEqual(result.abstentions, 0)
        self.assertEqual(len(result.shots), 2)
        self.assertEqual(len(result.transcript[0]['prompt_hash']), 64)

    def test_abstentions_are_scored_as_wrong(self):
        with self.assertLogs('prompting.clients', level='WARNING'):
            silent = run_prompting(PromptConfig(task='humor'), TRAIN, [humor('q2', 'fail', 1)], FlakyClient())
        self.assertEqual(silent.abstentions, 1)
        self.assertEqual(silent.failed, 1)
        self.assertIsNone(silent.transcript[0]['response'])
        self.assertEqual(silent.report.fn, 1)

    def test_client_errors_stop_the_run(self):
        with self.assertRaises(PermissionError):
            run_prompting(PromptConfig(task='humor'), TRAIN, [humor('q3', 'kuch bhi', 1)], RejectingClient())

    def test_transcript_file(self):
        entries = [{'query_id': 'q0', 'prompt_hash': prompt_hash('p'), 'response': 'humorous', 'parsed_label': 1}]
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'runs', 'transcript.jsonl')
            write_transcript(entries, path)
            with open(path, encoding='utf-8') as f:
                self.assertEqual(json.loads(f.readline()), entries[0])
