"""Completion-client boundary for prompting very large language models.

The mock client is the default and answers deterministically from a hash of
(seed, prompt). Real clients read their API keys from settings and trace every
call with elasticdash.
"""
import abc
import hashlib
import logging
import math
from concurrent.futures import ThreadPoolExecutor, wait

from django.conf import settings
from django.core.exceptions import ImproperlyConfigured

from .parsing import label_name

logger = logging.getLogger(__name__)


class CompletionClient(abc.ABC):
    name = 'base'
    is_mock = False
    # Errors that cost one answer instead of the whole run.
    transient_errors = (TimeoutError,)

    @abc.abstractmethod
    def send(self, prompt):
        """Return the model's response text for ``prompt``."""


class MockCompletionClient(CompletionClient):
    name = 'mock'
    is_mock = True

    def __init__(self, task='humor', seed=0):
        self.task = task
        self.seed = seed

    def send(self, prompt):
        digest = hashlib.sha256(f"{self.seed}:{prompt}".encode('utf-8')).digest()
        return f"Label: {label_name(self.task, digest[0] % 2)}"


class OpenAICompletionClient(CompletionClient):
    name = 'openai'

    def __init__(self, api_key, model, temperature, top_p, max_tokens, timeout):
        from elasticdash import get_client
        from openai import APITimeoutError, OpenAI

        self.transient_errors = (TimeoutError, APITimeoutError)
        self.client = OpenAI(api_key=api_key, timeout=timeout)
        self.tracer = get_client()
        self.model = model
        self.temperature = temperature
        self.top_p = top_p
        self.max_tokens = max_tokens

    def send(self, prompt):
        with self.tracer.start_as_current_observation(as_type="generation", name="label-completion",
                                                      model=self.model) as generation:
            generation.update(input=prompt)
            response = self.client.chat.completions.create(
                model=self.model,
                messages=[{"role": "user", "content": prompt}],
                temperature=self.temperature,
                top_p=self.top_p,
                max_tokens=self.max_tokens,
            )
            text = response.choices[0].message.content or ""
            generation.update(output=text)
        return text


class GeminiCompletionClient(CompletionClient):
    name = 'gemini'

    def __init__(self, api_key, model):
        import httpx
        from elasticdash import get_client
        from google import genai

        self.transient_errors = (TimeoutError, httpx.TimeoutException)
        self.client = genai.Client(api_key=api_key)
        self.tracer = get_client()
        self.model = model

    def send(self, prompt):
        with self.tracer.start_as_current_observation(as_type="generation", name="gemini-label-completion",
                                                      model=self.model) as generation:
            generation.update(input=prompt)
            chat = self.client.chats.create(model=self.model, history=[])
            text = chat.send_message(prompt).text or ""
            generation.update(output=text)
        return text


def get_completion_client(name=None, task='humor', seed=0):
    options = settings.CODEMIX['COMPLETION']
    name = name or options['CLIENT']
    if name == 'mock':
        return MockCompletionClient(task=task, seed=seed)
    if name == 'openai':
        if not settings.OPENAI_API_KEY:
            raise ImproperlyConfigured("OPENAI_API_KEY is not set")
        return OpenAICompletionClient(
            api_key=settings.OPENAI_API_KEY,
            model=options['OPENAI_MODEL'],
            temperature=options['TEMPERATURE'],
            top_p=options['TOP_P'],
            max_tokens=options['MAX_NEW_TOKENS'],
            timeout=options['TIMEOUT'],
        )
    if name == 'gemini':
        if not settings.GEMINI_API_KEY:
            raise ImproperlyConfigured("GEMINI_API_KEY is not set")
        return GeminiCompletionClient(api_key=settings.GEMINI_API_KEY, model=options['GEMINI_MODEL'])
    raise ImproperlyConfigured(f"unknown completion client {name!r} (expected mock, openai or gemini)")


def send_all(client, prompts, max_workers=4, timeout=None):
    """Send prompts concurrently; responses come back in request order.

    Every wave of ``max_workers`` requests gets ``timeout`` seconds. A request
    still pending after that, or one raising one of ``client.transient_errors``,
    yields None, which parses as an abstention. Any other error is raised.
    Hung requests are abandoned, not waited for.
    """
    timeout = settings.CODEMIX['COMPLETION']['TIMEOUT'] if timeout is None else timeout
    if not prompts:
        return []
    pool = ThreadPoolExecutor(max_workers=max_workers)
    try:
        futures = [pool.submit(client.send, prompt) for prompt in prompts]
        done, _ = wait(futures, timeout=timeout * math.ceil(len(prompts) / max_workers))
        responses = []
        for index, future in enumerate(futures):
            if future not in done:
                logger.warning("completion %d via %s timed out", index, client.name)
                responses.append(None)
                continue
            error = future.exception()
            if error is None:
                responses.append(future.result())
            elif isinstance(error, client.transient_errors):
                logger.warning("completion %d via %s failed: %s", index, client.name, error)
                responses.append(None)
            else:
                raise error
    finally:
        pool.shutdown(wait=False, cancel_futures=True)

    failed = sum(1 for response in responses if response is None)
    if failed:
        logger.warning("%d of %d completions via %s got no response", failed, len(prompts), client.name)
    return responses
