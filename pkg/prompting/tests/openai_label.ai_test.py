import os
import sys
from pathlib import Path

from elasticdash_test import ai_test, before_all, after_all, install_ai_interceptor, uninstall_ai_interceptor, expect
from asgiref.sync import sync_to_async


@before_all
def setup_suite():
    project_root = Path(__file__).resolve().parent.parent.parent
    if str(project_root) not in sys.path:
        sys.path.insert(0, str(project_root))
    os.environ.setdefault("DJANGO_SETTINGS_MODULE", "codemix.settings")
    import django
    django.setup()
    install_ai_interceptor()


@after_all
def teardown_suite():
    uninstall_ai_interceptor()


def _steps(trace):
    return [
        {
            "prompt": getattr(step, "prompt", ""),
            "completion": getattr(step, "completion", ""),
            "model": getattr(step, "model", ""),
            "provider": getattr(step, "provider", ""),
        }
        for step in (trace.get_llm_steps() if trace else [])
    ]


def _expect_prompt(trace, *, filter_contains: str, nth: int | None = None, label: str = ""):
    try:
        expect(trace).to_have_prompt_where(filter_contains=filter_contains, nth=nth)
    except AssertionError as exc:
        note = f"Expected prompt containing '{filter_contains}'" + (f" at position {nth}" if nth is not None else "")
        if label:
            note += f" ({label})"
        raise AssertionError(f"{note}; captured steps={_steps(trace)}; original={exc}")


def _samples():
    from corpus.samples import Sample

    texts = [
        ("h-1", "Yaar ye joke toh ekdum mast tha", 1),
        ("h-2", "Bhai tera face dekh ke hasi ruk nahi rahi lol", 1),
        ("h-3", "Kal office mein meeting hai at 10 baje", 0),
        ("h-4", "Train late hai aaj bhi, ghar pahunchne mein der hogi", 0),
    ]
    return [Sample(id=sid, text=text, label=label, task="humor") for sid, text, label in texts]


async def _run_live(k: int):
    from corpus.samples import Sample
    from prompting.clients import get_completion_client
    from prompting.runner import run_prompting
    from prompting.templates import PromptConfig

    queries = [Sample(id="q-1", text="Bhai tu toh comedy king nikla", label=1, task="humor")]
    client = get_completion_client("openai", task="humor")
    cfg = PromptConfig(task="humor", k=k, seed=0)
    result = await sync_to_async(run_prompting, thread_sensitive=True)(cfg, _samples(), queries, client, 1)
    entry = result.transcript[0]
    assert entry["response"].strip(), f"Expected a non-empty completion; transcript={result.transcript}"
    return result


@ai_test("openai zero-shot label prompt emitted")
async def test_openai_zero_shot_prompt(ctx):
    await _run_live(0)
    expect(ctx.trace).to_have_llm_step(provider="openai", min_times=1)
    _expect_prompt(ctx.trace, filter_contains="Hindi-English code-mixed", nth=0)
    _expect_prompt(ctx.trace, filter_contains="Input: Bhai tu toh comedy king nikla", nth=0)


@ai_test("openai two-shot label prompt carries examples")
async def test_openai_two_shot_prompt(ctx):
    result = await _run_live(2)
    assert len(result.shots) == 2, f"Expected two shots; got {result.shots!r}"
    _expect_prompt(ctx.trace, filter_contains="### Examples", nth=0, label="shots should precede the query")
    parsed = result.transcript[0]["parsed_label"]
    assert parsed in (0, 1, None), f"Unexpected parsed label {parsed!r}"
