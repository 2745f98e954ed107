import logging
from dataclasses import dataclass, field

from evaluation.metrics import prf1, score_abstentions

from .clients import send_all
from .parsing import parse_label
from .shots import select_shots
from .templates import render_prompt
from .transcripts import transcript_entry

logger = logging.getLogger(__name__)


@dataclass
class PromptingResult:
    report: object
    shots: list
    transcript: list = field(default_factory=list)
    failed: int = 0

    @property
    def parsed(self):
        return [entry['parsed_label'] for entry in self.transcript]

    @property
    def abstentions(self):
        return sum(1 for label in self.parsed if label is None)


def run_prompting(cfg, train, queries, client, max_workers=4):
    """Select shots, prompt for every query, parse labels and score them.

    Abstentions count as wrong predictions. Requests that got no response
    are counted in ``failed``; their transcript response is None.
    """
    shots = select_shots(train, cfg.k, cfg.seed)
    prompts = [render_prompt(cfg, shots, query) for query in queries]
    responses = send_all(client, prompts, max_workers=max_workers)

    transcript = [
        transcript_entry(query, prompt, response, parse_label(response, cfg.task))
        for query, prompt, response in zip(queries, prompts, responses)
    ]
    failed = sum(1 for response in responses if response is None)
    result = PromptingResult(report=None, shots=shots, transcript=transcript, failed=failed)
    golds = [q.label for q in queries]
    result.report = prf1(score_abstentions(result.parsed, golds), golds)
    logger.info("prompting task=%s k=%d client=%s f1=%.4f abstained=%d failed=%d",
                cfg.task, cfg.k, client.name, result.report.f1, result.abstentions, failed)
    return result
