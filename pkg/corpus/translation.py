import abc
import logging

from .samples import Sample, Origin

logger = logging.getLogger(__name__)


class Translator(abc.ABC):
    """Machine translation boundary for building translated native pools.

    No implementation ships with the project; plug in any service that maps
    a text from ``source`` to ``target`` language codes.
    """

    @abc.abstractmethod
    def translate(self, text, source='en', target='hi'):
        raise NotImplementedError


def translate_pool(samples, translator, source='en', target='hi'):
    translated = []
    for sample in samples:
        translated.append(Sample(
            id=f"{sample.id}-{target}",
            text=translator.translate(sample.text, source=source, target=target),
            task=sample.task,
            label=sample.label,
            origin=Origin.NATIVE_HI_TRANSLATED.value,
            dataset=f"{sample.dataset}-{target}" if sample.dataset else target,
        ))
    logger.info("translated %d samples %s->%s", len(translated), source, target)
    return translated
