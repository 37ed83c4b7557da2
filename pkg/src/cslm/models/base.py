import abc
import enum
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from ..corpus import Sentence, Vocabulary
from ..utils import corpus_fingerprint, format_float

# Relative tolerance of the ppl == 10^(-total / n) identity.
PPL_IDENTITY_RTOL = 1e-10


def _ppl(total_log10prob: float, n_scored: int) -> float:
    try:
        return 10.0 ** (-total_log10prob / n_scored)
    except OverflowError:
        return math.inf


class OovMode(str, enum.Enum):
    EXCLUDE = "exclude"
    MAP_UNK = "map_unk"


@dataclass(frozen=True)
class EvalReport:
    """Perplexity of one model on one corpus, with token accounting and provenance.

    ``n_scored`` counts the scored tokens including ``</s>``. In ``exclude`` mode
    out-of-vocabulary tokens are left out of both the log probability and
    ``n_scored``; ``n_oov`` always reports how many there were.
    """

    ppl: float
    total_log10prob: float
    n_scored: int
    n_oov: int
    oov_mode: OovMode
    model_id: str
    corpus_id: str
    n_sentences: int = 0

    def __post_init__(self):
        if self.n_scored <= 0:
            raise ValueError("no scored tokens")
        expected = _ppl(self.total_log10prob, self.n_scored)
        if not math.isclose(self.ppl, expected, rel_tol=PPL_IDENTITY_RTOL):
            raise ValueError(
                f"Inconsistent report: ppl={self.ppl} but 10^(-total/n)={expected}."
            )

    @classmethod
    def from_total(
        cls,
        total_log10prob: float,
        n_scored: int,
        n_oov: int,
        oov_mode: OovMode,
        model_id: str,
        corpus_id: str,
        n_sentences: int = 0,
    ) -> "EvalReport":
        if n_scored <= 0:
            raise ValueError("no scored tokens")
        return cls(
            ppl=_ppl(total_log10prob, n_scored),
            total_log10prob=total_log10prob,
            n_scored=n_scored,
            n_oov=n_oov,
            oov_mode=OovMode(oov_mode),
            model_id=model_id,
            corpus_id=corpus_id,
            n_sentences=n_sentences,
        )

    @property
    def summary_line(self) -> str:
        return f"ppl={format_float(self.ppl)} scored={self.n_scored} oov={self.n_oov}"

    def to_record(self) -> str:
        fields = [
            ("model_id", self.model_id),
            ("corpus_id", self.corpus_id),
            ("oov_mode", self.oov_mode.value),
            ("ppl", format_float(self.ppl)),
            ("total_log10prob", format_float(self.total_log10prob)),
            ("n_scored", self.n_scored),
            ("n_oov", self.n_oov),
            ("n_sentences", self.n_sentences),
        ]
        return "".join(f"{key}: {value}\n" for key, value in fields)


class LanguageModel(abc.ABC):
    """A model assigning log10 probabilities to sentences over a closed vocabulary.

    Implementations score every position of a sentence plus the implicit ``</s>``.
    Out-of-vocabulary words are presented to the model as ``<unk>``, both as history
    and as prediction target; whether those targets count is decided by the caller.
    """

    def __init__(self, vocab: Vocabulary, name: Optional[str] = None):
        self.vocab = vocab
        self.name = name

    @abc.abstractmethod
    def sentence_log10probs(self, sentence: Sentence) -> List[float]:
        """log10 P of every token of ``sentence`` and of the final ``</s>``."""

    @abc.abstractmethod
    def fingerprint(self) -> str:
        """Digest identifying the model parameters."""

    @property
    def model_id(self) -> str:
        return self.name if self.name is not None else self.fingerprint()

    def oov_mask(self, sentence: Sentence) -> List[bool]:
        return [word not in self.vocab for word in sentence.words] + [False]


def perplexity(
    model: LanguageModel,
    sentences: Sequence[Sentence],
    oov_mode: OovMode = OovMode.EXCLUDE,
    corpus_id: Optional[str] = None,
) -> EvalReport:
    """PPL = 10^(-(sum of log10 P) / N), N counting every scored token incl. ``</s>``."""
    oov_mode = OovMode(oov_mode)
    scored: List[float] = []
    n_oov = 0
    for sentence in sentences:
        log10probs = model.sentence_log10probs(sentence)
        for log10prob, is_oov in zip(log10probs, model.oov_mask(sentence)):
            if is_oov:
                n_oov += 1
                if oov_mode == OovMode.EXCLUDE:
                    continue
            scored.append(log10prob)
    if not scored:
        raise ValueError("no scored tokens")
    return EvalReport.from_total(
        total_log10prob=math.fsum(scored),
        n_scored=len(scored),
        n_oov=n_oov,
        oov_mode=oov_mode,
        model_id=model.model_id,
        corpus_id=corpus_id if corpus_id is not None else corpus_fingerprint(sentences),
        n_sentences=len(sentences),
    )


def to_log10(natural_log: np.ndarray) -> np.ndarray:
    return np.asarray(natural_log, dtype=np.float64) / math.log(10.0)
