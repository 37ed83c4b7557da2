"""Backoff n-gram language models with ARPA import and export."""

import enum
import math
import warnings
from collections import Counter, defaultdict
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

from ..corpus import EOS, SPECIALS, CorpusFormatError, Sentence, Vocabulary, build_vocab
from ..utils import fingerprint
from .base import EvalReport, LanguageModel, OovMode, perplexity

DEFAULT_ORDER = 5

# log10(0) as written by the common toolkits.
ARPA_LOG_ZERO = -99.0
# Unigram mass deviation above which an imported model is reported.
ARPA_MASS_TOLERANCE = 1e-4

Gram = Tuple[int, ...]
Table = Dict[Gram, Dict[int, int]]


class Smoothing(str, enum.Enum):
    MLE = "mle"
    WITTEN_BELL = "wb"
    KNESER_NEY = "kn"


def _log10(p: float) -> float:
    return math.log10(p) if p > 0.0 else float("-inf")


@dataclass(frozen=True)
class NgramCounts:
    """Counts of every n-gram up to ``order``, sentence ends included.

    ``tables[L]`` maps a context of ``L`` word ids to the counts of its successors.
    Contexts never reach across a sentence start.
    """

    order: int
    vocab: Vocabulary
    tables: Tuple[Table, ...]

    def count(self, gram: Sequence[int]) -> int:
        gram = tuple(gram)
        if not 1 <= len(gram) <= self.order:
            raise ValueError(f"Gram length {len(gram)} outside 1..{self.order}.")
        return self.tables[len(gram) - 1].get(gram[:-1], {}).get(gram[-1], 0)

    def grams(self, n: int) -> Iterator[Tuple[Gram, int]]:
        for context, successors in self.tables[n - 1].items():
            for word, count in successors.items():
                yield context + (word,), count

    def is_consistent(self) -> bool:
        """Every interior context's successor total equals its own count."""
        for length in range(1, self.order):
            for context, successors in self.tables[length].items():
                if sum(successors.values()) != self.count(context):
                    return False
        return True


def count_ngrams(
    corpus: Sequence[Sentence], order: int, vocab: Optional[Vocabulary] = None
) -> NgramCounts:
    """Count all n-grams of length 1..order with ``</s>`` appended per sentence.

    Words outside ``vocab`` are counted as ``<unk>``; without ``vocab`` one is built
    from ``corpus``.
    """
    if order < 1:
        raise ValueError(f"order must be at least 1, got {order}.")
    if vocab is None:
        vocab = build_vocab(corpus)
    tables: List[Dict[Gram, Counter]] = [defaultdict(Counter) for _ in range(order)]
    for sentence in corpus:
        ids = vocab.encode(sentence)
        for t, word in enumerate(ids):
            for length in range(min(order - 1, t) + 1):
                tables[length][tuple(ids[t - length : t])][word] += 1
    return NgramCounts(
        order,
        vocab,
        tuple({context: dict(c) for context, c in table.items()} for table in tables),
    )


def _kn_adjusted_counts(counts: NgramCounts, n: int) -> Table:
    """Continuation counts of the n-grams, n below the model order.

    An n-gram counts once per distinct left neighbour, plus once more if it also
    starts a sentence (a sentence start acts as one more distinct left context).
    """
    extensions: Dict[Gram, int] = defaultdict(int)
    extended_total: Dict[Gram, int] = defaultdict(int)
    for gram, count in counts.grams(n + 1):
        extensions[gram[1:]] += 1
        extended_total[gram[1:]] += count
    adjusted: Table = defaultdict(dict)
    for gram, count in counts.grams(n):
        starts = count - extended_total.get(gram, 0)
        adjusted[gram[:-1]][gram[-1]] = extensions.get(gram, 0) + (1 if starts > 0 else 0)
    return dict(adjusted)


def kn_discounts(table: Table) -> Optional[Tuple[float, float, float]]:
    """Modified Kneser-Ney discounts D1, D2, D3+ from count-of-counts.

    Returns ``None`` when the count-of-counts cannot support the estimate.
    """
    n = Counter(count for successors in table.values() for count in successors.values())
    n1, n2, n3, n4 = n[1], n[2], n[3], n[4]
    if n1 == 0 or n2 == 0:
        return None
    y = n1 / (n1 + 2 * n2)
    d1 = 1 - 2 * y * n2 / n1
    d2 = 2 - 3 * y * n3 / n2
    d3 = 3 - 4 * y * n4 / n3 if n3 > 0 else 3.0
    if not (0 < d1 < 1 and 0 <= d2 <= 2 and 0 <= d3 <= 3):
        return None
    return d1, d2, d3


class NgramModel(LanguageModel):
    """Backoff model: explicit log10 probabilities plus log10 backoff weights.

    ``probs`` holds every explicit n-gram, including one unigram per vocabulary word.
    ``backoffs`` holds the weight of each context with an explicit distribution.
    """

    def __init__(
        self,
        order: int,
        vocab: Vocabulary,
        probs: Dict[Gram, float],
        backoffs: Dict[Gram, float],
        smoothing: Optional[str] = None,
        name: Optional[str] = None,
    ):
        super().__init__(vocab, name=name)
        if order < 1:
            raise ValueError(f"order must be at least 1, got {order}.")
        self.order = order
        self.probs = probs
        self.backoffs = backoffs
        self.smoothing = smoothing

    @classmethod
    def uniform(cls, vocab: Vocabulary, name: Optional[str] = None) -> "NgramModel":
        logp = -math.log10(len(vocab))
        return cls(1, vocab, {(i,): logp for i in range(len(vocab))}, {}, name=name)

    def logprob(self, history: Sequence[int], word: int) -> float:
        """log10 P(word | history) by the backoff recursion."""
        context = tuple(history[len(history) - self.order + 1 :]) if self.order > 1 else ()
        weight = 0.0
        while True:
            value = self.probs.get(context + (word,))
            if value is not None:
                return weight + value
            if not context:
                return float("-inf")
            weight += self.backoffs.get(context, 0.0)
            context = context[1:]

    def sentence_log10probs(self, sentence: Sentence) -> List[float]:
        ids = self.vocab.encode(sentence)
        return [self.logprob(ids[:t], word) for t, word in enumerate(ids)]

    def context_mass(self, history: Sequence[int]) -> float:
        """Total probability the model spreads over the vocabulary after ``history``."""
        return math.fsum(10.0 ** self.logprob(history, w) for w in range(len(self.vocab)))

    def contexts(self) -> List[Gram]:
        return sorted(self.backoffs)

    def ngram_counts(self) -> List[int]:
        lengths = Counter(len(gram) for gram in self.probs)
        return [lengths.get(n, 0) for n in range(1, self.order + 1)]

    def to_arpa(self) -> str:
        lines = ["", "\\data\\"]
        lines += [f"ngram {n}={c}" for n, c in enumerate(self.ngram_counts(), start=1)]
        by_order: Dict[int, List[Gram]] = defaultdict(list)
        for gram in self.probs:
            by_order[len(gram)].append(gram)
        for n in range(1, self.order + 1):
            lines += ["", f"\\{n}-grams:"]
            for gram in sorted(by_order[n]):
                words = " ".join(self.vocab.word(i) for i in gram)
                line = f"{_format_log10(self.probs[gram])}\t{words}"
                if n < self.order and gram in self.backoffs:
                    line += f"\t{_format_log10(self.backoffs[gram])}"
                lines.append(line)
        lines += ["", "\\end\\", ""]
        return "\n".join(lines)

    @classmethod
    def from_arpa(cls, text: str, name: Optional[str] = None) -> "NgramModel":
        return _parse_arpa(text, name=name)

    def write_arpa(self, path: Union[str, Path]) -> None:
        Path(path).write_text(self.to_arpa(), encoding="utf-8")

    @classmethod
    def read_arpa(cls, path: Union[str, Path], name: Optional[str] = None) -> "NgramModel":
        return cls.from_arpa(Path(path).read_text(encoding="utf-8"), name=name)

    @cached_property
    def _fingerprint(self) -> str:
        return fingerprint(self.to_arpa())

    def fingerprint(self) -> str:
        return self._fingerprint


def _format_log10(value: float) -> str:
    if value == float("-inf") or value <= ARPA_LOG_ZERO:
        return f"{ARPA_LOG_ZERO:.7f}"
    return f"{value:.7f}"


def _parse_log10(text: str, line_number: int) -> float:
    try:
        value = float(text)
    except ValueError:
        raise CorpusFormatError(f"{text!r} is not a number", line_number) from None
    return float("-inf") if value <= ARPA_LOG_ZERO else value


def _parse_arpa(text: str, name: Optional[str] = None) -> NgramModel:
    declared: Dict[int, int] = {}
    entries: Dict[int, List[Tuple[Tuple[str, ...], float, Optional[float]]]] = {}
    section: Optional[int] = None
    seen_data = seen_end = False
    for line_number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line == "\\data\\":
            seen_data = True
            section = 0
        elif line == "\\end\\":
            seen_end = True
            break
        elif line.startswith("\\") and line.endswith("-grams:"):
            try:
                section = int(line[1 : -len("-grams:")])
            except ValueError:
                raise CorpusFormatError(f"bad section header {line!r}", line_number) from None
            entries[section] = []
        elif section == 0:
            if not line.startswith("ngram ") or "=" not in line:
                raise CorpusFormatError(f"bad header line {line!r}", line_number)
            n, count = line[len("ngram ") :].split("=", 1)
            declared[int(n)] = int(count)
        elif section:
            fields = raw.split("\t")
            if len(fields) not in (2, 3):
                raise CorpusFormatError(
                    "expected logprob<TAB>words[<TAB>backoff]", line_number
                )
            words = tuple(fields[1].split(" "))
            if len(words) != section:
                raise CorpusFormatError(
                    f"{len(words)} words in the {section}-grams section", line_number
                )
            backoff = _parse_log10(fields[2], line_number) if len(fields) == 3 else None
            entries[section].append((words, _parse_log10(fields[0], line_number), backoff))
        else:
            raise CorpusFormatError(f"unexpected line {line!r}", line_number)
    if not seen_data or not seen_end:
        raise CorpusFormatError("missing \\data\\ or \\end\\ marker")
    for n, count in declared.items():
        if len(entries.get(n, [])) != count:
            raise CorpusFormatError(
                f"header declares {count} {n}-grams, found {len(entries.get(n, []))}"
            )
    order = max(declared) if declared else 0
    unigram_words = [words[0] for words, _, _ in entries.get(1, [])]
    missing = [special for special in SPECIALS if special not in unigram_words]
    vocab = Vocabulary(unigram_words + missing, [0] * (len(unigram_words) + len(missing)))
    probs: Dict[Gram, float] = {(vocab.id(w),): float("-inf") for w in missing}
    backoffs: Dict[Gram, float] = {}
    for n in range(1, order + 1):
        for words, logprob, backoff in entries.get(n, []):
            try:
                gram = tuple(vocab.id(w) for w in words)
            except KeyError as err:
                raise CorpusFormatError(f"{err.args[0]!r} is not a unigram") from None
            probs[gram] = logprob
            if backoff is not None:
                backoffs[gram] = backoff
    unigram_mass = math.fsum(10.0 ** probs[(i,)] for i in range(len(vocab)))
    if abs(unigram_mass - 1.0) > ARPA_MASS_TOLERANCE:
        warnings.warn(
            f"ARPA unigram probabilities sum to {unigram_mass}, not 1.", stacklevel=2
        )
    return NgramModel(order, vocab, probs, backoffs, name=name)


def estimate(
    counts: NgramCounts,
    smoothing: Union[Smoothing, str] = Smoothing.KNESER_NEY,
    floor: float = 0.0,
    name: Optional[str] = None,
) -> NgramModel:
    """Estimate an interpolated model and store it in backoff form.

    Every order interpolates a discounted estimate with the next lower order, down to
    the uniform distribution over the vocabulary:

    - ``mle``: relative frequencies; ``floor`` (default 0) is the mass each context
      hands to the lower order,
    - ``wb``: Witten-Bell,
    - ``kn``: modified Kneser-Ney with D1, D2, D3+ estimated per order from
      count-of-counts, continuation counts for the lower orders. Degenerate
      count-of-counts fall back to ``wb`` with a warning.

    For seen n-grams the interpolated probability is stored explicitly; the backoff
    weight of a context is its interpolation weight, so every context distribution
    normalizes over the closed vocabulary.
    """
    smoothing = Smoothing(smoothing)
    if not 0.0 <= floor < 1.0:
        raise ValueError(f"floor must lie in [0, 1), got {floor}.")
    if floor and smoothing != Smoothing.MLE:
        raise ValueError("floor only applies to mle smoothing.")

    tables: List[Table] = list(counts.tables)
    discounts: Dict[int, Tuple[float, float, float]] = {}
    if smoothing == Smoothing.KNESER_NEY:
        for n in range(1, counts.order):
            tables[n - 1] = _kn_adjusted_counts(counts, n)
        for n in range(1, counts.order + 1):
            d = kn_discounts(tables[n - 1])
            if d is None:
                warnings.warn(
                    f"Degenerate count-of-counts for {n}-grams; modified Kneser-Ney "
                    "falls back to Witten-Bell.",
                    stacklevel=2,
                )
                return estimate(counts, Smoothing.WITTEN_BELL, name=name)
            discounts[n] = d

    vocab = counts.vocab
    model = NgramModel(counts.order, vocab, {}, {}, smoothing=smoothing.value, name=name)
    uniform = 1.0 / len(vocab)
    for n in range(1, counts.order + 1):
        for context, successors in tables[n - 1].items():
            total = sum(successors.values())
            if total == 0:
                continue
            if smoothing == Smoothing.MLE:
                alphas = {w: (1.0 - floor) * c / total for w, c in successors.items()}
                gamma = floor
            elif smoothing == Smoothing.WITTEN_BELL:
                types = len(successors)
                alphas = {w: c / (total + types) for w, c in successors.items()}
                gamma = types / (total + types)
            else:
                d = discounts[n]
                alphas = {
                    w: max(c - d[min(c, 3) - 1], 0.0) / total
                    for w, c in successors.items()
                }
                n_by_count = Counter(min(c, 3) for c in successors.values())
                gamma = (
                    d[0] * n_by_count[1] + d[1] * n_by_count[2] + d[2] * n_by_count[3]
                ) / total
            for word, alpha in alphas.items():
                lower = uniform if n == 1 else 10.0 ** model.logprob(context[1:], word)
                model.probs[context + (word,)] = _log10(alpha + gamma * lower)
            if n > 1:
                model.backoffs[context] = _log10(gamma)
            else:
                unigram_gamma = gamma
        if n == 1:
            for word in range(len(vocab)):
                if (word,) not in model.probs:
                    mass = unigram_gamma * uniform if tables[0] else uniform
                    model.probs[(word,)] = _log10(mass)
    return model


def train_ngram(
    corpus: Sequence[Sentence],
    order: int = DEFAULT_ORDER,
    smoothing: Union[Smoothing, str] = Smoothing.KNESER_NEY,
    vocab: Optional[Vocabulary] = None,
    floor: float = 0.0,
    name: Optional[str] = None,
) -> NgramModel:
    return estimate(count_ngrams(corpus, order, vocab), smoothing, floor=floor, name=name)


def ppl(
    model: NgramModel,
    test: Sequence[Sentence],
    oov_mode: Union[OovMode, str] = OovMode.EXCLUDE,
    corpus_id: Optional[str] = None,
) -> EvalReport:
    return perplexity(model, test, OovMode(oov_mode), corpus_id=corpus_id)


__all__ = [
    "EOS",
    "NgramCounts",
    "NgramModel",
    "Smoothing",
    "count_ngrams",
    "estimate",
    "kn_discounts",
    "ppl",
    "train_ngram",
]
