"""Sentences, the factored corpus format, vocabularies and data splits."""

from __future__ import annotations

import re
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import (
    Dict,
    Iterable,
    Iterator,
    List,
    Mapping,
    Optional,
    Sequence,
    Set,
    Tuple,
    Union,
)

import numpy as np

UNK = "<unk>"
EOS = "</s>"
SPECIALS = (EOS, UNK)

YES = "Yes"
NO = "No"
CS_LABELS = (YES, NO)

UNK_TAG = "UNK"
ABSENT = "<absent>"

FACTOR_NAMES = ("pos", "cs")

DELIMITER = "|"
POS_PREFIX = "P:"
CS_PREFIX = "C:"

# Sentence-final punctuation: ASCII plus the Devanagari danda and double danda.
SENTENCE_FINAL = ".?!|।॥"

PathLike = Union[str, Path]


class CorpusFormatError(ValueError):
    """A factored corpus line does not follow the ``surface|P:tag|C:label`` grammar."""

    def __init__(self, reason: str, line: int = 1, column: int = 1):
        self.reason = reason
        self.line = line
        self.column = column
        super().__init__(f"line {line}, column {column}: {reason}")

    def __reduce__(self):
        return self.__class__, (self.reason, self.line, self.column)


def _has_whitespace(string: str) -> bool:
    return any(ch.isspace() for ch in string)


@dataclass(frozen=True)
class FactoredToken:
    surface: str
    pos: Optional[str] = None
    cs: Optional[str] = None

    def __post_init__(self):
        if not self.surface:
            raise ValueError("Token surface must be nonempty.")
        if _has_whitespace(self.surface) or DELIMITER in self.surface:
            raise ValueError(
                f"Token surface {self.surface!r} contains whitespace or '{DELIMITER}'."
            )
        if self.pos is not None and (
            not self.pos or _has_whitespace(self.pos) or DELIMITER in self.pos
        ):
            raise ValueError(f"Invalid POS tag {self.pos!r} for {self.surface!r}.")
        if self.cs is not None and self.cs not in CS_LABELS:
            raise ValueError(f"CS label must be one of {CS_LABELS}, got {self.cs!r}.")

    def factor(self, name: str) -> Optional[str]:
        if name == "pos":
            return self.pos
        if name == "cs":
            return self.cs
        raise ValueError(f"Unknown factor {name!r}; expected one of {FACTOR_NAMES}.")


@dataclass(frozen=True)
class Sentence:
    tokens: Tuple[FactoredToken, ...]

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        if len(self.tokens) == 0:
            raise ValueError("A sentence needs at least one token.")
        if any(token.surface == EOS for token in self.tokens):
            raise ValueError(f"The sentence end marker {EOS} is implicit.")

    @classmethod
    def from_words(cls, words: Iterable[str]) -> "Sentence":
        return cls(tuple(FactoredToken(word) for word in words))

    @property
    def words(self) -> Tuple[str, ...]:
        return tuple(token.surface for token in self.tokens)

    def __len__(self) -> int:
        return len(self.tokens)

    def __iter__(self) -> Iterator[FactoredToken]:
        return iter(self.tokens)

    def __getitem__(self, i: int) -> FactoredToken:
        return self.tokens[i]


def _is_latin(ch: str) -> bool:
    return unicodedata.name(ch, "").startswith("LATIN")


def _keep_char(ch: str) -> bool:
    # Letters, marks (vowel signs of Indic scripts) and digits of any script.
    return unicodedata.category(ch)[0] in "LMN"


def _lower_latin(word: str) -> str:
    return "".join(ch.lower() if _is_latin(ch) else ch for ch in word)


_SENTENCE_SPLIT = re.compile(f"[{re.escape(SENTENCE_FINAL)}\n\r]+")


def normalize_text(raw: str) -> List[Sentence]:
    """Turn raw text into word-only sentences.

    Characters other than letters, marks and digits of any script are replaced by a
    space, except sentence-final punctuation (``. ? ! |`` and the dandas) which, like
    line breaks, ends a sentence. Whitespace runs collapse, Latin letters are
    lowercased and empty sentences are dropped.
    """
    cleaned = "".join(
        ch if _keep_char(ch) or ch in SENTENCE_FINAL or ch in "\n\r" else " "
        for ch in raw
    )
    sentences = []
    for chunk in _SENTENCE_SPLIT.split(cleaned):
        words = [_lower_latin(word) for word in chunk.split()]
        if words:
            sentences.append(Sentence.from_words(words))
    return sentences


def emit_text(sentences: Iterable[Sentence]) -> str:
    return "".join(" ".join(sentence.words) + "\n" for sentence in sentences)


def emit_factored_token(token: FactoredToken) -> str:
    text = token.surface
    if token.pos is not None:
        text += DELIMITER + POS_PREFIX + token.pos
    if token.cs is not None:
        text += DELIMITER + CS_PREFIX + token.cs
    return text


def emit_factored_line(sentence: Sentence) -> str:
    return " ".join(emit_factored_token(token) for token in sentence)


def _parse_token(text: str, line: int, column: int) -> FactoredToken:
    parts = text.split(DELIMITER)
    surface = parts[0]
    if not surface:
        raise CorpusFormatError("empty surface", line, column)
    pos: Optional[str] = None
    cs: Optional[str] = None
    offset = column + len(surface)
    for part in parts[1:]:
        # offset points at the delimiter preceding this field
        field_column = offset + 1
        if part.startswith(POS_PREFIX) and pos is None and cs is None:
            pos = part[len(POS_PREFIX) :]
            if not pos:
                raise CorpusFormatError("empty POS tag", line, field_column)
        elif part.startswith(CS_PREFIX) and cs is None:
            cs = part[len(CS_PREFIX) :]
            if cs not in CS_LABELS:
                raise CorpusFormatError(
                    f"unknown CS label {cs!r}", line, field_column + len(CS_PREFIX)
                )
        else:
            raise CorpusFormatError(
                f"malformed field prefix in {part!r}", line, field_column
            )
        offset += len(part) + 1
    try:
        return FactoredToken(surface, pos, cs)
    except ValueError as err:
        raise CorpusFormatError(str(err), line, column) from None


_TOKEN = re.compile(r"[^ \t]+")


def parse_factored_line(line: str, line_number: int = 1) -> Sentence:
    """Parse one line of the factored corpus format.

    Tokens are space-separated and follow ``surface(|P:tag)?(|C:(Yes|No))?``. Errors
    name the 1-based line and column of the offending field.
    """
    line = line.rstrip("\r\n")
    tokens = [
        _parse_token(match.group(), line_number, match.start() + 1)
        for match in _TOKEN.finditer(line)
    ]
    if not tokens:
        raise CorpusFormatError("empty sentence", line_number, 1)
    try:
        return Sentence(tuple(tokens))
    except ValueError as err:
        raise CorpusFormatError(str(err), line_number, 1) from None


def read_corpus(path: PathLike) -> List[Sentence]:
    sentences = []
    with open(path, encoding="utf-8") as f:
        for line_number, line in enumerate(f, start=1):
            if line.strip():
                sentences.append(parse_factored_line(line, line_number))
    return sentences


def write_corpus(path: PathLike, sentences: Iterable[Sentence]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for sentence in sentences:
            f.write(emit_factored_line(sentence) + "\n")


def select_factors(sentence: Sentence, factors: Iterable[str]) -> Sentence:
    """Keep only the given factors, e.g. ``("cs",)`` for the word + CS transcription."""
    keep = set(factors)
    unknown = keep.difference(FACTOR_NAMES)
    if unknown:
        raise ValueError(f"Unknown factors {sorted(unknown)}.")
    return Sentence(
        tuple(
            FactoredToken(
                token.surface,
                token.pos if "pos" in keep else None,
                token.cs if "cs" in keep else None,
            )
            for token in sentence
        )
    )


@dataclass(frozen=True)
class VocabEntry:
    id: int
    count: int
    flags: str = "-"

    @property
    def augmented(self) -> bool:
        return self.flags == "augmented"


class Vocabulary:
    """Dense word <-> id mapping with corpus counts.

    Ids follow the given word order. ``</s>`` and ``<unk>`` are always present.
    """

    def __init__(
        self,
        words: Sequence[str],
        counts: Sequence[int],
        augmented: Iterable[str] = (),
    ):
        if len(words) != len(counts):
            raise ValueError("words and counts must have the same length.")
        if len(set(words)) != len(words):
            raise ValueError("Vocabulary words must be unique.")
        augmented = set(augmented)
        self._words: Tuple[str, ...] = tuple(words)
        self._entries: Dict[str, VocabEntry] = {}
        for i, (word, count) in enumerate(zip(words, counts)):
            if count < 0:
                raise ValueError(f"Negative count {count} for {word!r}.")
            if word in SPECIALS:
                flags = "special"
            elif word in augmented:
                flags = "augmented"
            else:
                flags = "-"
            self._entries[word] = VocabEntry(i, int(count), flags)
        missing = [special for special in SPECIALS if special not in self._entries]
        if missing:
            raise ValueError(f"Vocabulary lacks the special entries {missing}.")

    def __len__(self) -> int:
        return len(self._words)

    def __contains__(self, word: object) -> bool:
        return word in self._entries

    def __iter__(self) -> Iterator[str]:
        return iter(self._words)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Vocabulary):
            return NotImplemented
        return self._entries == other._entries

    def __repr__(self) -> str:
        return f"Vocabulary(size={len(self)})"

    @property
    def unk_id(self) -> int:
        return self._entries[UNK].id

    @property
    def eos_id(self) -> int:
        return self._entries[EOS].id

    def entry(self, word: str) -> VocabEntry:
        return self._entries[word]

    def id(self, word: str) -> int:
        return self._entries[word].id

    def word(self, word_id: int) -> str:
        if not 0 <= word_id < len(self._words):
            raise IndexError(f"Word id {word_id} out of range 0..{len(self) - 1}.")
        return self._words[word_id]

    def count(self, word: str) -> int:
        return self._entries[word].count

    def counts(self) -> np.ndarray:
        return np.array([self._entries[w].count for w in self._words], dtype=np.int64)

    def is_augmented(self, word: str) -> bool:
        return self._entries[word].augmented

    def lookup(self, word: str) -> int:
        """Id of ``word``, ``<unk>`` for out-of-vocabulary words."""
        entry = self._entries.get(word)
        return self.unk_id if entry is None else entry.id

    def encode(self, sentence: Sentence) -> List[int]:
        return [self.lookup(word) for word in sentence.words] + [self.eos_id]

    def to_text(self) -> str:
        return "".join(
            f"{word}\t{self._entries[word].count}\t{self._entries[word].flags}\n"
            for word in self._words
        )

    @classmethod
    def from_text(cls, text: str) -> "Vocabulary":
        words, counts, augmented = [], [], []
        for line_number, line in enumerate(text.splitlines(), start=1):
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 3:
                raise CorpusFormatError(
                    "expected word<TAB>count<TAB>flags", line_number, 1
                )
            word, count, flags = fields
            try:
                counts.append(int(count))
            except ValueError:
                raise CorpusFormatError(
                    f"count {count!r} is not an integer", line_number, len(word) + 2
                ) from None
            words.append(word)
            if flags == "augmented":
                augmented.append(word)
        return cls(words, counts, augmented)

    def write(self, path: PathLike) -> None:
        Path(path).write_text(self.to_text(), encoding="utf-8")

    @classmethod
    def read(cls, path: PathLike) -> "Vocabulary":
        return cls.from_text(Path(path).read_text(encoding="utf-8"))


def build_vocab(
    train: Sequence[Sentence], augment: Iterable[str] = ()
) -> Vocabulary:
    """Vocabulary of the training words plus augmented (foreign) words.

    ``</s>`` is counted once per sentence and ``<unk>`` gets count 0. Ids are assigned
    by descending count, ties broken lexicographically. Augmented words absent from
    ``train`` enter with count 0 and leave their probability mass to smoothing.
    """
    counter: Counter = Counter(word for sentence in train for word in sentence.words)
    counter[EOS] = len(train)
    counter[UNK] = counter.get(UNK, 0)
    augmented = []
    for word in augment:
        if not word or _has_whitespace(word) or DELIMITER in word:
            raise ValueError(f"Cannot add {word!r} to the vocabulary.")
        if word in SPECIALS:
            continue
        counter.setdefault(word, 0)
        augmented.append(word)
    ordered = sorted(counter.items(), key=lambda item: (-item[1], item[0]))
    return Vocabulary(
        [word for word, _ in ordered],
        [count for _, count in ordered],
        augmented=augmented,
    )


def augmentation_words(
    native_train: Iterable[Sentence], mixed_train: Iterable[Sentence]
) -> List[str]:
    """Words of the code-switched training text that the native text lacks."""
    native = {word for sentence in native_train for word in sentence.words}
    foreign = {word for sentence in mixed_train for word in sentence.words}
    return sorted(foreign - native)


@dataclass(frozen=True)
class TagInventory:
    """POS factor inventory; the last row id stands for an absent tag."""

    tags: Tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "tags", tuple(self.tags))
        if len(set(self.tags)) != len(self.tags):
            raise ValueError("Tags must be unique.")
        index = {tag: i for i, tag in enumerate(self.tags)}
        object.__setattr__(self, "_index", index)
        object.__setattr__(self, "_fallback", index.get(UNK_TAG, len(self.tags)))

    def __len__(self) -> int:
        return len(self.tags) + 1

    @property
    def absent_id(self) -> int:
        return len(self.tags)

    def lookup(self, tag: Optional[str]) -> int:
        """Row of ``tag``; unseen tags fall back to ``UNK`` if known, else to absent."""
        if tag is None:
            return self.absent_id
        return self._index.get(tag, self._fallback)  # type: ignore[attr-defined]


def build_tagset(train: Iterable[Sentence]) -> TagInventory:
    tags = {token.pos for sentence in train for token in sentence if token.pos}
    return TagInventory(tuple(sorted(tags)))


CS_ABSENT_ID = 2


def cs_id(label: Optional[str]) -> int:
    """Row of the CS factor block: Yes, No, absent."""
    if label is None:
        return CS_ABSENT_ID
    return CS_LABELS.index(label)


@dataclass(frozen=True)
class FoldPlan:
    k: int
    assignments: Tuple[int, ...]
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "assignments", tuple(self.assignments))
        if self.k < 2:
            raise ValueError(f"k must be at least 2, got {self.k}.")
        if any(not 0 <= fold < self.k for fold in self.assignments):
            raise ValueError("Fold ids must lie in 0..k-1.")
        sizes = self.sizes()
        if max(sizes) - min(sizes) > 1:
            raise ValueError(f"Fold sizes {sizes} differ by more than one.")

    def sizes(self) -> List[int]:
        counts = Counter(self.assignments)
        return [counts.get(fold, 0) for fold in range(self.k)]

    def test_indices(self, fold: int) -> List[int]:
        return [i for i, f in enumerate(self.assignments) if f == fold]

    def train_indices(self, fold: int) -> List[int]:
        return [i for i, f in enumerate(self.assignments) if f != fold]


def split_kfold(corpus: Sequence[Sentence], k: int, seed: int) -> FoldPlan:
    """Balanced k-fold partition of the sentence indices, deterministic per seed."""
    if k < 2:
        raise ValueError(f"k must be at least 2, got {k}.")
    if k > len(corpus):
        raise ValueError(f"Cannot split {len(corpus)} sentences into {k} folds.")
    order = np.random.default_rng(seed).permutation(len(corpus))
    assignments = [0] * len(corpus)
    for position, index in enumerate(order):
        assignments[int(index)] = position % k
    return FoldPlan(k, tuple(assignments), seed)


def script_class(word: str) -> str:
    """``latin`` when every letter of ``word`` is Latin, else ``non_latin``."""
    letters = [ch for ch in word if unicodedata.category(ch).startswith("L")]
    if letters and all(_is_latin(ch) for ch in letters):
        return "latin"
    return "non_latin"


SCRIPT_CLASSES = ("non_latin", "latin")


@dataclass(frozen=True)
class CorpusStats:
    sentences: int
    words: Mapping[str, int] = field(default_factory=dict)
    unique_words: Mapping[str, int] = field(default_factory=dict)

    def to_record(self, prefix: str = "") -> str:
        lines = [f"{prefix}sentences: {self.sentences}"]
        lines += [f"{prefix}words.{c}: {self.words.get(c, 0)}" for c in SCRIPT_CLASSES]
        lines += [
            f"{prefix}unique_words.{c}: {self.unique_words.get(c, 0)}"
            for c in SCRIPT_CLASSES
        ]
        return "\n".join(lines) + "\n"


def corpus_stats(sentences: Sequence[Sentence]) -> CorpusStats:
    words: Counter = Counter()
    uniques: Dict[str, Set[str]] = {c: set() for c in SCRIPT_CLASSES}
    for sentence in sentences:
        for word in sentence.words:
            cls = script_class(word)
            words[cls] += 1
            uniques[cls].add(word)
    return CorpusStats(
        sentences=len(sentences),
        words={c: words.get(c, 0) for c in SCRIPT_CLASSES},
        unique_words={c: len(uniques[c]) for c in SCRIPT_CLASSES},
    )


def render_stats(
    train: Sequence[Sentence], test: Optional[Sequence[Sentence]] = None
) -> str:
    """Key: value report with the columns of a data-set description table."""
    report = corpus_stats(train).to_record("train.")
    if test is not None:
        report += corpus_stats(test).to_record("test.")
    return report
