"""Ground truth for checking the models.

Synthetic sources with analytic entropy, scorers that materialize full next-word
distributions, and finite-difference gradients. Nothing here calls into the fast
scoring paths of :mod:`cslm.models`.
"""

import functools
import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg, optimize
from scipy.special import entr

from .corpus import NO, YES, FactoredToken, Sentence
from .factors import CsLabeling
from .models.ngram import NgramModel
from .models.rnnlm import RnnModel

ROW_SUM_TOLERANCE = 1e-12
DISTRIBUTION_TOLERANCE = 1e-6
DEFAULT_SENTENCE_LENGTH = 1000
SWITCH_SHARE_TOLERANCE = 1e-12

_NATIVE_ALPHABET = "कखगघचछजझटठडढतथदधनपफबभमयरलवशसह"


class NormalizationError(ArithmeticError):
    pass


def stationary(transition: np.ndarray) -> np.ndarray:
    """Left eigenvector of ``transition`` for eigenvalue 1, scaled to sum to 1."""
    values, vectors = linalg.eig(np.asarray(transition).T)
    vector = np.real(vectors[:, np.argmin(np.abs(values - 1.0))])
    return vector / vector.sum()


@dataclass(frozen=True, eq=False)
class MarkovSource:
    """First-order Markov chain over words whose token stream is cut into sentences.

    ``initial`` defaults to the stationary distribution.
    """

    states: Tuple[str, ...]
    transition: np.ndarray
    initial: Optional[np.ndarray] = None
    sentence_length: int = DEFAULT_SENTENCE_LENGTH

    def __post_init__(self):
        transition = np.asarray(self.transition, dtype=np.float64)
        n = len(self.states)
        if transition.shape != (n, n):
            raise ValueError(f"Transition matrix of shape {transition.shape} for {n} states.")
        if (transition < 0).any():
            raise ValueError("Transition probabilities must be non-negative.")
        if not np.allclose(transition.sum(axis=1), 1.0, rtol=0, atol=ROW_SUM_TOLERANCE):
            raise ValueError("Transition rows must sum to 1.")
        if len(set(self.states)) != n:
            raise ValueError("States must be distinct words.")
        if self.sentence_length < 1:
            raise ValueError(f"sentence_length must be positive, got {self.sentence_length}.")
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(self, "transition", transition)
        initial = self.stationary() if self.initial is None else np.asarray(self.initial)
        if initial.shape != (n,) or not math.isclose(initial.sum(), 1.0, abs_tol=1e-9):
            raise ValueError("The initial distribution must be a probability vector.")
        object.__setattr__(self, "initial", initial)

    @classmethod
    def uniform(
        cls, n_states: int, sentence_length: int = DEFAULT_SENTENCE_LENGTH
    ) -> "MarkovSource":
        return cls(
            tuple(f"w{i}" for i in range(n_states)),
            np.full((n_states, n_states), 1.0 / n_states),
            sentence_length=sentence_length,
        )

    @classmethod
    def cycle(
        cls, words: Sequence[str], sentence_length: int = DEFAULT_SENTENCE_LENGTH
    ) -> "MarkovSource":
        """Deterministic chain visiting ``words`` in order, starting at the first."""
        n = len(words)
        transition = np.zeros((n, n))
        transition[np.arange(n), (np.arange(n) + 1) % n] = 1.0
        initial = np.zeros(n)
        initial[0] = 1.0
        return cls(tuple(words), transition, initial, sentence_length)

    @classmethod
    def sparse(
        cls,
        n_states: int,
        branching: int,
        seed: int,
        sentence_length: int = DEFAULT_SENTENCE_LENGTH,
    ) -> "MarkovSource":
        """Every state moves uniformly to ``branching`` random successors: H = log2(branching)."""
        if not 1 <= branching <= n_states:
            raise ValueError(f"branching must lie in 1..{n_states}, got {branching}.")
        rng = np.random.default_rng(seed)
        transition = np.zeros((n_states, n_states))
        for i in range(n_states):
            successors = rng.choice(n_states, size=branching, replace=False)
            transition[i, successors] = 1.0 / branching
        return cls(
            tuple(f"w{i}" for i in range(n_states)),
            transition,
            sentence_length=sentence_length,
        )

    @classmethod
    def long_tail(
        cls,
        n_core: int,
        branching: int,
        depth: int,
        sentence_length: int = DEFAULT_SENTENCE_LENGTH,
    ) -> "MarkovSource":
        """A ring of ``n_core`` states feeding ``depth`` levels of ever rarer tail states.

        Core state ``i`` moves to core states ``i+1 .. i+branching-1`` and to tail state
        ``(0, i)``. Tail state ``(l, i)`` moves to core states ``i .. i+branching-3`` and
        to ``(l+1, i)`` and ``(l+1, i+1)``; the last level moves back to the core only.
        With ``branching=4`` every tail level is visited half as often as the one above,
        so a sample holds n-grams of every frequency down to singletons. Rows stay
        uniform over ``branching`` successors: H = log2(branching).
        """
        if depth < 1 or not 3 <= branching <= n_core:
            raise ValueError(
                f"Need depth >= 1 and 3 <= branching <= n_core, got depth={depth}, "
                f"branching={branching}, n_core={n_core}."
            )
        n_states = n_core * (depth + 1)

        def tail(level: int, i: int) -> int:
            return n_core * (level + 1) + i % n_core

        transition = np.zeros((n_states, n_states))
        weight = 1.0 / branching
        for i in range(n_core):
            for k in range(1, branching):
                transition[i, (i + k) % n_core] = weight
            transition[i, tail(0, i)] = weight
            for level in range(depth):
                state = tail(level, i)
                if level == depth - 1:
                    for k in range(branching):
                        transition[state, (i + k) % n_core] = weight
                    continue
                for k in range(branching - 2):
                    transition[state, (i + k) % n_core] = weight
                transition[state, tail(level + 1, i)] = weight
                transition[state, tail(level + 1, i + 1)] = weight
        names = [f"w{i}" for i in range(n_core)]
        names += [f"t{level}_{i}" for level in range(depth) for i in range(n_core)]
        return cls(tuple(names), transition, sentence_length=sentence_length)

    def stationary(self) -> np.ndarray:
        return stationary(self.transition)

    @property
    def entropy(self) -> float:
        """Entropy rate in bits per token: sum_i pi_i sum_j -p_ij log2 p_ij."""
        return float(self.stationary() @ entr(self.transition).sum(axis=1) / math.log(2.0))

    @property
    def perplexity(self) -> float:
        return 2.0 ** self.entropy

    def sample_states(self, n_tokens: int, rng: np.random.Generator) -> np.ndarray:
        cumulative = np.cumsum(self.transition, axis=1)
        draws = rng.random(n_tokens)
        last = len(self.states) - 1
        path = np.empty(n_tokens, dtype=np.int64)
        state = min(int(np.searchsorted(np.cumsum(self.initial), draws[0], side="right")), last)
        path[0] = state
        for t in range(1, n_tokens):
            state = min(int(np.searchsorted(cumulative[state], draws[t], side="right")), last)
            path[t] = state
        return path


def _chop(tokens: Sequence[FactoredToken], length: int) -> List[Sentence]:
    return [Sentence(tuple(tokens[i : i + length])) for i in range(0, len(tokens), length)]


@dataclass(frozen=True, eq=False)
class SwitchSource:
    """Native text from a class-level Markov chain, with class-keyed code switching.

    Each token draws a class from ``classes`` (its tag doubles as the POS proxy) and a
    native word of that class. For a switchable class (nonempty foreign inventory), a
    latent switch flag may fire and the emitted word is drawn from that class's foreign
    inventory instead. ``switch_rate`` is the long-run share of switched tokens; the
    flag of a switchable class fires with the larger :meth:`switch_probability`.

    With ``resume_native`` a switched word is followed by a class that cannot switch
    (among the successors of its own class), so switch points constrain what comes
    next. Rows without such a successor keep their full distribution.
    """

    classes: MarkovSource
    native_words: Tuple[Tuple[str, ...], ...]
    foreign_words: Tuple[Tuple[str, ...], ...]
    switch_rate: float = 0.3
    resume_native: bool = True

    def __post_init__(self):
        n = len(self.classes.states)
        if len(self.native_words) != n or len(self.foreign_words) != n:
            raise ValueError(f"Expected native and foreign inventories for {n} classes.")
        if any(not words for words in self.native_words):
            raise ValueError("Every class needs at least one native word.")
        if not 0.0 <= self.switch_rate <= 1.0:
            raise ValueError(f"switch_rate must lie in [0, 1], got {self.switch_rate}.")
        native = {w for words in self.native_words for w in words}
        foreign = {w for words in self.foreign_words for w in words}
        if native & foreign:
            raise ValueError("Native and foreign inventories overlap.")
        self.switch_probability()

    @property
    def tags(self) -> Tuple[str, ...]:
        return self.classes.states

    def switchable(self, cls: int) -> bool:
        return bool(self.foreign_words[cls])

    def after_switch(self) -> np.ndarray:
        """Class transition matrix used right after a switched word."""
        transition = self.classes.transition
        if not self.resume_native:
            return transition
        native = np.array([not self.switchable(c) for c in range(len(self.tags))])
        restricted = np.where(native, transition, 0.0)
        mass = restricted.sum(axis=1, keepdims=True)
        return np.where(mass > 0, restricted / np.where(mass > 0, mass, 1.0), transition)

    def switched_share(self, probability: float) -> float:
        """Long-run share of switched tokens when switchable classes switch with
        ``probability``, from the joint chain over (class, previous token switched)."""
        n = len(self.tags)
        fires = np.array([probability if self.switchable(c) else 0.0 for c in range(n)])
        joint = np.zeros((2 * n, 2 * n))
        for flag, rows in enumerate((self.classes.transition, self.after_switch())):
            joint[flag * n : (flag + 1) * n, :n] = rows * (1.0 - fires)
            joint[flag * n : (flag + 1) * n, n:] = rows * fires
        return float(stationary(joint)[n:].sum())

    @functools.cached_property
    def _switch_probability(self) -> float:
        if self.switch_rate == 0.0:
            return 0.0
        reachable = self.switched_share(1.0)
        if reachable < self.switch_rate - SWITCH_SHARE_TOLERANCE:
            raise ValueError(
                f"switch_rate={self.switch_rate} exceeds the largest reachable share "
                f"of switched tokens, {reachable:.6f}."
            )
        if reachable <= self.switch_rate:
            return 1.0
        return float(
            optimize.brentq(
                lambda p: self.switched_share(p) - self.switch_rate,
                0.0,
                1.0,
                xtol=SWITCH_SHARE_TOLERANCE,
            )
        )

    def switch_probability(self) -> float:
        """Chance that the switch flag of a switchable class fires."""
        return self._switch_probability

    @classmethod
    def default(
        cls,
        n_classes: int = 12,
        branching: int = 6,
        words_per_class: int = 8,
        n_foreign: int = 200,
        switch_rate: float = 0.3,
        seed: int = 0,
        sentence_length: int = 20,
        resume_native: bool = True,
    ) -> "SwitchSource":
        """Even-numbered classes are switchable; each class moves uniformly to
        ``branching // 2`` switchable and ``branching - branching // 2`` other classes.
        """
        switchable = list(range(0, n_classes, 2))
        other = list(range(1, n_classes, 2))
        half = branching // 2
        if half > len(switchable) or branching - half > len(other):
            raise ValueError(f"branching={branching} is too large for {n_classes} classes.")
        rng = np.random.default_rng(seed)
        transition = np.zeros((n_classes, n_classes))
        for i in range(n_classes):
            successors = np.concatenate(
                [
                    rng.choice(switchable, size=half, replace=False),
                    rng.choice(other, size=branching - half, replace=False),
                ]
            )
            transition[i, successors] = 1.0 / branching
        tags = tuple(f"T{i}" for i in range(n_classes))
        native = [
            tuple(
                _native_word(i * words_per_class + j) for j in range(words_per_class)
            )
            for i in range(n_classes)
        ]
        foreign: List[Tuple[str, ...]] = [()] * n_classes
        for k, c in enumerate(switchable):
            share = range(k, n_foreign, len(switchable))
            foreign[c] = tuple(f"en{i}" for i in share)
        return cls(
            MarkovSource(tags, transition, sentence_length=sentence_length),
            tuple(native),
            tuple(foreign),
            switch_rate,
            resume_native,
        )


def _native_word(index: int) -> str:
    size = len(_NATIVE_ALPHABET)
    if index >= size * size:
        raise ValueError(f"Native word index {index} exceeds the inventory.")
    return _NATIVE_ALPHABET[index // size] + _NATIVE_ALPHABET[index % size]


@dataclass(frozen=True)
class SwitchCorpus:
    """Parallel native and code-switched sentences with true tags and CS labels.

    Native tokens are labeled ``Yes`` where their counterpart was switched.
    """

    native: Tuple[Sentence, ...]
    mixed: Tuple[Sentence, ...]

    def labels(self) -> List[CsLabeling]:
        return [CsLabeling(tuple(t.cs for t in sentence)) for sentence in self.mixed]  # type: ignore[misc]


@functools.singledispatch
def gen_corpus(source, n_tokens: int, seed: int):
    """Draw ``n_tokens`` tokens from ``source``; the same seed gives the same corpus."""
    raise TypeError(f"Cannot generate from {type(source).__name__}.")


@gen_corpus.register
def _(source: MarkovSource, n_tokens: int, seed: int) -> List[Sentence]:
    if n_tokens < 1:
        raise ValueError(f"n_tokens must be positive, got {n_tokens}.")
    path = source.sample_states(n_tokens, np.random.default_rng(seed))
    tokens = [FactoredToken(source.states[state]) for state in path]
    return _chop(tokens, source.sentence_length)


@gen_corpus.register
def _(source: SwitchSource, n_tokens: int, seed: int) -> SwitchCorpus:
    if n_tokens < 1:
        raise ValueError(f"n_tokens must be positive, got {n_tokens}.")
    rng = np.random.default_rng(seed)
    class_draws, native_draws, switch_draws, foreign_draws = rng.random((4, n_tokens))
    rows = np.cumsum(source.classes.transition, axis=1)
    rows_after_switch = np.cumsum(source.after_switch(), axis=1)
    fires = source.switch_probability()
    last = len(source.tags) - 1
    cls = min(
        int(np.searchsorted(np.cumsum(source.classes.initial), class_draws[0], side="right")),
        last,
    )
    switched = False
    native_tokens, mixed_tokens = [], []
    for t in range(n_tokens):
        if t:
            cumulative = rows_after_switch if switched else rows
            cls = min(int(np.searchsorted(cumulative[cls], class_draws[t], side="right")), last)
        tag = source.tags[cls]
        inventory = source.native_words[cls]
        word = inventory[int(native_draws[t] * len(inventory))]
        switched = source.switchable(cls) and switch_draws[t] < fires
        label = YES if switched else NO
        native_tokens.append(FactoredToken(word, tag, label))
        if switched:
            foreign = source.foreign_words[cls]
            word = foreign[int(foreign_draws[t] * len(foreign))]
        mixed_tokens.append(FactoredToken(word, tag, label))
    length = source.classes.sentence_length
    return SwitchCorpus(
        tuple(_chop(native_tokens, length)), tuple(_chop(mixed_tokens, length))
    )


def gen_switch_corpus(source: SwitchSource, n_tokens: int, seed: int) -> SwitchCorpus:
    return gen_corpus(source, n_tokens, seed)


def check_distribution(probs: np.ndarray, tolerance: float = DISTRIBUTION_TOLERANCE) -> None:
    total = math.fsum(probs)
    if (probs < 0).any() or not abs(total - 1.0) <= tolerance:
        raise NormalizationError(f"Next-word distribution sums to {total}.")


@functools.singledispatch
def next_word_distributions(model, sentence: Sentence) -> List[np.ndarray]:
    """Full next-word distribution before every token of ``sentence`` and ``</s>``."""
    raise TypeError(f"No exhaustive scorer for {type(model).__name__}.")


@next_word_distributions.register
def _(model: NgramModel, sentence: Sentence) -> List[np.ndarray]:
    size = len(model.vocab)
    ids = model.vocab.encode(sentence)
    unigram = np.array([10.0 ** model.probs.get((w,), -math.inf) for w in range(size)])
    distributions = []
    for t in range(len(ids)):
        history = tuple(ids[max(0, t - model.order + 1) : t])
        probs = unigram
        for start in range(len(history) - 1, -1, -1):
            context = history[start:]
            weight = 10.0 ** model.backoffs.get(context, 0.0)
            explicit = np.array(
                [model.probs.get(context + (w,), math.nan) for w in range(size)]
            )
            seen = ~np.isnan(explicit)
            probs = np.where(seen, 10.0 ** np.where(seen, explicit, 0.0), weight * probs)
        distributions.append(probs)
    return distributions


@next_word_distributions.register
def _(model: RnnModel, sentence: Sentence) -> List[np.ndarray]:
    params = model.params
    word_class = np.asarray(model.class_map.word_class)
    steps, targets = model.encode(sentence)
    state = np.full(params.hidden_size, 0.5)
    distributions = []
    for step in steps:
        activation = params.recurrent @ state + params.w_pos[step.pos] + params.w_cs[step.cs]
        if step.word is not None:
            activation = activation + params.w_word[step.word]
        state = 1.0 / (1.0 + np.exp(-activation))
        class_scores = np.exp(state @ params.u_class - (state @ params.u_class).max())
        class_probs = class_scores / class_scores.sum()
        word_scores = state @ params.u_word
        probs = np.empty(len(word_class))
        for cls in range(len(class_probs)):
            members = word_class == cls
            scores = np.exp(word_scores[members] - word_scores[members].max())
            probs[members] = class_probs[cls] * scores / scores.sum()
        distributions.append(probs)
    return distributions


def exhaustive_logprob(model, sentence: Sentence) -> float:
    """Total log10 probability of ``sentence`` (``</s>`` included) from full distributions.

    Every distribution is checked to sum to 1 before the target is looked up.
    """
    ids = model.vocab.encode(sentence)
    total = []
    for probs, target in zip(next_word_distributions(model, sentence), ids):
        check_distribution(probs)
        total.append(math.log10(probs[target]) if probs[target] > 0 else -math.inf)
    return math.fsum(total)


def fd_gradient(
    loss: Callable[[np.ndarray], float], params: np.ndarray, h: float = 1e-5
) -> np.ndarray:
    """Central differences (f(x + h) - f(x - h)) / 2h for every scalar of ``params``."""
    x = np.array(params, dtype=np.float64)
    flat = x.reshape(-1)
    gradient = np.empty_like(flat)
    for i in range(flat.size):
        original = flat[i]
        flat[i] = original + h
        plus = loss(x)
        flat[i] = original - h
        minus = loss(x)
        flat[i] = original
        gradient[i] = (plus - minus) / (2.0 * h)
    return gradient.reshape(x.shape)
