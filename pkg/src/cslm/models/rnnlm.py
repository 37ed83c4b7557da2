"""Factored recurrent-network language model.

The previous word and its factors (POS tag, code-switch label) are summed into a
sigmoid hidden layer that also receives the previous hidden state. The output is
class-factorized::

    P(w | history) = P(class(w) | s) * P(w | class(w), s)

Training is plain SGD, one update per token, with backpropagation through time
truncated after ``bptt_steps`` steps and never crossing a sentence start.
"""

import json
import logging
import math
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import expit, log_softmax

from ..corpus import (
    CS_ABSENT_ID,
    FACTOR_NAMES,
    Sentence,
    TagInventory,
    Vocabulary,
    build_tagset,
    build_vocab,
    cs_id,
)
from ..utils import format_float, sha256_bytes
from .base import EvalReport, LanguageModel, OovMode, perplexity, to_log10

logger = logging.getLogger(__name__)

MODEL_MAGIC = b"CSLM"
MODEL_VERSION = 1
_CHECKSUM_LENGTH = 64

BLOCK_NAMES = ("w_word", "w_pos", "w_cs", "recurrent", "u_class", "u_word")

INITIAL_ACTIVATION = 0.5

FD_STEP = 1e-5
# Blocks whose analytic and numeric gradient norms both stay below this count as zero.
GRAD_ZERO_NORM = 1e-7


class TrainingDivergedError(ArithmeticError):
    def __init__(self, epoch: int, valid_ppl: float):
        self.epoch = epoch
        self.valid_ppl = valid_ppl
        super().__init__(
            f"training diverged in epoch {epoch}: validation ppl is {valid_ppl}"
        )

    def __reduce__(self):
        return self.__class__, (self.epoch, self.valid_ppl)


class ModelFileError(ValueError):
    pass


@dataclass(frozen=True)
class RnnConfig:
    hidden_size: int = 300
    n_classes: int = 50
    bptt_steps: int = 5
    factors: Tuple[str, ...] = FACTOR_NAMES
    lr0: float = 0.1
    seed: int = 1
    max_epochs: int = 20
    lr_halve_threshold: float = 1.003
    use_word_input: bool = True
    carry_state: bool = False
    init_scale: float = 0.1

    def __post_init__(self):
        factors = self.factors
        if isinstance(factors, str):
            factors = [name.strip() for name in factors.split(",") if name.strip()]
        unknown = sorted(set(factors) - set(FACTOR_NAMES))
        if unknown:
            raise ValueError(f"Unknown factors {unknown}, expected a subset of {FACTOR_NAMES}.")
        object.__setattr__(
            self, "factors", tuple(name for name in FACTOR_NAMES if name in factors)
        )
        for name in ("hidden_size", "n_classes", "bptt_steps", "max_epochs"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1, got {getattr(self, name)}.")
        if self.lr0 <= 0 or self.lr_halve_threshold <= 0:
            raise ValueError("lr0 and lr_halve_threshold must be positive.")
        if self.init_scale < 0:
            raise ValueError(f"init_scale must be non-negative, got {self.init_scale}.")

    def uses(self, factor: str) -> bool:
        return factor in self.factors

    def to_dict(self) -> Dict[str, object]:
        values = asdict(self)
        values["factors"] = list(self.factors)
        return values

    @classmethod
    def from_dict(cls, values: Dict[str, object]) -> "RnnConfig":
        return cls(**{**values, "factors": tuple(values.get("factors", ()))})  # type: ignore[arg-type]


@dataclass(frozen=True)
class ClassMap:
    """Partition of the word ids into output classes, every class nonempty."""

    word_class: Tuple[int, ...]
    _members: Tuple[np.ndarray, ...] = field(init=False, repr=False, compare=False)
    _position: Tuple[int, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        word_class = tuple(int(c) for c in self.word_class)
        if not word_class or min(word_class) < 0:
            raise ValueError("A class map needs at least one word and non-negative classes.")
        members: List[List[int]] = [[] for _ in range(max(word_class) + 1)]
        for word, cls in enumerate(word_class):
            members[cls].append(word)
        empty = [cls for cls, words in enumerate(members) if not words]
        if empty:
            raise ValueError(f"Classes {empty} have no members.")
        position = [0] * len(word_class)
        for words in members:
            for i, word in enumerate(words):
                position[word] = i
        object.__setattr__(self, "word_class", word_class)
        object.__setattr__(
            self, "_members", tuple(np.array(words, dtype=np.int64) for words in members)
        )
        object.__setattr__(self, "_position", tuple(position))

    @property
    def n_classes(self) -> int:
        return len(self._members)

    @property
    def vocab_size(self) -> int:
        return len(self.word_class)

    def class_of(self, word: int) -> int:
        return self.word_class[word]

    def members(self, cls: int) -> np.ndarray:
        return self._members[cls]

    def position(self, word: int) -> int:
        """Index of ``word`` among the members of its class."""
        return self._position[word]


def assign_classes(vocab: Union[Vocabulary, Sequence[int]], n_classes: int) -> ClassMap:
    """Frequency binning of the words into ``n_classes`` output classes.

    Words are ranked by descending count (ties by id) and the cumulative square-root
    count mass is cut into ``n_classes`` equal buckets. A word opens the next class
    early when the remaining words are just enough to give every remaining class one
    member. Without any counts every word weighs the same.
    """
    counts = vocab.counts() if isinstance(vocab, Vocabulary) else np.asarray(vocab)
    size = len(counts)
    if not 1 <= n_classes <= size:
        raise ValueError(f"n_classes must lie in 1..{size}, got {n_classes}.")
    order = np.argsort(-counts, kind="stable")
    mass = np.sqrt(counts[order].astype(np.float64))
    if mass.sum() == 0:
        mass = np.ones(size)
    total = mass.sum()
    before = np.concatenate(([0.0], np.cumsum(mass)[:-1]))
    word_class = [0] * size
    previous = -1
    for rank, word in enumerate(order):
        target = min(n_classes - 1, int(math.floor(n_classes * before[rank] / total)))
        cls = max(previous, min(target, previous + 1))
        if size - rank <= n_classes - 1 - previous:
            cls = previous + 1
        word_class[word] = cls
        previous = cls
    return ClassMap(tuple(word_class))


@dataclass(eq=False)
class RnnParams:
    """Weight blocks of the network.

    Input blocks hold one row per word, POS tag (last row: absent) and CS label
    (Yes, No, absent). ``recurrent`` maps the previous hidden state, ``u_class`` and
    ``u_word`` hold one column per class and per word.
    """

    w_word: np.ndarray
    w_pos: np.ndarray
    w_cs: np.ndarray
    recurrent: np.ndarray
    u_class: np.ndarray
    u_word: np.ndarray

    def __post_init__(self):
        for name in BLOCK_NAMES:
            setattr(self, name, np.array(getattr(self, name), dtype=np.float64, order="C"))
        hidden = self.recurrent.shape[0]
        vocab_size = self.w_word.shape[0]
        expected = {
            "w_word": (vocab_size, hidden),
            "w_pos": (self.w_pos.shape[0], hidden),
            "w_cs": (CS_ABSENT_ID + 1, hidden),
            "recurrent": (hidden, hidden),
            "u_class": (hidden, self.u_class.shape[-1]),
            "u_word": (hidden, vocab_size),
        }
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                raise ValueError(
                    f"Block {name} has shape {getattr(self, name).shape}, expected {shape}."
                )

    @classmethod
    def initialize(
        cls, config: RnnConfig, vocab_size: int, n_pos: int, n_classes: Optional[int] = None
    ) -> "RnnParams":
        """Uniform(-init_scale, init_scale) weights drawn block by block from ``seed``."""
        hidden = config.hidden_size
        n_classes = config.n_classes if n_classes is None else n_classes
        shapes = {
            "w_word": (vocab_size, hidden),
            "w_pos": (n_pos, hidden),
            "w_cs": (CS_ABSENT_ID + 1, hidden),
            "recurrent": (hidden, hidden),
            "u_class": (hidden, n_classes),
            "u_word": (hidden, vocab_size),
        }
        if config.init_scale == 0:
            return cls(**{name: np.zeros(shape) for name, shape in shapes.items()})
        rng = np.random.default_rng(config.seed)
        scale = config.init_scale
        return cls(**{name: rng.uniform(-scale, scale, shape) for name, shape in shapes.items()})

    @property
    def hidden_size(self) -> int:
        return self.recurrent.shape[0]

    @property
    def vocab_size(self) -> int:
        return self.w_word.shape[0]

    @property
    def n_classes(self) -> int:
        return self.u_class.shape[1]

    def blocks(self) -> Dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in BLOCK_NAMES}

    def copy(self) -> "RnnParams":
        return RnnParams(**{name: block.copy() for name, block in self.blocks().items()})

    def zeros_like(self) -> "RnnParams":
        return RnnParams(**{name: np.zeros_like(b) for name, b in self.blocks().items()})

    def flatten(self) -> np.ndarray:
        return np.concatenate([block.ravel() for block in self.blocks().values()])

    def with_flat(self, vector: np.ndarray) -> "RnnParams":
        blocks = {}
        offset = 0
        for name, block in self.blocks().items():
            blocks[name] = vector[offset : offset + block.size].reshape(block.shape)
            offset += block.size
        if offset != len(vector):
            raise ValueError(f"Expected {offset} values, got {len(vector)}.")
        return RnnParams(**blocks)

    def is_finite(self) -> bool:
        return all(np.isfinite(block).all() for block in self.blocks().values())

    def equals(self, other: "RnnParams") -> bool:
        return all(
            np.array_equal(block, getattr(other, name)) for name, block in self.blocks().items()
        )


@dataclass(frozen=True, eq=False)
class HiddenState:
    activation: np.ndarray

    @classmethod
    def initial(cls, hidden_size: int) -> "HiddenState":
        return cls(np.full(hidden_size, INITIAL_ACTIVATION))


class StepInput(NamedTuple):
    """Ids of the previous token: word (``None`` without word input), POS row, CS row."""

    word: Optional[int]
    pos: int
    cs: int


def _hidden(params: RnnParams, previous: np.ndarray, step: StepInput) -> np.ndarray:
    activation = params.recurrent @ previous + params.w_pos[step.pos] + params.w_cs[step.cs]
    if step.word is not None:
        activation += params.w_word[step.word]
    return expit(activation)


def _target_logprob(
    params: RnnParams, class_map: ClassMap, state: np.ndarray, target: int
) -> float:
    cls = class_map.class_of(target)
    class_lp = log_softmax(state @ params.u_class)
    word_lp = log_softmax(state @ params.u_word[:, class_map.members(cls)])
    return float(class_lp[cls] + word_lp[class_map.position(target)])


class ForwardStep:
    """Output of one forward step; within-class distributions are computed on demand."""

    def __init__(self, params: RnnParams, class_map: ClassMap, state: HiddenState):
        self._params = params
        self._class_map = class_map
        self.state = state
        self.class_log_probs = log_softmax(state.activation @ params.u_class)

    @property
    def class_probs(self) -> np.ndarray:
        return np.exp(self.class_log_probs)

    def word_log_probs(self, cls: int) -> np.ndarray:
        """log P(member | class) for the members of ``cls`` in member order."""
        members = self._class_map.members(cls)
        return log_softmax(self.state.activation @ self._params.u_word[:, members])

    def log_prob(self, word: int) -> float:
        cls = self._class_map.class_of(word)
        return float(
            self.class_log_probs[cls] + self.word_log_probs(cls)[self._class_map.position(word)]
        )

    def distribution(self) -> np.ndarray:
        probs = np.empty(self._class_map.vocab_size)
        for cls in range(self._class_map.n_classes):
            members = self._class_map.members(cls)
            probs[members] = np.exp(self.class_log_probs[cls] + self.word_log_probs(cls))
        return probs


def _check_step(params: RnnParams, state: HiddenState, step: StepInput) -> None:
    if state.activation.shape != (params.hidden_size,):
        raise ValueError(
            f"Hidden state of shape {state.activation.shape}, expected ({params.hidden_size},)."
        )
    limits = (
        ("word", step.word, params.vocab_size),
        ("pos", step.pos, params.w_pos.shape[0]),
        ("cs", step.cs, params.w_cs.shape[0]),
    )
    for name, value, size in limits:
        if value is not None and not 0 <= value < size:
            raise ValueError(f"{name} id {value} out of range 0..{size - 1}.")


def forward(
    params: RnnParams, class_map: ClassMap, state: HiddenState, previous: StepInput
) -> ForwardStep:
    _check_step(params, state, previous)
    if class_map.vocab_size != params.vocab_size:
        raise ValueError("Class map and parameters disagree on the vocabulary size.")
    return ForwardStep(params, class_map, HiddenState(_hidden(params, state.activation, previous)))


def token_logprob(
    params: RnnParams,
    class_map: ClassMap,
    state: HiddenState,
    previous: StepInput,
    target: int,
) -> Tuple[float, HiddenState]:
    """Natural log P(target) after consuming ``previous``, and the advanced state."""
    if not 0 <= target < params.vocab_size:
        raise ValueError(f"target id {target} out of range 0..{params.vocab_size - 1}.")
    step = forward(params, class_map, state, previous)
    return step.log_prob(target), step.state


def _process_sentence(
    params: RnnParams,
    class_map: ClassMap,
    steps: Sequence[StepInput],
    targets: Sequence[int],
    state: np.ndarray,
    bptt_steps: int,
    sink: RnnParams,
    scale: float,
) -> Tuple[float, np.ndarray]:
    """Score a sentence and push ``scale`` times the loss gradient into ``sink``.

    With ``sink`` being ``params`` and ``scale = -lr`` this is one SGD update per
    token; with a zeroed ``sink`` and ``scale = 1`` it accumulates the truncated
    gradient of the negative log likelihood at fixed ``params``.
    """
    history: List[Tuple[StepInput, np.ndarray, np.ndarray]] = []
    total = 0.0
    for step, target in zip(steps, targets):
        previous = state
        state = _hidden(params, previous, step)
        history.append((step, previous, state))
        if len(history) > bptt_steps:
            del history[0]

        cls = class_map.class_of(target)
        members = class_map.members(cls)
        position = class_map.position(target)
        u_members = params.u_word[:, members]
        class_lp = log_softmax(state @ params.u_class)
        word_lp = log_softmax(state @ u_members)
        total += class_lp[cls] + word_lp[position]

        dz_class = np.exp(class_lp)
        dz_class[cls] -= 1.0
        dz_word = np.exp(word_lp)
        dz_word[position] -= 1.0
        ds = params.u_class @ dz_class + u_members @ dz_word
        sink.u_class += scale * np.outer(state, dz_class)
        sink.u_word[:, members] += scale * np.outer(state, dz_word)

        for (inputs, before, after) in reversed(history):
            delta = ds * after * (1.0 - after)
            ds = params.recurrent.T @ delta
            sink.recurrent += scale * np.outer(delta, before)
            if inputs.word is not None:
                sink.w_word[inputs.word] += scale * delta
            sink.w_pos[inputs.pos] += scale * delta
            sink.w_cs[inputs.cs] += scale * delta
    return float(total), state


def _score_sentence(
    params: RnnParams,
    class_map: ClassMap,
    steps: Sequence[StepInput],
    targets: Sequence[int],
    state: np.ndarray,
) -> Tuple[List[float], np.ndarray]:
    logprobs = []
    for step, target in zip(steps, targets):
        state = _hidden(params, state, step)
        logprobs.append(_target_logprob(params, class_map, state, target))
    return logprobs, state


class RnnModel(LanguageModel):
    """A trained network with everything needed to encode and score text."""

    def __init__(
        self,
        config: RnnConfig,
        vocab: Vocabulary,
        tags: TagInventory,
        class_map: ClassMap,
        params: RnnParams,
        name: Optional[str] = None,
    ):
        super().__init__(vocab, name=name)
        if class_map.vocab_size != len(vocab) or params.vocab_size != len(vocab):
            raise ValueError("Class map, parameters and vocabulary disagree on its size.")
        if params.n_classes != class_map.n_classes:
            raise ValueError(
                f"Parameters have {params.n_classes} classes, the class map "
                f"{class_map.n_classes}."
            )
        if params.w_pos.shape[0] != len(tags):
            raise ValueError(
                f"POS block has {params.w_pos.shape[0]} rows for {len(tags)} tag slots."
            )
        if params.hidden_size != config.hidden_size:
            raise ValueError("Parameters do not match the configured hidden size.")
        self.config = config
        self.tags = tags
        self.class_map = class_map
        self.params = params

    def initial_state(self) -> HiddenState:
        return HiddenState.initial(self.config.hidden_size)

    def encode(self, sentence: Sentence) -> Tuple[List[StepInput], List[int]]:
        """Step inputs and target ids; the first input is ``</s>`` with absent factors."""
        use_word = self.config.use_word_input
        use_pos = self.config.uses("pos")
        use_cs = self.config.uses("cs")
        steps = [
            StepInput(self.vocab.eos_id if use_word else None, self.tags.absent_id, CS_ABSENT_ID)
        ]
        for token in sentence:
            steps.append(
                StepInput(
                    self.vocab.lookup(token.surface) if use_word else None,
                    self.tags.lookup(token.pos) if use_pos else self.tags.absent_id,
                    cs_id(token.cs) if use_cs else CS_ABSENT_ID,
                )
            )
        return steps, self.vocab.encode(sentence)

    def sentence_logprobs(self, sentence: Sentence) -> List[float]:
        """Natural log probabilities of every token and ``</s>``, from a fresh state."""
        steps, targets = self.encode(sentence)
        logprobs, _ = _score_sentence(
            self.params, self.class_map, steps, targets, self.initial_state().activation
        )
        return logprobs

    def sentence_log10probs(self, sentence: Sentence) -> List[float]:
        return to_log10(np.array(self.sentence_logprobs(sentence))).tolist()

    def to_bytes(self) -> bytes:
        return model_to_bytes(self)

    def fingerprint(self) -> str:
        return sha256_bytes(self.to_bytes())[:16]


def rnn_ppl(
    model: RnnModel,
    test: Sequence[Sentence],
    oov_mode: Union[OovMode, str] = OovMode.EXCLUDE,
    corpus_id: Optional[str] = None,
) -> EvalReport:
    return perplexity(model, test, OovMode(oov_mode), corpus_id=corpus_id)


def initialize_model(
    config: RnnConfig,
    train_corpus: Sequence[Sentence],
    vocab: Optional[Vocabulary] = None,
    augment: Iterable[str] = (),
    name: Optional[str] = None,
) -> RnnModel:
    """Untrained model: vocabulary, tag inventory, class map and initial weights."""
    if vocab is None:
        vocab = build_vocab(train_corpus, augment)
    if config.n_classes > len(vocab):
        raise ValueError(
            f"n_classes={config.n_classes} exceeds the vocabulary size {len(vocab)}."
        )
    tags = build_tagset(train_corpus) if config.uses("pos") else TagInventory(())
    class_map = assign_classes(vocab, config.n_classes)
    params = RnnParams.initialize(config, len(vocab), len(tags))
    return RnnModel(config, vocab, tags, class_map, params, name=name)


@dataclass(frozen=True)
class EpochLog:
    epoch: int
    lr: float
    train_entropy: float
    valid_ppl: float

    def to_line(self) -> str:
        return (
            f"epoch={self.epoch} lr={format_float(self.lr)} "
            f"train_entropy={format_float(self.train_entropy)} "
            f"valid_ppl={format_float(self.valid_ppl)}"
        )


@dataclass(frozen=True, eq=False)
class TrainingResult:
    model: RnnModel
    epochs: Tuple[EpochLog, ...]

    @property
    def best_valid_ppl(self) -> float:
        return min(entry.valid_ppl for entry in self.epochs)


Encoded = Tuple[List[StepInput], List[int]]


def _valid_perplexity(model: RnnModel, data: Sequence[Encoded]) -> float:
    total = 0.0
    n_tokens = 0
    for steps, targets in data:
        logprobs, _ = _score_sentence(
            model.params, model.class_map, steps, targets, model.initial_state().activation
        )
        total += math.fsum(logprobs)
        n_tokens += len(targets)
    # inf, not OverflowError, for a diverged model
    return float(np.exp(-total / n_tokens))


def train(
    config: RnnConfig,
    train_corpus: Sequence[Sentence],
    valid_corpus: Sequence[Sentence],
    vocab: Optional[Vocabulary] = None,
    augment: Iterable[str] = (),
    name: Optional[str] = None,
) -> TrainingResult:
    """Train with SGD and truncated BPTT under the halving learning-rate schedule.

    After every epoch over the training text (fixed order), the validation perplexity
    decides:

    - worse than the best so far: the best parameters are restored,
    - improvement ratio below ``lr_halve_threshold``: the learning rate starts halving
      every epoch; a second such epoch ends training.

    Training also ends after ``max_epochs``. The best-validation parameters are
    returned.
    """
    if not train_corpus or not valid_corpus:
        raise ValueError("Training and validation corpora must be nonempty.")
    model = initialize_model(config, train_corpus, vocab, augment, name=name)
    train_data = [model.encode(sentence) for sentence in train_corpus]
    valid_data = [model.encode(sentence) for sentence in valid_corpus]
    initial = model.initial_state().activation

    lr = config.lr0
    halving = False
    best = model.params.copy()
    best_ppl = math.inf
    previous_ppl = math.inf
    epochs: List[EpochLog] = []
    for epoch in range(1, config.max_epochs + 1):
        total = 0.0
        n_tokens = 0
        state = initial
        for steps, targets in train_data:
            if not config.carry_state:
                state = initial
            logprob, state = _process_sentence(
                model.params,
                model.class_map,
                steps,
                targets,
                state,
                config.bptt_steps,
                model.params,
                -lr,
            )
            total += logprob
            n_tokens += len(targets)
        valid_ppl = _valid_perplexity(model, valid_data)
        if not math.isfinite(valid_ppl) or not model.params.is_finite():
            raise TrainingDivergedError(epoch, valid_ppl)

        entry = EpochLog(epoch, lr, -total / n_tokens / math.log(2.0), valid_ppl)
        epochs.append(entry)
        logger.info(entry.to_line())

        if valid_ppl < best_ppl:
            best_ppl = valid_ppl
            best = model.params.copy()
        else:
            model.params = best.copy()
        if previous_ppl / valid_ppl < config.lr_halve_threshold:
            if halving:
                logger.info(f"Validation improvement below threshold again, stopping at epoch {epoch}.")
                break
            halving = True
            logger.info(f"Validation improvement below threshold, halving lr after epoch {epoch}.")
        if halving:
            lr /= 2.0
        previous_ppl = valid_ppl

    model.params = best
    return TrainingResult(model, tuple(epochs))


def truncated_loss(
    params: RnnParams,
    class_map: ClassMap,
    data: Sequence[Tuple[Sequence[StepInput], Sequence[int]]],
    reference_states: Sequence[Sequence[np.ndarray]],
    bptt_steps: int,
) -> float:
    """Negative log likelihood where each target sees only ``bptt_steps`` recurrent steps.

    The hidden state entering each window is taken from ``reference_states`` and does
    not depend on ``params``, so the gradient of this loss is exactly the truncated
    BPTT gradient.
    """
    initial = np.full(params.hidden_size, INITIAL_ACTIVATION)
    total = 0.0
    for (steps, targets), states in zip(data, reference_states):
        for t, target in enumerate(targets):
            start = max(0, t - bptt_steps + 1)
            state = states[start - 1] if start > 0 else initial
            for j in range(start, t + 1):
                state = _hidden(params, state, steps[j])
            total -= _target_logprob(params, class_map, state, target)
    return total


def _relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric))
    if scale < GRAD_ZERO_NORM:
        return 0.0
    return float(np.linalg.norm(analytic - numeric) / scale)


@dataclass(frozen=True)
class GradCheckReport:
    errors: Dict[str, float]

    @property
    def max_error(self) -> float:
        return max(self.errors.values())

    def to_record(self) -> str:
        lines = [f"{name}: {format_float(self.errors[name])}" for name in BLOCK_NAMES]
        lines.append(f"max: {format_float(self.max_error)}")
        return "\n".join(lines) + "\n"


def grad_check(
    config: RnnConfig,
    corpus: Sequence[Sentence],
    vocab: Optional[Vocabulary] = None,
    h: float = FD_STEP,
) -> GradCheckReport:
    """Relative error per weight block between BPTT and central-difference gradients.

    The model is initialized from ``config`` (``init_scale=0`` gives the zero model)
    and the gradient is that of the total negative log likelihood of ``corpus``.
    """
    from ..oracle import fd_gradient

    model = initialize_model(config, corpus, vocab)
    params = model.params
    data = [model.encode(sentence) for sentence in corpus]
    initial = model.initial_state().activation

    analytic = params.zeros_like()
    reference_states = []
    for steps, targets in data:
        _process_sentence(
            params, model.class_map, steps, targets, initial, config.bptt_steps, analytic, 1.0
        )
        states = []
        state = initial
        for step in steps:
            state = _hidden(params, state, step)
            states.append(state)
        reference_states.append(states)

    def loss(vector: np.ndarray) -> float:
        return truncated_loss(
            params.with_flat(vector), model.class_map, data, reference_states, config.bptt_steps
        )

    numeric = params.with_flat(fd_gradient(loss, params.flatten(), h))
    return GradCheckReport(
        {
            name: _relative_error(block, getattr(numeric, name))
            for name, block in analytic.blocks().items()
        }
    )


def model_to_bytes(model: RnnModel) -> bytes:
    """Serialize: magic, u16 version, u32 header length, JSON header, f8 blocks, checksum."""
    vocab = model.vocab
    header = {
        "config": model.config.to_dict(),
        "vocab": {
            "words": list(vocab),
            "counts": [vocab.count(word) for word in vocab],
            "augmented": [word for word in vocab if vocab.is_augmented(word)],
        },
        "pos_tags": list(model.tags.tags),
        "word_class": list(model.class_map.word_class),
        "shapes": {name: list(block.shape) for name, block in model.params.blocks().items()},
    }
    header_bytes = json.dumps(
        header, sort_keys=True, ensure_ascii=False, separators=(",", ":")
    ).encode("utf-8")
    body = b"".join(
        [MODEL_MAGIC, struct.pack("<HI", MODEL_VERSION, len(header_bytes)), header_bytes]
        + [block.astype("<f8").tobytes(order="C") for block in model.params.blocks().values()]
    )
    return body + sha256_bytes(body).encode("ascii")


def model_from_bytes(data: bytes, name: Optional[str] = None) -> RnnModel:
    prefix = len(MODEL_MAGIC) + struct.calcsize("<HI")
    if len(data) < prefix + _CHECKSUM_LENGTH or data[: len(MODEL_MAGIC)] != MODEL_MAGIC:
        raise ModelFileError("not a cslm model file")
    body, checksum = data[:-_CHECKSUM_LENGTH], data[-_CHECKSUM_LENGTH:]
    if sha256_bytes(body).encode("ascii") != checksum:
        raise ModelFileError("checksum mismatch")
    version, header_length = struct.unpack_from("<HI", body, len(MODEL_MAGIC))
    if version != MODEL_VERSION:
        raise ModelFileError(f"unsupported model file version {version}")
    try:
        header = json.loads(body[prefix : prefix + header_length].decode("utf-8"))
        offset = prefix + header_length
        blocks = {}
        for block_name in BLOCK_NAMES:
            shape = tuple(header["shapes"][block_name])
            count = int(np.prod(shape))
            blocks[block_name] = (
                np.frombuffer(body, dtype="<f8", count=count, offset=offset)
                .reshape(shape)
                .astype(np.float64)
            )
            offset += 8 * count
        if offset != len(body):
            raise ModelFileError(f"{len(body) - offset} trailing bytes after the weights")
        vocab = Vocabulary(
            header["vocab"]["words"], header["vocab"]["counts"], header["vocab"]["augmented"]
        )
        return RnnModel(
            RnnConfig.from_dict(header["config"]),
            vocab,
            TagInventory(tuple(header["pos_tags"])),
            ClassMap(tuple(header["word_class"])),
            RnnParams(**blocks),
            name=name,
        )
    except ModelFileError:
        raise
    except (KeyError, TypeError, ValueError) as err:
        raise ModelFileError(f"malformed model file: {err}") from err


def save_model(model: RnnModel, path: Union[str, Path]) -> None:
    Path(path).write_bytes(model_to_bytes(model))


def load_model(path: Union[str, Path], name: Optional[str] = None) -> RnnModel:
    return model_from_bytes(Path(path).read_bytes(), name=name)
