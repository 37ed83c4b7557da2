"""Experiment protocol: cross-validation, hyperparameter sweeps and benchmark tables."""

import logging
import math
from collections.abc import MutableSequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import (
    Callable,
    Dict,
    Iterable,
    List,
    Mapping,
    Optional,
    Sequence,
    Tuple,
    Union,
)

from .corpus import FoldPlan, Sentence, augmentation_words, build_vocab, split_kfold
from .formatter import Formatter
from .models.base import EvalReport, LanguageModel, OovMode, perplexity
from .models.ngram import DEFAULT_ORDER, Smoothing, train_ngram
from .models.rnnlm import RnnConfig
from .models.rnnlm import train as train_rnn
from .utils import arithmetic_mean, fingerprint, format_float, geometric_mean

logger = logging.getLogger(__name__)

SWEEP_AXES = ("hidden_size", "n_classes", "bptt_steps")

# Every VALID_EVERY-th training sentence is held out for validation.
VALID_EVERY = 10

ModelRecipe = Callable[
    [Sequence[Sentence], Sequence[Sentence], Iterable[str]], LanguageModel
]


class FoldFailedError(RuntimeError):
    def __init__(self, fold: int, reason: str, numeric: bool = False):
        self.fold = fold
        self.reason = reason
        self.numeric = numeric
        super().__init__(f"fold {fold} failed: {reason}")

    def __reduce__(self):
        return self.__class__, (self.fold, self.reason, self.numeric)


@dataclass(frozen=True)
class NgramRecipe:
    """Backoff n-gram model; validation sentences are simply added to the training text."""

    order: int = DEFAULT_ORDER
    smoothing: str = Smoothing.KNESER_NEY.value
    floor: float = 0.0

    def __call__(
        self,
        train: Sequence[Sentence],
        valid: Sequence[Sentence],
        augment: Iterable[str] = (),
    ) -> LanguageModel:
        text = list(train) + list(valid)
        vocab = build_vocab(text, augment)
        return train_ngram(text, self.order, self.smoothing, vocab=vocab, floor=self.floor)

    def fingerprint(self) -> str:
        return fingerprint(
            {"kind": "ngram", "order": self.order, "smoothing": self.smoothing, "floor": self.floor}
        )


@dataclass(frozen=True)
class RnnRecipe:
    config: RnnConfig = field(default_factory=RnnConfig)

    def __call__(
        self,
        train: Sequence[Sentence],
        valid: Sequence[Sentence],
        augment: Iterable[str] = (),
    ) -> LanguageModel:
        return train_rnn(self.config, train, valid, augment=augment).model

    def fingerprint(self) -> str:
        return config_fingerprint(self.config)


def config_fingerprint(config: RnnConfig, exclude: Iterable[str] = ()) -> str:
    values = config.to_dict()
    values["factors"] = ",".join(config.factors)
    excluded = set(exclude)
    return fingerprint(
        {"kind": "rnn", **{key: v for key, v in values.items() if key not in excluded}}
    )


def split_validation(
    sentences: Sequence[Sentence],
) -> Tuple[List[Sentence], List[Sentence]]:
    """Hold out every ``VALID_EVERY``-th sentence; tiny inputs validate on themselves."""
    train = [s for i, s in enumerate(sentences) if i % VALID_EVERY != VALID_EVERY - 1]
    valid = [s for i, s in enumerate(sentences) if i % VALID_EVERY == VALID_EVERY - 1]
    if not valid:
        return list(sentences), list(sentences)
    return train, valid


@dataclass(frozen=True)
class FoldResult:
    fold: int
    test_indices: Tuple[int, ...]
    report: EvalReport


@dataclass(frozen=True)
class CrossvalResult:
    plan: FoldPlan
    folds: Tuple[FoldResult, ...]

    @property
    def reports(self) -> List[EvalReport]:
        return [fold.report for fold in self.folds]

    @property
    def mean_ppl(self) -> float:
        return arithmetic_mean([report.ppl for report in self.reports])

    @property
    def geometric_mean_ppl(self) -> float:
        return geometric_mean([report.ppl for report in self.reports])

    def evaluated_indices(self) -> List[int]:
        return sorted(i for fold in self.folds for i in fold.test_indices)

    def to_record(self) -> str:
        blocks = [f"fold: {fold.fold}\n{fold.report.to_record()}" for fold in self.folds]
        blocks.append(
            f"k: {self.plan.k}\n"
            f"mean_ppl: {format_float(self.mean_ppl)}\n"
            f"geometric_mean_ppl: {format_float(self.geometric_mean_ppl)}\n"
        )
        return "\n".join(blocks)

    def to_tsv(self) -> str:
        lines = ["fold\tppl\tn_scored\tn_oov"]
        for fold in self.folds:
            report = fold.report
            lines.append(
                f"{fold.fold}\t{format_float(report.ppl)}\t{report.n_scored}\t{report.n_oov}"
            )
        lines.append(f"mean\t{format_float(self.mean_ppl)}\t\t")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class _FoldJob:
    fold: int
    recipe: ModelRecipe
    train: Tuple[Sentence, ...]
    test: Tuple[Sentence, ...]
    augment: Tuple[str, ...]
    test_indices: Tuple[int, ...]
    oov_mode: OovMode


def _run_fold(job: _FoldJob) -> FoldResult:
    try:
        train, valid = split_validation(job.train)
        model = job.recipe(train, valid, job.augment)
        report = perplexity(model, job.test, job.oov_mode)
    except Exception as err:
        raise FoldFailedError(
            job.fold, f"{type(err).__name__}: {err}", isinstance(err, ArithmeticError)
        ) from err
    logger.info(f"fold={job.fold} {report.summary_line}")
    return FoldResult(job.fold, job.test_indices, report)


def _map(function, jobs: Sequence, n_workers: int) -> List:
    if n_workers <= 1 or len(jobs) <= 1:
        return [function(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=min(n_workers, len(jobs))) as pool:
        return list(pool.map(function, jobs))


def crossval(
    train_side: Sequence[Sentence],
    recipe: ModelRecipe,
    k: int = 3,
    seed: int = 1,
    test_side: Optional[Sequence[Sentence]] = None,
    oov_mode: Union[OovMode, str] = OovMode.EXCLUDE,
    augment: bool = False,
    jobs: int = 1,
) -> CrossvalResult:
    """k-fold cross-validation: train on k - 1 folds, evaluate on the held-out fold.

    ``test_side`` is a corpus parallel to ``train_side`` (for instance the
    code-switched side of a native corpus); when given, each held-out fold is
    evaluated on its test-side sentences. With ``augment`` the vocabulary of every
    fold also receives the test-side words of the training folds that the
    train-side text lacks.

    Validation sentences for early stopping are carved out of the training folds.
    """
    oov_mode = OovMode(oov_mode)
    if test_side is not None and len(test_side) != len(train_side):
        raise ValueError(
            f"Parallel corpora differ in length: {len(train_side)} vs {len(test_side)}."
        )
    if augment and test_side is None:
        raise ValueError("Vocabulary augmentation needs a parallel test-side corpus.")
    plan = split_kfold(train_side, k, seed)
    evaluation = train_side if test_side is None else test_side
    fold_jobs = []
    for fold in range(k):
        train_indices = plan.train_indices(fold)
        test_indices = tuple(plan.test_indices(fold))
        train = tuple(train_side[i] for i in train_indices)
        extra: Tuple[str, ...] = ()
        if augment and test_side is not None:
            extra = tuple(augmentation_words(train, [test_side[i] for i in train_indices]))
        fold_jobs.append(
            _FoldJob(
                fold,
                recipe,
                train,
                tuple(evaluation[i] for i in test_indices),
                extra,
                test_indices,
                oov_mode,
            )
        )
    return CrossvalResult(plan, tuple(_map(_run_fold, fold_jobs, jobs)))


@dataclass(frozen=True)
class SweepPoint:
    value: int
    config_fingerprint: str
    report: Optional[EvalReport] = None
    error: Optional[str] = None

    @property
    def ppl(self) -> float:
        return self.report.ppl if self.report is not None else math.nan


@dataclass(frozen=True)
class SweepResult:
    axis: str
    points: Tuple[SweepPoint, ...]
    fixed_fingerprint: str

    @property
    def grid(self) -> List[int]:
        return [point.value for point in self.points]

    @property
    def failures(self) -> List[SweepPoint]:
        return [point for point in self.points if point.report is None]

    def argmin(self) -> int:
        scored = [point for point in self.points if point.report is not None]
        if not scored:
            raise ValueError("Every grid point failed.")
        return min(scored, key=lambda point: point.ppl).value

    def to_tsv(self) -> str:
        """``axis<TAB>ppl`` pairs, one per grid point; failed points read ``nan``."""
        return "".join(f"{point.value}\t{format_float(point.ppl)}\n" for point in self.points)

    def render(self, formatter: Optional[Formatter] = None) -> str:
        formatter = formatter or Formatter()
        try:
            best: Optional[int] = self.argmin()
        except ValueError:
            best = None
        lines = [f"{self.axis}\tppl"]
        for point in self.points:
            if point.report is None:
                cell = f"[warn]failed: {point.error}[/warn]"
            elif point.value == best:
                cell = f"[best]{format_float(point.ppl)}[/best]"
            else:
                cell = format_float(point.ppl)
            lines.append(f"{point.value}\t{cell}")
        return formatter.fmt_str("\n".join(lines) + "\n")


@dataclass(frozen=True)
class _SweepJob:
    value: int
    config: RnnConfig
    train: Tuple[Sentence, ...]
    valid: Tuple[Sentence, ...]
    evaluation: Tuple[Sentence, ...]
    oov_mode: OovMode
    augment: Tuple[str, ...]


def _run_point(job: _SweepJob) -> Tuple[Optional[EvalReport], Optional[str]]:
    try:
        model = train_rnn(job.config, job.train, job.valid, augment=job.augment).model
        return perplexity(model, job.evaluation, job.oov_mode), None
    except Exception as err:
        return None, f"{type(err).__name__}: {err}"


def sweep(
    axis: str,
    grid: Sequence[int],
    base: RnnConfig,
    train: Sequence[Sentence],
    valid: Sequence[Sentence],
    test: Optional[Sequence[Sentence]] = None,
    oov_mode: Union[OovMode, str] = OovMode.EXCLUDE,
    augment: Iterable[str] = (),
    jobs: int = 1,
) -> SweepResult:
    """Train one model per grid value of ``axis``, everything else fixed.

    Points are scored on ``test`` if given, else on ``valid``. A failing point is
    recorded and logged; the sweep goes on.
    """
    if axis not in SWEEP_AXES:
        raise ValueError(f"Cannot sweep {axis!r}; choose one of {SWEEP_AXES}.")
    if not grid:
        raise ValueError("The sweep grid is empty.")
    evaluation = tuple(valid if test is None else test)
    point_jobs = [
        _SweepJob(
            value,
            replace(base, **{axis: value}),
            tuple(train),
            tuple(valid),
            evaluation,
            OovMode(oov_mode),
            tuple(augment),
        )
        for value in grid
    ]
    points = []
    for job, (report, error) in zip(point_jobs, _map(_run_point, point_jobs, jobs)):
        if report is None:
            logger.warning(f"{axis}={job.value} failed: {error}")
        else:
            logger.info(f"{axis}={job.value} {report.summary_line}")
        points.append(SweepPoint(job.value, config_fingerprint(job.config), report, error))
    return SweepResult(axis, tuple(points), config_fingerprint(base, exclude=(axis,)))


@dataclass(frozen=True)
class BenchmarkTable:
    """Perplexity per (model, test set) cell."""

    models: Tuple[str, ...]
    testsets: Tuple[str, ...]
    cells: Dict[Tuple[str, str], EvalReport]

    def cell(self, model: str, testset: str) -> EvalReport:
        return self.cells[(model, testset)]

    def column(self, testset: str) -> Dict[str, float]:
        return {model: self.cell(model, testset).ppl for model in self.models}

    def to_records(self) -> str:
        return "\n".join(
            f"model: {model}\ntestset: {testset}\n{self.cell(model, testset).to_record()}"
            for model in self.models
            for testset in self.testsets
        )

    def to_tsv(self) -> str:
        lines = ["model\t" + "\t".join(self.testsets)]
        for model in self.models:
            ppls = (format_float(self.cell(model, t).ppl) for t in self.testsets)
            lines.append(f"{model}\t" + "\t".join(ppls))
        return "\n".join(lines) + "\n"

    def render(self, formatter: Optional[Formatter] = None) -> str:
        """Models as rows, test sets as columns; the lowest perplexity per column is marked."""
        formatter = formatter or Formatter()
        best = {t: min(self.column(t).items(), key=lambda item: item[1])[0] for t in self.testsets}
        width = max(len(name) for name in self.models + ("model",))
        lines = ["model".ljust(width) + "".join(f"  {t:>14}" for t in self.testsets)]
        for model in self.models:
            row = model.ljust(width)
            for testset in self.testsets:
                value = f"{self.cell(model, testset).ppl:14.2f}"
                row += f"  [best]{value}[/best]" if best[testset] == model else f"  {value}"
            lines.append(row)
        return formatter.fmt_str("\n".join(lines) + "\n")


class Benchmark(MutableSequence):
    """Named models evaluated against named test sets."""

    def __init__(
        self,
        testsets: Mapping[str, Sequence[Sentence]],
        oov_mode: Union[OovMode, str] = OovMode.EXCLUDE,
    ):
        if not testsets:
            raise ValueError("A benchmark needs at least one test set.")
        self.testsets = dict(testsets)
        self.oov_mode = OovMode(oov_mode)
        self._models: List[Tuple[str, LanguageModel]] = []

    def insert(self, index: int, value: Tuple[str, LanguageModel]) -> None:
        self._models.insert(index, value)

    def __getitem__(self, i):
        return self._models[i]

    def __setitem__(self, i, o) -> None:
        self._models[i] = o

    def __delitem__(self, i) -> None:
        del self._models[i]

    def __len__(self) -> int:
        return len(self._models)

    def add_model(self, name: str, model: LanguageModel) -> None:
        if name in (existing for existing, _ in self._models):
            raise ValueError(f"A model named {name!r} is already part of the benchmark.")
        self.append((name, model))

    def run(self) -> BenchmarkTable:
        cells = {
            (name, testset): perplexity(model, sentences, self.oov_mode)
            for name, model in self._models
            for testset, sentences in self.testsets.items()
        }
        for (name, testset), report in cells.items():
            logger.info(f"model={name} testset={testset} {report.summary_line}")
        return BenchmarkTable(
            tuple(name for name, _ in self._models), tuple(self.testsets), cells
        )


def benchmark_matrix(
    models: Union[Mapping[str, LanguageModel], Sequence[Tuple[str, LanguageModel]]],
    testsets: Mapping[str, Sequence[Sentence]],
    oov_mode: Union[OovMode, str] = OovMode.EXCLUDE,
) -> BenchmarkTable:
    benchmark = Benchmark(testsets, oov_mode)
    items = models.items() if isinstance(models, Mapping) else models
    for name, model in items:
        benchmark.add_model(name, model)
    return benchmark.run()


__all__ = [
    "Benchmark",
    "BenchmarkTable",
    "CrossvalResult",
    "FoldFailedError",
    "NgramRecipe",
    "RnnRecipe",
    "SweepResult",
    "benchmark_matrix",
    "crossval",
    "split_validation",
    "sweep",
]
