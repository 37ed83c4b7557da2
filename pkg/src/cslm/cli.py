"""Command-line interface: ``cslm <subcommand> [flags]``.

Every config key is also a flag (``hidden_size`` -> ``--hidden-size``); flags override
``--config`` files, which override the environment (``CSLM_SEED``) and the defaults.
Failures exit non-zero after printing a single line
``error kind=<usage|data|numeric> message=<text>`` on stderr.
"""

import argparse
import logging
import sys
import warnings
from pathlib import Path
from typing import Callable, Dict, List, Mapping, Optional, Sequence

from . import __version__
from .config import FIELD_NAMES, ConfigError, RunConfig, parse_value
from .corpus import (
    Sentence,
    augmentation_words,
    build_vocab,
    normalize_text,
    read_corpus,
    render_stats,
    write_corpus,
)
from .eval import (
    SWEEP_AXES,
    FoldFailedError,
    NgramRecipe,
    RnnRecipe,
    benchmark_matrix,
    crossval,
    split_validation,
    sweep,
)
from .factors import tag_parallel, validate_pos
from .formatter import Formatter, formatter_for
from .models.base import LanguageModel, OovMode, perplexity
from .models.ngram import NgramModel, train_ngram
from .models.rnnlm import MODEL_MAGIC, load_model, save_model, train
from .oracle import MarkovSource, SwitchSource, gen_corpus
from .utils import format_float, parse_grid, sha256_file

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


class UsageError(Exception):
    pass


class ArgumentParser(argparse.ArgumentParser):
    def error(self, message: str):
        raise UsageError(message)


def _config_flag_type(name: str) -> Callable[[str], object]:
    def parse(text: str) -> object:
        return parse_value(name, text)

    parse.__name__ = name
    return parse


def _config_parent() -> ArgumentParser:
    parent = ArgumentParser(add_help=False)
    parent.add_argument("--config", help="flat key = value config file")
    group = parent.add_argument_group("config keys")
    for name in FIELD_NAMES:
        group.add_argument(
            f"--{name.replace('_', '-')}", dest=name, type=_config_flag_type(name)
        )
    return parent


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(prog="cslm", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"cslm {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    parser.add_argument("-q", "--quiet", action="store_true")
    commands = parser.add_subparsers(dest="command", metavar="command")
    commands.required = True
    parent = _config_parent()

    def add(name: str, help: str) -> ArgumentParser:
        return commands.add_parser(name, help=help, parents=[parent])

    prepare = add("prepare", "normalize raw text into one sentence per line")
    prepare.add_argument("--input", required=True)

    tag_cs = add("tag-cs", "derive CS labels from a parallel native / code-switched corpus")
    tag_cs.add_argument("--native", required=True)
    tag_cs.add_argument("--mixed", required=True)
    tag_cs.add_argument("--tagset", help="file with one allowed POS tag per line")

    add("vocab", "build the vocabulary of a training corpus")
    add("stats", "sentence and word statistics of a train / test corpus pair")
    add("train-ngram", "estimate a backoff n-gram model and write it as ARPA")
    add("train-rnn", "train the factored recurrent model")
    add("ppl", "perplexity of a model on a test corpus")

    cv = add("crossval", "k-fold cross-validation")
    cv.add_argument("--model-type", choices=("ngram", "rnn"), default="rnn")
    cv.add_argument(
        "--augment-folds",
        action="store_true",
        help="add the test-side words of the training folds to each fold's vocabulary",
    )

    sw = add("sweep", "train one model per grid value of a hyperparameter")
    sw.add_argument("--axis", choices=SWEEP_AXES, required=True)
    sw.add_argument("--grid", required=True, help="comma-separated values")

    bench = add("bench", "perplexity of every model on every test set")
    bench.add_argument("--with-model", action="append", default=[], metavar="NAME=PATH")
    bench.add_argument("--testset", action="append", default=[], metavar="NAME=PATH")

    synth = add("synth", "generate a synthetic corpus")
    synth.add_argument("kind", choices=("markov", "switch"))
    synth.add_argument("--tokens", type=int, default=100_000)
    synth.add_argument("--states", type=int, default=8)
    synth.add_argument("--branching", type=int, default=4)
    synth.add_argument(
        "--tail-depth", type=int, default=0, help="levels of rare states below the core"
    )
    synth.add_argument("--sentence-length", type=int)
    synth.add_argument("--switch-rate", type=float, default=0.3)
    synth.add_argument("--foreign", type=int, default=200)
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    config = RunConfig()
    if args.config:
        config = RunConfig.read(args.config, base=config)
    overrides = {name: getattr(args, name) for name in FIELD_NAMES}
    return config.with_overrides({k: v for k, v in overrides.items() if v is not None})


def _require(config: RunConfig, command: str, *names: str) -> None:
    missing = [name for name in names if getattr(config, name) is None]
    if missing:
        flags = ", ".join(f"--{name}" for name in missing)
        raise ConfigError(f"{command} needs {flags}")


def write_manifest(
    artifact: Path,
    command: str,
    config: RunConfig,
    inputs: Mapping[str, Optional[str]],
    extra: Optional[Mapping[str, str]] = None,
) -> Path:
    """Write ``<artifact>.manifest``, or ``manifest.txt`` inside an output directory."""
    entries = {
        "command": command,
        "version": __version__,
        "config_fingerprint": config.fingerprint(),
        "seed": str(config.seed),
    }
    for name, path in inputs.items():
        if path is not None:
            entries[f"input.{name}"] = sha256_file(path)
    entries.update(extra or {})
    if artifact.is_dir():
        target = artifact / "manifest.txt"
    else:
        target = artifact.with_name(artifact.name + ".manifest")
    target.write_text(
        "".join(f"{key} = {entries[key]}\n" for key in sorted(entries)), encoding="utf-8"
    )
    return target


def load_any_model(path: str) -> LanguageModel:
    with open(path, "rb") as f:
        magic = f.read(len(MODEL_MAGIC))
    name = Path(path).name
    if magic == MODEL_MAGIC:
        return load_model(path, name=name)
    return NgramModel.read_arpa(path, name=name)


def _augment_words(config: RunConfig, train_corpus: Sequence[Sentence]) -> List[str]:
    if config.augment is None:
        return []
    return augmentation_words(train_corpus, read_corpus(config.augment))


def _emit(text: str, output: Optional[str]) -> None:
    if output is None:
        sys.stdout.write(formatter_for(sys.stdout).fmt_str(text))
    else:
        Path(output).write_text(Formatter().fmt_str(text), encoding="utf-8")


def cmd_prepare(args, config: RunConfig) -> int:
    _require(config, "prepare", "output")
    raw = Path(args.input).read_text(encoding="utf-8")
    write_corpus(config.output, normalize_text(raw))
    write_manifest(Path(config.output), "prepare", config, {"input": args.input})
    return EXIT_OK


def cmd_tag_cs(args, config: RunConfig) -> int:
    _require(config, "tag-cs", "output")
    native, mixed = tag_parallel(read_corpus(args.native), read_corpus(args.mixed))
    if args.tagset:
        tags = Path(args.tagset).read_text(encoding="utf-8").split()
        for side, sentences in (("native", native), ("mixed", mixed)):
            for number, sentence in enumerate(sentences, start=1):
                for warning in validate_pos(sentence, tags):
                    warnings.warn(f"{side} sentence {number}: {warning}", stacklevel=1)
    out = Path(config.output)
    out.mkdir(parents=True, exist_ok=True)
    write_corpus(out / "native.txt", native)
    write_corpus(out / "mixed.txt", mixed)
    write_manifest(
        out,
        "tag-cs",
        config,
        {"native": args.native, "mixed": args.mixed, "tagset": args.tagset},
    )
    return EXIT_OK


def cmd_vocab(args, config: RunConfig) -> int:
    _require(config, "vocab", "train", "output")
    train_corpus = read_corpus(config.train)
    vocab = build_vocab(train_corpus, _augment_words(config, train_corpus))
    vocab.write(config.output)
    write_manifest(
        Path(config.output),
        "vocab",
        config,
        {"train": config.train, "augment": config.augment},
    )
    return EXIT_OK


def cmd_stats(args, config: RunConfig) -> int:
    _require(config, "stats", "train")
    test = read_corpus(config.test) if config.test else None
    _emit(render_stats(read_corpus(config.train), test), config.output)
    if config.output:
        write_manifest(
            Path(config.output), "stats", config, {"train": config.train, "test": config.test}
        )
    return EXIT_OK


def cmd_train_ngram(args, config: RunConfig) -> int:
    _require(config, "train-ngram", "train", "model")
    train_corpus = read_corpus(config.train)
    vocab = build_vocab(train_corpus, _augment_words(config, train_corpus))
    model = train_ngram(
        train_corpus, config.order, config.smoothing, vocab=vocab, floor=config.floor
    )
    model.write_arpa(config.model)
    write_manifest(
        Path(config.model),
        "train-ngram",
        config,
        {"train": config.train, "augment": config.augment},
    )
    logger.info(f"Wrote {config.model} with n-gram counts {model.ngram_counts()}.")
    return EXIT_OK


def cmd_train_rnn(args, config: RunConfig) -> int:
    _require(config, "train-rnn", "train", "model")
    train_corpus = read_corpus(config.train)
    if config.valid:
        valid_corpus = read_corpus(config.valid)
    else:
        train_corpus, valid_corpus = split_validation(train_corpus)
    vocab = build_vocab(train_corpus, _augment_words(config, train_corpus))
    config.check_vocab(vocab)
    result = train(config.rnn_config(), train_corpus, valid_corpus, vocab=vocab)
    save_model(result.model, config.model)
    write_manifest(
        Path(config.model),
        "train-rnn",
        config,
        {"train": config.train, "valid": config.valid, "augment": config.augment},
        {"best_valid_ppl": format_float(result.best_valid_ppl)},
    )
    return EXIT_OK


def cmd_ppl(args, config: RunConfig) -> int:
    _require(config, "ppl", "model", "test")
    model = load_any_model(config.model)
    report = perplexity(model, read_corpus(config.test), OovMode(config.oov_mode))
    print(report.summary_line)
    if config.output:
        Path(config.output).write_text(report.to_record(), encoding="utf-8")
        write_manifest(
            Path(config.output), "ppl", config, {"model": config.model, "test": config.test}
        )
    return EXIT_OK


def cmd_crossval(args, config: RunConfig) -> int:
    _require(config, "crossval", "train")
    recipe = (
        NgramRecipe(config.order, config.smoothing, config.floor)
        if args.model_type == "ngram"
        else RnnRecipe(config.rnn_config())
    )
    result = crossval(
        read_corpus(config.train),
        recipe,
        k=config.k,
        seed=config.seed,
        test_side=read_corpus(config.test) if config.test else None,
        oov_mode=config.oov_mode,
        augment=args.augment_folds,
        jobs=config.jobs,
    )
    print(
        f"mean_ppl={format_float(result.mean_ppl)} "
        f"geometric_mean_ppl={format_float(result.geometric_mean_ppl)}"
    )
    if config.output:
        Path(config.output).write_text(result.to_record(), encoding="utf-8")
        write_manifest(
            Path(config.output),
            "crossval",
            config,
            {"train": config.train, "test": config.test},
            {"model_type": args.model_type, "recipe": recipe.fingerprint()},
        )
    return EXIT_OK


def cmd_sweep(args, config: RunConfig) -> int:
    _require(config, "sweep", "train")
    grid = parse_grid(args.grid)
    train_corpus = read_corpus(config.train)
    if config.valid:
        valid_corpus = read_corpus(config.valid)
    else:
        train_corpus, valid_corpus = split_validation(train_corpus)
    result = sweep(
        args.axis,
        grid,
        config.rnn_config(),
        train_corpus,
        valid_corpus,
        test=read_corpus(config.test) if config.test else None,
        oov_mode=config.oov_mode,
        augment=_augment_words(config, train_corpus),
        jobs=config.jobs,
    )
    sys.stdout.write(result.render(formatter_for(sys.stdout)))
    print(f"argmin {args.axis}={result.argmin()}")
    if config.output:
        Path(config.output).write_text(result.to_tsv(), encoding="utf-8")
        write_manifest(
            Path(config.output),
            "sweep",
            config,
            {"train": config.train, "valid": config.valid, "test": config.test},
            {"axis": args.axis, "grid": ",".join(str(v) for v in grid)},
        )
    return EXIT_OK


def _named_paths(values: Sequence[str], flag: str) -> Dict[str, str]:
    named: Dict[str, str] = {}
    for value in values:
        name, sep, path = value.partition("=")
        if not sep or not name or not path:
            raise ConfigError(f"{flag} expects NAME=PATH, got {value!r}")
        if name in named:
            raise ConfigError(f"{flag} name {name!r} given twice")
        named[name] = path
    return named


def cmd_bench(args, config: RunConfig) -> int:
    models = _named_paths(args.with_model, "--with-model")
    testsets = _named_paths(args.testset, "--testset")
    if not models or not testsets:
        raise ConfigError("bench needs at least one --with-model and one --testset")
    table = benchmark_matrix(
        {name: load_any_model(path) for name, path in models.items()},
        {name: read_corpus(path) for name, path in testsets.items()},
        config.oov_mode,
    )
    sys.stdout.write(table.render(formatter_for(sys.stdout)))
    if config.output:
        Path(config.output).write_text(table.to_records(), encoding="utf-8")
        inputs = {f"model.{k}": v for k, v in models.items()}
        inputs.update({f"testset.{k}": v for k, v in testsets.items()})
        write_manifest(Path(config.output), "bench", config, inputs)
    return EXIT_OK


def _synth_source(args, config: RunConfig):
    try:
        if args.kind == "switch":
            return SwitchSource.default(
                n_foreign=args.foreign,
                switch_rate=args.switch_rate,
                seed=config.seed,
                sentence_length=args.sentence_length or 20,
            )
        if args.tail_depth:
            return MarkovSource.long_tail(
                args.states,
                args.branching,
                args.tail_depth,
                sentence_length=args.sentence_length or 1000,
            )
        return MarkovSource.sparse(
            args.states,
            args.branching,
            seed=config.seed,
            sentence_length=args.sentence_length or 1000,
        )
    except ValueError as err:
        raise ConfigError(str(err)) from None


def cmd_synth(args, config: RunConfig) -> int:
    _require(config, "synth", "output")
    source = _synth_source(args, config)
    artifact = Path(config.output)
    if args.kind == "markov":
        write_corpus(artifact, gen_corpus(source, args.tokens, config.seed))
        print(
            f"entropy_bits={format_float(source.entropy)} "
            f"ppl={format_float(source.perplexity)}"
        )
        extra = {"entropy_bits": format_float(source.entropy)}
    else:
        corpus = gen_corpus(source, args.tokens, config.seed)
        artifact.mkdir(parents=True, exist_ok=True)
        write_corpus(artifact / "native.txt", corpus.native)
        write_corpus(artifact / "mixed.txt", corpus.mixed)
        extra = {
            "switch_rate": format_float(args.switch_rate),
            "switch_probability": format_float(source.switch_probability()),
        }
    settings = (
        "tokens",
        "states",
        "branching",
        "tail_depth",
        "sentence_length",
        "switch_rate",
        "foreign",
    )
    extra.update({f"synth.{name}": str(getattr(args, name)) for name in settings})
    write_manifest(artifact, f"synth {args.kind}", config, {}, extra)
    return EXIT_OK


COMMANDS: Dict[str, Callable[[argparse.Namespace, RunConfig], int]] = {
    "prepare": cmd_prepare,
    "tag-cs": cmd_tag_cs,
    "vocab": cmd_vocab,
    "stats": cmd_stats,
    "train-ngram": cmd_train_ngram,
    "train-rnn": cmd_train_rnn,
    "ppl": cmd_ppl,
    "crossval": cmd_crossval,
    "sweep": cmd_sweep,
    "bench": cmd_bench,
    "synth": cmd_synth,
}


def _fail(kind: str, code: int, err: BaseException) -> int:
    message = " ".join(str(err).split())
    print(f"error kind={kind} message={message}", file=sys.stderr)
    return code


def configure_logging(verbose: bool, quiet: bool) -> None:
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr)
    logging.getLogger("cslm").setLevel(level)
    logging.captureWarnings(True)


def dispatch(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as err:
        return _fail("usage", EXIT_USAGE, err)
    except SystemExit as exit_:
        return int(exit_.code or 0)
    configure_logging(args.verbose, args.quiet)
    try:
        config = resolve_config(args)
        return COMMANDS[args.command](args, config)
    except ConfigError as err:
        return _fail("usage", EXIT_USAGE, err)
    except FoldFailedError as err:
        if err.numeric:
            return _fail("numeric", EXIT_NUMERIC, err)
        return _fail("data", EXIT_DATA, err)
    except ArithmeticError as err:
        return _fail("numeric", EXIT_NUMERIC, err)
    except (ValueError, OSError) as err:
        return _fail("data", EXIT_DATA, err)


def main() -> None:
    sys.exit(dispatch())

