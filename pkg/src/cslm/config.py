"""Run configuration: flat ``key = value`` files, environment defaults and overrides."""

import dataclasses
import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple, Union

from .corpus import FACTOR_NAMES, Vocabulary
from .models.base import OovMode
from .models.ngram import DEFAULT_ORDER, Smoothing
from .models.rnnlm import RnnConfig
from .utils import fingerprint

SEED_ENV = "CSLM_SEED"
DEFAULT_SEED = 1

PATH_FIELDS = ("train", "valid", "test", "augment", "model", "output")

# A comment starts at a "#" opening the line or following whitespace.
_COMMENT = re.compile(r"(?:^|\s)#.*$")


class ConfigError(ValueError):
    pass


def default_seed() -> int:
    value = os.environ.get(SEED_ENV)
    if value is None or value == "":
        return DEFAULT_SEED
    try:
        return int(value)
    except ValueError:
        raise ConfigError(f"{SEED_ENV}={value!r} is not an integer") from None


@dataclass(frozen=True)
class RunConfig:
    hidden_size: int = 300
    n_classes: int = 50
    bptt_steps: int = 5
    factors: Tuple[str, ...] = FACTOR_NAMES
    lr0: float = 0.1
    seed: int = field(default_factory=default_seed)
    max_epochs: int = 20
    lr_halve_threshold: float = 1.003
    use_word_input: bool = True
    carry_state: bool = False
    init_scale: float = 0.1
    order: int = DEFAULT_ORDER
    smoothing: str = Smoothing.KNESER_NEY.value
    floor: float = 0.0
    oov_mode: str = OovMode.EXCLUDE.value
    k: int = 3
    jobs: int = 1
    train: Optional[str] = None
    valid: Optional[str] = None
    test: Optional[str] = None
    augment: Optional[str] = None
    model: Optional[str] = None
    output: Optional[str] = None

    def __post_init__(self):
        if isinstance(self.factors, str):
            object.__setattr__(self, "factors", parse_value("factors", self.factors))
        try:
            rnn = self.rnn_config()
            object.__setattr__(self, "factors", rnn.factors)
            Smoothing(self.smoothing)
            OovMode(self.oov_mode)
        except ValueError as err:
            raise ConfigError(str(err)) from None
        if self.order < 1:
            raise ConfigError(f"order must be at least 1, got {self.order}")
        if not 0.0 <= self.floor < 1.0:
            raise ConfigError(f"floor must lie in [0, 1), got {self.floor}")
        if self.floor and self.smoothing != Smoothing.MLE.value:
            raise ConfigError("floor only applies to smoothing = mle")
        if self.k < 2:
            raise ConfigError(f"k must be at least 2, got {self.k}")
        if self.jobs < 1:
            raise ConfigError(f"jobs must be at least 1, got {self.jobs}")

    def rnn_config(self) -> RnnConfig:
        return RnnConfig(
            **{f.name: getattr(self, f.name) for f in dataclasses.fields(RnnConfig)}
        )

    def check_vocab(self, vocab: Vocabulary) -> None:
        if self.n_classes > len(vocab):
            raise ConfigError(
                f"n_classes = {self.n_classes} exceeds the vocabulary size {len(vocab)}"
            )

    def with_overrides(self, overrides: Mapping[str, Any]) -> "RunConfig":
        unknown = sorted(set(overrides) - set(FIELD_NAMES))
        if unknown:
            raise ConfigError(f"unknown config keys {unknown}")
        return dataclasses.replace(self, **dict(overrides))

    def items(self) -> Dict[str, str]:
        return {name: _format_value(getattr(self, name)) for name in FIELD_NAMES}

    def to_text(self) -> str:
        values = self.items()
        return "".join(f"{key} = {values[key]}\n" for key in sorted(values))

    @classmethod
    def from_text(cls, text: str, base: Optional["RunConfig"] = None) -> "RunConfig":
        overrides: Dict[str, Any] = {}
        for line_number, raw in enumerate(text.splitlines(), start=1):
            line = _COMMENT.sub("", raw).strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {line_number}: expected key = value")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in FIELD_NAMES:
                raise ConfigError(f"line {line_number}: unknown config key {key!r}")
            if key in overrides:
                raise ConfigError(f"line {line_number}: {key!r} is set twice")
            overrides[key] = parse_value(key, value)
        return (base or cls()).with_overrides(overrides)

    @classmethod
    def read(cls, path: Union[str, Path], base: Optional["RunConfig"] = None) -> "RunConfig":
        return cls.from_text(Path(path).read_text(encoding="utf-8"), base=base)

    def write(self, path: Union[str, Path]) -> None:
        Path(path).write_text(self.to_text(), encoding="utf-8")

    def fingerprint(self) -> str:
        """Digest of every setting except the paths."""
        return fingerprint({k: v for k, v in self.items().items() if k not in PATH_FIELDS})


FIELD_NAMES = tuple(f.name for f in dataclasses.fields(RunConfig))
_DEFAULTS = RunConfig(seed=DEFAULT_SEED)


def _format_value(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(value)
    return str(value)


def parse_value(key: str, text: str) -> Any:
    if key in PATH_FIELDS:
        return text or None
    if key == "factors":
        return tuple(part.strip() for part in text.split(",") if part.strip())
    kind = type(getattr(_DEFAULTS, key))
    if kind is bool:
        if text.lower() not in ("true", "false"):
            raise ConfigError(f"{key} must be true or false, got {text!r}")
        return text.lower() == "true"
    try:
        return kind(text)
    except ValueError:
        raise ConfigError(f"{key} must be of type {kind.__name__}, got {text!r}") from None
