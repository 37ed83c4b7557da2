import hashlib
from pathlib import Path
from typing import Iterable, Mapping, Sequence, Union

import numpy as np
from scipy.stats import gmean

from .corpus import Sentence, emit_factored_line

FINGERPRINT_LENGTH = 16


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def sha256_file(path: Union[str, Path]) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def fingerprint(items: Union[str, Mapping[str, object]]) -> str:
    """
    Short, stable digest of a string or of a flat mapping.

    Mappings are canonicalized as sorted ``key=value`` lines so that insertion order
    does not matter.
    """
    if not isinstance(items, str):
        items = "".join(f"{key}={items[key]}\n" for key in sorted(items))
    return sha256_bytes(items.encode("utf-8"))[:FINGERPRINT_LENGTH]


def corpus_fingerprint(sentences: Iterable[Sentence]) -> str:
    return fingerprint("".join(emit_factored_line(s) + "\n" for s in sentences))


def format_float(value: float) -> str:
    """Shortest round-tripping representation, so reports are reproducible."""
    return repr(float(value))


def parse_grid(text: str, kind: type = int) -> list:
    values = [kind(part) for part in text.split(",") if part.strip()]
    if not values:
        raise ValueError(f"Empty grid {text!r}.")
    return values


def arithmetic_mean(values: Sequence[float]) -> float:
    if len(values) == 0:
        raise ValueError("Cannot average an empty sequence.")
    return float(np.mean(np.asarray(values, dtype=np.float64)))


def geometric_mean(values: Sequence[float]) -> float:
    if len(values) == 0:
        raise ValueError("Cannot average an empty sequence.")
    return float(gmean(np.asarray(values, dtype=np.float64)))
