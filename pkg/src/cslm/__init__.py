"""cslm builds and evaluates factored language models for code-switched text."""

from .corpus import FactoredToken, Sentence, Vocabulary
from .models.base import EvalReport, LanguageModel, OovMode, perplexity
from .models.ngram import NgramModel
from .models.rnnlm import RnnConfig, RnnModel

__all__ = [
    "EvalReport",
    "FactoredToken",
    "LanguageModel",
    "NgramModel",
    "OovMode",
    "RnnConfig",
    "RnnModel",
    "Sentence",
    "Vocabulary",
    "perplexity",
]

__version__ = "0.1.0"
