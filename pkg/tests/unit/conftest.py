import pytest

from cslm.corpus import Sentence

# Count-of-counts of every table of the order 2 and order 3 models support modified
# Kneser-Ney discounts.
KN_LINES = (
    "a b c",
    "a b c",
    "a b c",
    "a b d",
    "b c a",
    "c a b",
    "d a",
    "e",
    "b d",
    "c a",
)


@pytest.fixture(scope="session")
def kn_corpus():
    return [Sentence.from_words(line.split()) for line in KN_LINES]
