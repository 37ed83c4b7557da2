from typing import List, NamedTuple

import pytest

from cslm.corpus import Sentence
from cslm.oracle import MarkovSource, SwitchCorpus, SwitchSource, gen_corpus

MARKOV_STATES = 8
MARKOV_BRANCHING = 4
TAIL_DEPTH = 16


class Splits(NamedTuple):
    train: List[Sentence]
    valid: List[Sentence]
    test: List[Sentence]


class SwitchSplits(NamedTuple):
    train: SwitchCorpus
    valid: SwitchCorpus
    test: SwitchCorpus


@pytest.fixture(scope="session")
def markov_source():
    # Two bits per token: every state has four equally likely successors.
    return MarkovSource.sparse(MARKOV_STATES, MARKOV_BRANCHING, seed=17)


@pytest.fixture(scope="session")
def markov_splits(markov_source):
    return Splits(
        gen_corpus(markov_source, 100_000, seed=1),
        gen_corpus(markov_source, 10_000, seed=2),
        gen_corpus(markov_source, 10_000, seed=3),
    )


@pytest.fixture(scope="session")
def switch_source():
    return SwitchSource.default(n_foreign=200, switch_rate=0.3, seed=0)


@pytest.fixture(scope="session")
def switch_splits(switch_source):
    return SwitchSplits(
        gen_corpus(switch_source, 50_000, seed=11),
        gen_corpus(switch_source, 5_000, seed=12),
        gen_corpus(switch_source, 10_000, seed=13),
    )


@pytest.fixture(scope="session")
def tail_source():
    # Rare tail states give the bigram table singletons through fours for modified
    # Kneser-Ney discounts.
    return MarkovSource.long_tail(MARKOV_STATES, MARKOV_BRANCHING, depth=TAIL_DEPTH)


@pytest.fixture(scope="session")
def tail_splits(tail_source):
    return Splits(
        gen_corpus(tail_source, 100_000, seed=1),
        gen_corpus(tail_source, 10_000, seed=2),
        gen_corpus(tail_source, 10_000, seed=3),
    )
