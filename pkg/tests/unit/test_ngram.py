import math
from collections import Counter

import numpy as np
import pytest

from cslm.corpus import EOS, UNK, CorpusFormatError, Sentence, Vocabulary, build_vocab
from cslm.models.base import OovMode
from cslm.models.ngram import (
    ARPA_LOG_ZERO,
    NgramModel,
    Smoothing,
    count_ngrams,
    estimate,
    kn_discounts,
    ppl,
    train_ngram,
)

WORDS = ["a", "b", "c", "d", "e", "f"]


@pytest.fixture(scope="module")
def corpus():
    rng = np.random.default_rng(11)
    sentences = []
    for _ in range(20):
        sentences.append(Sentence.from_words(rng.choice(WORDS, size=9).tolist()))
    return sentences


def _sentences(*lines):
    return [Sentence.from_words(line.split()) for line in lines]


def _brute_force_counts(corpus, vocab, order):
    grams = Counter()
    followed = Counter()
    for sentence in corpus:
        ids = vocab.encode(sentence)
        for start in range(len(ids)):
            for end in range(start + 1, min(start + order, len(ids)) + 1):
                grams[tuple(ids[start:end])] += 1
                if end < len(ids):
                    followed[tuple(ids[start:end])] += 1
    return grams, followed


def test_counts_match_brute_force(corpus):
    assert sum(len(s) + 1 for s in corpus) == 200
    vocab = build_vocab(corpus)
    counts = count_ngrams(corpus, 3, vocab)
    grams, _ = _brute_force_counts(corpus, vocab, 3)

    for n in range(1, 4):
        assert dict(counts.grams(n)) == {g: c for g, c in grams.items() if len(g) == n}
    assert counts.is_consistent()


def test_mle_matches_relative_frequencies(corpus):
    vocab = build_vocab(corpus)
    model = train_ngram(corpus, order=3, smoothing="mle", vocab=vocab)
    grams, followed = _brute_force_counts(corpus, vocab, 3)
    n_tokens = sum(c for g, c in grams.items() if len(g) == 1)

    for gram, count in grams.items():
        total = n_tokens if len(gram) == 1 else followed[gram[:-1]]
        assert model.probs[gram] == math.log10(count / total)
    assert model.logprob([], vocab.unk_id) == float("-inf")


def _assert_normalized(model):
    contexts = [()] + model.contexts()
    if model.order > 1:
        # never observed: <unk> is absent from training
        unseen = [model.vocab.id("a")] * (model.order - 2) + [model.vocab.unk_id]
        contexts.append(tuple(unseen))

    for context in contexts:
        assert model.context_mass(context) == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("order", [1, 2, 3])
def test_witten_bell_distributions_normalize(corpus, order):
    _assert_normalized(train_ngram(corpus, order=order, smoothing="wb"))


@pytest.mark.parametrize("order", [2, 3])
def test_kneser_ney_distributions_normalize(kn_corpus, order):
    model = train_ngram(kn_corpus, order=order, smoothing="kn")

    assert model.smoothing == "kn"
    _assert_normalized(model)


def test_distributions_normalize_on_random_corpora():
    rng = np.random.default_rng(5)

    for _ in range(10):
        n_words = int(rng.integers(3, 8))
        sentences = [
            Sentence.from_words(rng.choice(WORDS[:n_words], size=rng.integers(1, 8)).tolist())
            for _ in range(int(rng.integers(5, 30)))
        ]
        sentences.append(Sentence.from_words(["a"]))
        order = int(rng.integers(1, 4))
        _assert_normalized(train_ngram(sentences, order=order, smoothing="wb"))
        _assert_normalized(train_ngram(sentences, order=order, smoothing="mle", floor=0.05))


def test_kneser_ney_discounts_of_toy_corpus(kn_corpus):
    counts = count_ngrams(kn_corpus, 2)

    assert kn_discounts(counts.tables[1]) == pytest.approx((3 / 7, 1 / 14, 17 / 7))


def test_kneser_ney_by_hand(kn_corpus):
    model = train_ngram(kn_corpus, order=2, smoothing="kn")
    vocab = model.vocab
    # continuation counts a:3 b:2 c:2 d:2 e:1 </s>:5 with D = (1/7, 13/7, 3) over
    # |V| = 7 give the lower order
    lower = {"a": 82 / 735, "c": 89 / 735, "e": 124 / 735, EOS: 180 / 735, UNK: 82 / 735}
    # bigram D = (3/7, 1/14, 17/7); after "b": c 4, d 2, </s> 1; after "a": b 5, </s> 3
    expected = {
        ("b", "c"): 11 / 49 + 41 / 98 * lower["c"],
        ("b", "a"): 41 / 98 * lower["a"],
        ("a", EOS): 1 / 14 + 17 / 28 * lower[EOS],
        ("a", "e"): 17 / 28 * lower["e"],
        ("a", UNK): 17 / 28 * lower[UNK],
    }

    assert model.smoothing == "kn"
    assert len(vocab) == 7
    for (history, word), probability in expected.items():
        logprob = model.logprob([vocab.id(history)], vocab.id(word))
        assert 10.0**logprob == pytest.approx(probability, rel=1e-9)
    assert 10.0 ** model.logprob([], vocab.id("e")) == pytest.approx(lower["e"], rel=1e-9)


def test_ppl_ignores_sentence_order(corpus):
    model = train_ngram(corpus[:15], order=3, smoothing="wb")
    test = corpus[15:] + _sentences("a b zzz", "f f f f")
    rng = np.random.default_rng(3)
    reference = ppl(model, test)

    for _ in range(5):
        shuffled = [test[i] for i in rng.permutation(len(test))]
        report = ppl(model, shuffled)
        assert report.ppl == pytest.approx(reference.ppl, rel=1e-12)
        assert (report.n_scored, report.n_oov) == (reference.n_scored, reference.n_oov)

def test_mle_floor_normalizes(corpus):
    model = train_ngram(corpus, order=2, smoothing="mle", floor=0.1)

    for context in [()] + model.contexts():
        assert model.context_mass(context) == pytest.approx(1.0, abs=1e-6)
    assert model.logprob([], model.vocab.unk_id) > float("-inf")


@pytest.mark.parametrize("smoothing", ["mle", "wb", "kn"])
def test_arpa_round_trip(corpus, kn_corpus, smoothing, tmp_path):
    data = kn_corpus if smoothing == "kn" else corpus
    model = train_ngram(data, order=3, smoothing=smoothing)
    assert model.smoothing == smoothing
    path = tmp_path / "model.arpa"
    model.write_arpa(path)
    loaded = NgramModel.read_arpa(path)

    assert list(loaded.vocab) == list(model.vocab)
    assert loaded.order == 3
    test = data[:5] + _sentences("a a a f", "f e d c b a")
    for sentence in test:
        assert loaded.sentence_log10probs(sentence) == pytest.approx(
            model.sentence_log10probs(sentence), abs=1e-6
        )


def test_arpa_writes_log_zero():
    model = train_ngram(_sentences("a b"), order=2, smoothing="mle")
    text = model.to_arpa()

    assert f"{ARPA_LOG_ZERO:.7f}\t{UNK}" in text
    assert text.startswith("\n\\data\\\nngram 1=4\nngram 2=")
    assert text.rstrip().endswith("\\end\\")


@pytest.mark.parametrize(
    "text",
    [
        "\\data\\\nngram 1=1\n\n\\1-grams:\n-0.5\ta\n",
        "\\data\\\nngram 1=2\n\n\\1-grams:\n-0.5\ta\n\\end\\\n",
        "\\data\\\nngram 1=1\n\n\\1-grams:\nfoo\ta\n\\end\\\n",
        "\\data\\\nngram 1=1\nngram 2=1\n\n\\1-grams:\n0\ta\n\\2-grams:\n0\ta b\n\\end\\\n",
    ],
)
def test_read_arpa_rejects_malformed(text):
    with pytest.raises(CorpusFormatError):
        NgramModel.from_arpa(text)


def test_read_arpa_warns_on_unnormalized_unigrams():
    text = "\\data\\\nngram 1=2\n\n\\1-grams:\n-0.1\t</s>\n-0.1\ta\n\\end\\\n"

    with pytest.warns(UserWarning, match="sum to"):
        model = NgramModel.from_arpa(text)
    assert UNK in model.vocab


def test_uniform_model():
    words = [EOS, UNK] + [f"w{i}" for i in range(8)]
    model = NgramModel.uniform(Vocabulary(words, [0] * len(words)))

    for word in range(10):
        assert model.logprob([], word) == pytest.approx(-1.0, abs=1e-12)


def test_uniform_perplexity_equals_vocabulary_size():
    words = [EOS, UNK] + [f"w{i}" for i in range(48)]
    model = NgramModel.uniform(Vocabulary(words, [0] * len(words)))
    test = [Sentence.from_words(words[2 + i : 12 + i]) for i in range(30)]

    assert ppl(model, test).ppl == pytest.approx(50.0, abs=1e-9)


def test_two_token_closed_form():
    vocab = Vocabulary([EOS, UNK, "a"], [0, 0, 0])
    eos, unk, a = vocab.id(EOS), vocab.id(UNK), vocab.id("a")
    probs = {
        (eos,): math.log10(0.25),
        (unk,): math.log10(0.25),
        (a,): math.log10(0.5),
        (a, eos): math.log10(0.25),
        (a, a): math.log10(0.75),
    }
    model = NgramModel(2, vocab, probs, {(a,): 0.0})
    report = ppl(model, _sentences("a"))

    assert report.n_scored == 2
    assert report.ppl == pytest.approx(2 * math.sqrt(2), abs=1e-9)


def test_backoff_recursion():
    vocab = Vocabulary([EOS, UNK, "a", "b"], [0, 0, 0, 0])
    eos, a, b = vocab.id(EOS), vocab.id("a"), vocab.id("b")
    probs = {(w,): math.log10(0.25) for w in range(4)}
    probs[(a, b)] = math.log10(0.5)
    model = NgramModel(2, vocab, probs, {(a,): math.log10(0.5)})

    assert model.logprob([a], b) == pytest.approx(math.log10(0.5))
    assert model.logprob([a], eos) == pytest.approx(math.log10(0.5 * 0.25))
    assert model.logprob([b], eos) == pytest.approx(math.log10(0.25))
    assert model.logprob([b, a], b) == pytest.approx(math.log10(0.5))


def test_kn_discounts():
    table = {(): {0: 1, 1: 1, 2: 2, 3: 3, 4: 4}}

    assert kn_discounts(table) == pytest.approx((0.5, 0.5, 1.0))
    assert kn_discounts({(): {0: 1, 1: 1, 2: 3}}) is None


def test_kn_falls_back_to_witten_bell():
    with pytest.warns(UserWarning, match="falls back to Witten-Bell"):
        model = train_ngram(_sentences("a b c"), order=1, smoothing="kn")

    assert model.smoothing == Smoothing.WITTEN_BELL.value


def test_floor_requires_mle():
    counts = count_ngrams(_sentences("a b"), 2)

    with pytest.raises(ValueError):
        estimate(counts, "kn", floor=0.1)
    with pytest.raises(ValueError):
        estimate(counts, "mle", floor=1.0)
    with pytest.raises(ValueError):
        estimate(counts, "bogus")


@pytest.mark.parametrize(
    "oov_mode, n_scored", [(OovMode.EXCLUDE, 3), (OovMode.MAP_UNK, 4)]
)
def test_ppl_oov_accounting(oov_mode, n_scored):
    model = train_ngram(_sentences("a b", "b a c"), order=2, smoothing="wb")
    report = ppl(model, _sentences("a zzz b"), oov_mode=oov_mode, corpus_id="test")

    assert report.n_scored == n_scored
    assert report.n_oov == 1
    assert report.corpus_id == "test"
    assert report.ppl == pytest.approx(10.0 ** (-report.total_log10prob / n_scored))


def test_ppl_without_scored_tokens():
    model = train_ngram(_sentences("a b"), order=2, smoothing="wb")

    with pytest.raises(ValueError, match="no scored tokens"):
        ppl(model, [])


def test_fingerprint_tracks_parameters(kn_corpus):
    first = train_ngram(kn_corpus, order=2)
    second = train_ngram(kn_corpus, order=2)
    other = train_ngram(kn_corpus, order=2, smoothing="wb")

    assert first.fingerprint() == second.fingerprint()
    assert first.fingerprint() != other.fingerprint()
    assert first.smoothing == "kn"
    assert train_ngram(kn_corpus, order=2, name="kn2").model_id == "kn2"
