import numpy as np
import pytest

from cslm.corpus import (
    EOS,
    NO,
    UNK,
    YES,
    CorpusFormatError,
    FactoredToken,
    Sentence,
    TagInventory,
    Vocabulary,
    augmentation_words,
    build_tagset,
    build_vocab,
    corpus_stats,
    cs_id,
    emit_factored_line,
    emit_text,
    normalize_text,
    parse_factored_line,
    read_corpus,
    render_stats,
    script_class,
    select_factors,
    split_kfold,
    write_corpus,
)


def _sentences(*lines):
    return [Sentence.from_words(line.split()) for line in lines]


def test_normalize_text_splits_and_lowercases_latin():
    sentences = normalize_text("Hello, World! नमस्ते।  Foo\n\nbar-baz")

    assert [s.words for s in sentences] == [
        ("hello", "world"),
        ("नमस्ते",),
        ("foo",),
        ("bar", "baz"),
    ]


def test_normalize_text_is_idempotent():
    raw = "Main ghar ja raha hoon. मैं घर जा रहा हूँ॥ OK?? 42 apples"
    once = normalize_text(raw)

    assert normalize_text(emit_text(once)) == once


def test_normalize_text_is_idempotent_on_random_text():
    rng = np.random.default_rng(21)
    alphabet = list("abcXYZé घरमैं ाि्.,!?।॥-'\n\t42") + ["  "]
    for _ in range(200):
        raw = "".join(rng.choice(alphabet, size=rng.integers(0, 60)))
        once = normalize_text(raw)

        assert normalize_text(emit_text(once)) == once


def test_normalize_text_drops_empty_sentences():
    assert normalize_text("... !! \n ,,, ") == []


@pytest.mark.parametrize(
    "line, expected",
    [
        ("a", [FactoredToken("a")]),
        ("a|P:NN", [FactoredToken("a", "NN")]),
        ("a|C:Yes", [FactoredToken("a", cs=YES)]),
        ("a|P:NN|C:No b", [FactoredToken("a", "NN", NO), FactoredToken("b")]),
        ("घर|P:NN|C:No", [FactoredToken("घर", "NN", NO)]),
    ],
)
def test_parse_factored_line(line, expected):
    assert list(parse_factored_line(line)) == expected


@pytest.mark.parametrize(
    "line, column",
    [
        ("a|P:NN|C:Maybe", 10),
        ("x a|P:NN|C:Maybe", 12),
        ("a|X:foo", 3),
        ("a|C:Yes|P:NN", 9),
        ("a|P:", 3),
        ("|P:NN", 1),
    ],
)
def test_parse_factored_line_reports_column(line, column):
    with pytest.raises(CorpusFormatError) as info:
        parse_factored_line(line, line_number=4)

    assert info.value.line == 4
    assert info.value.column == column
    assert str(info.value).startswith(f"line 4, column {column}: ")


def test_factored_line_round_trip():
    line = "main|P:PRP|C:No ghar|P:NN|C:Yes ja|P:VM|C:No"

    assert emit_factored_line(parse_factored_line(line)) == line


def test_factored_line_round_trip_on_random_sentences():
    rng = np.random.default_rng(8)
    surfaces = ["main", "ghar", "school", "घर", "जा", "a:b", "P:x", "C:Yes"]
    tags = [None, "NN", "VM", "PRP", "N:P"]
    labels = [None, YES, NO]
    for _ in range(200):
        sentence = Sentence(
            tuple(
                FactoredToken(
                    surfaces[rng.integers(len(surfaces))],
                    tags[rng.integers(len(tags))],
                    labels[rng.integers(len(labels))],
                )
                for _ in range(rng.integers(1, 8))
            )
        )

        assert parse_factored_line(emit_factored_line(sentence)) == sentence


def test_sentence_rejects_explicit_end_marker():
    with pytest.raises(ValueError):
        Sentence.from_words(["a", EOS])
    with pytest.raises(ValueError):
        Sentence(())


def test_read_and_write_corpus(tmp_path):
    path = tmp_path / "corpus.txt"
    sentences = [
        parse_factored_line("a|P:DT|C:No b|P:NN|C:Yes"),
        parse_factored_line("c"),
    ]
    write_corpus(path, sentences)
    path.write_text(path.read_text(encoding="utf-8") + "\n\n", encoding="utf-8")

    assert read_corpus(path) == sentences


def test_read_corpus_reports_file_line(tmp_path):
    path = tmp_path / "corpus.txt"
    path.write_text("a b\n\nc|C:Maybe\n", encoding="utf-8")

    with pytest.raises(CorpusFormatError) as info:
        read_corpus(path)
    assert info.value.line == 3


def test_select_factors():
    sentence = parse_factored_line("a|P:DT|C:No b|P:NN|C:Yes")

    assert emit_factored_line(select_factors(sentence, ("cs",))) == "a|C:No b|C:Yes"
    assert emit_factored_line(select_factors(sentence, ("pos",))) == "a|P:DT b|P:NN"
    assert emit_factored_line(select_factors(sentence, ())) == "a b"
    with pytest.raises(ValueError):
        select_factors(sentence, ("lemma",))


def test_build_vocab_orders_by_count_then_word():
    vocab = build_vocab(_sentences("a b a", "b c"))

    assert list(vocab) == [EOS, "a", "b", "c", UNK]
    assert vocab.count(EOS) == 2
    assert vocab.count(UNK) == 0
    assert vocab.counts().tolist() == [2, 2, 2, 1, 0]


def test_vocab_encode_maps_oov_and_appends_end():
    vocab = build_vocab(_sentences("a b a", "b c"))
    encoded = vocab.encode(Sentence.from_words(["a", "zzz", "c"]))

    assert encoded == [vocab.id("a"), vocab.unk_id, vocab.id("c"), vocab.eos_id]


def test_build_vocab_with_augmentation():
    vocab = build_vocab(_sentences("a b"), augment=["school", "a", UNK])

    assert "school" in vocab
    assert vocab.count("school") == 0
    assert vocab.is_augmented("school")
    assert not vocab.is_augmented("b")
    assert not vocab.is_augmented(UNK)
    with pytest.raises(ValueError):
        build_vocab(_sentences("a"), augment=["two words"])


def test_vocabulary_file_round_trip(tmp_path):
    vocab = build_vocab(_sentences("a b a", "c"), augment=["x"])
    path = tmp_path / "vocab.txt"
    vocab.write(path)

    assert Vocabulary.read(path) == vocab
    assert path.read_text(encoding="utf-8").splitlines()[0] == f"{EOS}\t2\tspecial"


def test_vocabulary_requires_specials():
    with pytest.raises(ValueError):
        Vocabulary(["a", EOS], [1, 1])


def test_augmentation_words():
    native = _sentences("main ghar ja", "vah ghar")
    mixed = _sentences("main home ja", "vah school")

    assert augmentation_words(native, mixed) == ["home", "school"]


def test_tag_inventory_fallbacks():
    tags = build_tagset([parse_factored_line("a|P:VB b|P:NN c")])

    assert tags.tags == ("NN", "VB")
    assert len(tags) == 3
    assert tags.lookup("NN") == 0
    assert tags.lookup(None) == tags.absent_id == 2
    assert tags.lookup("JJ") == tags.absent_id

    with_unk = TagInventory(("NN", "UNK"))
    assert with_unk.lookup("JJ") == 1


@pytest.mark.parametrize("label, row", [(YES, 0), (NO, 1), (None, 2)])
def test_cs_id(label, row):
    assert cs_id(label) == row


@pytest.mark.parametrize("n, k", [(7, 3), (300, 3), (10, 10), (5, 2)])
def test_split_kfold_is_balanced_partition(n, k):
    plan = split_kfold(_sentences(*["w"] * n), k, seed=3)
    tested = sorted(i for fold in range(k) for i in plan.test_indices(fold))

    assert tested == list(range(n))
    assert max(plan.sizes()) - min(plan.sizes()) <= 1
    for fold in range(k):
        assert set(plan.train_indices(fold)).isdisjoint(plan.test_indices(fold))


def test_split_kfold_partitions_random_corpora():
    rng = np.random.default_rng(4)
    for _ in range(50):
        n = int(rng.integers(2, 120))
        k = int(rng.integers(2, min(n, 12) + 1))
        plan = split_kfold(_sentences(*["w"] * n), k, seed=int(rng.integers(1000)))
        folds = [set(plan.test_indices(fold)) for fold in range(k)]

        assert set().union(*folds) == set(range(n))
        assert sum(len(fold) for fold in folds) == n
        assert max(plan.sizes()) - min(plan.sizes()) <= 1
        for fold in range(k):
            assert sorted(set(plan.train_indices(fold)) | folds[fold]) == list(range(n))


def test_split_kfold_is_deterministic():
    corpus = _sentences(*["w"] * 20)

    assert split_kfold(corpus, 3, seed=5) == split_kfold(corpus, 3, seed=5)
    with pytest.raises(ValueError):
        split_kfold(corpus, 1, seed=5)
    with pytest.raises(ValueError):
        split_kfold(corpus[:2], 3, seed=5)


@pytest.mark.parametrize(
    "word, expected",
    [("school", "latin"), ("घर", "non_latin"), ("42", "non_latin"), ("café", "latin")],
)
def test_script_class(word, expected):
    assert script_class(word) == expected


def test_render_stats():
    train = _sentences("hello नमस्ते 42 hello")
    test = _sentences("a", "b a")
    stats = corpus_stats(train)

    assert stats.words == {"non_latin": 2, "latin": 2}
    assert stats.unique_words == {"non_latin": 2, "latin": 1}
    assert render_stats(train, test) == (
        "train.sentences: 1\n"
        "train.words.non_latin: 2\n"
        "train.words.latin: 2\n"
        "train.unique_words.non_latin: 2\n"
        "train.unique_words.latin: 1\n"
        "test.sentences: 2\n"
        "test.words.non_latin: 0\n"
        "test.words.latin: 3\n"
        "test.unique_words.non_latin: 0\n"
        "test.unique_words.latin: 2\n"
    )
