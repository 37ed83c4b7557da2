from collections import Counter

import numpy as np
import pytest

from cslm.corpus import NO, UNK_TAG, YES, Sentence, parse_factored_line
from cslm.factors import (
    AlignmentLink,
    CsLabeling,
    LinkKind,
    Side,
    align_pair,
    apply_labels,
    derive_cs_labels,
    project_labels,
    project_pos,
    tag_pair,
    tag_parallel,
    validate_pos,
)

NATIVE_WORDS = ["main", "ghar", "ja", "raha", "hoon", "vah", "kal", "aaya", "tha"]
FOREIGN_WORDS = ["home", "school", "going", "yesterday", "office"]


def _sentence(line):
    return Sentence.from_words(line.split())


def _labels(sentence):
    return [token.cs for token in sentence]


@pytest.mark.parametrize(
    "native, mixed, kinds",
    [
        ("a b c", "a b c", ["match", "match", "match"]),
        ("a b c", "a x c", ["match", "substitution", "match"]),
        ("a b", "a x y b", ["match", "insertion", "insertion", "match"]),
        ("a b c", "a c", ["match", "deletion", "match"]),
        ("a b c", "x y", ["substitution", "substitution", "deletion"]),
    ],
)
def test_align_pair(native, mixed, kinds):
    links = align_pair(_sentence(native), _sentence(mixed))

    assert [link.kind.value for link in links] == kinds


@pytest.mark.parametrize(
    "native, mixed, native_labels, mixed_labels",
    [
        ("a b c", "a x c", [NO, YES, NO], [NO, YES, NO]),
        ("a b", "a x y b", [NO, NO], [NO, YES, YES, NO]),
        ("a b c", "a c", [NO, YES, NO], [NO, NO]),
    ],
)
def test_tag_pair(native, mixed, native_labels, mixed_labels):
    native_tagged, mixed_tagged = tag_pair(_sentence(native), _sentence(mixed))

    assert _labels(native_tagged) == native_labels
    assert _labels(mixed_tagged) == mixed_labels


def _substitution_suite():
    pairs = []
    for i in range(50):
        length = 3 + i % 5
        native = [NATIVE_WORDS[(i + j) % len(NATIVE_WORDS)] for j in range(length)]
        positions = {i % length} | ({(i * 3 + 1) % length} if i % 2 else set())
        mixed = [
            FOREIGN_WORDS[(i + j) % len(FOREIGN_WORDS)] if j in positions else word
            for j, word in enumerate(native)
        ]
        pairs.append((native, mixed, positions))
    return pairs


def test_identical_pairs_are_never_switched():
    for native, _, _ in _substitution_suite():
        sentence = _sentence(" ".join(native))
        native_tagged, mixed_tagged = tag_pair(sentence, sentence)

        assert set(_labels(native_tagged)) == {NO}
        assert set(_labels(mixed_tagged)) == {NO}


def test_substitutions_are_switched_exactly_at_their_positions():
    suite = _substitution_suite()
    assert len(suite) == 50

    for native, mixed, positions in suite:
        native_tagged, mixed_tagged = tag_pair(
            _sentence(" ".join(native)), _sentence(" ".join(mixed))
        )
        expected = [YES if j in positions else NO for j in range(len(native))]

        assert _labels(native_tagged) == expected
        assert _labels(mixed_tagged) == expected


def test_projection_keeps_switch_counts_on_random_pairs():
    rng = np.random.default_rng(13)
    words = NATIVE_WORDS[:4] + FOREIGN_WORDS[:3]
    for _ in range(300):
        native = _sentence(" ".join(rng.choice(words, size=rng.integers(1, 9))))
        mixed = _sentence(" ".join(rng.choice(words, size=rng.integers(1, 9))))
        links = align_pair(native, mixed)
        kinds = Counter(link.kind for link in links)
        native_tagged, mixed_tagged = tag_pair(native, mixed)
        native_yes = _labels(native_tagged).count(YES)
        mixed_yes = _labels(mixed_tagged).count(YES)

        assert native_yes == len(native) - kinds[LinkKind.MATCH]
        assert mixed_yes >= native_yes - kinds[LinkKind.DELETION]
        assert mixed_yes == native_yes - kinds[LinkKind.DELETION] + kinds[LinkKind.INSERTION]


def test_alignment_link_validates_indices():
    with pytest.raises(ValueError):
        AlignmentLink(LinkKind.MATCH, native_index=0)
    with pytest.raises(ValueError):
        AlignmentLink(LinkKind.INSERTION, native_index=0, mixed_index=1)


def test_derive_cs_labels_is_ordered_by_position():
    links = [
        AlignmentLink(LinkKind.MATCH, 1, 1),
        AlignmentLink(LinkKind.SUBSTITUTION, 0, 0),
    ]

    assert derive_cs_labels(links, Side.NATIVE).labels == (YES, NO)
    assert derive_cs_labels(links, "mixed").labels == (YES, NO)


def test_project_labels_rejects_length_mismatch():
    native, mixed = _sentence("a b"), _sentence("a b")
    links = align_pair(native, mixed)

    with pytest.raises(ValueError):
        project_labels(native, CsLabeling((NO,)), mixed, links)


def test_apply_labels_keeps_pos():
    sentence = parse_factored_line("a|P:DT b|P:NN")
    labeled = apply_labels(sentence, CsLabeling((NO, YES)))

    assert [(t.pos, t.cs) for t in labeled] == [("DT", NO), ("NN", YES)]
    with pytest.raises(ValueError):
        apply_labels(sentence, CsLabeling((NO,)))
    with pytest.raises(ValueError):
        CsLabeling(("Maybe",))


def test_project_pos():
    native = parse_factored_line("a|P:DT b|P:NN c|P:VB")
    mixed = _sentence("a school x c")
    projected = project_pos(native, mixed, align_pair(native, mixed))

    assert [token.pos for token in projected] == ["DT", "NN", UNK_TAG, "VB"]


def test_project_pos_without_native_tags_is_identity():
    native, mixed = _sentence("a b"), _sentence("a x")

    assert project_pos(native, mixed, align_pair(native, mixed)) == mixed


def test_tag_parallel():
    native = [parse_factored_line("a|P:DT b|P:NN"), _sentence("c d")]
    mixed = [_sentence("a school"), _sentence("c d")]
    native_out, mixed_out = tag_parallel(native, mixed)

    assert [t.cs for t in native_out[0]] == [NO, YES]
    assert [(t.pos, t.cs) for t in mixed_out[0]] == [("DT", NO), ("NN", YES)]
    assert [t.cs for t in mixed_out[1]] == [NO, NO]
    with pytest.raises(ValueError, match="differ in length"):
        tag_parallel(native, mixed[:1])


def test_validate_pos():
    sentence = parse_factored_line("a|P:DT b|P:XX c|P:UNK d")
    warnings = validate_pos(sentence, ["DT", "NN"])

    assert [(w.position, w.surface, w.tag) for w in warnings] == [(1, "b", "XX")]
    assert "outside the tagset" in str(warnings[0])
