"""Code-switch factor derivation from parallel native / code-switched sentences."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

from .corpus import NO, UNK_TAG, YES, FactoredToken, Sentence


class LinkKind(str, enum.Enum):
    MATCH = "match"
    SUBSTITUTION = "substitution"
    INSERTION = "insertion"
    DELETION = "deletion"


class Side(str, enum.Enum):
    NATIVE = "native"
    MIXED = "mixed"


@dataclass(frozen=True)
class AlignmentLink:
    kind: LinkKind
    native_index: Optional[int] = None
    mixed_index: Optional[int] = None

    def __post_init__(self):
        has_native = self.native_index is not None
        has_mixed = self.mixed_index is not None
        expected = {
            LinkKind.MATCH: (True, True),
            LinkKind.SUBSTITUTION: (True, True),
            LinkKind.INSERTION: (False, True),
            LinkKind.DELETION: (True, False),
        }[self.kind]
        if (has_native, has_mixed) != expected:
            raise ValueError(
                f"A {self.kind.value} link needs native_index present={expected[0]} "
                f"and mixed_index present={expected[1]}."
            )

    def index(self, side: Side) -> Optional[int]:
        return self.native_index if side == Side.NATIVE else self.mixed_index


@dataclass(frozen=True)
class CsLabeling:
    labels: Tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        invalid = [label for label in self.labels if label not in (YES, NO)]
        if invalid:
            raise ValueError(f"Invalid CS labels {invalid}.")

    def __len__(self) -> int:
        return len(self.labels)


def _lcs_matches(native: Sequence[str], mixed: Sequence[str]) -> List[Tuple[int, int]]:
    n, m = len(native), len(mixed)
    # suffix[i][j] is the LCS length of native[i:] and mixed[j:]
    suffix = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(n - 1, -1, -1):
        for j in range(m - 1, -1, -1):
            if native[i] == mixed[j]:
                suffix[i][j] = suffix[i + 1][j + 1] + 1
            else:
                suffix[i][j] = max(suffix[i + 1][j], suffix[i][j + 1])
    matches = []
    i = j = 0
    while i < n and j < m:
        if native[i] == mixed[j]:
            matches.append((i, j))
            i += 1
            j += 1
        elif suffix[i + 1][j] >= suffix[i][j + 1]:
            i += 1
        else:
            j += 1
    return matches


def align_pair(native: Sentence, mixed: Sentence) -> List[AlignmentLink]:
    """Word-align a native sentence with its code-switched counterpart.

    Exact surface matches along a longest common subsequence become ``match`` links.
    Between two matches, unmatched native and mixed tokens are paired left to right
    into substitutions; what is left over becomes deletions (native side) followed by
    insertions (mixed side).
    """
    links: List[AlignmentLink] = []
    previous = (-1, -1)
    sentinel = (len(native), len(mixed))
    for i, j in _lcs_matches(native.words, mixed.words) + [sentinel]:
        deleted = list(range(previous[0] + 1, i))
        inserted = list(range(previous[1] + 1, j))
        paired = min(len(deleted), len(inserted))
        links += [
            AlignmentLink(LinkKind.SUBSTITUTION, d, s)
            for d, s in zip(deleted[:paired], inserted[:paired])
        ]
        links += [AlignmentLink(LinkKind.DELETION, native_index=d) for d in deleted[paired:]]
        links += [AlignmentLink(LinkKind.INSERTION, mixed_index=s) for s in inserted[paired:]]
        if (i, j) != sentinel:
            links.append(AlignmentLink(LinkKind.MATCH, i, j))
        previous = (i, j)
    return links


def derive_cs_labels(links: Iterable[AlignmentLink], side: Side) -> CsLabeling:
    """``No`` for tokens of match links, ``Yes`` for every other token of ``side``."""
    side = Side(side)
    labeled = sorted(
        (link.index(side), NO if link.kind == LinkKind.MATCH else YES)
        for link in links
        if link.index(side) is not None
    )
    return CsLabeling(tuple(label for _, label in labeled))


def project_labels(
    native: Sentence,
    native_labels: CsLabeling,
    mixed: Sentence,
    links: Iterable[AlignmentLink],
) -> CsLabeling:
    """Carry native CS labels over to the mixed sentence along the alignment.

    Matched and substituted mixed tokens inherit the linked native label, inserted
    mixed tokens are switch sites.
    """
    if len(native_labels) != len(native):
        raise ValueError(
            f"{len(native_labels)} labels for a native sentence of {len(native)} tokens."
        )
    labels: List[Optional[str]] = [None] * len(mixed)
    for link in links:
        if link.mixed_index is None:
            continue
        if link.kind == LinkKind.INSERTION:
            labels[link.mixed_index] = YES
        else:
            labels[link.mixed_index] = native_labels.labels[link.native_index]  # type: ignore[index]
    if any(label is None for label in labels):
        raise ValueError("The alignment does not cover every mixed token.")
    return CsLabeling(tuple(labels))  # type: ignore[arg-type]


def apply_labels(sentence: Sentence, labeling: CsLabeling) -> Sentence:
    if len(labeling) != len(sentence):
        raise ValueError(
            f"{len(labeling)} labels for a sentence of {len(sentence)} tokens."
        )
    return Sentence(
        tuple(
            FactoredToken(token.surface, token.pos, label)
            for token, label in zip(sentence, labeling.labels)
        )
    )


def project_pos(
    native: Sentence, mixed: Sentence, links: Iterable[AlignmentLink]
) -> Sentence:
    """Give mixed tokens the POS tag of their linked native token, ``UNK`` if inserted.

    Tags already present on the mixed side are kept; an untagged native sentence
    leaves the mixed sentence untouched.
    """
    if all(token.pos is None for token in native):
        return mixed
    tags: List[Optional[str]] = [UNK_TAG] * len(mixed)
    for link in links:
        if link.mixed_index is not None and link.native_index is not None:
            tags[link.mixed_index] = native[link.native_index].pos or UNK_TAG
    return Sentence(
        tuple(
            FactoredToken(token.surface, token.pos or tag, token.cs)
            for token, tag in zip(mixed, tags)
        )
    )


@dataclass(frozen=True)
class PosWarning:
    position: int
    surface: str
    tag: str

    def __str__(self) -> str:
        return (
            f"token {self.position} ({self.surface!r}) has tag {self.tag!r} "
            "outside the tagset"
        )


def validate_pos(sentence: Sentence, tagset: Iterable[str]) -> List[PosWarning]:
    """Tags outside ``tagset``; ``UNK`` is what a tagger emits on failure and passes."""
    allowed = set(tagset) | {UNK_TAG}
    return [
        PosWarning(position, token.surface, token.pos)
        for position, token in enumerate(sentence)
        if token.pos is not None and token.pos not in allowed
    ]


def tag_pair(native: Sentence, mixed: Sentence) -> Tuple[Sentence, Sentence]:
    links = align_pair(native, mixed)
    native_labels = derive_cs_labels(links, Side.NATIVE)
    mixed_labels = project_labels(native, native_labels, mixed, links)
    native_tagged = apply_labels(native, native_labels)
    mixed_tagged = apply_labels(project_pos(native, mixed, links), mixed_labels)
    return native_tagged, mixed_tagged


def tag_parallel(
    native_sentences: Sequence[Sentence], mixed_sentences: Sequence[Sentence]
) -> Tuple[List[Sentence], List[Sentence]]:
    """CS-tag both sides of a parallel corpus.

    POS tags of the native side are projected onto untagged mixed tokens as well.
    """
    if len(native_sentences) != len(mixed_sentences):
        raise ValueError(
            f"Parallel corpora differ in length: {len(native_sentences)} native vs "
            f"{len(mixed_sentences)} code-switched sentences."
        )
    native_out, mixed_out = [], []
    for native, mixed in zip(native_sentences, mixed_sentences):
        native_tagged, mixed_tagged = tag_pair(native, mixed)
        native_out.append(native_tagged)
        mixed_out.append(mixed_tagged)
    return native_out, mixed_out
