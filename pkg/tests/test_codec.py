from __future__ import annotations

import random

import pytest
from hypothesis import given, strategies as st

from deidkit.codec import (
    ALL_MARKER_STRINGS,
    DROP_INTERLEAVED,
    DROP_NOT_IN_ORIGINAL,
    MARKERS,
    MarkerCollision,
    decode,
    encode,
    strip_markers,
)
from deidkit.corpus import Category, Document, OverlappingSpans, Span

TABLE_DOC = Document("379", "Hi John Doe. Tel: (555)555-5555", "crapii")
TABLE_SPANS = [
    Span(3, 11, Category.NAME_STUDENT, "John Doe"),
    Span(18, 31, Category.PHONE_NUM, "(555)555-5555"),
]

WORDS = (
    "the quick brown fox jumps over lazy dog project design week still "
    "topic review student draft October thanks module brief final plan"
).split()

FIRST_NAMES = "Kara Liam Noor Ravi Sofia Tomas Yuki Zane Petra Omar".split()
LAST_NAMES = "Voss Abara Lindqvist Okada Marsh Ferreira Huang Bell Novak Said".split()


def random_surface(rng: random.Random, category: Category) -> str:
    if category is Category.NAME_STUDENT:
        if rng.random() < 0.2:
            return rng.choice(FIRST_NAMES)
        return f"{rng.choice(FIRST_NAMES)} {rng.choice(LAST_NAMES)}"
    if category is Category.EMAIL:
        local = "".join(rng.choice("abcdefghijk") for _ in range(rng.randrange(3, 9)))
        return f"{local}@example.{rng.choice(('com', 'org', 'net'))}"
    if category is Category.PHONE_NUM:
        d = lambda n: "".join(rng.choice("0123456789") for _ in range(n))
        return rng.choice(
            (
                f"({d(3)}){d(3)}-{d(4)}",
                f"+{d(1)} {d(3)} {d(3)} {d(4)}",
                f"{d(3)}-{d(3)}-{d(4)}",
            )
        )
    slug = "".join(rng.choice("abcdefghij") for _ in range(rng.randrange(3, 9)))
    return rng.choice((f"www.{slug}.example", f"https://example.org/{slug}"))


def random_case(rng: random.Random, max_spans: int = 4) -> tuple[Document, list[Span]]:
    """A random document with realistic entity surfaces at known offsets."""
    pieces: list[str] = [rng.choice(WORDS) for _ in range(rng.randrange(3, 12))]
    entity_slots: list[tuple[int, Category]] = []  # (piece index, category)
    for _ in range(rng.randrange(0, max_spans + 1)):
        category = rng.choice(list(Category))
        index = rng.randrange(0, len(pieces) + 1)
        pieces.insert(index, random_surface(rng, category))
        entity_slots = [
            (i + 1 if i >= index else i, c) for i, c in entity_slots
        ]
        entity_slots.append((index, category))
        pieces.insert(index + 1, rng.choice(WORDS))  # keep entities separated
        entity_slots = [
            (i + 1 if i > index else i, c) for i, c in entity_slots
        ]
    text = " ".join(pieces)
    starts = []
    pos = 0
    for piece in pieces:
        starts.append(pos)
        pos += len(piece) + 1
    spans = [
        Span(starts[i], starts[i] + len(pieces[i]), category, pieces[i])
        for i, category in entity_slots
    ]
    spans.sort()
    return Document(f"r{rng.random():.12f}", text), spans


def protected_ranges(spans: list[Span]) -> list[tuple[int, int]]:
    """Marked-coordinate ranges covering open+inner+close for each span."""
    out = []
    for i, span in enumerate(sorted(spans)):
        shift = 6 * i  # each earlier span inserted two 3-char markers
        out.append((span.start + shift, span.end + shift + 6))
    return out


def perturb_marked(marked: str, spans: list[Span], rng: random.Random, rate: float = 0.05) -> str:
    """Edit (substitute/insert/delete) chars outside the protected ranges."""
    ranges = protected_ranges(spans)
    pieces: list[str] = []
    cursor = 0

    def mutate(segment: str) -> str:
        out: list[str] = []
        for ch in segment:
            if rng.random() >= rate:
                out.append(ch)
                continue
            op = rng.choice(("sub", "ins", "del"))
            if op == "sub":
                out.append(rng.choice("abcdefghijklmnopqrstuvwxyz"))
            elif op == "ins":
                out.append(ch)
                out.append(rng.choice("abcdefghijklmnopqrstuvwxyz"))
            # del: drop the char
        return "".join(out)

    for start, end in ranges:
        pieces.append(mutate(marked[cursor:start]))
        pieces.append(marked[start:end])
        cursor = end
    pieces.append(mutate(marked[cursor:]))
    return "".join(pieces)


class TestEncode:
    def test_table_example(self):
        assert (
            encode(TABLE_DOC, TABLE_SPANS)
            == "Hi @@@John Doe###. Tel: %%%(555)555-5555~~~"
        )

    def test_empty_spans_is_identity(self):
        assert encode(TABLE_DOC, []) == TABLE_DOC.text

    def test_adjacent_spans(self):
        doc = Document("x", "ab")
        spans = [
            Span(0, 1, Category.NAME_STUDENT, "a"),
            Span(1, 2, Category.EMAIL, "b"),
        ]
        marked = encode(doc, spans)
        assert marked == "@@@a###QQQb^^^"
        assert strip_markers(marked) == "ab"

    def test_overlapping_spans_rejected(self):
        doc = Document("x", "abcd")
        spans = [
            Span(0, 3, Category.NAME_STUDENT, "abc"),
            Span(2, 4, Category.EMAIL, "cd"),
        ]
        with pytest.raises(OverlappingSpans):
            encode(doc, spans)

    def test_marker_collision_strict(self):
        doc = Document("x", "legit @@@ art")
        span = Span(6, 9, Category.NAME_STUDENT, "@@@")
        with pytest.raises(MarkerCollision):
            encode(doc, [span], strict=True)

    def test_marker_collision_skips_region_by_default(self):
        doc = Document("x", "legit @@@ art plus Bo Li")
        colliding = Span(6, 9, Category.NAME_STUDENT, "@@@")
        clean = Span(19, 24, Category.NAME_STUDENT, "Bo Li")
        marked = encode(doc, [colliding, clean])
        assert marked == "legit @@@ art plus @@@Bo Li###"

    def test_non_entity_text_preserved(self):
        rng = random.Random(2)
        for _ in range(200):
            doc, spans = random_case(rng)
            assert strip_markers(encode(doc, spans)) == doc.text


class TestStripMarkers:
    def test_single_pair(self):
        assert strip_markers("@@@John Doe###") == "John Doe"

    def test_no_markers(self):
        assert strip_markers("no markers") == "no markers"

    def test_all_marker_strings_removed(self):
        assert strip_markers("".join(ALL_MARKER_STRINGS)) == ""


class TestDecode:
    def test_roundtrip_table(self):
        report = decode(encode(TABLE_DOC, TABLE_SPANS), TABLE_DOC)
        assert report.spans == TABLE_SPANS
        assert report.dropped == []
        assert report.anchored_exact == len(TABLE_SPANS)

    def test_roundtrip_random(self):
        rng = random.Random(9)
        for _ in range(300):
            doc, spans = random_case(rng)
            report = decode(encode(doc, spans), doc)
            assert report.spans == spans
            assert report.dropped == []
            assert report.anchored_exact == len(spans)

    def test_model_rewrite_outside_markers_keeps_offsets(self):
        # The model changed "Tel:" to "Tel -" but kept the marked phone intact.
        marked = "Hi @@@John Doe###. Tel - %%%(555)555-5555~~~"
        report = decode(marked, TABLE_DOC)
        phone = [s for s in report.spans if s.category is Category.PHONE_NUM]
        assert phone == [Span(18, 31, Category.PHONE_NUM, "(555)555-5555")]

    def test_hallucinated_entity_dropped(self):
        marked = "Hi @@@Ghost Name### everyone"
        report = decode(marked, Document("x", "Hi everyone"))
        assert report.spans == []
        assert [d.reason for d in report.dropped] == [DROP_NOT_IN_ORIGINAL]
        assert report.dropped[0].surface == "Ghost Name"

    def test_never_emits_mismatching_surface(self):
        rng = random.Random(13)
        for _ in range(300):
            doc, spans = random_case(rng)
            marked = perturb_marked(encode(doc, spans), spans, rng)
            report = decode(marked, doc)
            for span in report.spans:
                assert doc.text[span.start : span.end] == span.surface

    def test_perturbation_recovery_smoke(self):
        rng = random.Random(4)
        total = recovered = 0
        for _ in range(200):
            doc, spans = random_case(rng)
            marked = perturb_marked(encode(doc, spans), spans, rng)
            report = decode(marked, doc)
            total += len(spans)
            recovered += sum(1 for s in spans if s in report.spans)
        assert total > 0
        assert recovered / total >= 0.99

    def test_fuzzy_fallback_on_misaligned_region(self):
        # The alignment maps the region onto "Kara", which mismatches the
        # inner text; the exact-occurrence search must recover "Voss" at 5.
        doc = Document("x", "Kara Voss")
        report = decode("@@@Voss### Kara Voss", doc)
        assert report.spans == [Span(5, 9, Category.NAME_STUDENT, "Voss")]
        assert report.anchored_fuzzy == 1
        assert report.anchored_exact == 0

    def test_unbalanced_markers_treated_as_literal(self):
        doc = Document("x", "price ### drop QQQ here")
        report = decode("price ### drop QQQ here", doc)
        assert report.spans == []
        assert report.dropped == []

    def test_interleaved_pairs_earliest_close_wins(self):
        # open NAME, open EMAIL, close NAME: the NAME pair is authoritative.
        doc = Document("x", "call Ada Lin now")
        marked = "call @@@Ada QQQLin### now"
        report = decode(marked, doc)
        assert [d.reason for d in report.dropped] == [DROP_INTERLEAVED]
        # The name region still resolves against the original text.
        assert report.spans == [Span(5, 12, Category.NAME_STUDENT, "Ada Lin")]

    def test_duplicate_region_dropped_as_overlap(self):
        doc = Document("x", "see Bo Li today")
        marked = "see @@@Bo Li###@@@Bo Li### today"
        report = decode(marked, doc)
        assert report.spans == [Span(4, 9, Category.NAME_STUDENT, "Bo Li")]
        assert len(report.dropped) == 1

    def test_decode_is_total_on_garbage(self):
        doc = Document("x", "anything at all")
        for junk in ("", "###@@@", "@@@", "%%%~~~", "@@@@@@######"):
            report = decode(junk, doc)
            assert isinstance(report.spans, list)


@given(st.integers(0, 2**32 - 1))
def test_roundtrip_property(seed):
    rng = random.Random(seed)
    doc, spans = random_case(rng)
    report = decode(encode(doc, spans), doc)
    assert report.spans == spans
    assert report.dropped == []


def test_markers_are_pairwise_distinct_and_not_substrings():
    for a in ALL_MARKER_STRINGS:
        for b in ALL_MARKER_STRINGS:
            if a is not b:
                assert a not in b
    assert len(set(ALL_MARKER_STRINGS)) == 8
    assert MARKERS[Category.NAME_STUDENT] == ("@@@", "###")
    assert MARKERS[Category.URL_PERSONAL] == ("&&&", "$$$")
    assert MARKERS[Category.EMAIL] == ("QQQ", "^^^")
    assert MARKERS[Category.PHONE_NUM] == ("%%%", "~~~")
