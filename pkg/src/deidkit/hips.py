"""Hidden-in-plain-sight replacement.

Detected spans are swapped for category-preserving synthetic surrogates drawn
from gender-by-culture name pools, with per-document consistency, so any
entity the detector missed hides among realistic fakes. Includes the
transcript placeholder substitution used to synthesize evaluation corpora and
a Monte-Carlo model of document-level leakage under imperfect detection.
"""

from __future__ import annotations

import csv
import hashlib
import random
import string
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, NamedTuple, Sequence

import numpy as np

from .corpus import (
    Category,
    Document,
    Placeholder,
    PlaceholderSpan,
    Span,
    validate_spans,
)

GENDERS = ("Male", "Female")
CULTURES = ("Asia", "Americas", "Europe", "Africa", "Oceania")
ALL_GROUPS: tuple[tuple[str, str], ...] = tuple(
    (g, c) for g in GENDERS for c in CULTURES
)


class HipsError(ValueError):
    pass


class EmptyGroup(HipsError):
    def __init__(self, gender: str, culture: str):
        self.group = (gender, culture)
        super().__init__(f"name pool has no names for group ({gender}, {culture})")


@dataclass
class NamePool:
    """First/last name lists keyed by (gender, culture); ASCII names only."""

    groups: dict[tuple[str, str], tuple[list[str], list[str]]] = field(default_factory=dict)
    dropped_non_ascii: int = 0

    def first_names(self, group: tuple[str, str]) -> list[str]:
        names = self.groups.get(group, ([], []))[0]
        if not names:
            raise EmptyGroup(*group)
        return names

    def last_names(self, group: tuple[str, str]) -> list[str]:
        names = self.groups.get(group, ([], []))[1]
        if not names:
            raise EmptyGroup(*group)
        return names

    def all_first_names(self) -> list[str]:
        return [n for firsts, _ in self.groups.values() for n in firsts]

    def all_last_names(self) -> list[str]:
        return [n for _, lasts in self.groups.values() for n in lasts]


def load_name_pools(path: str | Path) -> NamePool:
    """Load a gender,culture,kind,name CSV, dropping non-ASCII names."""
    pool = NamePool()
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        required = {"gender", "culture", "kind", "name"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise HipsError(f"name pool CSV must have columns {sorted(required)}")
        for row in reader:
            name = row["name"].strip()
            if not name:
                continue
            if not name.isascii():
                pool.dropped_non_ascii += 1
                continue
            kind = row["kind"].strip().lower()
            if kind not in ("first", "last"):
                raise HipsError(f"unknown name kind {row['kind']!r}")
            group = (row["gender"].strip(), row["culture"].strip())
            firsts, lasts = pool.groups.setdefault(group, ([], []))
            (firsts if kind == "first" else lasts).append(name)
    return pool


def load_region_table(path: str | Path) -> dict[str, str]:
    """Load the country,region CSV that maps countries onto the five regions."""
    table: dict[str, str] = {}
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None or not {"country", "region"}.issubset(reader.fieldnames):
            raise HipsError("region CSV must have columns country,region")
        for row in reader:
            table[row["country"].strip().lower()] = row["region"].strip()
    return table


def map_country_to_culture(country: str, region_table: Mapping[str, str]) -> str:
    return region_table.get(country.strip().lower(), "Unknown")


@dataclass
class GroupAssignment:
    mapping: dict[str, tuple[str, str]]

    def group_for(self, transcript_id: str) -> tuple[str, str]:
        return self.mapping[transcript_id]


def assign_groups(
    transcript_ids: Sequence[str],
    seed: int,
    groups: Sequence[tuple[str, str]] = ALL_GROUPS,
) -> GroupAssignment:
    """Deal transcripts into gender-culture groups, equal cells when N divides."""
    ids = sorted(str(t) for t in transcript_ids)
    rng = random.Random(seed)
    rng.shuffle(ids)
    return GroupAssignment(
        mapping={t: groups[i % len(groups)] for i, t in enumerate(ids)}
    )


def _stable_rng(doc_id: str, seed: int) -> random.Random:
    # Keyed per document so corpus-level runs are order-independent, and
    # hashed so results do not depend on PYTHONHASHSEED.
    digest = hashlib.sha256(f"{seed}:{doc_id}".encode("utf-8")).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


CategoryKey = str  # Category value or "PLACEHOLDER:<name>"


@dataclass
class SurrogateState:
    """Per-document surrogate memory: repeat mentions get repeat surrogates."""

    document_id: str
    seed: int
    consistent: bool = True
    _memo: dict[tuple[str, CategoryKey], str] = field(default_factory=dict)
    _used: dict[CategoryKey, set[str]] = field(default_factory=dict)

    def __post_init__(self):
        self.rng = _stable_rng(self.document_id, self.seed)

    def remember(self, surface: str, key: CategoryKey, surrogate: str) -> str:
        if self.consistent:
            self._memo[(surface, key)] = surrogate
        self._used.setdefault(key, set()).add(surrogate)
        return surrogate

    def recall(self, surface: str, key: CategoryKey) -> str | None:
        if not self.consistent:
            return None
        return self._memo.get((surface, key))

    def used(self, key: CategoryKey) -> set[str]:
        return self._used.setdefault(key, set())


def _pick_unused(options_factory, used: set[str], rng: random.Random, attempts: int = 8) -> str:
    candidate = options_factory(rng)
    for _ in range(attempts):
        if candidate not in used:
            return candidate
        candidate = options_factory(rng)
    return candidate  # pool capacity exhausted; collisions become acceptable


def _name_surrogate(
    original: str, group: tuple[str, str], pools: NamePool, state: SurrogateState
) -> str:
    token_count = len(original.split())
    firsts = pools.first_names(group)
    lasts = pools.last_names(group)
    used = state.used(Category.NAME_STUDENT.value)
    if token_count == 1:
        return _pick_unused(lambda r: r.choice(firsts), used, state.rng)
    # Two tokens keep their shape; longer names simplify to First Last and the
    # replacement map records the shape change.
    return _pick_unused(
        lambda r: f"{r.choice(firsts)} {r.choice(lasts)}", used, state.rng
    )


def _email_surrogate(state: SurrogateState) -> str:
    def make(rng: random.Random) -> str:
        local = "".join(rng.choice(string.ascii_lowercase) for _ in range(8))
        return f"{local}@example.com"

    return _pick_unused(make, state.used(Category.EMAIL.value), state.rng)


def _url_surrogate(state: SurrogateState) -> str:
    def make(rng: random.Random) -> str:
        slug = "".join(rng.choice(string.ascii_lowercase) for _ in range(10))
        return f"https://www.example.org/{slug}"

    return _pick_unused(make, state.used(Category.URL_PERSONAL.value), state.rng)


def _phone_surrogate(original: str, state: SurrogateState) -> str:
    digit_positions = [i for i, ch in enumerate(original) if ch.isdigit()]
    if not digit_positions:
        return original

    def resample(rng: random.Random) -> str:
        chars = list(original)
        for i in digit_positions:
            chars[i] = rng.choice(string.digits)
        return "".join(chars)

    candidate = resample(state.rng)
    for _ in range(8):
        if candidate != original and candidate not in state.used(Category.PHONE_NUM.value):
            break
        candidate = resample(state.rng)
    if candidate == original:
        # Deterministic escape hatch: bump the final digit.
        chars = list(candidate)
        last = digit_positions[-1]
        chars[last] = str((int(chars[last]) + 1) % 10)
        candidate = "".join(chars)
    return candidate


#: Deterministic fillers for non-name transcript placeholders. Kept small on
#: purpose; an LLM-backed provider can be plugged in via ``apply_hips``.
_PLACEHOLDER_TEMPLATES: dict[str, tuple[str, ...]] = {
    "AGE": ("19", "21", "24", "27", "32", "35"),
    "DATE": ("12 March", "3 June", "28 October", "7 January"),
    "TIME": ("9am", "2pm", "6:30pm"),
    "CITY": ("Springfield", "Riverton", "Lakeside"),
    "COUNTRY": ("Freedonia", "Sylvania"),
    "EMAIL": ("contact@example.com", "hello@example.org"),
    "PHONE NUMBER": ("(555)010-0199", "(555)010-0242"),
    "INSTAGRAM ACCOUNT": ("@example_handle", "@sample_account"),
    "SCHOOL": ("Northgate Academy", "Hillview College"),
}
_GENERIC_FILLERS = ("Alder", "Birch", "Cedar", "Druid", "Ember", "Fennel")

#: Signature for a custom non-name placeholder provider (e.g. LLM-backed).
PlaceholderProvider = Callable[[Placeholder, random.Random], str]


def _placeholder_surrogate(
    ph: Placeholder,
    group: tuple[str, str],
    pools: NamePool | None,
    state: SurrogateState,
    provider: PlaceholderProvider | None = None,
) -> str:
    if ph.name_kind:
        if pools is None:
            raise HipsError("name pools are required to replace name placeholders")
        firsts = pools.first_names(group)
        lasts = pools.last_names(group)
        return _pick_unused(
            lambda r: f"{r.choice(firsts)} {r.choice(lasts)}",
            state.used(f"PLACEHOLDER:{ph.name}"),
            state.rng,
        )
    if provider is not None:
        return provider(ph, state.rng)
    options = _PLACEHOLDER_TEMPLATES.get(ph.name.upper())
    if options:
        return state.rng.choice(options)
    return state.rng.choice(_GENERIC_FILLERS)


def surrogate_for(
    surface: str,
    category: Category | Placeholder,
    group: tuple[str, str],
    state: SurrogateState,
    pools: NamePool | None = None,
    placeholder_provider: PlaceholderProvider | None = None,
) -> str:
    """Produce (or recall) the synthetic stand-in for one entity."""
    key: CategoryKey
    if isinstance(category, Placeholder):
        key = f"PLACEHOLDER:{category.name}"
    else:
        key = category.value
    cached = state.recall(surface, key)
    if cached is not None:
        return cached

    if isinstance(category, Placeholder):
        surrogate = _placeholder_surrogate(
            category, group, pools, state, placeholder_provider
        )
    elif category is Category.NAME_STUDENT:
        if pools is None:
            raise HipsError("name pools are required for NAME_STUDENT surrogates")
        surrogate = _name_surrogate(surface, group, pools, state)
    elif category is Category.EMAIL:
        surrogate = _email_surrogate(state)
    elif category is Category.URL_PERSONAL:
        surrogate = _url_surrogate(state)
    elif category is Category.PHONE_NUM:
        surrogate = _phone_surrogate(surface, state)
    else:
        raise HipsError(f"no surrogate strategy for category {category!r}")
    return state.remember(surface, key, surrogate)


@dataclass
class Replacement:
    category: str
    original: str
    surrogate: str
    input_start: int
    input_end: int
    output_start: int
    output_end: int
    shape_changed: bool = False

    def as_dict(self) -> dict:
        return {
            "category": self.category,
            "original": self.original,
            "surrogate": self.surrogate,
            "input_offsets": [self.input_start, self.input_end],
            "output_offsets": [self.output_start, self.output_end],
            "shape_changed": self.shape_changed,
        }


@dataclass
class HipsResult:
    text: str
    replacements: list[Replacement]
    shifted_spans: list[Span | PlaceholderSpan]


def apply_hips(
    doc: Document,
    spans: Sequence[Span | PlaceholderSpan],
    group: tuple[str, str],
    seed: int,
    pools: NamePool | None = None,
    consistent: bool = True,
    placeholder_provider: PlaceholderProvider | None = None,
) -> HipsResult:
    """Replace every span with its surrogate, leaving all other text intact.

    Shifted spans report where each surrogate landed in the output text;
    name-kind placeholders come back as NAME_STUDENT spans since their
    replacements are real-looking names.
    """
    ordered = sorted(spans, key=lambda s: (s.start, s.end))
    validate_spans(doc.text, ordered)
    state = SurrogateState(document_id=doc.id, seed=seed, consistent=consistent)

    parts: list[str] = []
    replacements: list[Replacement] = []
    shifted: list[Span | PlaceholderSpan] = []
    cursor = 0
    out_len = 0
    for span in ordered:
        gap = doc.text[cursor : span.start]
        parts.append(gap)
        out_len += len(gap)
        surrogate = surrogate_for(
            span.surface, span.category, group, state, pools, placeholder_provider
        )
        parts.append(surrogate)
        out_start = out_len
        out_len += len(surrogate)
        cursor = span.end

        if isinstance(span.category, Placeholder):
            category_label = f"PLACEHOLDER:{span.category.name}"
            if span.category.name_kind:
                shifted.append(
                    Span(out_start, out_len, Category.NAME_STUDENT, surrogate)
                )
            else:
                shifted.append(
                    PlaceholderSpan(out_start, out_len, span.category, surrogate)
                )
            shape_changed = False
        else:
            category_label = span.category.value
            shifted.append(Span(out_start, out_len, span.category, surrogate))
            shape_changed = (
                span.category is Category.NAME_STUDENT
                and len(span.surface.split()) > 2
            )
        replacements.append(
            Replacement(
                category=category_label,
                original=span.surface,
                surrogate=surrogate,
                input_start=span.start,
                input_end=span.end,
                output_start=out_start,
                output_end=out_len,
                shape_changed=shape_changed,
            )
        )
    parts.append(doc.text[cursor:])
    return HipsResult(text="".join(parts), replacements=replacements, shifted_spans=shifted)


class LeakageEstimate(NamedTuple):
    redaction_leak_fraction: float
    hips_observed_leak_fraction: float


def simulate_leakage(
    fn_rate: float,
    attacker_detect_rate: float,
    entities_per_doc: int,
    n_docs: int,
    seed: int = 0,
) -> LeakageEstimate:
    """Monte-Carlo fraction of documents with at least one exposed entity.

    Under redaction every missed entity is exposed verbatim; under HIPS a
    missed entity only counts as an observed leak when the attacker can tell
    it apart from the surrounding surrogates. Matches the closed forms
    1-(1-fn)^k and 1-(1-fn*d)^k within Monte-Carlo error.
    """
    if not (0.0 <= fn_rate <= 1.0 and 0.0 <= attacker_detect_rate <= 1.0):
        raise HipsError("rates must lie in [0, 1]")
    if entities_per_doc < 0 or n_docs <= 0:
        raise HipsError("entities_per_doc must be >= 0 and n_docs positive")
    if entities_per_doc == 0 or fn_rate == 0.0:
        return LeakageEstimate(0.0, 0.0)

    rng = np.random.default_rng(seed)
    missed = rng.random((n_docs, entities_per_doc)) < fn_rate
    observed = missed & (rng.random((n_docs, entities_per_doc)) < attacker_detect_rate)
    return LeakageEstimate(
        redaction_leak_fraction=float(missed.any(axis=1).mean()),
        hips_observed_leak_fraction=float(observed.any(axis=1).mean()),
    )
