"""Deterministic parsing of patent-claim text.

Splits a numbered claim block into claims with dependency links, decomposes
a claim into drafting spans (preamble / elements / wherein clauses), and
checks antecedent basis ("a sensor" must precede "the sensor").

All functions here are pure: identical input gives identical output, and
nothing is cached or mutated, so they are safe to call from any thread.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum

from .errors import (
    DanglingDependencyError,
    EmptyClaimError,
    EmptyInputError,
    NonMonotonicNumbersError,
)


class SpanRole(Enum):
    PREAMBLE = "Preamble"
    ELEMENT = "Element"
    WHEREIN = "Wherein"
    # Reserved for closing clauses; the current splitting rules never emit it
    # (a bare final "." is merged into the previous span instead).
    CLOSING = "Closing"


@dataclass(frozen=True)
class Claim:
    """One numbered claim; ``depends_on`` is set when the body references a parent."""

    patent_id: str
    number: int
    text: str
    depends_on: int | None = None

    def __post_init__(self):
        if self.number < 1:
            raise ValueError(f"claim number must be >= 1, got {self.number}")
        if not self.text.strip():
            raise EmptyClaimError(f"claim {self.number} has empty text")
        if self.depends_on is not None and not (1 <= self.depends_on < self.number):
            raise DanglingDependencyError(
                f"claim {self.number} depends on claim {self.depends_on}"
            )


@dataclass(frozen=True)
class ClaimSpan:
    ordinal: int
    text: str
    role: SpanRole
    trailing_separator: str = ""


@dataclass(frozen=True)
class ParsedClaim:
    claim: Claim
    spans: tuple[ClaimSpan, ...]


class ViolationKind(Enum):
    MISSING_ANTECEDENT = "MissingAntecedent"
    DUPLICATE_INDEFINITE = "DuplicateIndefinite"


@dataclass(frozen=True)
class AntecedentViolation:
    phrase: str
    char_offset: int
    kind: ViolationKind


@dataclass(frozen=True)
class AntecedentReport:
    violations: tuple[AntecedentViolation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations


# Claim-number prefix per USPTO full-text conventions: "1. ", "12. " at line start.
_CLAIM_START_RE = re.compile(r"^\s*(\d+)\.\s", re.MULTILINE)

# Dependency phrases recognized in a claim body.
_DEPENDENCY_RE = re.compile(
    r"\b(?:of|according\s+to|as\s+in)\s+claim\s+(\d+)", re.IGNORECASE
)

# Transitional phrases ending a preamble; longest alternative first so
# "comprising:" beats "comprising" at the same position.
_TRANSITIONAL_RE = re.compile(
    r"\b(?:comprising:|comprising|consisting of|including)", re.IGNORECASE
)

_WHEREIN_RE = re.compile(r"^\s*(?:wherein|whereby)\b", re.IGNORECASE)


def parse_claim_block(raw: str, patent_id: str = "") -> list[Claim]:
    """Split a numbered claim block into Claim objects.

    Each claim must begin with "<n>." at the start of a line.  Dependency is
    detected from "of claim N" / "according to claim N" / "as in claim N"
    (case-insensitive, first match wins).
    """
    if not raw or not raw.strip():
        raise EmptyInputError("claim block is blank")

    starts = list(_CLAIM_START_RE.finditer(raw))
    if not starts:
        raise EmptyInputError("no '<n>.' claim prefix found at line start")

    claims: list[Claim] = []
    prev_number = 0
    for i, m in enumerate(starts):
        number = int(m.group(1))
        if number <= prev_number:
            raise NonMonotonicNumbersError(
                f"claim {number} follows claim {prev_number}"
            )
        prev_number = number

        end = starts[i + 1].start() if i + 1 < len(starts) else len(raw)
        body = raw[m.end():end].strip()
        if not body:
            raise EmptyClaimError(f"claim {number} has empty body")

        dep = _DEPENDENCY_RE.search(body)
        depends_on = int(dep.group(1)) if dep else None
        if depends_on is not None and depends_on >= number:
            raise DanglingDependencyError(
                f"claim {number} depends on claim {depends_on}"
            )
        claims.append(Claim(patent_id=patent_id, number=number, text=body,
                            depends_on=depends_on))

    present = {c.number for c in claims}
    for c in claims:
        if c.depends_on is not None and c.depends_on not in present:
            raise DanglingDependencyError(
                f"claim {c.number} depends on absent claim {c.depends_on}"
            )
    return claims


def _top_level_semicolons(text: str, start: int) -> list[int]:
    """Indices of ';' at parenthesis depth 0, scanning from ``start``."""
    cuts = []
    depth = 0
    for i in range(start, len(text)):
        ch = text[i]
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth = max(0, depth - 1)
        elif ch == ";" and depth == 0:
            cuts.append(i)
    return cuts


def next_span_boundary(text: str) -> int | None:
    """Index just past the first span delimiter in ``text``, or None.

    Delimiters follow the split_spans rules: end of a transitional phrase,
    a top-level ';', or a top-level '.' closing the claim.
    """
    candidates = []
    m = _TRANSITIONAL_RE.search(text)
    if m:
        candidates.append(m.end())
    depth = 0
    for i, ch in enumerate(text):
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth = max(0, depth - 1)
        elif ch in ";." and depth == 0:
            candidates.append(i + 1)
            break
    return min(candidates) if candidates else None


def split_spans(claim: Claim) -> ParsedClaim:
    """Decompose a claim into spans whose texts + separators rebuild it byte-exactly.

    Cut points are the end of the first transitional phrase (kept with the
    preamble, colon included) and every top-level ';' (kept with its span).
    Whitespace after a cut becomes the preceding span's trailing separator.
    """
    text = claim.text
    if not text.strip():
        raise EmptyClaimError("cannot split an empty claim")

    cuts: list[int] = []
    m = _TRANSITIONAL_RE.search(text)
    scan_from = 0
    if m:
        cuts.append(m.end())
        scan_from = m.end()
    cuts.extend(i + 1 for i in _top_level_semicolons(text, scan_from))

    # Walk cut points; each yields (span text, following whitespace run).
    pieces: list[tuple[str, str]] = []
    pos = 0
    for cut in cuts:
        if cut <= pos:
            continue
        sep_end = cut
        while sep_end < len(text) and text[sep_end].isspace():
            sep_end += 1
        pieces.append((text[pos:cut], text[cut:sep_end]))
        pos = sep_end
    if pos < len(text):
        pieces.append((text[pos:], ""))

    # A final piece of just "." belongs to the previous span.
    if len(pieces) >= 2 and pieces[-1][0] == "." and pieces[-1][1] == "":
        prev_text, prev_sep = pieces[-2]
        pieces[-2] = (prev_text + prev_sep + ".", "")
        pieces.pop()

    spans = []
    for ordinal, (span_text, sep) in enumerate(pieces):
        if _WHEREIN_RE.match(span_text):
            role = SpanRole.WHEREIN
        elif ordinal == 0:
            role = SpanRole.PREAMBLE
        else:
            role = SpanRole.ELEMENT
        spans.append(ClaimSpan(ordinal=ordinal, text=span_text, role=role,
                               trailing_separator=sep))
    return ParsedClaim(claim=claim, spans=tuple(spans))


def build_dependency_graph(claims: list[Claim]) -> dict[int, list[int]]:
    """Map claim number -> direct dependents.

    Keys cover every independent claim and every claim with dependents;
    childless dependent claims appear only as values.
    """
    children: dict[int, list[int]] = {}
    for c in claims:
        if c.depends_on is None:
            children.setdefault(c.number, [])
        else:
            children.setdefault(c.depends_on, []).append(c.number)
    # Drop dependent claims that picked up an empty child list via setdefault.
    dependent_numbers = {c.number for c in claims if c.depends_on is not None}
    return {n: sorted(kids) for n, kids in sorted(children.items())
            if kids or n not in dependent_numbers}


# Antecedent scanning: an article followed by a run of up to four lowercase
# alphabetic words, where articles themselves terminate the run.
_ARTICLE_RE = re.compile(
    r"\b((?i:a|an|the|said))\s+((?:(?!(?:a|an|the|said)\b)[a-z]+)"
    r"(?:\s+(?!(?:a|an|the|said)\b)[a-z]+){0,3})"
)


def _normalize(phrase: str) -> str:
    return re.sub(r"\s+", " ", phrase).strip().casefold()


def _prefixes(phrase: str) -> list[str]:
    words = phrase.split(" ")
    return [" ".join(words[: i + 1]) for i in range(len(words))]


def check_antecedent_basis(claim_text: str) -> AntecedentReport:
    """Report definite references lacking an introduction, and re-introductions.

    An indefinite article registers every word-prefix of its captured phrase
    (so "a method for processing data" later supports "the method").  A
    definite reference passes if any prefix of its own phrase was registered;
    otherwise its head word is reported as MissingAntecedent.  Re-introducing
    an identical full phrase with "a"/"an" is DuplicateIndefinite.
    """
    if not claim_text:
        return AntecedentReport()

    introduced: set[str] = set()       # all registered prefixes
    introduced_full: set[str] = set()  # exact full phrases, for duplicates
    violations: list[AntecedentViolation] = []

    for m in _ARTICLE_RE.finditer(claim_text):
        article = m.group(1).casefold()
        phrase = _normalize(m.group(2))
        if not phrase:
            continue
        offset = m.start(2)
        if article in ("a", "an"):
            if phrase in introduced_full:
                violations.append(AntecedentViolation(
                    phrase=phrase, char_offset=offset,
                    kind=ViolationKind.DUPLICATE_INDEFINITE))
            introduced_full.add(phrase)
            introduced.update(_prefixes(phrase))
        else:  # the / said
            if not any(p in introduced for p in _prefixes(phrase)):
                head = phrase.split(" ")[0]
                violations.append(AntecedentViolation(
                    phrase=head, char_offset=offset,
                    kind=ViolationKind.MISSING_ANTECEDENT))
    return AntecedentReport(violations=tuple(violations))


def parsed_claim_to_dict(pc: ParsedClaim) -> dict:
    """JSON-ready form used by the CLI and corpus files."""
    return {
        "number": pc.claim.number,
        "depends_on": pc.claim.depends_on,
        "text": pc.claim.text,
        "spans": [
            {
                "ordinal": s.ordinal,
                "role": s.role.value,
                "text": s.text,
                "trailing_separator": s.trailing_separator,
            }
            for s in pc.spans
        ],
    }
