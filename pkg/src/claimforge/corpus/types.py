"""Domain types for inventor-centric corpora."""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field
from enum import Enum

from ..claim_parser import Claim


class CpcSection(Enum):
    A = "A"
    B = "B"
    C = "C"
    D = "D"
    E = "E"
    F = "F"
    G = "G"
    H = "H"
    Y = "Y"

    @classmethod
    def ordered(cls) -> tuple["CpcSection", ...]:
        return tuple(cls)


@dataclass(frozen=True)
class InventorQuery:
    name_last: str
    name_first: str | None = None
    location: str | None = None
    cpc_section: CpcSection | None = None
    grant_date_range: tuple[dt.date, dt.date] | None = None

    def __post_init__(self):
        if not self.name_last:
            raise ValueError("name_last must be non-empty")
        if self.grant_date_range is not None:
            start, end = self.grant_date_range
            if start > end:
                raise ValueError(f"date range start {start} after end {end}")

    def to_criteria(self) -> dict:
        q: dict = {"name_last": self.name_last}
        if self.name_first:
            q["name_first"] = self.name_first
        if self.location:
            q["location"] = self.location
        if self.cpc_section:
            q["cpc_section"] = self.cpc_section.value
        if self.grant_date_range:
            q["grant_date_gte"] = self.grant_date_range[0].isoformat()
            q["grant_date_lte"] = self.grant_date_range[1].isoformat()
        return q


@dataclass(frozen=True)
class CorpusSpec:
    """The recipe that produced a corpus; persisted with it for provenance."""

    seed: InventorQuery
    citation_depth: int = 0
    include_keywords: tuple[str, ...] = ()
    exclude_keywords: tuple[str, ...] = ()
    fetched_at: dt.datetime = field(
        default_factory=lambda: dt.datetime(1970, 1, 1, tzinfo=dt.timezone.utc))

    def __post_init__(self):
        if self.citation_depth < 0:
            raise ValueError("citation_depth must be >= 0")
        overlap = set(self.include_keywords) & set(self.exclude_keywords)
        if overlap:
            raise ValueError(f"include/exclude keywords overlap: {overlap}")


@dataclass(frozen=True)
class PatentRecord:
    patent_id: str
    grant_date: dt.date
    cpc_sections: frozenset[CpcSection]
    cited_patent_ids: tuple[str, ...] = ()
    inventor_ids: tuple[str, ...] = ()
    claims: tuple[Claim, ...] = ()


def spec_to_dict(spec: CorpusSpec) -> dict:
    seed = spec.seed
    return {
        "seed": {
            "name_last": seed.name_last,
            "name_first": seed.name_first,
            "location": seed.location,
            "cpc_section": seed.cpc_section.value if seed.cpc_section else None,
            "grant_date_range": (
                [d.isoformat() for d in seed.grant_date_range]
                if seed.grant_date_range else None),
        },
        "citation_depth": spec.citation_depth,
        "include_keywords": list(spec.include_keywords),
        "exclude_keywords": list(spec.exclude_keywords),
        "fetched_at": spec.fetched_at.isoformat(),
    }


def spec_from_dict(d: dict) -> CorpusSpec:
    s = d["seed"]
    date_range = None
    if s.get("grant_date_range"):
        date_range = tuple(dt.date.fromisoformat(x) for x in s["grant_date_range"])
    seed = InventorQuery(
        name_last=s["name_last"],
        name_first=s.get("name_first"),
        location=s.get("location"),
        cpc_section=CpcSection(s["cpc_section"]) if s.get("cpc_section") else None,
        grant_date_range=date_range,
    )
    return CorpusSpec(
        seed=seed,
        citation_depth=d["citation_depth"],
        include_keywords=tuple(d["include_keywords"]),
        exclude_keywords=tuple(d["exclude_keywords"]),
        fetched_at=dt.datetime.fromisoformat(d["fetched_at"]),
    )


def record_to_dict(r: PatentRecord) -> dict:
    return {
        "patent_id": r.patent_id,
        "grant_date": r.grant_date.isoformat(),
        "cpc_sections": sorted(s.value for s in r.cpc_sections),
        "cited_patent_ids": list(r.cited_patent_ids),
        "inventor_ids": list(r.inventor_ids),
        "claims": [
            {"number": c.number, "text": c.text, "depends_on": c.depends_on}
            for c in r.claims
        ],
    }


def record_from_dict(d: dict) -> PatentRecord:
    return PatentRecord(
        patent_id=d["patent_id"],
        grant_date=dt.date.fromisoformat(d["grant_date"]),
        cpc_sections=frozenset(CpcSection(s) for s in d["cpc_sections"]),
        cited_patent_ids=tuple(d["cited_patent_ids"]),
        inventor_ids=tuple(d["inventor_ids"]),
        claims=tuple(
            Claim(patent_id=d["patent_id"], number=c["number"], text=c["text"],
                  depends_on=c.get("depends_on"))
            for c in d["claims"]
        ),
    )
