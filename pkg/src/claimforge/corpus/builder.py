"""Inventor-centric corpus pipeline: seed search, citation expansion, filters.

Every stage is deterministic given a replay transport: results are
canonically sorted by patent_id regardless of fetch order, and persisted
corpora always embed their CorpusSpec.
"""

from __future__ import annotations

import datetime as dt
import json
from concurrent.futures import ThreadPoolExecutor

from ..claim_parser import parse_claim_block
from ..errors import IoError, NoMatchError, SchemaVersionMismatchError
from .api_client import ApiClient
from .claim_source import ClaimSource, NullClaimSource
from .types import (
    CorpusSpec,
    CpcSection,
    InventorQuery,
    PatentRecord,
    record_from_dict,
    record_to_dict,
    spec_from_dict,
    spec_to_dict,
)

CORPUS_SCHEMA_VERSION = 1


def _record_from_api(d: dict, claim_source: ClaimSource) -> PatentRecord:
    block = claim_source.claim_block(d["patent_id"])
    claims = tuple(parse_claim_block(block, patent_id=d["patent_id"])) if block else ()
    return PatentRecord(
        patent_id=d["patent_id"],
        grant_date=dt.date.fromisoformat(d["patent_date"]),
        cpc_sections=frozenset(CpcSection(s) for s in d.get("cpc_sections", [])),
        cited_patent_ids=tuple(d.get("cited_patent_ids", [])),
        inventor_ids=tuple(d.get("inventor_ids", [])),
        claims=claims,
    )


def fetch_inventor_patents(q: InventorQuery, client: ApiClient,
                           claim_source: ClaimSource | None = None,
                           max_concurrency: int = 4) -> list[PatentRecord]:
    """All granted patents of the inventors matching the query.

    Disambiguation is whatever the API delivers; we trust its inventor_ids.
    """
    claim_source = claim_source or NullClaimSource()
    inventors = client.search_inventors(q.to_criteria())
    if not inventors:
        raise NoMatchError(f"no inventor matched {q}")
    inventor_ids = sorted({iv["inventor_id"] for iv in inventors})
    patents = client.fetch_patents({"inventor_id": inventor_ids})
    with ThreadPoolExecutor(max_workers=max_concurrency) as pool:
        records = list(pool.map(
            lambda d: _record_from_api(d, claim_source), patents))
    return sorted(records, key=lambda r: r.patent_id)


def expand_by_citations(seed_records: list[PatentRecord], depth: int,
                        client: ApiClient,
                        claim_source: ClaimSource | None = None,
                        direction: str = "backward",
                        max_concurrency: int = 4) -> list[PatentRecord]:
    """Breadth-first closure over citations up to ``depth`` hops.

    ``direction`` is "backward" (follow cited_patent_ids, the default) or
    "both" (additionally fetch patents citing the frontier).
    """
    if depth < 0:
        raise ValueError("depth must be >= 0")
    if direction not in ("backward", "both"):
        raise ValueError(f"unknown citation direction {direction!r}")
    claim_source = claim_source or NullClaimSource()

    by_id = {r.patent_id: r for r in seed_records}
    visited = set(by_id)
    frontier = list(seed_records)
    for _ in range(depth):
        wanted = sorted({pid for r in frontier for pid in r.cited_patent_ids
                         if pid not in visited})
        citing: list[dict] = []
        if direction == "both":
            for r in sorted(frontier, key=lambda r: r.patent_id):
                citing.extend(client.fetch_patents(
                    {"cited_patent_id": r.patent_id}))
        fetched = client.fetch_patents({"patent_id": wanted}) if wanted else []
        fetched.extend(d for d in citing if d["patent_id"] not in visited)
        visited.update(wanted)
        new_records = []
        seen_this_wave = set()
        with ThreadPoolExecutor(max_workers=max_concurrency) as pool:
            for rec in pool.map(lambda d: _record_from_api(d, claim_source),
                                fetched):
                if rec.patent_id in by_id or rec.patent_id in seen_this_wave:
                    continue
                seen_this_wave.add(rec.patent_id)
                new_records.append(rec)
        for rec in new_records:
            by_id[rec.patent_id] = rec
            visited.add(rec.patent_id)
        frontier = new_records
        if not frontier:
            break
    return sorted(by_id.values(), key=lambda r: r.patent_id)


def apply_keyword_filters(records: list[PatentRecord], include: list[str],
                          exclude: list[str]) -> list[PatentRecord]:
    """Keep records whose claim text matches includes (any) and no excludes."""
    include_l = [k.lower() for k in include]
    exclude_l = [k.lower() for k in exclude]
    kept = []
    for r in records:
        texts = [c.text.lower() for c in r.claims]
        if include_l and not any(k in t for k in include_l for t in texts):
            continue
        if any(k in t for k in exclude_l for t in texts):
            continue
        kept.append(r)
    return kept


def build_corpus(spec: CorpusSpec, client: ApiClient,
                 claim_source: ClaimSource | None = None,
                 citation_direction: str = "backward",
                 max_concurrency: int = 4) -> list[PatentRecord]:
    """Full pipeline: seed fetch, citation expansion, then keyword filters."""
    seeds = fetch_inventor_patents(spec.seed, client, claim_source,
                                   max_concurrency)
    expanded = expand_by_citations(seeds, spec.citation_depth, client,
                                   claim_source, citation_direction,
                                   max_concurrency)
    return apply_keyword_filters(expanded, list(spec.include_keywords),
                                 list(spec.exclude_keywords))


def persist_corpus(spec: CorpusSpec, records: list[PatentRecord], path) -> None:
    try:
        with open(path, "w", encoding="utf-8") as f:
            f.write(json.dumps(
                {"schema_version": CORPUS_SCHEMA_VERSION,
                 "spec": spec_to_dict(spec)},
                ensure_ascii=False, sort_keys=True) + "\n")
            for r in sorted(records, key=lambda r: r.patent_id):
                f.write(json.dumps(record_to_dict(r), ensure_ascii=False,
                                   sort_keys=True) + "\n")
    except OSError as e:
        raise IoError(f"cannot write corpus {path}: {e}") from e


def load_corpus(path) -> tuple[CorpusSpec, list[PatentRecord]]:
    try:
        with open(path, encoding="utf-8") as f:
            lines = [ln for ln in f if ln.strip()]
    except OSError as e:
        raise IoError(f"cannot read corpus {path}: {e}") from e
    if not lines:
        raise IoError(f"corpus file {path} is empty")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as e:
        raise IoError(f"corpus header unreadable: {e}") from e
    version = header.get("schema_version")
    if version != CORPUS_SCHEMA_VERSION:
        raise SchemaVersionMismatchError(
            f"corpus schema_version {version}, expected {CORPUS_SCHEMA_VERSION}")
    try:
        spec = spec_from_dict(header["spec"])
        records = [record_from_dict(json.loads(ln)) for ln in lines[1:]]
    except (KeyError, ValueError, json.JSONDecodeError) as e:
        raise IoError(f"corpus file {path} malformed: {e}") from e
    return spec, records
