import datetime as dt
import json
from pathlib import Path

import pytest

from claimforge.corpus import (
    ApiClient,
    CorpusSpec,
    CpcSection,
    InventorQuery,
    LocalClaimSource,
    PatentRecord,
    ReplayTransport,
    TokenBucketRateLimiter,
    apply_keyword_filters,
    build_corpus,
    expand_by_citations,
    fetch_inventor_patents,
    load_corpus,
    persist_corpus,
)
from claimforge.errors import (
    ApiUnavailableError,
    IoError,
    NoMatchError,
    RateLimitedError,
    SchemaVersionMismatchError,
)

FIXTURES = Path(__file__).parent / "fixtures"
REPLAY = FIXTURES / "patentsview_replay.json"
CLAIMS = FIXTURES / "claims_source.jsonl"

PATENT_FIELDS = ["patent_id", "patent_date", "cpc_sections",
                 "cited_patent_ids", "inventor_ids"]


def make_client(**kw):
    return ApiClient(ReplayTransport(REPLAY), sleep=lambda s: None, **kw)


def claim_source():
    return LocalClaimSource(CLAIMS)


@pytest.fixture
def ada_query():
    return InventorQuery(name_last="Ada")


class TestFetchInventorPatents:
    def test_seed_fetch(self, ada_query):
        records = fetch_inventor_patents(ada_query, make_client(),
                                         claim_source())
        assert [r.patent_id for r in records] == ["US001", "US002", "US003"]
        by_id = {r.patent_id: r for r in records}
        assert by_id["US001"].grant_date == dt.date(2015, 3, 10)
        assert by_id["US002"].cpc_sections == \
            frozenset({CpcSection.G, CpcSection.H})
        assert by_id["US001"].cited_patent_ids == ("US101", "US102")

    def test_claims_parsed_from_source(self, ada_query):
        records = fetch_inventor_patents(ada_query, make_client(),
                                         claim_source())
        by_id = {r.patent_id: r for r in records}
        assert len(by_id["US001"].claims) == 2
        assert by_id["US001"].claims[1].depends_on == 1
        assert "photodiode" in by_id["US001"].claims[0].text

    def test_no_claim_source_gives_empty_claims(self, ada_query):
        records = fetch_inventor_patents(ada_query, make_client())
        assert all(r.claims == () for r in records)

    def test_no_match(self):
        q = InventorQuery(name_last="Nobody")
        with pytest.raises(NoMatchError):
            fetch_inventor_patents(q, make_client())


class TestCitationExpansion:
    def _seeds(self):
        return fetch_inventor_patents(InventorQuery(name_last="Ada"),
                                      make_client(), claim_source())

    def test_depth_zero_is_identity(self):
        seeds = self._seeds()
        out = expand_by_citations(seeds, 0, make_client(), claim_source())
        assert [r.patent_id for r in out] == ["US001", "US002", "US003"]

    def test_depth_one(self):
        seeds = self._seeds()
        out = expand_by_citations(seeds, 1, make_client(), claim_source())
        assert [r.patent_id for r in out] == \
            ["US001", "US002", "US003", "US101", "US102", "US103"]

    def test_depth_two_terminates_on_cycle(self):
        # US201 cites US101 which cites US201 back; the visited set must
        # stop the walk rather than loop.
        seeds = self._seeds()
        out = expand_by_citations(seeds, 2, make_client(), claim_source())
        assert [r.patent_id for r in out] == \
            ["US001", "US002", "US003", "US101", "US102", "US103", "US201"]

    def test_depth_three_adds_nothing_new(self):
        seeds = self._seeds()
        d2 = expand_by_citations(seeds, 2, make_client(), claim_source())
        d3 = expand_by_citations(seeds, 3, make_client(), claim_source())
        assert [r.patent_id for r in d3] == [r.patent_id for r in d2]

    def test_monotone_inclusion(self):
        seeds = self._seeds()
        ids = []
        for depth in (0, 1, 2):
            out = expand_by_citations(seeds, depth, make_client(),
                                      claim_source())
            ids.append({r.patent_id for r in out})
        assert ids[0] <= ids[1] <= ids[2]

    def test_negative_depth_rejected(self):
        with pytest.raises(ValueError):
            expand_by_citations([], -1, make_client())


class TestKeywordFilters:
    def _corpus(self):
        seeds = fetch_inventor_patents(InventorQuery(name_last="Ada"),
                                       make_client(), claim_source())
        return seeds  # US001 sensor, US002 chemical, US003 sensor+chemical

    def test_include_any(self):
        kept = apply_keyword_filters(self._corpus(), ["sensor"], [])
        assert [r.patent_id for r in kept] == ["US001", "US003"]

    def test_exclude_wins_over_include(self):
        kept = apply_keyword_filters(self._corpus(), ["sensor"], ["chemical"])
        assert [r.patent_id for r in kept] == ["US001"]

    def test_case_insensitive(self):
        kept = apply_keyword_filters(self._corpus(), ["SENSOR"], [])
        assert [r.patent_id for r in kept] == ["US001", "US003"]

    def test_no_filters_is_identity(self):
        recs = self._corpus()
        assert apply_keyword_filters(recs, [], []) == recs

    def test_idempotent(self):
        recs = self._corpus()
        once = apply_keyword_filters(recs, ["sensor"], ["chemical"])
        twice = apply_keyword_filters(once, ["sensor"], ["chemical"])
        assert twice == once

    def test_include_drops_claimless_records(self):
        bare = PatentRecord(patent_id="USX", grant_date=dt.date(2020, 1, 1),
                            cpc_sections=frozenset())
        assert apply_keyword_filters([bare], ["sensor"], []) == []
        assert apply_keyword_filters([bare], [], []) == [bare]


class TestBuildCorpus:
    def test_full_pipeline(self):
        spec = CorpusSpec(seed=InventorQuery(name_last="Ada"),
                          citation_depth=1,
                          include_keywords=("sensor", "filter"),
                          exclude_keywords=("chemical",))
        records = build_corpus(spec, make_client(), claim_source())
        # US003 matches sensor but is excluded by chemical; US101 has
        # "digital filter" from the depth-1 wave.
        assert [r.patent_id for r in records] == ["US001", "US101"]


class TestRetriesAndRateLimit:
    def _client_with(self, entries, **kw):
        sleeps = []
        client = ApiClient(ReplayTransport(entries=entries),
                           sleep=sleeps.append, **kw)
        return client, sleeps

    def _patent_entry(self, status, response=None, retry_after=None):
        e = {"method": "POST", "path": "/api/v1/patent/",
             "body": {"q": {"patent_id": ["US1"]}, "f": PATENT_FIELDS,
                      "o": {"page": 1, "per_page": 25}},
             "status": status, "response": response or {}}
        if retry_after is not None:
            e["retry_after"] = retry_after
        return e

    def test_transient_failure_then_success(self):
        ok = {"patents": [{"patent_id": "US1", "patent_date": "2020-01-01",
                           "cpc_sections": ["G"], "cited_patent_ids": [],
                           "inventor_ids": []}],
              "count": 1, "total_count": 1}
        client, sleeps = self._client_with([
            self._patent_entry(500),
            self._patent_entry(200, ok),
        ])
        patents = client.fetch_patents({"patent_id": ["US1"]})
        assert [p["patent_id"] for p in patents] == ["US1"]
        assert sleeps == [0.5]

    def test_backoff_doubles_until_exhaustion(self):
        client, sleeps = self._client_with([self._patent_entry(500)])
        with pytest.raises(ApiUnavailableError):
            client.fetch_patents({"patent_id": ["US1"]})
        assert sleeps == [0.5, 1.0, 2.0, 4.0, 8.0]

    def test_rate_limited_surfaces_retry_after(self):
        client, sleeps = self._client_with(
            [self._patent_entry(429, retry_after=7.0)], max_retries=2)
        with pytest.raises(RateLimitedError) as exc:
            client.fetch_patents({"patent_id": ["US1"]})
        assert exc.value.retry_after == 7.0
        assert sleeps == [7.0, 7.0]

    def test_unknown_request_unavailable(self):
        client, _ = self._client_with([], max_retries=0)
        with pytest.raises(ApiUnavailableError):
            client.fetch_patents({"patent_id": ["US1"]})

    def test_pagination(self):
        def page(n, pats, total):
            return {"method": "POST", "path": "/api/v1/patent/",
                    "body": {"q": {"inventor_id": ["i"]}, "f": PATENT_FIELDS,
                             "o": {"page": n, "per_page": 2}},
                    "status": 200,
                    "response": {"patents": pats, "count": len(pats),
                                 "total_count": total}}

        def pat(pid):
            return {"patent_id": pid, "patent_date": "2020-01-01",
                    "cpc_sections": [], "cited_patent_ids": [],
                    "inventor_ids": []}

        client = ApiClient(
            ReplayTransport(entries=[
                page(1, [pat("US1"), pat("US2")], 3),
                page(2, [pat("US3")], 3),
            ]),
            sleep=lambda s: None, per_page=2)
        patents = client.fetch_patents({"inventor_id": ["i"]})
        assert [p["patent_id"] for p in patents] == ["US1", "US2", "US3"]

    def test_token_bucket_paces_requests(self):
        now = [0.0]
        waits = []

        def clock():
            return now[0]

        def sleep(s):
            waits.append(s)
            now[0] += s

        limiter = TokenBucketRateLimiter(rate_per_sec=2.0, capacity=1.0,
                                         clock=clock, sleep=sleep)
        limiter.acquire()  # bucket starts full
        limiter.acquire()
        limiter.acquire()
        assert waits == pytest.approx([0.5, 0.5])


class TestPersistence:
    def _spec_and_records(self):
        spec = CorpusSpec(seed=InventorQuery(name_last="Ada"),
                          citation_depth=1,
                          include_keywords=("sensor",),
                          fetched_at=dt.datetime(2024, 5, 1,
                                                 tzinfo=dt.timezone.utc))
        seeds = fetch_inventor_patents(InventorQuery(name_last="Ada"),
                                       make_client(), claim_source())
        return spec, seeds

    def test_round_trip(self, tmp_path):
        spec, records = self._spec_and_records()
        path = tmp_path / "corpus.jsonl"
        persist_corpus(spec, records, path)
        loaded_spec, loaded_records = load_corpus(path)
        assert loaded_spec == spec
        assert loaded_records == records

    def test_reruns_byte_identical(self, tmp_path):
        spec, records = self._spec_and_records()
        p1, p2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        persist_corpus(spec, records, p1)
        persist_corpus(spec, list(reversed(records)), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_schema_version_mismatch(self, tmp_path):
        spec, records = self._spec_and_records()
        path = tmp_path / "corpus.jsonl"
        persist_corpus(spec, records, path)
        lines = path.read_text().splitlines()
        header = json.loads(lines[0])
        header["schema_version"] = 999
        path.write_text("\n".join([json.dumps(header)] + lines[1:]) + "\n")
        with pytest.raises(SchemaVersionMismatchError):
            load_corpus(path)

    def test_malformed_file(self, tmp_path):
        path = tmp_path / "corpus.jsonl"
        path.write_text("not json\n")
        with pytest.raises(IoError):
            load_corpus(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(IoError):
            load_corpus(tmp_path / "absent.jsonl")
