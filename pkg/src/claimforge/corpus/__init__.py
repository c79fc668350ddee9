from .api_client import (
    ApiClient,
    LiveTransport,
    RecordingTransport,
    ReplayTransport,
    TokenBucketRateLimiter,
)
from .builder import (
    apply_keyword_filters,
    build_corpus,
    expand_by_citations,
    fetch_inventor_patents,
    load_corpus,
    persist_corpus,
)
from .claim_source import ApiClaimSource, ClaimSource, LocalClaimSource, NullClaimSource
from .types import CorpusSpec, CpcSection, InventorQuery, PatentRecord

__all__ = [
    "ApiClaimSource",
    "ApiClient",
    "ClaimSource",
    "CorpusSpec",
    "CpcSection",
    "InventorQuery",
    "LiveTransport",
    "LocalClaimSource",
    "NullClaimSource",
    "PatentRecord",
    "RecordingTransport",
    "ReplayTransport",
    "TokenBucketRateLimiter",
    "apply_keyword_filters",
    "build_corpus",
    "expand_by_citations",
    "fetch_inventor_patents",
    "load_corpus",
    "persist_corpus",
]
