"""PatentsView-style HTTP client with rate limiting, retries, and record/replay.

Requests are POSTs of ``{"q": criteria, "f": fields, "o": options}``.  Every
interaction goes through a Transport; the live transport speaks real HTTP
while the replay transport serves committed fixtures, so tests run offline
and byte-identically.
"""

from __future__ import annotations

import json
import os
import threading
import time
from dataclasses import dataclass, field

from ..errors import ApiUnavailableError, IoError, RateLimitedError

DEFAULT_API_BASE = "https://search.patentsview.org"
API_BASE_ENV = "CLAIMFORGE_API_BASE"

INVENTORS_PATH = "/api/v1/inventor/"
PATENTS_PATH = "/api/v1/patent/"


@dataclass
class ApiResponse:
    status: int
    body: dict
    retry_after: float | None = None


def _canonical_body(body: dict) -> str:
    return json.dumps(body, sort_keys=True, separators=(",", ":"))


class TokenBucketRateLimiter:
    """Blocking token bucket; default one request per second.

    Clock and sleep are injectable so tests can run without real waiting.
    """

    def __init__(self, rate_per_sec: float = 1.0, capacity: float = 1.0,
                 clock=time.monotonic, sleep=time.sleep):
        self.rate = rate_per_sec
        self.capacity = capacity
        self._clock = clock
        self._sleep = sleep
        self._tokens = capacity
        self._last = clock()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        while True:
            with self._lock:
                now = self._clock()
                self._tokens = min(self.capacity,
                                   self._tokens + (now - self._last) * self.rate)
                self._last = now
                if self._tokens >= 1.0:
                    self._tokens -= 1.0
                    return
                wait = (1.0 - self._tokens) / self.rate
            self._sleep(wait)


class LiveTransport:
    """Real HTTP via requests; base URL from arg or CLAIMFORGE_API_BASE."""

    def __init__(self, base_url: str | None = None, timeout: float = 30.0):
        import requests

        self.base_url = (base_url or os.environ.get(API_BASE_ENV)
                         or DEFAULT_API_BASE).rstrip("/")
        self.timeout = timeout
        self._session = requests.Session()

    def request(self, method: str, path: str, body: dict) -> ApiResponse:
        import requests

        try:
            resp = self._session.request(
                method, self.base_url + path, json=body, timeout=self.timeout)
        except requests.RequestException as e:
            raise ApiUnavailableError(f"transport failure: {e}") from e
        retry_after = None
        if "Retry-After" in resp.headers:
            try:
                retry_after = float(resp.headers["Retry-After"])
            except ValueError:
                pass
        try:
            payload = resp.json() if resp.content else {}
        except ValueError:
            payload = {}
        return ApiResponse(status=resp.status_code, body=payload,
                           retry_after=retry_after)


class ReplayTransport:
    """Serves recorded fixtures; raises on any request not in the recording."""

    def __init__(self, fixture_path=None, entries: list[dict] | None = None):
        if entries is None:
            try:
                with open(fixture_path, encoding="utf-8") as f:
                    entries = json.load(f)["responses"]
            except (OSError, json.JSONDecodeError, KeyError) as e:
                raise IoError(f"cannot read fixture {fixture_path}: {e}") from e
        self._responses: dict[tuple[str, str, str], list[dict]] = {}
        for e in entries:
            key = (e["method"].upper(), e["path"], _canonical_body(e["body"]))
            self._responses.setdefault(key, []).append(e)
        self._cursor: dict[tuple[str, str, str], int] = {}

    def request(self, method: str, path: str, body: dict) -> ApiResponse:
        key = (method.upper(), path, _canonical_body(body))
        entries = self._responses.get(key)
        if not entries:
            raise ApiUnavailableError(
                f"no recorded response for {method} {path} {_canonical_body(body)}")
        # Sequential responses allow recording transient failures then success.
        idx = min(self._cursor.get(key, 0), len(entries) - 1)
        self._cursor[key] = idx + 1
        e = entries[idx]
        return ApiResponse(status=e.get("status", 200),
                           body=e.get("response", {}),
                           retry_after=e.get("retry_after"))


class RecordingTransport:
    """Wraps a live transport and captures every exchange for later replay."""

    def __init__(self, inner):
        self.inner = inner
        self.entries: list[dict] = []

    def request(self, method: str, path: str, body: dict) -> ApiResponse:
        resp = self.inner.request(method, path, body)
        entry = {"method": method.upper(), "path": path, "body": body,
                 "status": resp.status, "response": resp.body}
        if resp.retry_after is not None:
            entry["retry_after"] = resp.retry_after
        self.entries.append(entry)
        return resp

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump({"responses": self.entries}, f, indent=2, sort_keys=True)


class ApiClient:
    """Paginated access to the inventors and patents endpoints.

    Retries 5xx with exponential backoff; 429 responses are retried too and
    surface as RateLimitedError with the server's retry-after hint once the
    budget is exhausted.
    """

    def __init__(self, transport, rate_limiter: TokenBucketRateLimiter | None = None,
                 max_retries: int = 5, backoff_base: float = 0.5,
                 sleep=time.sleep, per_page: int = 25,
                 inventors_path: str = INVENTORS_PATH,
                 patents_path: str = PATENTS_PATH):
        self.transport = transport
        self.rate_limiter = rate_limiter
        self.max_retries = max_retries
        self.backoff_base = backoff_base
        self._sleep = sleep
        self.per_page = per_page
        self.inventors_path = inventors_path
        self.patents_path = patents_path

    def _request(self, path: str, body: dict) -> dict:
        last_status = None
        last_retry_after = None
        for attempt in range(self.max_retries + 1):
            if self.rate_limiter is not None:
                self.rate_limiter.acquire()
            try:
                resp = self.transport.request("POST", path, body)
            except ApiUnavailableError:
                if attempt == self.max_retries:
                    raise
                self._sleep(self.backoff_base * (2 ** attempt))
                continue
            if resp.status == 200:
                return resp.body
            last_status = resp.status
            last_retry_after = resp.retry_after
            if attempt < self.max_retries:
                delay = self.backoff_base * (2 ** attempt)
                if resp.status == 429 and resp.retry_after:
                    delay = max(delay, resp.retry_after)
                self._sleep(delay)
        if last_status == 429:
            raise RateLimitedError(
                f"rate limited after {self.max_retries} retries",
                retry_after=last_retry_after)
        raise ApiUnavailableError(
            f"HTTP {last_status} after {self.max_retries} retries on {path}")

    def _paginate(self, path: str, criteria: dict, fields: list[str],
                  items_key: str) -> list[dict]:
        items: list[dict] = []
        page = 1
        while True:
            body = {"q": criteria, "f": fields,
                    "o": {"page": page, "per_page": self.per_page}}
            payload = self._request(path, body)
            batch = payload.get(items_key, [])
            items.extend(batch)
            total = payload.get("total_count", len(items))
            if not batch or len(items) >= total:
                return items
            page += 1

    def search_inventors(self, criteria: dict) -> list[dict]:
        return self._paginate(self.inventors_path, criteria,
                              ["inventor_id", "name_first", "name_last"],
                              "inventors")

    def fetch_patents(self, criteria: dict) -> list[dict]:
        return self._paginate(self.patents_path, criteria,
                              ["patent_id", "patent_date", "cpc_sections",
                               "cited_patent_ids", "inventor_ids"],
                              "patents")
