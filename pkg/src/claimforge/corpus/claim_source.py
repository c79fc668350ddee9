"""Pluggable claim-text sources.

The metadata endpoints do not carry claim bodies, so claim text comes either
from a local bulk-download file (JSONL of patent_id -> claim block) or from
an HTTP endpoint following the same q/f/o shape.
"""

from __future__ import annotations

import json
from typing import Protocol

from ..errors import IoError


class ClaimSource(Protocol):
    def claim_block(self, patent_id: str) -> str | None:
        """Raw numbered claim block for a patent, or None if unknown."""
        ...


class LocalClaimSource:
    """JSONL lines of {"patent_id": ..., "claims": "<numbered block>"}."""

    def __init__(self, path):
        self._blocks: dict[str, str] = {}
        try:
            with open(path, encoding="utf-8") as f:
                for line in f:
                    if not line.strip():
                        continue
                    d = json.loads(line)
                    self._blocks[d["patent_id"]] = d["claims"]
        except (OSError, json.JSONDecodeError, KeyError) as e:
            raise IoError(f"cannot read claim source {path}: {e}") from e

    def claim_block(self, patent_id: str) -> str | None:
        return self._blocks.get(patent_id)


class ApiClaimSource:
    """Fetches claim blocks over HTTP, one request per patent."""

    def __init__(self, client, path: str = "/api/v1/claims/"):
        self._client = client
        self._path = path

    def claim_block(self, patent_id: str) -> str | None:
        body = self._client._request(self._path, {"q": {"patent_id": patent_id}})
        return body.get("claims") or None


class NullClaimSource:
    def claim_block(self, patent_id: str) -> str | None:
        return None
