"""Durable session and annotation store over an append-only JSONL journal.

The journal is the source of truth: on startup the store replays it, so a
restart loses nothing but expired sessions. Feedback lines are written
denormalized (context and candidate embedded) so the annotations export
never depends on a session still being alive.
"""
from __future__ import annotations

import datetime as dt
import json
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import IoError

ACTIONS = ("Accepted", "Rejected", "Edited")


def _now_iso(clock) -> str:
    return dt.datetime.fromtimestamp(
        clock(), tz=dt.timezone.utc).isoformat(timespec="microseconds")


def _iso_to_epoch(ts: str) -> float:
    return dt.datetime.fromisoformat(ts).timestamp()


@dataclass
class SessionState:
    session_id: str
    created_at: str
    last_active: float
    document: str = ""
    history: list = field(default_factory=list)
    candidates: dict = field(default_factory=dict)


class SessionStore:
    """Thread-safe store; mutations run under one lock, journal appends
    inside it so history order and journal order agree."""

    def __init__(self, journal_path, ttl_hours: float = 24.0, clock=None):
        self.journal_path = Path(journal_path)
        self.ttl_seconds = ttl_hours * 3600.0
        self.clock = clock or time.time
        self._lock = threading.RLock()
        self._sessions: dict[str, SessionState] = {}
        self._seq = 0
        self._replay()

    # -- journal ----------------------------------------------------------

    def _append(self, event: dict) -> None:
        line = json.dumps(event, sort_keys=True)
        self.journal_path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.journal_path, "a", encoding="utf-8") as f:
            f.write(line + "\n")

    def _replay(self) -> None:
        if not self.journal_path.exists():
            return
        try:
            with open(self.journal_path, encoding="utf-8") as f:
                lines = [ln for ln in f if ln.strip()]
        except OSError as e:
            raise IoError(f"cannot read journal {self.journal_path}: {e}")
        for ln in lines:
            try:
                event = json.loads(ln)
            except json.JSONDecodeError as e:
                raise IoError(f"corrupt journal line: {e}")
            self._apply(event)
            self._seq += 1

    def _apply(self, event: dict) -> None:
        kind = event.get("type")
        ts = event.get("ts", "")
        epoch = _iso_to_epoch(ts) if ts else 0.0
        if kind == "session":
            s = SessionState(session_id=event["session_id"], created_at=ts,
                             last_active=epoch)
            self._sessions[s.session_id] = s
        elif kind == "candidates":
            s = self._sessions.get(event["session_id"])
            if s is None:
                return  # session may have been expired before a restart
            s.history.append({"type": "complete",
                              "request": event["request"],
                              "candidates": event["candidates"],
                              "ts": ts})
            for c in event["candidates"]:
                s.candidates[c["candidate_id"]] = dict(
                    c, context=event["request"].get("context", ""))
            s.last_active = epoch
        elif kind == "feedback":
            s = self._sessions.get(event["session_id"])
            if s is None:
                return
            s.history.append({"type": "feedback",
                              "candidate_id": event["candidate_id"],
                              "action": event["action"],
                              "edited_text": event.get("edited_text"),
                              "ts": ts})
            s.last_active = epoch

    # -- sessions ---------------------------------------------------------

    def _expired(self, s: SessionState) -> bool:
        return self.clock() - s.last_active > self.ttl_seconds

    def create_session(self) -> str:
        with self._lock:
            session_id = f"s-{uuid.uuid4().hex}"
            ts = _now_iso(self.clock)
            self._append({"type": "session", "session_id": session_id,
                          "ts": ts, "seq": self._seq})
            self._seq += 1
            self._apply({"type": "session", "session_id": session_id,
                         "ts": ts})
            return session_id

    def get_session(self, session_id: str) -> SessionState | None:
        with self._lock:
            s = self._sessions.get(session_id)
            if s is None:
                return None
            if self._expired(s):
                del self._sessions[session_id]
                return None
            return s

    def record_candidates(self, session_id: str, request: dict,
                          candidates: list[dict]) -> None:
        with self._lock:
            ts = _now_iso(self.clock)
            event = {"type": "candidates", "session_id": session_id,
                     "request": request, "candidates": candidates,
                     "ts": ts, "seq": self._seq}
            self._append(event)
            self._seq += 1
            self._apply(event)

    def lookup_candidate(self, session_id: str, candidate_id: str):
        """Candidate payload if this session produced it, else None."""
        s = self.get_session(session_id)
        if s is None:
            return None
        return s.candidates.get(candidate_id)

    def record_feedback(self, session_id: str, candidate: dict, action: str,
                        edited_text: str | None) -> None:
        with self._lock:
            ts = _now_iso(self.clock)
            event = {"type": "feedback", "session_id": session_id,
                     "candidate_id": candidate["candidate_id"],
                     "context": candidate.get("context", ""),
                     "candidate": {k: v for k, v in candidate.items()
                                   if k != "context"},
                     "action": action, "edited_text": edited_text,
                     "ts": ts, "seq": self._seq}
            self._append(event)
            self._seq += 1
            self._apply(event)

    # -- annotations ------------------------------------------------------

    def annotations(self, since: str | None = None) -> list[dict]:
        """Feedback triples ordered by timestamp (journal order ties)."""
        cutoff = _iso_to_epoch(since) if since is not None else None
        if not self.journal_path.exists():
            return []
        rows = []
        with open(self.journal_path, encoding="utf-8") as f:
            for ln in f:
                if not ln.strip():
                    continue
                event = json.loads(ln)
                if event.get("type") != "feedback":
                    continue
                rows.append(event)
        rows.sort(key=lambda e: (e["ts"], e.get("seq", 0)))
        if cutoff is not None:
            rows = [e for e in rows if _iso_to_epoch(e["ts"]) >= cutoff]
        return [{"ts": e["ts"], "session_id": e["session_id"],
                 "context": e.get("context", ""),
                 "candidate": e["candidate"], "action": e["action"],
                 "edited_text": e.get("edited_text")} for e in rows]
