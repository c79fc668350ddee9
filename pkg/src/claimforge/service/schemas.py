"""Request and response bodies for the HTTP API."""
from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field


class ConstraintsBody(BaseModel):
    must_include: list[str] = Field(default_factory=list)
    must_exclude: list[str] = Field(default_factory=list)
    enforce_antecedent_basis: bool = False


class SamplingBody(BaseModel):
    strategy: Literal["greedy", "top_k", "temperature"] = "top_k"
    top_k: int = Field(40, ge=1)
    temperature: float = Field(1.0, gt=0)
    max_tokens: int = Field(32, ge=1)
    seed: int = 0


class CompleteRequest(BaseModel):
    session_id: str
    context: str = ""
    direction: Literal["forward", "backward"] = "forward"
    extent: Literal["token", "word", "phrase", "span", "sentence"] = "word"
    k: int = Field(5, ge=1)
    lookahead: int = Field(1, ge=1)
    constraints: ConstraintsBody = Field(default_factory=ConstraintsBody)
    sampling: SamplingBody = Field(default_factory=SamplingBody)


class CandidateBody(BaseModel):
    candidate_id: str
    text: str
    extent: str
    lm_logprob: float
    relevancy: Optional[float] = None
    score: float
    rejected_reasons: list[str] = Field(default_factory=list)


class CompleteResponse(BaseModel):
    session_id: str
    candidates: list[CandidateBody]


class BridgeRequest(BaseModel):
    session_id: str
    left: str = Field(min_length=1)
    right: str = Field(min_length=1)
    window: int = Field(2, ge=1)
    k: int = Field(5, ge=1)
    max_bridge_tokens: int = Field(32, ge=0)
    sampling: SamplingBody = Field(default_factory=SamplingBody)


class FeedbackRequest(BaseModel):
    session_id: str
    candidate_id: str
    action: Literal["Accepted", "Rejected", "Edited"]
    edited_text: Optional[str] = None


class SessionResponse(BaseModel):
    session_id: str
    document: str
    created_at: str
    history: list[dict]


class HealthResponse(BaseModel):
    status: Literal["ok", "degraded"]
    loaded_checkpoints: list[str]
    vocab_hash: Optional[str]
