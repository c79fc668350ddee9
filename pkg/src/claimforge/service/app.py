"""HTTP application: sessions, completions, bridging, feedback capture,
annotations export, and health."""
from __future__ import annotations

import json
import threading
import uuid
from collections import defaultdict

from fastapi import FastAPI, HTTPException, Response
from fastapi.responses import PlainTextResponse

from ..dataset.bpe import Vocabulary
from ..dataset.records import Direction
from ..errors import (
    ClaimForgeError,
    ContextTooLongError,
    InfeasibleConstraintsError,
    InvalidConfigError,
    ModelNotLoadedError,
    NoBridgeFoundError,
    VocabMismatchError,
)
from ..generation import (
    ConstraintSet,
    ExtentLevel,
    GenerationRequest,
    ModelBundle,
    SamplingConfig,
    SamplingStrategy,
    bridge_spans,
    generate_candidates,
    lookahead_spans,
)
from ..models.checkpoint import load_checkpoint
from .config import ServiceConfig
from .schemas import (
    BridgeRequest,
    CandidateBody,
    CompleteRequest,
    CompleteResponse,
    FeedbackRequest,
    HealthResponse,
    SamplingBody,
    SessionResponse,
)
from .store import SessionStore

EMPTY_FORWARD_SPAN = "empty context for forward span extent"


def load_bundle(cfg: ServiceConfig):
    """Returns (bundle or None, loaded checkpoint names, load errors)."""
    loaded: list[str] = []
    errors: list[str] = []
    vocab = None
    if cfg.vocab_path:
        try:
            vocab = Vocabulary.load(cfg.vocab_path)
        except ClaimForgeError as e:
            errors.append(f"vocab: {e}")
    else:
        errors.append("vocab: no path configured")
    if vocab is None:
        return None, loaded, errors

    slots = {"forward": cfg.forward_checkpoint,
             "backward": cfg.backward_checkpoint,
             "relevancy": cfg.relevancy_checkpoint}
    models: dict = {"forward": None, "backward": None, "relevancy": None}
    for name, path in slots.items():
        if not path:
            continue
        try:
            model, _ = load_checkpoint(path,
                                       expect_vocab_hash=vocab.vocab_hash())
            expected = "classifier" if name == "relevancy" else "lm"
            if model.kind != expected:
                raise ClaimForgeError(
                    f"checkpoint holds a {model.kind}, slot needs {expected}")
            models[name] = model
            loaded.append(name)
        except ClaimForgeError as e:
            errors.append(f"{name}: {e}")
    if models["forward"] is None and "forward" not in [
            e.split(":")[0] for e in errors]:
        errors.append("forward: no path configured")
    bundle = ModelBundle(vocab=vocab, forward=models["forward"],
                         backward=models["backward"],
                         relevancy=models["relevancy"],
                         lambda_weight=cfg.lambda_weight,
                         oversample_factor=cfg.oversample_factor)
    return bundle, loaded, errors


def _sampling_config(body: SamplingBody) -> SamplingConfig:
    return SamplingConfig(strategy=SamplingStrategy(body.strategy),
                          top_k=body.top_k, temperature=body.temperature,
                          max_tokens=body.max_tokens, seed=body.seed)


def _candidate_payload(cand) -> dict:
    return {
        "candidate_id": f"c-{uuid.uuid4().hex[:16]}",
        "text": cand.text,
        "extent": cand.extent.value,
        "lm_logprob": cand.lm_logprob,
        "relevancy": cand.relevancy,
        "score": cand.score if cand.score is not None else 0.0,
        "rejected_reasons": list(cand.rejected_reasons),
    }


def create_app(cfg: ServiceConfig) -> FastAPI:
    app = FastAPI(title="claimforge autocomplete service")
    bundle, loaded, load_errors = load_bundle(cfg)
    store = SessionStore(cfg.journal_path, ttl_hours=cfg.session_ttl_hours)
    session_locks: dict[str, threading.Lock] = defaultdict(threading.Lock)

    app.state.bundle = bundle
    app.state.store = store
    app.state.config = cfg
    app.state.load_errors = load_errors

    def require_session(session_id: str):
        s = store.get_session(session_id)
        if s is None:
            raise HTTPException(404, f"unknown session {session_id}")
        return s

    def require_bundle() -> ModelBundle:
        if bundle is None or bundle.forward is None:
            raise HTTPException(503, "model not loaded")
        return bundle

    @app.post("/v1/sessions", status_code=201)
    def create_session():
        return {"session_id": store.create_session()}

    @app.get("/v1/sessions/{session_id}", response_model=SessionResponse)
    def get_session(session_id: str):
        s = require_session(session_id)
        return SessionResponse(session_id=s.session_id, document=s.document,
                               created_at=s.created_at, history=s.history)

    @app.post("/v1/complete", response_model=CompleteResponse)
    def complete(req: CompleteRequest):
        require_session(req.session_id)
        b = require_bundle()
        direction = Direction(req.direction)
        extent = ExtentLevel(req.extent)
        if (not req.context.strip() and direction is Direction.FORWARD
                and extent is ExtentLevel.SPAN and req.lookahead == 1):
            raise HTTPException(422, EMPTY_FORWARD_SPAN)
        sc = _sampling_config(req.sampling)
        try:
            constraints = ConstraintSet(
                must_include=tuple(req.constraints.must_include),
                must_exclude=tuple(req.constraints.must_exclude),
                enforce_antecedent_basis=(
                    req.constraints.enforce_antecedent_basis))
        except InvalidConfigError as e:
            raise HTTPException(422, str(e))
        with session_locks[req.session_id]:
            try:
                if req.lookahead > 1:
                    if direction is not Direction.FORWARD \
                            or extent is not ExtentLevel.SPAN:
                        raise HTTPException(
                            422, "lookahead > 1 needs forward span requests")
                    cands = lookahead_spans(b, req.context, req.lookahead,
                                            sc, constraints)
                else:
                    cands = generate_candidates(b, GenerationRequest(
                        context_text=req.context, direction=direction,
                        extent=extent, k=req.k,
                        proximity_lookahead=req.lookahead,
                        constraints=constraints, sampling=sc))
            except InfeasibleConstraintsError as e:
                raise HTTPException(409, str(e))
            except NoBridgeFoundError as e:
                raise HTTPException(409, str(e))
            except ContextTooLongError as e:
                raise HTTPException(422, str(e))
            except ModelNotLoadedError as e:
                raise HTTPException(503, str(e))
            except VocabMismatchError as e:
                raise HTTPException(503, str(e))
            payloads = [_candidate_payload(c) for c in cands]
            store.record_candidates(
                req.session_id,
                request=req.model_dump(), candidates=payloads)
        return CompleteResponse(
            session_id=req.session_id,
            candidates=[CandidateBody(**p) for p in payloads])

    @app.post("/v1/bridge", response_model=CompleteResponse)
    def bridge(req: BridgeRequest):
        require_session(req.session_id)
        b = require_bundle()
        sc = _sampling_config(req.sampling)
        with session_locks[req.session_id]:
            try:
                cands = bridge_spans(b, req.left, req.right,
                                     max_bridge_tokens=req.max_bridge_tokens,
                                     window=req.window, k=req.k, sc=sc)
            except NoBridgeFoundError as e:
                raise HTTPException(409, str(e))
            except ModelNotLoadedError as e:
                raise HTTPException(503, str(e))
            except ContextTooLongError as e:
                raise HTTPException(422, str(e))
            payloads = [_candidate_payload(c) for c in cands]
            # a bridge's "context" for annotation purposes is the left text
            store.record_candidates(
                req.session_id,
                request=dict(req.model_dump(), context=req.left),
                candidates=payloads)
        return CompleteResponse(
            session_id=req.session_id,
            candidates=[CandidateBody(**p) for p in payloads])

    @app.post("/v1/feedback", status_code=204)
    def feedback(req: FeedbackRequest):
        require_session(req.session_id)
        if req.action == "Edited" and req.edited_text is None:
            raise HTTPException(422, "Edited feedback requires edited_text")
        candidate = store.lookup_candidate(req.session_id, req.candidate_id)
        if candidate is None:
            raise HTTPException(
                404, f"candidate {req.candidate_id} not in session")
        with session_locks[req.session_id]:
            store.record_feedback(req.session_id, candidate, req.action,
                                  req.edited_text)
        return Response(status_code=204)

    @app.get("/v1/annotations")
    def annotations(since: str | None = None):
        try:
            rows = store.annotations(since=since)
        except ValueError:
            raise HTTPException(422, f"cannot parse since={since!r}")
        body = "".join(json.dumps(r, sort_keys=True) + "\n" for r in rows)
        return PlainTextResponse(body, media_type="application/x-ndjson")

    @app.get("/v1/health", response_model=HealthResponse)
    def health():
        ok = (bundle is not None and bundle.forward is not None
              and not load_errors)
        return HealthResponse(
            status="ok" if ok else "degraded",
            loaded_checkpoints=sorted(loaded),
            vocab_hash=bundle.vocab.vocab_hash() if bundle else None)

    return app
