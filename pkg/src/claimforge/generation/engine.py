"""Auto-complete search: extent-bounded decoding, backward generation,
span bridging, look-ahead chaining, and constraint filtering."""
from __future__ import annotations

import dataclasses
import re
from dataclasses import dataclass

import numpy as np

from ..claim_parser import ViolationKind, check_antecedent_basis, next_span_boundary
from ..dataset.bpe import Vocabulary
from ..dataset.records import Direction, reverse_words
from ..errors import (
    ContextTooLongError,
    InfeasibleConstraintsError,
    ModelNotLoadedError,
    NoBridgeFoundError,
    VocabHashMismatchError,
)
from ..models.classifier import EncoderClassifier
from ..models.decoder import DecoderLM
from .sampling import sample_next_token
from .types import (
    Candidate,
    ConstraintSet,
    ExtentLevel,
    GenerationRequest,
    SamplingConfig,
    SamplingStrategy,
)

_WORD_END_RE = re.compile(r"\S(\s)")
_WORD_RE = re.compile(r"\S+")
PHRASE_WORD_CAP = 8
RELEVANCY_CONTEXT_WORDS = 30


@dataclass
class ModelBundle:
    """Checkpoints plus the vocabulary a generation request runs over."""

    vocab: Vocabulary
    forward: DecoderLM | None = None
    backward: DecoderLM | None = None
    relevancy: EncoderClassifier | None = None
    lambda_weight: float = 1.0
    oversample_factor: int = 4

    def model_for(self, direction: Direction) -> DecoderLM:
        model = (self.forward if direction is Direction.FORWARD
                 else self.backward)
        if model is None:
            raise ModelNotLoadedError(
                f"no checkpoint loaded for direction {direction.value}")
        if (model.vocab_hash is not None
                and model.vocab_hash != self.vocab.vocab_hash()):
            raise VocabHashMismatchError(
                f"checkpoint trained under vocabulary "
                f"{model.vocab_hash[:12]}..., bundle vocabulary is "
                f"{self.vocab.vocab_hash()[:12]}...")
        return model


# -- extent boundaries -----------------------------------------------------

def _phrase_cut(text: str) -> int | None:
    positions = []
    for i, ch in enumerate(text):
        if ch in ",;":
            positions.append(i + 1)
            break
    words = list(_WORD_RE.finditer(text))
    if len(words) >= PHRASE_WORD_CAP:
        positions.append(words[PHRASE_WORD_CAP - 1].end())
    return min(positions) if positions else None


def _forward_cut(text: str, extent: ExtentLevel) -> int | None:
    """Index where the candidate ends, or None to keep decoding."""
    if extent is ExtentLevel.WORD:
        m = _WORD_END_RE.search(text)
        return m.start(1) if m else None
    if extent is ExtentLevel.PHRASE:
        return _phrase_cut(text)
    if extent is ExtentLevel.SPAN:
        return next_span_boundary(text)
    if extent is ExtentLevel.SENTENCE:
        i = text.find(".")
        return i + 1 if i >= 0 else None
    return None  # TOKEN handled by the decode loop


def _backward_cut(text: str, extent: ExtentLevel) -> int | None:
    """Cut in reversed-word space; delimiters ride at the end of words.

    The first word may carry a delimiter (it borders the context); a later
    delimiter-carrying word starts the preceding unit, so the cut excludes it.
    """
    if extent is ExtentLevel.WORD:
        m = _WORD_END_RE.search(text)
        return m.start(1) if m else None
    if extent is ExtentLevel.SENTENCE:
        return None  # runs to EOS: the claim's beginning
    delims = ",;" if extent is ExtentLevel.PHRASE else ";.:"
    words = list(_WORD_RE.finditer(text))
    for idx, w in enumerate(words[:-1]):
        # w is complete (another word follows); idx 0 is exempt
        if idx > 0 and w.group()[-1] in delims:
            return w.start()
    if extent is ExtentLevel.PHRASE and len(words) > PHRASE_WORD_CAP:
        return words[PHRASE_WORD_CAP - 1].end()
    return None


# -- decoding --------------------------------------------------------------

def _prepare_context_ids(model: DecoderLM, vocab: Vocabulary, text: str,
                         budget: int) -> list[int]:
    enc = list(vocab.encode(text).ids)
    room = model.config.context_len - budget - 1
    if room < 0:
        raise ContextTooLongError(
            f"generation budget {budget} exceeds context window "
            f"{model.config.context_len}")
    if len(enc) > room:
        enc = enc[len(enc) - room:]  # keep the tokens nearest the cursor
    return [vocab.bos_id] + enc


def _decode_one(model: DecoderLM, vocab: Vocabulary, context_ids: list[int],
                sc: SamplingConfig, rng, extent: ExtentLevel,
                direction: Direction):
    """Decode until the extent boundary, EOS, or the token budget.

    Returns (candidate text, summed logprob, token count). The text is cut
    exactly at the boundary; the logprob keeps every sampled token, so a
    final partially-used token counts toward the score.
    """
    ids = list(context_ids)
    specials = {vocab.pad_id, vocab.bos_id, vocab.eos_id, vocab.sep_id}
    gen: list[int] = []
    total_lp = 0.0
    cut_fn = _forward_cut if direction is Direction.FORWARD else _backward_cut
    text = ""
    for _ in range(sc.max_tokens):
        tok, lp = sample_next_token(model, ids, sc, rng)
        if tok in specials:
            break
        gen.append(tok)
        total_lp += lp
        ids.append(tok)
        text = vocab.decode(gen)
        if extent is ExtentLevel.TOKEN:
            # a bare-whitespace token is no suggestion; take one more
            if text.strip():
                return text, total_lp, len(gen)
            continue
        cut = cut_fn(text, extent)
        if cut is not None:
            return text[:cut], total_lp, len(gen)
    return text, total_lp, max(len(gen), 1)


def _finish_text(raw: str, direction: Direction) -> str:
    if direction is Direction.BACKWARD:
        return reverse_words(raw)
    return raw


def _context_tail(text: str, n_words: int = RELEVANCY_CONTEXT_WORDS) -> str:
    words = text.split()
    return " ".join(words[-n_words:])


def _context_head(text: str, n_words: int = RELEVANCY_CONTEXT_WORDS) -> str:
    words = text.split()
    return " ".join(words[:n_words])


def insert_text(document: str, addition: str, direction: Direction) -> str:
    """Joins a candidate onto the document on the correct side."""
    if not document:
        return addition.lstrip() if direction is Direction.FORWARD else addition
    if direction is Direction.FORWARD:
        if addition[:1].isspace() or document[-1:].isspace():
            return document + addition
        return document + " " + addition
    if addition[-1:].isspace() or document[:1].isspace():
        return addition + document
    return addition + " " + document


# -- constraints -----------------------------------------------------------

def apply_constraints(candidates: list[Candidate], cs: ConstraintSet,
                      full_document_context: str,
                      direction: Direction = Direction.FORWARD
                      ) -> list[Candidate]:
    """Returns candidates with rejected_reasons filled (empty iff accepted)."""
    if cs.empty:
        return list(candidates)
    base_missing: set[str] | None = None
    if cs.enforce_antecedent_basis:
        base_missing = _missing_phrases(full_document_context)
    out = []
    for cand in candidates:
        reasons: list[str] = []
        lowered = cand.text.lower()
        for pat in cs.must_exclude:
            if pat.lower() in lowered:
                reasons.append(f"must_exclude:{pat}")
        if (cs.must_include
                and cand.extent in (ExtentLevel.SPAN, ExtentLevel.SENTENCE)
                and not any(p.lower() in lowered for p in cs.must_include)):
            reasons.append("must_include:" + ",".join(cs.must_include))
        if cs.enforce_antecedent_basis:
            merged = insert_text(full_document_context, cand.text, direction)
            new = _missing_phrases(merged) - base_missing
            if new:
                reasons.append(f"MissingAntecedent:{sorted(new)[0]}")
        out.append(dataclasses.replace(cand,
                                       rejected_reasons=tuple(reasons)))
    return out


def _missing_phrases(text: str) -> set[str]:
    if not text.strip():
        return set()
    report = check_antecedent_basis(text)
    return {v.phrase for v in report.violations
            if v.kind is ViolationKind.MISSING_ANTECEDENT}


# -- scoring ---------------------------------------------------------------

def _score(cand: Candidate, lam: float) -> float:
    base = cand.lm_logprob / max(cand.n_tokens, 1)
    if cand.relevancy is not None:
        return base + lam * cand.relevancy
    return base


def _rescore(bundle: ModelBundle, context: str, direction: Direction,
             candidates: list[Candidate]) -> list[Candidate]:
    from ..measurement import score_span_relevancy

    out = []
    for cand in candidates:
        relevancy = None
        if bundle.relevancy is not None and cand.text.strip():
            if direction is Direction.FORWARD:
                first, second = _context_tail(context), cand.text
            else:
                first, second = cand.text, _context_head(context)
            if first.strip():
                relevancy = score_span_relevancy(
                    bundle.relevancy, bundle.vocab, first, second)
        scored = dataclasses.replace(cand, relevancy=relevancy)
        out.append(dataclasses.replace(scored,
                                       score=_score(scored, bundle.lambda_weight)))
    return out


# -- entry points ----------------------------------------------------------

def decode_stream(model: DecoderLM, vocab: Vocabulary, context_text: str,
                  sc: SamplingConfig, rng=None,
                  extent: ExtentLevel = ExtentLevel.SENTENCE,
                  direction: Direction = Direction.FORWARD):
    """One completion of the context; returns (text, logprob, n_tokens).

    Backward text comes out un-reversed, reading correctly before the
    context. This is the raw decoding path under generate_candidates.
    """
    if rng is None:
        rng = np.random.default_rng(sc.seed)
    stream = (context_text if direction is Direction.FORWARD
              else reverse_words(context_text))
    ids = _prepare_context_ids(model, vocab, stream, sc.max_tokens)
    raw, lp, n_tok = _decode_one(model, vocab, ids, sc, rng, extent, direction)
    return _finish_text(raw, direction), lp, n_tok


def generate_candidates(bundle: ModelBundle,
                        req: GenerationRequest) -> list[Candidate]:
    """Oversamples completions, filters, rescores, returns top k by score."""
    model = bundle.model_for(req.direction)
    vocab = bundle.vocab
    sc = req.sampling

    stream_text = (req.context_text if req.direction is Direction.FORWARD
                   else reverse_words(req.context_text))
    context_ids = _prepare_context_ids(model, vocab, stream_text,
                                       sc.max_tokens)

    if sc.strategy is SamplingStrategy.GREEDY:
        target, cap = 1, 1
    else:
        target = bundle.oversample_factor * req.k
        cap = 4 * target  # extra rounds only when dedupe leaves < k texts
    best: dict[str, tuple[float, int]] = {}
    i = 0
    while i < cap and (i < target or len(best) < req.k):
        rng = np.random.default_rng([sc.seed, i])
        raw, lp, n_tok = _decode_one(model, vocab, context_ids, sc, rng,
                                     req.extent, req.direction)
        text = _finish_text(raw, req.direction)
        i += 1
        if not text.strip():
            continue
        prev = best.get(text)
        if prev is None or lp > prev[0]:
            best[text] = (lp, n_tok)
    n_samples = i

    candidates = [Candidate(text=t, extent=req.extent, lm_logprob=lp,
                            n_tokens=n)
                  for t, (lp, n) in sorted(best.items())]
    candidates = apply_constraints(candidates, req.constraints,
                                   req.context_text, req.direction)
    survivors = [c for c in candidates if c.accepted]
    if not survivors:
        if req.constraints.empty:
            return []  # the model had nothing to offer (immediate EOS)
        raise InfeasibleConstraintsError(
            f"no candidate of {len(candidates)} survived constraints "
            f"within the {n_samples}-sample budget")
    survivors = _rescore(bundle, req.context_text, req.direction, survivors)
    survivors.sort(key=lambda c: (-c.score, c.text))
    return survivors[:req.k]


def generate_backward(bundle: ModelBundle,
                      req: GenerationRequest) -> list[Candidate]:
    """Candidates that read correctly when placed before the context."""
    if req.direction is not Direction.BACKWARD:
        req = dataclasses.replace(req, direction=Direction.BACKWARD)
    return generate_candidates(bundle, req)


def lookahead_spans(bundle: ModelBundle, context: str, m: int,
                    sc: SamplingConfig,
                    constraints: ConstraintSet | None = None
                    ) -> list[Candidate]:
    """Chains m Span candidates, each continuing where the last ended."""
    if m < 1:
        raise ValueError(f"lookahead count must be >= 1, got {m}")
    chain: list[Candidate] = []
    doc = context
    for _ in range(m):
        req = GenerationRequest(
            context_text=doc, direction=Direction.FORWARD,
            extent=ExtentLevel.SPAN, k=1,
            constraints=constraints or ConstraintSet(), sampling=sc)
        best = generate_candidates(bundle, req)[0]
        chain.append(best)
        doc = insert_text(doc, best.text, Direction.FORWARD)
    return chain


def bridge_spans(bundle: ModelBundle, left: str, right: str,
                 max_bridge_tokens: int, window: int = 2, k: int = 5,
                 sc: SamplingConfig | None = None) -> list[Candidate]:
    """Meets forward continuations of ``left`` with backward predecessors of
    ``right``; a shared run of ``window`` words joins the two streams."""
    fwd = bundle.model_for(Direction.FORWARD)
    bwd = bundle.model_for(Direction.BACKWARD)
    vocab = bundle.vocab
    if sc is None:
        sc = SamplingConfig(max_tokens=max(max_bridge_tokens, 1))
    n_samples = 1 if sc.strategy is SamplingStrategy.GREEDY else 4 * k

    def stream_samples(model, text, salt):
        if max_bridge_tokens == 0:
            return [("", 0.0)]
        ids = _prepare_context_ids(model, vocab, text, max_bridge_tokens)
        out = []
        for i in range(n_samples):
            rng = np.random.default_rng([sc.seed, salt, i])
            raw, lp, _ = _decode_one(
                model, vocab, ids,
                dataclasses.replace(sc, max_tokens=max_bridge_tokens),
                rng, ExtentLevel.SENTENCE, Direction.FORWARD)
            out.append((raw, lp))
        return out

    continuations = stream_samples(fwd, left, 1)
    predecessors = [(reverse_words(raw), lp) for raw, lp
                    in stream_samples(bwd, reverse_words(right), 2)]

    lw = left.split()[-window:]
    rw = right.split()[:window]
    best: dict[str, float] = {}
    for c_text, c_lp in continuations:
        a = lw + c_text.split()
        for p_text, p_lp in predecessors:
            b = p_text.split() + rw
            bridge = _find_bridge(a, b, window, len(lw), len(rw))
            if bridge is None:
                continue
            total = c_lp + p_lp
            if bridge not in best or total > best[bridge]:
                best[bridge] = total

    if not best:
        raise NoBridgeFoundError(
            f"no {window}-word overlap within {max_bridge_tokens} tokens")
    ranked = sorted(best.items(), key=lambda kv: (-kv[1], kv[0]))
    return [Candidate(text=t, extent=ExtentLevel.SPAN, lm_logprob=lp,
                      n_tokens=max(len(t.split()), 1), score=lp)
            for t, lp in ranked[:k]]


def _find_bridge(a: list[str], b: list[str], w: int,
                 n_left: int, n_right: int) -> str | None:
    """First overlap window between streams a (left + continuation) and
    b (predecessor + right); returns the words strictly between the fixed
    left tail and right head of the merged stream."""
    if len(a) < w or len(b) < w:
        return None
    for i in range(len(a) - w + 1):
        win = a[i:i + w]
        for j in range(len(b) - w + 1):
            if b[j:j + w] == win:
                merged = a[:i + w] + b[j + w:]
                bridge = merged[n_left:len(merged) - n_right]
                return " ".join(bridge)
    return None
