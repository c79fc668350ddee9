"""Generation engine: extent cuts, backward decoding, bridging, look-ahead,
constraint filtering, and sampling strategies.

Semantic oracles run against tiny models that memorize one claim, so greedy
decoding must reproduce the training text and every boundary is known.
"""
import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from claimforge.dataset.bpe import train_bpe
from claimforge.dataset.records import Direction, reverse_words
from claimforge.errors import (
    ContextTooLongError,
    InfeasibleConstraintsError,
    InvalidConfigError,
    ModelNotLoadedError,
    NoBridgeFoundError,
    VocabHashMismatchError,
)
from claimforge.generation import (
    Candidate,
    ConstraintSet,
    ExtentLevel,
    GenerationRequest,
    ModelBundle,
    SamplingConfig,
    SamplingStrategy,
    apply_constraints,
    bridge_spans,
    decode_stream,
    generate_backward,
    generate_candidates,
    insert_text,
    lookahead_spans,
    sample_next_token,
)
from claimforge.models import DecoderLM, ModelConfig, TrainConfig
from claimforge.models.functional import log_softmax
from claimforge.models.trainer import EncodedDataset, evaluate_lm, train_lm

MICRO = ("a pump coupled to the housing; a seal mounted on the pump; "
         "and wherein the filter controls the seal.")

GREEDY = SamplingConfig(max_tokens=60, seed=0)


@pytest.fixture(scope="module")
def rig():
    """Forward and backward LMs that memorize MICRO, plus their vocab."""
    vocab = train_bpe([MICRO], 300)
    cfg = ModelConfig(vocab_size=len(vocab.tokens), n_layers=2, n_heads=2,
                      d_model=32, d_ff=64, context_len=128, seed=0)
    tc = TrainConfig(learning_rate=3e-3, batch_size=4, max_steps=200, seed=0)
    fwd = DecoderLM(cfg)
    fwd.vocab_hash = vocab.vocab_hash()
    ds_f = EncodedDataset.from_texts([MICRO] * 4, vocab)
    train_lm(fwd, ds_f, tc)
    assert evaluate_lm(fwd, ds_f) < 0.05, "rig failed to memorize"
    bwd = DecoderLM(cfg)
    bwd.vocab_hash = vocab.vocab_hash()
    ds_b = EncodedDataset.from_texts([reverse_words(MICRO)] * 4, vocab)
    train_lm(bwd, ds_b, tc)
    assert evaluate_lm(bwd, ds_b) < 0.05, "rig failed to memorize reversed"
    return ModelBundle(vocab=vocab, forward=fwd, backward=bwd)


def one(bundle, ctx, extent, direction=Direction.FORWARD, sc=GREEDY, k=1):
    req = GenerationRequest(context_text=ctx, direction=direction,
                            extent=extent, k=k, sampling=sc)
    return generate_candidates(bundle, req)


class TestForwardExtents:
    def test_word_is_the_memorized_next_word(self, rig):
        [c] = one(rig, "a pump", ExtentLevel.WORD)
        assert c.text == " coupled"

    def test_word_cut_excludes_trailing_space(self, rig):
        [c] = one(rig, "a pump coupled", ExtentLevel.WORD)
        assert c.text == " to"

    def test_token_is_a_prefix_of_word(self, rig):
        [t] = one(rig, "a pump", ExtentLevel.TOKEN)
        [w] = one(rig, "a pump", ExtentLevel.WORD)
        assert t.text.strip()
        assert w.text.startswith(t.text)
        assert t.n_tokens <= w.n_tokens

    def test_phrase_stops_at_first_delimiter(self, rig):
        [c] = one(rig, "a pump", ExtentLevel.PHRASE)
        assert c.text == " coupled to the housing;"

    def test_span_stops_at_span_boundary(self, rig):
        [c] = one(rig, "a pump", ExtentLevel.SPAN)
        assert c.text == " coupled to the housing;"

    def test_sentence_runs_to_the_period(self, rig):
        [c] = one(rig, "a pump", ExtentLevel.SENTENCE,
                  sc=SamplingConfig(max_tokens=80, seed=0))
        assert c.text == " " + MICRO[len("a pump "):]
        assert c.text.endswith(".")

    def test_candidate_carries_negative_logprob_and_counts(self, rig):
        [c] = one(rig, "a pump", ExtentLevel.SPAN)
        assert c.lm_logprob <= 0.0
        assert c.n_tokens >= 1
        assert c.score == pytest.approx(c.lm_logprob / c.n_tokens)

    def test_immediate_eos_yields_no_candidates(self, rig):
        sc = SamplingConfig(max_tokens=20, seed=0)
        assert one(rig, MICRO, ExtentLevel.WORD, sc=sc) == []


class TestBackward:
    def test_word_reads_correctly_before_context(self, rig):
        [c] = one(rig, "controls the seal.", ExtentLevel.WORD,
                  direction=Direction.BACKWARD)
        assert c.text == "filter"

    def test_span_recovers_the_preceding_span(self, rig):
        [c] = one(rig, "and wherein the filter controls the seal.",
                  ExtentLevel.SPAN, direction=Direction.BACKWARD)
        assert c.text == "a seal mounted on the pump;"

    def test_sentence_reaches_the_claim_start(self, rig):
        [c] = one(rig, "wherein the filter controls the seal.",
                  ExtentLevel.SENTENCE, direction=Direction.BACKWARD,
                  sc=SamplingConfig(max_tokens=80, seed=0))
        assert c.text == ("a pump coupled to the housing; "
                          "a seal mounted on the pump; and")

    def test_generate_backward_forces_direction(self, rig):
        req = GenerationRequest(context_text="controls the seal.",
                                direction=Direction.FORWARD,
                                extent=ExtentLevel.WORD, k=1, sampling=GREEDY)
        [c] = generate_backward(rig, req)
        assert c.text == "filter"

    def test_insertion_before_context_is_contiguous(self, rig):
        ctx = "and wherein the filter controls the seal."
        [c] = one(rig, ctx, ExtentLevel.SPAN, direction=Direction.BACKWARD)
        merged = insert_text(ctx, c.text, Direction.BACKWARD)
        assert merged == c.text + " " + ctx
        assert merged in MICRO


class TestSampling:
    def test_greedy_picks_the_argmax(self, rig):
        vocab = rig.vocab
        ids = [vocab.bos_id] + list(vocab.encode("a pump").ids)
        tok, lp = sample_next_token(rig.forward, ids, GREEDY)
        logits = rig.forward.logits_for(ids)[-1]
        assert tok == int(np.argmax(logits))
        assert lp == pytest.approx(float(log_softmax(logits)[tok]))

    def test_top_k_one_equals_greedy(self, rig):
        vocab = rig.vocab
        ids = [vocab.bos_id] + list(vocab.encode("a seal").ids)
        g, _ = sample_next_token(rig.forward, ids, GREEDY)
        t, _ = sample_next_token(
            rig.forward, ids,
            SamplingConfig(strategy=SamplingStrategy.TOP_K, top_k=1,
                           max_tokens=8, seed=5))
        assert t == g

    def test_cold_temperature_matches_greedy(self, rig):
        vocab = rig.vocab
        ids = [vocab.bos_id] + list(vocab.encode("a seal mounted").ids)
        g, _ = sample_next_token(rig.forward, ids, GREEDY)
        t, _ = sample_next_token(
            rig.forward, ids,
            SamplingConfig(strategy=SamplingStrategy.TEMPERATURE,
                           temperature=1e-6, max_tokens=8, seed=5))
        assert t == g

    def test_reported_logprob_ignores_temperature(self, rig):
        vocab = rig.vocab
        ids = [vocab.bos_id] + list(vocab.encode("a pump").ids)
        rng = np.random.default_rng(3)
        tok, lp = sample_next_token(
            rig.forward, ids,
            SamplingConfig(strategy=SamplingStrategy.TEMPERATURE,
                           temperature=4.0, max_tokens=8, seed=3), rng)
        logits = rig.forward.logits_for(ids)[-1]
        assert lp == pytest.approx(float(log_softmax(logits)[tok]))
        assert lp <= 0.0

    def test_top_k_request_is_deterministic_per_seed(self, rig):
        sc = SamplingConfig(strategy=SamplingStrategy.TOP_K, top_k=5,
                            max_tokens=20, seed=11)
        a = one(rig, "a seal", ExtentLevel.WORD, sc=sc, k=3)
        b = one(rig, "a seal", ExtentLevel.WORD, sc=sc, k=3)
        assert [(c.text, c.score) for c in a] == [(c.text, c.score) for c in b]

    def test_candidates_are_distinct_and_sorted_by_score(self, rig):
        sc = SamplingConfig(strategy=SamplingStrategy.TOP_K, top_k=5,
                            max_tokens=20, seed=1)
        cands = one(rig, "a seal", ExtentLevel.WORD, sc=sc, k=3)
        texts = [c.text for c in cands]
        assert len(texts) == len(set(texts))
        scores = [c.score for c in cands]
        assert scores == sorted(scores, reverse=True)

    def test_validation_rejects_bad_sampling_values(self):
        with pytest.raises(InvalidConfigError):
            SamplingConfig(top_k=0)
        with pytest.raises(InvalidConfigError):
            SamplingConfig(temperature=0.0)
        with pytest.raises(InvalidConfigError):
            SamplingConfig(max_tokens=0)


class TestContextWindow:
    def test_budget_beyond_window_raises(self, rig):
        with pytest.raises(ContextTooLongError):
            one(rig, "a pump", ExtentLevel.WORD,
                sc=SamplingConfig(max_tokens=128, seed=0))

    def test_long_context_keeps_the_cursor_side(self, rig):
        from claimforge.generation.engine import _prepare_context_ids

        long_ctx = ("x " * 300) + "a pump coupled to the"
        full = list(rig.vocab.encode(long_ctx).ids)
        room = rig.forward.config.context_len - 60 - 1
        ids = _prepare_context_ids(rig.forward, rig.vocab, long_ctx, 60)
        assert ids[0] == rig.vocab.bos_id
        assert ids[1:] == full[-room:]
        assert len(ids) <= rig.forward.config.context_len - 60

    def test_empty_context_decodes_from_sequence_start(self, rig):
        text, lp, n = decode_stream(rig.forward, rig.vocab, "", GREEDY)
        assert text.startswith("a pump coupled")
        assert lp <= 0.0 and n >= 1


class TestBundle:
    def test_missing_direction_raises(self, rig):
        solo = ModelBundle(vocab=rig.vocab, forward=rig.forward)
        with pytest.raises(ModelNotLoadedError):
            one(solo, "controls the seal.", ExtentLevel.WORD,
                direction=Direction.BACKWARD)

    def test_vocab_hash_mismatch_raises(self, rig):
        stranger = DecoderLM(rig.forward.config)
        stranger.vocab_hash = "0" * 64
        tampered = ModelBundle(vocab=rig.vocab, forward=stranger)
        with pytest.raises(VocabHashMismatchError):
            one(tampered, "a pump", ExtentLevel.WORD)


class TestInsertText:
    def test_forward_adds_a_single_joining_space(self):
        assert insert_text("a pump", "coupled", Direction.FORWARD) == \
            "a pump coupled"

    def test_forward_respects_existing_space(self):
        assert insert_text("a pump", " coupled", Direction.FORWARD) == \
            "a pump coupled"

    def test_backward_prepends(self):
        assert insert_text("the seal.", "controls", Direction.BACKWARD) == \
            "controls the seal."

    def test_empty_document_keeps_addition(self):
        assert insert_text("", " lead", Direction.FORWARD) == "lead"
        assert insert_text("", "lead ", Direction.BACKWARD) == "lead "


class TestConstraints:
    BASE = "A pump comprising a housing."

    @staticmethod
    def cand(text, extent=ExtentLevel.SPAN):
        return Candidate(text=text, extent=extent, lm_logprob=-1.0,
                         n_tokens=3)

    def test_exclude_rejects_case_insensitively(self):
        cs = ConstraintSet(must_exclude=("Seal",))
        out = apply_constraints([self.cand(" the seal leaks")], cs, self.BASE)
        assert out[0].rejected_reasons == ("must_exclude:Seal",)

    def test_include_binds_only_span_and_sentence(self):
        cs = ConstraintSet(must_include=("housing",))
        span = self.cand(" nothing relevant", ExtentLevel.SPAN)
        word = self.cand(" nothing", ExtentLevel.WORD)
        out = apply_constraints([span, word], cs, self.BASE)
        assert out[0].rejected_reasons == ("must_include:housing",)
        assert out[1].accepted

    def test_include_satisfied_by_any_pattern(self):
        cs = ConstraintSet(must_include=("widget", "housing"))
        out = apply_constraints(
            [self.cand(" near the housing wall")], cs, self.BASE)
        assert out[0].accepted

    def test_new_missing_antecedent_is_rejected(self):
        cs = ConstraintSet(enforce_antecedent_basis=True)
        out = apply_constraints(
            [self.cand(" the seal leaks"), self.cand(" the housing cracks")],
            cs, self.BASE)
        assert out[0].rejected_reasons == ("MissingAntecedent:seal",)
        assert out[1].accepted

    def test_preexisting_violation_is_not_charged_to_the_candidate(self):
        # the context itself lacks an antecedent for "the lever"
        base = "The lever moves a pump."
        cs = ConstraintSet(enforce_antecedent_basis=True)
        out = apply_constraints([self.cand(" near the pump")], cs, base)
        assert out[0].accepted

    def test_overlapping_include_exclude_rejected_at_build(self):
        with pytest.raises(InvalidConfigError):
            ConstraintSet(must_include=("seal",), must_exclude=("seal",))

    def test_exhausted_budget_raises_infeasible(self, rig):
        req = GenerationRequest(
            context_text="a pump", extent=ExtentLevel.SPAN, k=1,
            constraints=ConstraintSet(must_exclude=("the",)),
            sampling=GREEDY)
        with pytest.raises(InfeasibleConstraintsError):
            generate_candidates(rig, req)

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.text(
        alphabet="abcdefgh ;.", min_size=1, max_size=30), min_size=1,
        max_size=5),
        st.text(alphabet="abcdefgh", min_size=1, max_size=4))
    def test_accepted_candidates_never_contain_excluded(self, texts, pat):
        cs = ConstraintSet(must_exclude=(pat,))
        cands = [self.cand(t) for t in texts]
        for c in apply_constraints(cands, cs, ""):
            if c.accepted:
                assert pat.lower() not in c.text.lower()
            else:
                assert any(r.startswith("must_exclude:")
                           for r in c.rejected_reasons)


class TestLookahead:
    def test_chain_reconstructs_the_memorized_claim(self, rig):
        sc = SamplingConfig(max_tokens=40, seed=0)
        chain = lookahead_spans(rig, "a pump", 3, sc)
        assert [c.text for c in chain] == [
            " coupled to the housing;",
            " a seal mounted on the pump;",
            " and wherein the filter controls the seal.",
        ]
        doc = "a pump"
        for c in chain:
            doc = insert_text(doc, c.text, Direction.FORWARD)
        assert doc == MICRO

    def test_zero_lookahead_rejected(self, rig):
        with pytest.raises(ValueError):
            lookahead_spans(rig, "a pump", 0, GREEDY)


class TestBridge:
    def test_bridge_fills_the_gap_exactly(self, rig):
        left = "a pump coupled to the housing;"
        right = "and wherein the filter controls the seal."
        out = bridge_spans(rig, left, right, max_bridge_tokens=40,
                           window=2, k=3, sc=GREEDY)
        assert out[0].text == "a seal mounted on the pump;"
        merged = insert_text(insert_text(left, out[0].text,
                                         Direction.FORWARD),
                             right, Direction.FORWARD)
        assert merged == MICRO

    def test_adjacent_halves_need_an_empty_bridge(self, rig):
        # the shared window already sits across the boundary
        left = "mounted on the"
        right = "on the pump;"
        out = bridge_spans(rig, left, right, max_bridge_tokens=0, window=2)
        assert out[0].text == ""

    def test_disjoint_texts_raise(self, rig):
        with pytest.raises(NoBridgeFoundError):
            bridge_spans(rig, "qq ww ee", "zz xx cc", max_bridge_tokens=0,
                         window=2)

    def test_bridge_keeps_left_and_right_untouched(self, rig):
        left = "a pump coupled to the housing;"
        right = "and wherein the filter controls the seal."
        out = bridge_spans(rig, left, right, max_bridge_tokens=40,
                           window=2, k=3, sc=GREEDY)
        for cand in out:
            merged = insert_text(insert_text(left, cand.text,
                                             Direction.FORWARD),
                                 right, Direction.FORWARD)
            assert merged.startswith(left)
            assert merged.endswith(right)


class TestRequestValidation:
    def test_k_must_be_positive(self):
        with pytest.raises(InvalidConfigError):
            GenerationRequest(context_text="x", k=0)

    def test_lookahead_must_be_positive(self):
        with pytest.raises(InvalidConfigError):
            GenerationRequest(context_text="x", proximity_lookahead=0)

    def test_candidate_accepted_flag_tracks_reasons(self):
        ok = Candidate(text="x", extent=ExtentLevel.WORD, lm_logprob=-1.0,
                       n_tokens=1)
        bad = dataclasses.replace(ok, rejected_reasons=("must_exclude:x",))
        assert ok.accepted and not bad.accepted
