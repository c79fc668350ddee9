import pytest
from hypothesis import given, settings, strategies as st

from claimforge.dataset.bpe import (
    SpecialTokens,
    Vocabulary,
    decode,
    encode,
    train_bpe,
)
from claimforge.errors import EmptyCorpusError, InvalidConfigError, UnknownIdError

BASE = 260  # 256 byte tokens + 4 specials


@pytest.fixture(scope="module")
def small_vocab():
    corpus = ["aaab aaab", "the sensor receives the signal",
              "the method comprising the steps"]
    return train_bpe(corpus, BASE + 30)


class TestTraining:
    def test_first_merge_is_most_frequent_pair(self):
        vocab = train_bpe(["aaab aaab"], BASE + 1)
        assert vocab.merges[0] == ("a", "a")

    def test_zero_merges_gives_base_alphabet(self):
        vocab = train_bpe(["some text"], BASE)
        assert len(vocab) == BASE
        assert vocab.merges == []

    def test_below_base_size_rejected(self):
        with pytest.raises(InvalidConfigError):
            train_bpe(["text"], 100)

    def test_empty_corpus(self):
        with pytest.raises(EmptyCorpusError):
            train_bpe([], BASE + 5)
        with pytest.raises(EmptyCorpusError):
            train_bpe([""], BASE + 5)

    def test_stops_when_no_pair_repeats(self):
        # every pair unique -> no merges possible
        vocab = train_bpe(["abcdefg"], BASE + 50)
        assert vocab.merges == []

    def test_deterministic(self, tmp_path):
        corpus = ["the quick brown fox", "the slow brown dog"]
        v1 = train_bpe(corpus, BASE + 20)
        v2 = train_bpe(corpus, BASE + 20)
        p1, p2 = tmp_path / "v1.json", tmp_path / "v2.json"
        v1.save(p1)
        v2.save(p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_merges_replay_to_tokens(self, small_vocab):
        expected = (list(small_vocab.special.as_tuple())
                    + small_vocab.tokens[4:260]
                    + [l + r for l, r in small_vocab.merges])
        assert small_vocab.tokens == expected

    def test_specials_never_produced_by_merges(self, small_vocab):
        merged = {l + r for l, r in small_vocab.merges}
        assert not merged & set(small_vocab.special.as_tuple())

    def test_ids_dense(self, small_vocab):
        assert sorted(small_vocab.token_to_id.values()) == \
            list(range(len(small_vocab)))


class TestRoundTrip:
    def test_empty_string(self, small_vocab):
        assert encode("", small_vocab).ids == ()
        assert decode([], small_vocab) == ""

    @pytest.mark.parametrize("text", [
        "aaab aaab",
        "the sensor receives the signal",
        "unseen words entirely",
        "punct!? (and; braces)",
        "unicode: café — 中文",
        "  leading and   multiple   spaces ",
        "tabs\tand\nnewlines",
    ])
    def test_round_trip(self, small_vocab, text):
        assert decode(encode(text, small_vocab), small_vocab) == text

    @settings(max_examples=200)
    @given(st.text())
    def test_round_trip_random_unicode(self, small_vocab, text):
        assert decode(encode(text, small_vocab), small_vocab) == text

    def test_special_tokens_encode_to_single_ids(self, small_vocab):
        sp = small_vocab.special
        seq = encode(f"a {sp.sep} b", small_vocab)
        assert small_vocab.sep_id in seq.ids
        assert decode(seq, small_vocab) == f"a {sp.sep} b"

    def test_bos_eos_ids(self, small_vocab):
        assert decode([small_vocab.bos_id, small_vocab.eos_id], small_vocab) \
            == small_vocab.special.bos + small_vocab.special.eos

    def test_unknown_id(self, small_vocab):
        with pytest.raises(UnknownIdError):
            decode([len(small_vocab)], small_vocab)
        with pytest.raises(UnknownIdError):
            decode([-1], small_vocab)

    def test_all_ids_below_vocab_size(self, small_vocab):
        seq = encode("the sensor receives the signal again", small_vocab)
        assert all(0 <= i < len(small_vocab) for i in seq.ids)


class TestPersistence:
    def test_save_load_round_trip(self, small_vocab, tmp_path):
        path = tmp_path / "vocab.json"
        small_vocab.save(path)
        loaded = Vocabulary.load(path)
        assert loaded.tokens == small_vocab.tokens
        assert loaded.merges == small_vocab.merges
        assert loaded.vocab_hash() == small_vocab.vocab_hash()
        text = "the sensor receives the signal"
        assert loaded.encode(text) == small_vocab.encode(text)

    def test_hash_differs_for_different_vocabs(self):
        v1 = train_bpe(["aaab aaab"], BASE + 2)
        v2 = train_bpe(["zzzy zzzy"], BASE + 2)
        assert v1.vocab_hash() != v2.vocab_hash()

    def test_custom_specials(self):
        sp = SpecialTokens(bos="<B>", eos="<E>", sep="<S>", pad="<P>")
        vocab = train_bpe(["text body here"], BASE + 3, special=sp)
        assert vocab.tokens[:4] == ["<P>", "<B>", "<E>", "<S>"]
        assert decode(encode("x <S> y", vocab), vocab) == "x <S> y"
