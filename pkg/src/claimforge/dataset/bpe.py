"""Byte-level BPE tokenizer trained greedily on pair frequencies.

Tokens are stored as strings through a byte<->unicode bijection (every raw
byte gets a printable single-character stand-in), which keeps the vocabulary
JSON-serializable while staying lossless on arbitrary UTF-8 input: unseen
bytes simply fall back to their single-byte tokens.

Merges never cross whitespace boundaries: text is pre-split into runs of
non-space and runs of space characters, and pairs are counted within runs.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field

from ..errors import EmptyCorpusError, InvalidConfigError, IoError, UnknownIdError

DEFAULT_PAD = "<|pad|>"
DEFAULT_BOS = "<|start|>"
DEFAULT_EOS = "<|end|>"
DEFAULT_SEP = "<|dep|>"

VOCAB_FILE_VERSION = 1

_PRETOKEN_RE = re.compile(r"\S+|\s+")


def _bytes_to_unicode() -> dict[int, str]:
    """Bijection raw byte -> printable unicode char, as in byte-level BPE."""
    keep = (list(range(ord("!"), ord("~") + 1))
            + list(range(ord("\xa1"), ord("\xac") + 1))
            + list(range(ord("\xae"), 256)))
    chars = keep[:]
    n = 0
    for b in range(256):
        if b not in keep:
            keep.append(b)
            chars.append(256 + n)
            n += 1
    return dict(zip(keep, (chr(c) if isinstance(c, int) else c for c in chars)))


_BYTE_TO_CHAR = _bytes_to_unicode()
_CHAR_TO_BYTE = {c: b for b, c in _BYTE_TO_CHAR.items()}


def _to_char_form(text: str) -> str:
    return "".join(_BYTE_TO_CHAR[b] for b in text.encode("utf-8"))


def _from_char_form(chars: str) -> str:
    return bytes(_CHAR_TO_BYTE[c] for c in chars).decode("utf-8", errors="replace")


@dataclass(frozen=True)
class SpecialTokens:
    bos: str = DEFAULT_BOS
    eos: str = DEFAULT_EOS
    sep: str = DEFAULT_SEP
    pad: str = DEFAULT_PAD

    def as_tuple(self) -> tuple[str, str, str, str]:
        return (self.pad, self.bos, self.eos, self.sep)


@dataclass(frozen=True)
class TokenSequence:
    ids: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.ids)


class Vocabulary:
    """Trained BPE vocabulary: specials, the 256 byte tokens, then merge results.

    Token ids are dense 0..len-1 in exactly that order, so replaying
    ``merges`` over the byte alphabet regenerates ``tokens``.
    """

    def __init__(self, merges: list[tuple[str, str]],
                 special: SpecialTokens = SpecialTokens()):
        self.special = special
        self.merges = list(merges)
        byte_tokens = [_BYTE_TO_CHAR[b] for b in range(256)]
        self.tokens: list[str] = list(special.as_tuple()) + byte_tokens \
            + [l + r for l, r in self.merges]
        if len(set(self.tokens)) != len(self.tokens):
            raise InvalidConfigError("vocabulary contains duplicate tokens")
        self.token_to_id = {t: i for i, t in enumerate(self.tokens)}
        self.merge_rank = {pair: i for i, pair in enumerate(self.merges)}
        self.pad_id = self.token_to_id[special.pad]
        self.bos_id = self.token_to_id[special.bos]
        self.eos_id = self.token_to_id[special.eos]
        self.sep_id = self.token_to_id[special.sep]
        self._special_split = re.compile(
            "(" + "|".join(re.escape(s) for s in special.as_tuple()) + ")")
        self._pretoken_cache: dict[str, tuple[int, ...]] = {}

    def __len__(self) -> int:
        return len(self.tokens)

    # -- encoding ---------------------------------------------------------

    def _bpe_pretoken(self, pretoken: str) -> tuple[int, ...]:
        cached = self._pretoken_cache.get(pretoken)
        if cached is not None:
            return cached
        parts = list(_to_char_form(pretoken))
        while len(parts) >= 2:
            best = None
            best_rank = None
            for pair in zip(parts, parts[1:]):
                rank = self.merge_rank.get(pair)
                if rank is not None and (best_rank is None or rank < best_rank):
                    best, best_rank = pair, rank
            if best is None:
                break
            merged = best[0] + best[1]
            out = []
            i = 0
            while i < len(parts):
                if (i < len(parts) - 1 and parts[i] == best[0]
                        and parts[i + 1] == best[1]):
                    out.append(merged)
                    i += 2
                else:
                    out.append(parts[i])
                    i += 1
            parts = out
        ids = tuple(self.token_to_id[p] for p in parts)
        if len(self._pretoken_cache) < 100_000:
            self._pretoken_cache[pretoken] = ids
        return ids

    def encode(self, text: str) -> TokenSequence:
        ids: list[int] = []
        for chunk in self._special_split.split(text):
            if not chunk:
                continue
            if chunk in self.token_to_id and chunk in self.special.as_tuple():
                ids.append(self.token_to_id[chunk])
                continue
            for pretoken in _PRETOKEN_RE.findall(chunk):
                ids.extend(self._bpe_pretoken(pretoken))
        return TokenSequence(ids=tuple(ids))

    def decode(self, ids) -> str:
        seq = ids.ids if isinstance(ids, TokenSequence) else ids
        out = []
        buf = []  # char-form run; multi-byte characters may span tokens
        specials = set(self.special.as_tuple())
        for i in seq:
            if not 0 <= i < len(self.tokens):
                raise UnknownIdError(f"token id {i} outside vocabulary of "
                                     f"size {len(self.tokens)}")
            tok = self.tokens[i]
            if tok in specials:
                if buf:
                    out.append(_from_char_form("".join(buf)))
                    buf.clear()
                out.append(tok)
            else:
                buf.append(tok)
        if buf:
            out.append(_from_char_form("".join(buf)))
        return "".join(out)

    # -- persistence ------------------------------------------------------

    def vocab_hash(self) -> str:
        payload = json.dumps(
            {"tokens": self.tokens, "merges": self.merges,
             "special": self.special.as_tuple()},
            ensure_ascii=True, sort_keys=True)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    def save(self, path) -> None:
        data = {
            "version": VOCAB_FILE_VERSION,
            "tokens": self.tokens,
            "merges": [list(m) for m in self.merges],
            "special": {"bos": self.special.bos, "eos": self.special.eos,
                        "sep": self.special.sep, "pad": self.special.pad},
        }
        with open(path, "w", encoding="utf-8") as f:
            json.dump(data, f, ensure_ascii=True)

    @classmethod
    def load(cls, path) -> "Vocabulary":
        try:
            with open(path, encoding="utf-8") as f:
                data = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise IoError(f"cannot read vocabulary file {path}: {e}") from e
        if data.get("version") != VOCAB_FILE_VERSION:
            raise InvalidConfigError(
                f"unsupported vocabulary file version {data.get('version')}")
        vocab = cls(
            merges=[tuple(m) for m in data["merges"]],
            special=SpecialTokens(**data["special"]),
        )
        if vocab.tokens != data["tokens"]:
            raise InvalidConfigError(
                "vocabulary tokens do not replay from merges; file corrupt")
        return vocab


def train_bpe(records, target_vocab_size: int,
              special: SpecialTokens = SpecialTokens()) -> Vocabulary:
    """Greedy highest-frequency pair merging until the target size.

    Ties break on the lexicographically smallest (left, right) pair; merging
    stops early when no pair occurs at least twice.  A merge whose result
    would collide with a special token string is skipped.
    """
    texts = [r.text if hasattr(r, "text") else r for r in records]
    texts = [t for t in texts if t]
    if not texts:
        raise EmptyCorpusError("no text to train BPE on")
    base_size = 256 + len(special.as_tuple())
    if target_vocab_size < base_size:
        raise InvalidConfigError(
            f"target_vocab_size {target_vocab_size} below byte alphabet plus "
            f"specials ({base_size})")

    # Frequency of each pretoken, in char-form, as a tuple of current parts.
    word_freq: dict[tuple[str, ...], int] = {}
    for text in texts:
        for pretoken in _PRETOKEN_RE.findall(text):
            key = tuple(_to_char_form(pretoken))
            word_freq[key] = word_freq.get(key, 0) + 1

    # Forbid merges that would collide with a special token or re-create an
    # existing token string via a different pair (ids must stay unique).
    forbidden = set(special.as_tuple())
    merges: list[tuple[str, str]] = []
    num_merges = target_vocab_size - base_size
    for _ in range(num_merges):
        pair_counts: dict[tuple[str, str], int] = {}
        for word, freq in word_freq.items():
            for pair in zip(word, word[1:]):
                pair_counts[pair] = pair_counts.get(pair, 0) + freq
        candidates = {p: c for p, c in pair_counts.items()
                      if c >= 2 and (p[0] + p[1]) not in forbidden}
        if not candidates:
            break
        best = min(candidates, key=lambda p: (-candidates[p], p))
        merges.append(best)
        merged = best[0] + best[1]
        forbidden.add(merged)
        new_freq: dict[tuple[str, ...], int] = {}
        for word, freq in word_freq.items():
            out = []
            i = 0
            while i < len(word):
                if (i < len(word) - 1 and word[i] == best[0]
                        and word[i + 1] == best[1]):
                    out.append(merged)
                    i += 2
                else:
                    out.append(word[i])
                    i += 1
            key = tuple(out)
            new_freq[key] = new_freq.get(key, 0) + freq
        word_freq = new_freq

    return Vocabulary(merges=merges, special=special)


def encode(text: str, vocab: Vocabulary) -> TokenSequence:
    return vocab.encode(text)


def decode(seq, vocab: Vocabulary) -> str:
    return vocab.decode(seq)
