"""Training records built from parsed corpora.

Two record formats mirror the two baseline data layouts for claim
dependency: a dependent claim on its own, or its full independent-claim
chain prepended with a separator token.  Backward-direction records are the
word-reverse of their forward twins.
"""

from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass, replace
from enum import Enum

from ..errors import IoError, MissingParentError, TooFewPatentsError
from .bpe import DEFAULT_SEP


class RecordFormat(Enum):
    DEPENDENT_ALONE = "dependent-alone"
    INDEPENDENT_PREPENDED = "prepend"


class Direction(Enum):
    FORWARD = "forward"
    BACKWARD = "backward"


@dataclass(frozen=True)
class TrainingRecord:
    text: str
    patent_id: str
    claim_number: int
    format: RecordFormat
    direction: Direction = Direction.FORWARD

    def __post_init__(self):
        if not self.text:
            raise ValueError("training record text is empty")


def build_records(patent_records, fmt: RecordFormat,
                  sep: str = DEFAULT_SEP) -> list[TrainingRecord]:
    """One TrainingRecord per claim, direction Forward.

    Independent claims contribute their own text under both formats.  Under
    INDEPENDENT_PREPENDED, a dependent claim becomes its root-to-leaf chain
    joined by the separator token, so multi-level dependencies keep full
    context.
    """
    out: list[TrainingRecord] = []
    for patent in patent_records:
        by_number = {c.number: c for c in patent.claims}
        for claim in patent.claims:
            if claim.depends_on is None or fmt == RecordFormat.DEPENDENT_ALONE:
                text = claim.text
            else:
                chain = [claim]
                cur = claim
                while cur.depends_on is not None:
                    parent = by_number.get(cur.depends_on)
                    if parent is None:
                        raise MissingParentError(
                            f"patent {patent.patent_id} claim {cur.number} "
                            f"depends on absent claim {cur.depends_on}")
                    chain.append(parent)
                    cur = parent
                chain.reverse()
                text = f" {sep} ".join(c.text for c in chain)
            out.append(TrainingRecord(
                text=text, patent_id=patent.patent_id,
                claim_number=claim.number, format=fmt,
                direction=Direction.FORWARD))
    return out


def reverse_words(text: str) -> str:
    return " ".join(reversed(text.split()))


def reverse_record(r: TrainingRecord) -> TrainingRecord:
    """Word-reverse a forward record; the result reads right-to-left."""
    if r.direction != Direction.FORWARD:
        raise ValueError("reverse_record expects a Forward record")
    return replace(r, text=reverse_words(r.text), direction=Direction.BACKWARD)


def normalize_spaces(text: str) -> str:
    return re.sub(r"\s+", " ", text).strip()


def split_train_val(records: list[TrainingRecord], val_fraction: float,
                    seed: int) -> tuple[list[TrainingRecord], list[TrainingRecord]]:
    """Split by patent_id so no patent straddles the boundary."""
    if not 0 < val_fraction < 1:
        raise ValueError(f"val_fraction must be in (0, 1), got {val_fraction}")
    patent_ids = sorted({r.patent_id for r in records})
    if len(patent_ids) < 2:
        raise TooFewPatentsError(
            f"need at least 2 distinct patents, got {len(patent_ids)}")
    rng = random.Random(seed)
    shuffled = patent_ids[:]
    rng.shuffle(shuffled)
    n_val = min(len(patent_ids) - 1, max(1, round(val_fraction * len(patent_ids))))
    val_ids = set(shuffled[:n_val])
    train = [r for r in records if r.patent_id not in val_ids]
    val = [r for r in records if r.patent_id in val_ids]
    return train, val


def truncate_ids(ids, max_len: int, direction: Direction):
    """Cut overlong token sequences so the dependent-claim tail survives.

    Forward records drop from the left (the tail is the learning target);
    backward records, being word-reversed, drop from the right.
    """
    seq = list(ids)
    if len(seq) <= max_len:
        return seq
    if direction == Direction.FORWARD:
        return seq[-max_len:]
    return seq[:max_len]


def save_records(records: list[TrainingRecord], path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for r in records:
            f.write(json.dumps({
                "text": r.text, "patent_id": r.patent_id,
                "claim_number": r.claim_number, "format": r.format.value,
                "direction": r.direction.value,
            }, ensure_ascii=False) + "\n")


def load_records(path) -> list[TrainingRecord]:
    out = []
    try:
        with open(path, encoding="utf-8") as f:
            for line in f:
                if not line.strip():
                    continue
                d = json.loads(line)
                out.append(TrainingRecord(
                    text=d["text"], patent_id=d["patent_id"],
                    claim_number=d["claim_number"],
                    format=RecordFormat(d["format"]),
                    direction=Direction(d["direction"])))
    except (OSError, json.JSONDecodeError, KeyError) as e:
        raise IoError(f"cannot read records file {path}: {e}") from e
    return out
