from .bpe import SpecialTokens, TokenSequence, Vocabulary, decode, encode, train_bpe
from .records import (
    Direction,
    RecordFormat,
    TrainingRecord,
    build_records,
    reverse_record,
    split_train_val,
    truncate_ids,
)

__all__ = [
    "Direction",
    "RecordFormat",
    "SpecialTokens",
    "TokenSequence",
    "TrainingRecord",
    "Vocabulary",
    "build_records",
    "decode",
    "encode",
    "reverse_record",
    "split_train_val",
    "train_bpe",
    "truncate_ids",
]
