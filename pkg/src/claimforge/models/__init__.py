from .checkpoint import load_checkpoint, save_checkpoint
from .classifier import EncoderClassifier
from .config import ModelConfig, TrainConfig
from .decoder import DecoderLM, forward_lm
from .gradcheck import (
    gradient_check,
    gradient_check_classifier,
    gradient_check_lm,
)
from .trainer import (
    EncodedDataset,
    LabeledDataset,
    evaluate_classifier_exact,
    evaluate_lm,
    fine_tune,
    train_classifier,
    train_lm,
)

__all__ = [
    "DecoderLM",
    "EncodedDataset",
    "EncoderClassifier",
    "LabeledDataset",
    "ModelConfig",
    "TrainConfig",
    "evaluate_classifier_exact",
    "evaluate_lm",
    "fine_tune",
    "forward_lm",
    "gradient_check",
    "gradient_check_classifier",
    "gradient_check_lm",
    "load_checkpoint",
    "save_checkpoint",
    "train_classifier",
    "train_lm",
]


def init_model(config, kind: str = "lm", num_labels: int | None = None):
    """Factory over the two model kinds."""
    if kind == "lm":
        return DecoderLM(config)
    if kind == "classifier":
        if num_labels is None:
            raise ValueError("classifier requires num_labels")
        return EncoderClassifier(config, num_labels)
    raise ValueError(f"unknown model kind {kind!r}")
