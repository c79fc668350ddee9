"""Model and training hyperparameter containers with validation."""
from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import InvalidConfigError


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    n_layers: int = 2
    n_heads: int = 2
    d_model: int = 64
    d_ff: int = 256
    context_len: int = 128
    seed: int = 0

    def __post_init__(self):
        if self.n_layers < 1:
            raise InvalidConfigError(f"n_layers must be >= 1, got {self.n_layers}")
        if self.n_heads < 1:
            raise InvalidConfigError(f"n_heads must be >= 1, got {self.n_heads}")
        if self.d_model < 1 or self.d_ff < 1 or self.vocab_size < 1:
            raise InvalidConfigError("d_model, d_ff and vocab_size must be >= 1")
        if self.d_model % self.n_heads != 0:
            raise InvalidConfigError(
                f"d_model {self.d_model} not divisible by n_heads {self.n_heads}")
        if self.context_len < 2:
            raise InvalidConfigError(
                f"context_len must be >= 2, got {self.context_len}")

    def to_dict(self) -> dict:
        return {"vocab_size": self.vocab_size, "n_layers": self.n_layers,
                "n_heads": self.n_heads, "d_model": self.d_model,
                "d_ff": self.d_ff, "context_len": self.context_len,
                "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 16
    max_steps: int = 100
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    grad_clip: float | None = 1.0
    seed: int = 0

    def __post_init__(self):
        # zero is allowed so a no-op run can prove the loop touches nothing
        if self.learning_rate < 0:
            raise InvalidConfigError("learning_rate must be >= 0")
        if self.batch_size < 1:
            raise InvalidConfigError("batch_size must be >= 1")
        if self.max_steps < 0:
            raise InvalidConfigError("max_steps must be >= 0")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise InvalidConfigError("betas must lie in [0, 1)")
        if self.eps <= 0:
            raise InvalidConfigError("eps must be > 0")
        if self.grad_clip is not None and self.grad_clip <= 0:
            raise InvalidConfigError("grad_clip must be > 0 when set")
