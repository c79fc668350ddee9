"""Request and result types for the auto-complete search."""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from ..dataset.records import Direction
from ..errors import InvalidConfigError


class ExtentLevel(Enum):
    TOKEN = "token"
    WORD = "word"
    PHRASE = "phrase"
    SPAN = "span"
    SENTENCE = "sentence"


class SamplingStrategy(Enum):
    GREEDY = "greedy"
    TOP_K = "top_k"
    TEMPERATURE = "temperature"


@dataclass(frozen=True)
class SamplingConfig:
    strategy: SamplingStrategy = SamplingStrategy.GREEDY
    top_k: int = 40
    temperature: float = 1.0
    max_tokens: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.top_k < 1:
            raise InvalidConfigError(f"top_k must be >= 1, got {self.top_k}")
        if self.temperature <= 0:
            raise InvalidConfigError(
                f"temperature must be > 0, got {self.temperature}")
        if self.max_tokens < 1:
            raise InvalidConfigError(
                f"max_tokens must be >= 1, got {self.max_tokens}")


@dataclass(frozen=True)
class ConstraintSet:
    must_include: tuple[str, ...] = ()
    must_exclude: tuple[str, ...] = ()
    enforce_antecedent_basis: bool = False

    def __post_init__(self):
        overlap = set(self.must_include) & set(self.must_exclude)
        if overlap:
            raise InvalidConfigError(
                f"patterns in both include and exclude: {sorted(overlap)}")

    @property
    def empty(self) -> bool:
        return (not self.must_include and not self.must_exclude
                and not self.enforce_antecedent_basis)


@dataclass(frozen=True)
class GenerationRequest:
    context_text: str
    direction: Direction = Direction.FORWARD
    extent: ExtentLevel = ExtentLevel.WORD
    k: int = 5
    proximity_lookahead: int = 1
    constraints: ConstraintSet = field(default_factory=ConstraintSet)
    sampling: SamplingConfig = field(default_factory=SamplingConfig)

    def __post_init__(self):
        if self.k < 1:
            raise InvalidConfigError(f"k must be >= 1, got {self.k}")
        if self.proximity_lookahead < 1:
            raise InvalidConfigError(
                f"proximity_lookahead must be >= 1, got "
                f"{self.proximity_lookahead}")


@dataclass(frozen=True)
class Candidate:
    text: str
    extent: ExtentLevel
    lm_logprob: float
    n_tokens: int
    relevancy: float | None = None
    score: float | None = None
    rejected_reasons: tuple[str, ...] = ()

    @property
    def accepted(self) -> bool:
        return not self.rejected_reasons
