from .engine import (
    ModelBundle,
    apply_constraints,
    bridge_spans,
    decode_stream,
    generate_backward,
    generate_candidates,
    insert_text,
    lookahead_spans,
)
from .sampling import sample_next_token
from .types import (
    Candidate,
    ConstraintSet,
    ExtentLevel,
    GenerationRequest,
    SamplingConfig,
    SamplingStrategy,
)

__all__ = [
    "Candidate",
    "ConstraintSet",
    "ExtentLevel",
    "GenerationRequest",
    "ModelBundle",
    "SamplingConfig",
    "SamplingStrategy",
    "apply_constraints",
    "bridge_spans",
    "decode_stream",
    "generate_backward",
    "generate_candidates",
    "insert_text",
    "lookahead_spans",
    "sample_next_token",
]
