"""Relevance judges: the scoring interface, a synthetic oracle, and an HTTP backend."""

from .base import (
    BatchScoringError,
    DegenerateResponseError,
    DuelRequest,
    LabelLogits,
    PointwiseRequest,
    Scorer,
    ScoreRequest,
    ScoringError,
    SetwiseRequest,
    TemplateError,
    TransientBackendError,
    TripletRequest,
    setwise_labels,
)
from .llm import LlmBackendConfig, LlmScorer
from .oracle import OracleConfig, OracleScorer, oracle_latent
from .prompts import PromptTemplates, build_prompt, check_placeholders

__all__ = [
    "BatchScoringError",
    "DegenerateResponseError",
    "DuelRequest",
    "LabelLogits",
    "LlmBackendConfig",
    "LlmScorer",
    "OracleConfig",
    "OracleScorer",
    "PointwiseRequest",
    "PromptTemplates",
    "ScoreRequest",
    "Scorer",
    "ScoringError",
    "SetwiseRequest",
    "TemplateError",
    "TransientBackendError",
    "TripletRequest",
    "build_prompt",
    "check_placeholders",
    "oracle_latent",
    "setwise_labels",
]
