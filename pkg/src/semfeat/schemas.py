"""Pydantic request/response models for the HTTP service."""

from __future__ import annotations

from typing import Optional

from pydantic import BaseModel, Field


class CreateSessionRequest(BaseModel):
    task: str
    epsilon: float = Field(default=0.01, gt=0.0, le=1.0)
    seed: int = 0
    auto_seed: bool = False


class LabelRequest(BaseModel):
    doc_id: str
    label: int = Field(ge=0, le=1)


class RetrainRequest(BaseModel):
    scheme: str


class DictionaryPayload(BaseModel):
    name: str
    terms: list[list[str]]
    gamma: Optional[float] = Field(default=None, gt=0.0, le=1.0)


class TrainContextRequest(BaseModel):
    negative_ratio: Optional[float] = Field(default=None, gt=0.0)
    seed: Optional[int] = None
    l2_lambda: Optional[float] = Field(default=None, gt=0.0)
    max_positives: Optional[int] = Field(default=None, gt=0)


class CalibrateRequest(BaseModel):
    target: Optional[float] = Field(default=None, gt=0.0)


class DictionaryView(BaseModel):
    id: str
    name: str
    terms: list[list[str]]
    gamma: Optional[float]
    context_model_trained: bool
    context_model_stale: bool


class SessionView(BaseModel):
    id: str
    task: str
    epsilon: float
    labels: int
    positive_labels: int
    negative_labels: int
    dictionaries: list[DictionaryView]
    current_scheme: Optional[str]
    model_trained: bool
    model_stale: bool
    bow_trained: bool
    bow_stale: bool
    events: int


class LabelResponse(BaseModel):
    doc_id: str
    label: int
    labels: int


class NextResponse(BaseModel):
    strategy: str
    doc_ids: list[str]


class DisagreementView(BaseModel):
    doc_id: str
    teacher_label: int
    model_score: float


class BlindnessView(BaseModel):
    disagreements: list[DisagreementView]
    training_error_rate: float


class StatusView(BaseModel):
    converged: bool
    training_error_rate: float
    epsilon: float
    labels: int


class TrainContextResponse(BaseModel):
    dict_id: str
    positives: int
    negatives: int
    iterations: int
    objective: float


class CalibrateResponse(BaseModel):
    dict_id: str
    gamma: float
    target: float
    mean_smooth_matches: float


class ContextRowView(BaseModel):
    percentile: float
    probability: float
    before: str
    target: str
    after: str
    doc_id: str
    start: int


class ContextsResponse(BaseModel):
    term: str
    occurrences: int
    rows: list[ContextRowView]
    gamma: Optional[float] = None
    trigger_percent: Optional[float] = None


class SuggestionView(BaseModel):
    term: list[str]
    mean_probability: float
    occurrences: int


class SuggestionsResponse(BaseModel):
    dict_id: str
    entries: list[SuggestionView]


class PrPoint(BaseModel):
    recall: float
    precision: float


class MetricsResponse(BaseModel):
    scheme: str
    auroc: float
    accuracy: float
    pr_curve: list[PrPoint]
    positives: int
    negatives: int
    nonzero_weights: int
    eval_docs: int


class DocView(BaseModel):
    id: str
    text: str
    tokens: list[str]
    label: Optional[int]


class ErrorBody(BaseModel):
    error: str
    code: str
