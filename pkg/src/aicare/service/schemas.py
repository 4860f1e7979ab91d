"""Pydantic request/response bodies for the REST API."""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, ConfigDict, Field


class HealthResponse(BaseModel):
    model_config = ConfigDict(protected_namespaces=())
    status: str
    model_hash: str


class FeatureInfo(BaseModel):
    name: str
    kind: str
    unit: str


class ModelInfoResponse(BaseModel):
    model_config = ConfigDict(protected_namespaces=())
    model_hash: str
    hyper: dict
    calibration: dict | None
    features: list[FeatureInfo]
    meta: dict


class PatientSummary(BaseModel):
    patient_id: str
    n_visits: int
    first_time: float
    last_time: float


class VisitValues(BaseModel):
    time: float
    values: dict[str, float]
    observed: dict[str, bool]


class PatientDetail(BaseModel):
    patient_id: str
    static: dict[str, float]
    static_observed: dict[str, bool]
    visits: list[VisitValues]


class TopFeature(BaseModel):
    name: str
    kind: str
    value: float
    unit: str
    importance: float
    imputed: bool


class AssessmentVisit(BaseModel):
    time: float
    raw_risk: float
    calibrated_risk: float
    top_features: list[TopFeature]


class AssessmentResponse(BaseModel):
    model_config = ConfigDict(protected_namespaces=())
    patient_id: str
    model_hash: str
    threshold: float | None
    visits: list[AssessmentVisit]


class PopulationTriple(BaseModel):
    value: float
    importance: float
    risk: float


class PopulationResponse(BaseModel):
    feature: str
    unit: str
    sample_size: int
    seed: int
    triples: list[PopulationTriple]


class NarrativeResponse(BaseModel):
    model_config = ConfigDict(protected_namespaces=())
    patient_id: str
    visit: int
    source: Literal["llm", "fallback"]
    model_id: str
    sections: dict[str, str]
    text: str


EventKind = Literal["list_paging", "curve_hover", "cross_view",
                    "feature_select"]


class EventIn(BaseModel):
    session_id: str
    timestamp: float
    kind: EventKind
    payload: dict = Field(default_factory=dict)


class EventAck(BaseModel):
    id: int
    session_id: str
    kind: EventKind
    session_kind_count: int


class EventExport(BaseModel):
    events: list[dict]
