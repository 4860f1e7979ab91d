"""REST API over a loaded checkpoint and cohort.

The model snapshot is loaded once and never mutated; only the event log
and the response caches in the sqlite store grow.  Cached bodies are the
exact serialized strings, so a cache hit is byte-identical to the fresh
computation it replaced.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, HTTPException, Query, Response
from fastapi.middleware.cors import CORSMiddleware

from ..advisory import LLMClientConfig, request_advice
from ..analytics import population_aggregate
from ..data.labeling import assign_mortality_labels, assign_preterm_labels
from ..data.preprocess import (ModelReadyPatient, aggregate_same_day,
                               apply_preprocessor)
from ..data.schema import load_cohort
from ..model.inference import TrainedModel, rank_features
from . import schemas as S
from .store import ServingStore

log = logging.getLogger(__name__)

PATIENT_ID_RE = re.compile(r"^[A-Za-z0-9_.\-]{1,64}$")

DEFAULT_TASK_DEFINITION = (
    "Given the patient's longitudinal examination records, estimate the "
    "risk that the adverse outcome occurs within the prediction horizon.")


class SchemaMismatchError(RuntimeError):
    pass


@dataclass
class ServiceRuntime:
    """Everything a running server needs; immutable after startup."""

    model: TrainedModel
    patients: dict[str, ModelReadyPatient]
    store: ServingStore
    llm_config: LLMClientConfig = field(default_factory=LLMClientConfig)
    task_definition: str = DEFAULT_TASK_DEFINITION
    cache_enabled: bool = True
    cors_origins: tuple[str, ...] = ()


def load_runtime(checkpoint_path: str | Path, visits_file: str | Path,
                 static_file: str | Path, schema_file: str | Path,
                 store_path: str | Path = ":memory:",
                 task: str = "mortality",
                 llm_config: LLMClientConfig | None = None,
                 task_definition: str = DEFAULT_TASK_DEFINITION,
                 cache_enabled: bool = True,
                 cors_origins: tuple[str, ...] = ()) -> ServiceRuntime:
    """Load checkpoint and cohort, refuse on schema-hash mismatch."""
    model = TrainedModel.load(checkpoint_path)
    cohort = load_cohort(visits_file, static_file, schema_file)
    if cohort.schema.hash() != model.schema.hash():
        raise SchemaMismatchError(
            f"cohort schema hash {cohort.schema.hash()} does not match "
            f"checkpoint schema hash {model.schema.hash()}")
    cohort = aggregate_same_day(cohort)
    if task == "mortality":
        labeled = assign_mortality_labels(cohort)
    elif task == "preterm":
        labeled = assign_preterm_labels(cohort)
    else:
        raise ValueError(f"unknown task '{task}'")
    ready = apply_preprocessor(labeled, model.preprocessor)
    return ServiceRuntime(
        model=model,
        patients={p.patient_id: p for p in ready},
        store=ServingStore(store_path),
        llm_config=llm_config or LLMClientConfig.from_env(),
        task_definition=task_definition,
        cache_enabled=cache_enabled,
        cors_origins=cors_origins)


def _get_patient(rt: ServiceRuntime, patient_id: str) -> ModelReadyPatient:
    if not PATIENT_ID_RE.match(patient_id):
        raise HTTPException(422, f"malformed patient id '{patient_id}'")
    patient = rt.patients.get(patient_id)
    if patient is None:
        raise HTTPException(404, f"unknown patient '{patient_id}'")
    return patient


def _assessment_body(rt: ServiceRuntime, patient: ModelReadyPatient,
                     top_k: int) -> str:
    assessment = rt.model.predict_trajectory(patient)
    visits = []
    for t, visit in enumerate(assessment.visits):
        ranked = rank_features(assessment, t, top_k)
        visits.append(S.AssessmentVisit(
            time=visit.time, raw_risk=visit.raw_risk,
            calibrated_risk=visit.risk,
            top_features=[S.TopFeature(
                name=r.name, kind=r.kind, value=r.value, unit=r.unit,
                importance=r.importance, imputed=r.imputed) for r in ranked]))
    return S.AssessmentResponse(
        patient_id=patient.patient_id, model_hash=rt.model.model_hash,
        threshold=assessment.threshold, visits=visits).model_dump_json()


def create_app(rt: ServiceRuntime) -> FastAPI:
    app = FastAPI(title="aicare", docs_url="/api/docs")
    app.state.runtime = rt
    if rt.cors_origins:
        app.add_middleware(CORSMiddleware, allow_origins=list(rt.cors_origins),
                           allow_methods=["*"], allow_headers=["*"])

    json_response = lambda body: Response(content=body,
                                          media_type="application/json")

    @app.get("/api/health", response_model=S.HealthResponse)
    def health():
        return S.HealthResponse(status="ok", model_hash=rt.model.model_hash)

    @app.get("/api/model/info", response_model=S.ModelInfoResponse)
    def model_info():
        cal = rt.model.calibration
        return S.ModelInfoResponse(
            model_hash=rt.model.model_hash,
            hyper=rt.model.hyper.to_dict(),
            calibration=None if cal is None else {
                "temperature": cal.temperature, "threshold": cal.threshold,
                "beta": cal.beta},
            features=[S.FeatureInfo(name=f.name, kind=f.kind, unit=f.unit)
                      for f in rt.model.schema.features],
            meta=rt.model.meta)

    @app.get("/api/patients", response_model=list[S.PatientSummary])
    def list_patients():
        return [S.PatientSummary(patient_id=p.patient_id,
                                 n_visits=len(p.times),
                                 first_time=float(p.times[0]),
                                 last_time=float(p.times[-1]))
                for p in sorted(rt.patients.values(),
                                key=lambda p: p.patient_id)]

    @app.get("/api/patients/{patient_id}", response_model=S.PatientDetail)
    def patient_detail(patient_id: str):
        p = _get_patient(rt, patient_id)
        dyn = [f.name for f in rt.model.schema.dynamic_features]
        stat = [f.name for f in rt.model.schema.static_features]
        visits = [S.VisitValues(
            time=float(p.times[t]),
            values={name: float(p.dynamic_raw[t, j])
                    for j, name in enumerate(dyn)},
            observed={name: bool(p.observed_mask[t, j])
                      for j, name in enumerate(dyn)})
            for t in range(len(p.times))]
        return S.PatientDetail(
            patient_id=p.patient_id,
            static={name: float(p.static_raw[j])
                    for j, name in enumerate(stat)},
            static_observed={name: bool(p.static_observed[j])
                             for j, name in enumerate(stat)},
            visits=visits)

    @app.get("/api/patients/{patient_id}/assessment")
    def assessment(patient_id: str, top_k: int = Query(10, ge=1)):
        p = _get_patient(rt, patient_id)
        h = rt.model.model_hash
        if rt.cache_enabled:
            cached = rt.store.get_assessment(p.patient_id, h, top_k)
            if cached is not None:
                return json_response(cached)
        body = _assessment_body(rt, p, top_k)
        if rt.cache_enabled:
            rt.store.put_assessment(p.patient_id, h, top_k, body)
        return json_response(body)

    @app.get("/api/population/{feature}")
    def population(feature: str, n: int = Query(100, ge=1),
                   seed: int = Query(42)):
        h = rt.model.model_hash
        if rt.cache_enabled:
            cached = rt.store.get_population(feature, n, seed, h)
            if cached is not None:
                return json_response(cached)
        try:
            summary = population_aggregate(rt.model,
                                           list(rt.patients.values()),
                                           feature, n=n, seed=seed)
        except KeyError:
            raise HTTPException(404, f"unknown feature '{feature}'")
        body = S.PopulationResponse(
            feature=summary.feature, unit=summary.unit,
            sample_size=summary.sample_size, seed=summary.seed,
            triples=[S.PopulationTriple(value=v, importance=i, risk=r)
                     for v, i, r in summary.triples]).model_dump_json()
        if rt.cache_enabled:
            rt.store.put_population(feature, n, seed, h, body)
        return json_response(body)

    @app.post("/api/patients/{patient_id}/advice",
              response_model=S.NarrativeResponse)
    def advice(patient_id: str, visit: int = Query(...),
               top_k: int = Query(10, ge=1)):
        p = _get_patient(rt, patient_id)
        if not (0 <= visit < len(p.times)):
            raise HTTPException(
                404, f"patient '{patient_id}' has no visit {visit}")
        assessment = rt.model.predict_trajectory(p)
        narrative = request_advice(assessment, visit, rt.task_definition,
                                   rt.llm_config, top_k)
        return S.NarrativeResponse(
            patient_id=patient_id, visit=visit, source=narrative.source,
            model_id=narrative.model_id, sections=narrative.sections,
            text=narrative.text)

    @app.post("/api/events", response_model=S.EventAck)
    def post_event(event: S.EventIn):
        row_id = rt.store.append_event(event.session_id, event.timestamp,
                                       event.kind, event.payload)
        count = rt.store.event_count(event.session_id, event.kind)
        return S.EventAck(id=row_id, session_id=event.session_id,
                          kind=event.kind, session_kind_count=count)

    @app.get("/api/events", response_model=S.EventExport)
    def export_events(session_id: str | None = Query(None)):
        return S.EventExport(events=rt.store.export_events(session_id))

    return app


def serve(rt: ServiceRuntime, host: str = "127.0.0.1", port: int = 8000):
    """Run the API under uvicorn; blocks until shutdown."""
    import uvicorn
    uvicorn.run(create_app(rt), host=host, port=port)
