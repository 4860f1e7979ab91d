"""LLM advisory: prompt assembly, chat-completion client, grounding
validation, and a deterministic offline fallback.

Every served narrative either passed validation or was replaced by the
rule-based fallback; the serving path never surfaces an unvalidated LLM
reply.  The client is a generic HTTP chat-completion interface, so no
vendor is hard-wired.
"""

from __future__ import annotations

import logging
import os
import re
import threading
from dataclasses import dataclass, field

import httpx

from .model.inference import RiskAssessment, rank_features

log = logging.getLogger(__name__)

SYSTEM_PROMPT = """\
You are an experienced clinician with extensive medical knowledge and clinical diagnostic experience.

You will receive a patient's electronic health record (EHR) data, an AI model's risk prediction result, and feature importance weights. Based on this information, please conduct a clinical analysis and provide diagnostic and decision-making recommendations.

Analysis Requirements:

1. Focus on the examination values from the most recent visit and the features with high importance weights.

2. Use analytical reasoning to deduce the patient's physiological or biochemical pathophysiological state.

3. Systematically identify the appropriate clinical response.

4. Provide specific clinical advice without listing the patient's specific data (do not use concrete numerical values).

5. Ensure the response is detailed and substantial."""

USER_TEMPLATE = """\
**Clinical Prediction Task**

{task_definition}

**Patient's Electronic Health Record Analysis**

AI Model Risk Prediction Result: {risk_value}%

Feature Importance Weights (Key Factors Influencing Prediction):

{key_features_list}

Patient's Complete Examination Values from the Last Visit:

{all_feature_values}

**Clinical Analysis Request**

Based on the AI model's analysis results and the patient's EHR data above, please use clinical reasoning to analyze the patient's pathophysiological state and provide specific diagnostic and decision-making recommendations."""

SECTION_NAMES = ("Key Feature Identification", "Risk Analysis",
                 "Personalized Advice")

# terms the validator recognizes as clinical features even when the
# schema does not carry them; mentioning one of these outside the schema
# counts as an ungrounded feature reference
KNOWN_CLINICAL_TERMS = (
    "Cystatin C", "Creatinine", "Albumin", "Hemoglobin", "Urea",
    "Sodium", "Potassium", "Calcium", "Phosphate", "Ferritin",
    "C-reactive protein", "eGFR", "Platelet", "Glucose", "Bilirubin",
    "Troponin", "BNP", "HbA1c", "Cholesterol", "Triglycerides",
)


@dataclass(frozen=True)
class PromptPair:
    system_text: str
    user_text: str


@dataclass
class Narrative:
    text: str
    source: str  # "llm" | "fallback"
    model_id: str
    sections: dict[str, str]


@dataclass
class ValidationReport:
    passed: bool
    violations: list[str] = field(default_factory=list)


@dataclass
class LLMClientConfig:
    endpoint: str = ""
    api_key: str = ""
    model: str = ""
    timeout: float = 30.0
    max_concurrent: int = 4

    @property
    def offline(self) -> bool:
        return not self.endpoint

    @classmethod
    def from_env(cls) -> "LLMClientConfig":
        return cls(
            endpoint=os.environ.get("AICARE_LLM_ENDPOINT", ""),
            api_key=os.environ.get("AICARE_LLM_API_KEY", ""),
            model=os.environ.get("AICARE_LLM_MODEL", ""),
            timeout=float(os.environ.get("AICARE_LLM_TIMEOUT", "30")),
        )


class AdvisoryError(Exception):
    pass


class LLMRequestError(AdvisoryError):
    pass


class NarrativeParseError(AdvisoryError):
    pass


def format_value(x: float) -> str:
    return f"{x:.4g}"


def build_prompt(task_definition: str, assessment: RiskAssessment,
                 visit_idx: int, top_k: int = 10) -> PromptPair:
    """Fill the advisory template: task definition, calibrated risk to one
    decimal, top-k importance lines, and the visit's full value list."""
    visits = assessment.visits
    if not (0 <= visit_idx < len(visits)):
        raise IndexError(f"visit {visit_idx} out of range")
    n_features = len(visits[visit_idx].importance)
    if top_k > n_features:
        log.warning("top_k %d clamped to %d features", top_k, n_features)
        top_k = n_features

    risk_value = f"{visits[visit_idx].risk * 100:.1f}"
    ranked = rank_features(assessment, visit_idx, top_k)
    key_lines = "\n".join(
        f"- {r.name}: {r.importance * 100:.1f}%" for r in ranked)
    all_ranked = rank_features(assessment, visit_idx, n_features)
    by_schema_order = sorted(
        all_ranked, key=lambda r: [f.name for f in assessment.schema.features].index(r.name))
    value_lines = "\n".join(
        f"- {r.name}: {format_value(r.value)} {r.unit}".rstrip()
        + (" (imputed)" if r.imputed else "")
        for r in by_schema_order)
    user = USER_TEMPLATE.format(task_definition=task_definition,
                                risk_value=risk_value,
                                key_features_list=key_lines,
                                all_feature_values=value_lines)
    return PromptPair(SYSTEM_PROMPT, user)


def parse_sections(text: str) -> dict[str, str]:
    """Split a narrative into the three expected sections by headings.

    Heading match is tolerant: optional markdown markers, numbering and
    trailing colons.
    """
    sections: dict[str, str] = {}
    positions = []
    for name in SECTION_NAMES:
        pattern = re.compile(
            r"^[#\*\s]*(?:\d+[\.\)]\s*)?" + re.escape(name) + r"[:\*\s]*$",
            re.IGNORECASE | re.MULTILINE)
        m = pattern.search(text)
        if not m:
            raise NarrativeParseError(f"missing section heading '{name}'")
        positions.append((m.start(), m.end(), name))
    positions.sort()
    for i, (start, end, name) in enumerate(positions):
        stop = positions[i + 1][0] if i + 1 < len(positions) else len(text)
        sections[name] = text[end:stop].strip()
    return sections


_semaphores: dict[str, threading.Semaphore] = {}
_semaphore_lock = threading.Lock()


def _endpoint_semaphore(config: LLMClientConfig) -> threading.Semaphore:
    with _semaphore_lock:
        if config.endpoint not in _semaphores:
            _semaphores[config.endpoint] = threading.Semaphore(
                config.max_concurrent)
        return _semaphores[config.endpoint]


def call_llm(prompt: PromptPair, config: LLMClientConfig) -> str:
    """POST the chat-completion request and return the reply content."""
    if config.offline:
        raise LLMRequestError("no endpoint configured (offline mode)")
    headers = {"Content-Type": "application/json"}
    if config.api_key:
        headers["Authorization"] = f"Bearer {config.api_key}"
    body = {
        "model": config.model,
        "messages": [
            {"role": "system", "content": prompt.system_text},
            {"role": "user", "content": prompt.user_text},
        ],
    }
    with _endpoint_semaphore(config):
        try:
            resp = httpx.post(config.endpoint, json=body, headers=headers,
                              timeout=config.timeout)
        except httpx.HTTPError as e:
            raise LLMRequestError(f"request failed: {e}") from e
    if resp.status_code // 100 != 2:
        raise LLMRequestError(f"upstream returned {resp.status_code}")
    try:
        return resp.json()["choices"][0]["message"]["content"]
    except (KeyError, IndexError, ValueError) as e:
        raise LLMRequestError(f"unparseable response body: {e}") from e


def validate_narrative(narrative: Narrative,
                       assessment: RiskAssessment) -> ValidationReport:
    """Check grounding: no fabricated numerics, no features outside the
    schema, all three sections present and non-empty."""
    violations = []
    for name in SECTION_NAMES:
        if not narrative.sections.get(name, "").strip():
            violations.append(f"empty section: {name}")

    schema_names = [f.name for f in assessment.schema.features]
    text = narrative.text
    for term in KNOWN_CLINICAL_TERMS:
        if term.lower() in text.lower() and term not in schema_names:
            violations.append(f"unknown feature mentioned: {term}")

    # strip schema feature names before scanning for numerals so names
    # like dyn_03 never count as leaks
    scrubbed = text
    for name in sorted(schema_names, key=len, reverse=True):
        scrubbed = scrubbed.replace(name, " ")
    risk_values = {f"{v.risk * 100:.1f}" for v in assessment.visits}
    for line in scrubbed.splitlines():
        body = re.sub(r"^\s*(?:\d+[\.\)]|#+)\s*", "", line)  # list numbering
        for m in re.finditer(r"\d+(?:\.\d+)?", body):
            token = m.group(0)
            if token in risk_values or f"{float(token):.1f}" in risk_values:
                continue
            violations.append(f"numeric value leak: '{token}'")

    return ValidationReport(passed=not violations, violations=violations)


def fallback_template(assessment: RiskAssessment, visit_idx: int,
                      top_k: int = 10) -> Narrative:
    """Deterministic rule-based narrative honoring the three-part layout.

    Qualitative only: feature direction relative to the training mean and
    a risk band from the calibrated probability versus the threshold.
    """
    ranked = rank_features(assessment, visit_idx,
                           min(top_k, len(assessment.visits[visit_idx].importance)))
    patient = assessment.patient
    dyn_names = [f.name for f in assessment.schema.dynamic_features]
    feature_phrases = []
    for r in ranked:
        if r.kind == "dynamic":
            z = patient.dynamic[visit_idx, dyn_names.index(r.name)]
        else:
            static_names = [f.name for f in assessment.schema.static_features]
            z = patient.static[static_names.index(r.name)]
        direction = "above" if z > 0 else "at or below"
        suffix = ", imputed rather than measured" if r.imputed else ""
        feature_phrases.append(
            f"{r.name} ({direction} the training cohort mean{suffix})")

    visit = assessment.visits[visit_idx]
    threshold = assessment.threshold if assessment.threshold is not None else 0.5
    if visit.risk >= threshold:
        band = ("The calibrated model output places this patient at "
                "elevated risk, above the decision threshold tuned on the "
                "validation cohort.")
        advice = ("Consider closer follow-up intervals, re-assessment of the "
                  "flagged indicators at the next visit, and early discussion "
                  "of preventive management options.")
    else:
        band = ("The calibrated model output places this patient below the "
                "decision threshold; the model does not currently flag an "
                "elevated risk.")
        advice = ("Routine monitoring remains appropriate; re-evaluate the "
                  "trajectory if the flagged indicators trend away from the "
                  "cohort mean.")

    sections = {
        "Key Feature Identification":
            "The factors currently weighing most on the model's assessment "
            "are: " + "; ".join(feature_phrases) + ".",
        "Risk Analysis":
            band + " Attention weights concentrate on the factors listed "
            "above, and their joint trend drives the current trajectory.",
        "Personalized Advice":
            advice + " This summary is generated without clinician review "
            "and must not replace clinical judgement.",
    }
    text = "\n\n".join(f"{name}\n{body}" for name, body in sections.items())
    return Narrative(text=text, source="fallback", model_id="rule-based",
                     sections=sections)


def request_advice(assessment: RiskAssessment, visit_idx: int,
                   task_definition: str, config: LLMClientConfig,
                   top_k: int = 10) -> Narrative:
    """Serving-path entry: LLM if configured and grounded, else fallback."""
    prompt = build_prompt(task_definition, assessment, visit_idx, top_k)
    if not config.offline:
        try:
            content = call_llm(prompt, config)
            narrative = Narrative(text=content, source="llm",
                                  model_id=config.model,
                                  sections=parse_sections(content))
            report = validate_narrative(narrative, assessment)
            if report.passed:
                return narrative
            log.warning("LLM narrative rejected: %s", report.violations)
        except AdvisoryError as e:
            log.warning("LLM advice unavailable (%s); serving fallback", e)
    return fallback_template(assessment, visit_idx, top_k)
