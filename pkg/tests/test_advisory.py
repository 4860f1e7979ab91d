import numpy as np
import httpx
import pytest

from aicare.advisory import (LLMClientConfig, LLMRequestError, Narrative,
                             NarrativeParseError, SYSTEM_PROMPT, build_prompt,
                             call_llm, fallback_template, parse_sections,
                             request_advice, validate_narrative)
from aicare.data.preprocess import ModelReadyPatient
from aicare.data.schema import Feature, FeatureSchema
from aicare.model.inference import RiskAssessment, VisitAssessment

TASK = ("Predict one-year mortality risk for patients on maintenance "
        "peritoneal dialysis.")


def make_assessment():
    schema = FeatureSchema((
        Feature("alb", "dynamic", "g/L"),
        Feature("crea", "dynamic", "umol/L"),
        Feature("hgb", "dynamic", "g/L"),
        Feature("age", "static", "years"),
    ))
    patient = ModelReadyPatient(
        patient_id="p1",
        times=np.array([0.0, 30.0]),
        log_gaps=np.log1p(np.array([0.0, 30.0])),
        dynamic=np.array([[0.5, -0.2, 0.1], [-1.2, 1.8, -0.7]]),
        dynamic_raw=np.array([[31.0, 400.0, 11.2], [23.4, 512.0, 9.1]]),
        observed_mask=np.array([[True, True, True], [True, False, True]]),
        static=np.array([0.3]),
        static_raw=np.array([61.0]),
        static_observed=np.array([True]),
        labels=np.array([0, 1]),
        label_mask=np.array([True, True]),
        patient_label=1,
    )
    visits = [
        VisitAssessment(0.0, -1.0, 0.2689, 0.301,
                        np.array([0.25, 0.25, 0.25, 0.25])),
        VisitAssessment(30.0, 1.9, 0.8699, 0.873,
                        np.array([0.4, 0.3, 0.2, 0.1])),
    ]
    return RiskAssessment("p1", visits, patient, schema, threshold=0.5)


GOLDEN_USER_PROMPT = """\
**Clinical Prediction Task**

Predict one-year mortality risk for patients on maintenance peritoneal dialysis.

**Patient's Electronic Health Record Analysis**

AI Model Risk Prediction Result: 87.3%

Feature Importance Weights (Key Factors Influencing Prediction):

- alb: 40.0%
- crea: 30.0%
- hgb: 20.0%
- age: 10.0%

Patient's Complete Examination Values from the Last Visit:

- alb: 23.4 g/L
- crea: 512 umol/L (imputed)
- hgb: 9.1 g/L
- age: 61 years

**Clinical Analysis Request**

Based on the AI model's analysis results and the patient's EHR data above, please use clinical reasoning to analyze the patient's pathophysiological state and provide specific diagnostic and decision-making recommendations."""


class TestBuildPrompt:
    def test_golden_user_prompt_byte_exact(self):
        pair = build_prompt(TASK, make_assessment(), 1, top_k=4)
        assert pair.user_text == GOLDEN_USER_PROMPT

    def test_system_prompt_requirements(self):
        assert "experienced clinician" in SYSTEM_PROMPT
        assert "do not use concrete numerical values" in SYSTEM_PROMPT
        for i in range(1, 6):
            assert f"\n{i}. " in SYSTEM_PROMPT

    def test_risk_has_one_decimal(self):
        pair = build_prompt(TASK, make_assessment(), 0, top_k=2)
        assert "Risk Prediction Result: 30.1%" in pair.user_text

    def test_top_k_limits_importance_lines(self):
        pair = build_prompt(TASK, make_assessment(), 1, top_k=2)
        block = pair.user_text.split("Influencing Prediction):")[1]
        block = block.split("Patient's Complete")[0]
        assert block.count("- ") == 2
        assert "- hgb" not in block

    def test_oversized_top_k_clamped_with_warning(self, caplog):
        import logging
        with caplog.at_level(logging.WARNING, logger="aicare.advisory"):
            pair = build_prompt(TASK, make_assessment(), 1, top_k=50)
        assert "clamped" in caplog.text
        assert "- age: 10.0%" in pair.user_text

    def test_imputed_values_marked(self):
        pair = build_prompt(TASK, make_assessment(), 1, top_k=4)
        assert "- crea: 512 umol/L (imputed)" in pair.user_text
        assert "- alb: 23.4 g/L\n" in pair.user_text

    def test_visit_out_of_range(self):
        with pytest.raises(IndexError):
            build_prompt(TASK, make_assessment(), 5)


VALID_REPLY = """\
## Key Feature Identification
The dominant factors are alb, crea and hgb, whose weights dominate the
model's attention at the latest visit.

## Risk Analysis
Low alb together with elevated crea suggests declining residual renal
function and protein loss, a combination associated with elevated risk.

## Personalized Advice
Consider nutritional support, closer monitoring of dialysis adequacy and
anemia management, and early nephrology review.
"""


class TestParseSections:
    def test_markdown_headings(self):
        sections = parse_sections(VALID_REPLY)
        assert set(sections) == {"Key Feature Identification",
                                 "Risk Analysis", "Personalized Advice"}
        assert sections["Risk Analysis"].startswith("Low alb")

    def test_numbered_and_bold_headings(self):
        text = ("1. Key Feature Identification:\nbody one\n"
                "**Risk Analysis**\nbody two\n"
                "3) Personalized Advice\nbody three\n")
        sections = parse_sections(text)
        assert sections["Personalized Advice"] == "body three"

    def test_missing_section_raises(self):
        with pytest.raises(NarrativeParseError, match="Risk Analysis"):
            parse_sections("## Key Feature Identification\nx\n"
                           "## Personalized Advice\ny\n")


def llm_narrative(text):
    return Narrative(text=text, source="llm", model_id="m",
                     sections=parse_sections(text))


class TestValidateNarrative:
    def test_valid_reply_passes(self):
        report = validate_narrative(llm_narrative(VALID_REPLY),
                                    make_assessment())
        assert report.passed, report.violations

    def test_numeric_value_leak_flagged(self):
        text = VALID_REPLY.replace(
            "Low alb", "An alb of 23.4 g/L together with low alb")
        report = validate_narrative(llm_narrative(text), make_assessment())
        assert any("23.4" in v for v in report.violations)

    def test_risk_percentage_whitelisted(self):
        text = VALID_REPLY.replace(
            "elevated risk.", "a risk of 87.3%.")
        report = validate_narrative(llm_narrative(text), make_assessment())
        assert report.passed, report.violations

    def test_section_numbering_whitelisted(self):
        text = VALID_REPLY.replace(
            "Consider nutritional support,",
            "1. Consider nutritional support\n2. Also consider")
        report = validate_narrative(llm_narrative(text), make_assessment())
        assert report.passed, report.violations

    def test_unknown_feature_flagged(self):
        text = VALID_REPLY.replace("elevated crea", "elevated Cystatin C")
        report = validate_narrative(llm_narrative(text), make_assessment())
        assert any("Cystatin C" in v for v in report.violations)

    def test_digits_inside_schema_names_allowed(self):
        schema = FeatureSchema((Feature("dyn_03", "dynamic", ""),
                                Feature("dyn_11", "dynamic", "")))
        assessment = make_assessment()
        assessment = RiskAssessment(
            assessment.patient_id, assessment.visits, assessment.patient,
            schema, assessment.threshold)
        text = VALID_REPLY.replace("alb, crea and hgb", "dyn_03 and dyn_11") \
                          .replace("Low alb", "A shift in dyn_03") \
                          .replace("elevated crea", "elevated dyn_11")
        report = validate_narrative(llm_narrative(text), assessment)
        assert report.passed, report.violations

    def test_empty_section_flagged(self):
        n = Narrative(text="x", source="llm", model_id="m",
                      sections={"Key Feature Identification": "a",
                                "Risk Analysis": "",
                                "Personalized Advice": "c"})
        report = validate_narrative(n, make_assessment())
        assert any("Risk Analysis" in v for v in report.violations)


class TestFallback:
    def test_three_sections_and_validator_clean(self):
        assessment = make_assessment()
        n = fallback_template(assessment, 1, top_k=4)
        assert n.source == "fallback"
        assert set(n.sections) == {"Key Feature Identification",
                                   "Risk Analysis", "Personalized Advice"}
        report = validate_narrative(n, assessment)
        assert report.passed, report.violations

    def test_no_digits_anywhere(self):
        n = fallback_template(make_assessment(), 1, top_k=4)
        assert not any(c.isdigit() for c in n.text)

    def test_elevated_wording_tracks_threshold(self):
        assessment = make_assessment()
        high = fallback_template(assessment, 1)
        low = fallback_template(assessment, 0)
        assert "elevated risk" in high.sections["Risk Analysis"]
        assert "below the decision threshold" in low.sections["Risk Analysis"]

    def test_deterministic(self):
        a = fallback_template(make_assessment(), 1, top_k=3)
        b = fallback_template(make_assessment(), 1, top_k=3)
        assert a.text == b.text

    def test_mentions_top_features_and_imputation(self):
        n = fallback_template(make_assessment(), 1, top_k=2)
        body = n.sections["Key Feature Identification"]
        assert "alb" in body and "crea" in body
        assert "imputed" in body  # crea was not measured at this visit


def _response(status=200, content="", bad_body=False):
    body = {"bad": True} if bad_body else {
        "choices": [{"message": {"content": content}}]}
    return httpx.Response(status, json=body,
                          request=httpx.Request("POST", "http://llm"))


class TestRequestAdvice:
    CONFIG = LLMClientConfig(endpoint="http://llm/v1/chat", model="m")

    def test_offline_serves_fallback(self):
        n = request_advice(make_assessment(), 1, TASK, LLMClientConfig())
        assert n.source == "fallback"

    def test_valid_reply_served_as_llm(self, monkeypatch):
        monkeypatch.setattr(httpx, "post",
                            lambda *a, **k: _response(content=VALID_REPLY))
        n = request_advice(make_assessment(), 1, TASK, self.CONFIG)
        assert n.source == "llm"
        assert n.model_id == "m"

    def test_timeout_degrades_to_fallback(self, monkeypatch):
        def boom(*a, **k):
            raise httpx.TimeoutException("slow")
        monkeypatch.setattr(httpx, "post", boom)
        n = request_advice(make_assessment(), 1, TASK, self.CONFIG)
        assert n.source == "fallback"

    def test_http_error_degrades(self, monkeypatch):
        monkeypatch.setattr(httpx, "post", lambda *a, **k: _response(500))
        n = request_advice(make_assessment(), 1, TASK, self.CONFIG)
        assert n.source == "fallback"

    def test_unparseable_body_degrades(self, monkeypatch):
        monkeypatch.setattr(httpx, "post",
                            lambda *a, **k: _response(bad_body=True))
        n = request_advice(make_assessment(), 1, TASK, self.CONFIG)
        assert n.source == "fallback"

    def test_ungrounded_reply_degrades(self, monkeypatch):
        leaky = VALID_REPLY.replace("Low alb", "An alb of 23.4 g/L")
        monkeypatch.setattr(httpx, "post",
                            lambda *a, **k: _response(content=leaky))
        n = request_advice(make_assessment(), 1, TASK, self.CONFIG)
        assert n.source == "fallback"

    def test_request_body_shape(self, monkeypatch):
        captured = {}

        def fake_post(url, json=None, headers=None, timeout=None):
            captured.update(url=url, json=json, headers=headers,
                            timeout=timeout)
            return _response(content=VALID_REPLY)

        monkeypatch.setattr(httpx, "post", fake_post)
        config = LLMClientConfig(endpoint="http://llm/v1/chat",
                                 api_key="sk-x", model="m", timeout=7.0)
        pair = build_prompt(TASK, make_assessment(), 1, top_k=4)
        call_llm(pair, config)
        assert captured["url"] == "http://llm/v1/chat"
        assert captured["timeout"] == 7.0
        assert captured["headers"]["Authorization"] == "Bearer sk-x"
        roles = [m["role"] for m in captured["json"]["messages"]]
        assert roles == ["system", "user"]
        assert captured["json"]["messages"][1]["content"] == GOLDEN_USER_PROMPT

    def test_offline_call_llm_raises_typed_error(self):
        pair = build_prompt(TASK, make_assessment(), 0)
        with pytest.raises(LLMRequestError):
            call_llm(pair, LLMClientConfig())


def test_config_from_env(monkeypatch):
    monkeypatch.setenv("AICARE_LLM_ENDPOINT", "http://e")
    monkeypatch.setenv("AICARE_LLM_API_KEY", "k")
    monkeypatch.setenv("AICARE_LLM_MODEL", "gpt-x")
    monkeypatch.setenv("AICARE_LLM_TIMEOUT", "12.5")
    c = LLMClientConfig.from_env()
    assert (c.endpoint, c.api_key, c.model, c.timeout) == \
        ("http://e", "k", "gpt-x", 12.5)
    assert not c.offline
    monkeypatch.delenv("AICARE_LLM_ENDPOINT")
    assert LLMClientConfig.from_env().offline
