"""Cohort domain types and CSV/JSON ingestion.

A cohort is a feature schema plus per-patient visit sequences: timestamped
dynamic vectors (NaN marks a missing measurement), a static vector, and an
outcome.  Visit files are plain CSV with one row per (patient, time) pair;
the schema travels in an explicit JSON sidecar so units and feature kinds
never have to be inferred from headers.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class CohortFormatError(ValueError):
    """Raised when an input file violates the cohort contract."""


@dataclass(frozen=True)
class Feature:
    name: str
    kind: str  # "static" | "dynamic"
    unit: str = ""
    categorical: bool = False


@dataclass(frozen=True)
class FeatureSchema:
    features: tuple[Feature, ...]

    def __post_init__(self):
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            raise CohortFormatError("feature names must be unique")
        if not any(f.kind == "dynamic" for f in self.features):
            raise CohortFormatError("schema needs at least one dynamic feature")
        for f in self.features:
            if f.kind not in ("static", "dynamic"):
                raise CohortFormatError(f"unknown feature kind '{f.kind}'")

    @property
    def static_features(self) -> list[Feature]:
        return [f for f in self.features if f.kind == "static"]

    @property
    def dynamic_features(self) -> list[Feature]:
        return [f for f in self.features if f.kind == "dynamic"]

    @property
    def counts(self) -> tuple[int, int]:
        """(static, dynamic) feature counts."""
        return len(self.static_features), len(self.dynamic_features)

    def dynamic_index(self, name: str) -> int:
        for i, f in enumerate(self.dynamic_features):
            if f.name == name:
                return i
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {"features": [{"name": f.name, "kind": f.kind, "unit": f.unit,
                              "categorical": f.categorical}
                             for f in self.features]}

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()[:16]

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureSchema":
        return cls(tuple(Feature(f["name"], f["kind"], f.get("unit", ""),
                                 bool(f.get("categorical", False)))
                         for f in d["features"]))


@dataclass
class Visit:
    time: float  # days since epoch / first visit, or gestational day
    values: np.ndarray  # shape (n_dynamic,), NaN = missing


@dataclass
class Outcome:
    event: bool
    event_time: float | None = None  # deceased: day of death
    last_followup_time: float | None = None  # survivors: last contact day
    delivery_week: float | None = None  # obstetrics: gestational age at delivery
    delivery_day: float | None = None  # obstetrics: delivery day on visit axis


@dataclass
class PatientRecord:
    patient_id: str
    static_values: np.ndarray  # shape (n_static,), NaN allowed
    visits: list[Visit]
    outcome: Outcome

    def validate(self, schema: FeatureSchema):
        n_static, n_dynamic = schema.counts
        if len(self.static_values) != n_static:
            raise CohortFormatError(
                f"patient {self.patient_id}: static vector length "
                f"{len(self.static_values)} != {n_static}")
        if not self.visits:
            raise CohortFormatError(f"patient {self.patient_id}: no visits")
        for v in self.visits:
            if len(v.values) != n_dynamic:
                raise CohortFormatError(
                    f"patient {self.patient_id}: dynamic vector length "
                    f"{len(v.values)} != {n_dynamic}")
        times = [v.time for v in self.visits]
        if any(b < a for a, b in zip(times, times[1:])):
            raise CohortFormatError(
                f"patient {self.patient_id}: visit times must be sorted")


@dataclass
class Cohort:
    schema: FeatureSchema
    records: list[PatientRecord]
    # (patient_id, time) pairs that still hold >1 visit on the same day
    same_day_duplicates: list[tuple[str, float]] = field(default_factory=list)

    def patient_ids(self) -> list[str]:
        return [r.patient_id for r in self.records]

    def get(self, patient_id: str) -> PatientRecord:
        for r in self.records:
            if r.patient_id == patient_id:
                return r
        raise KeyError(patient_id)


def load_schema(path: str | Path) -> FeatureSchema:
    with open(path, encoding="utf-8") as fh:
        return FeatureSchema.from_dict(json.load(fh))


def save_schema(schema: FeatureSchema, path: str | Path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(schema.to_dict(), fh, indent=2)
        fh.write("\n")


def _parse_float(cell: str, row_num: int, col: str) -> float:
    try:
        return float(cell)
    except ValueError:
        raise CohortFormatError(
            f"row {row_num}: unparseable value '{cell}' in column '{col}'")


def load_cohort(visits_file: str | Path, static_file: str | Path,
                schema_file: str | Path) -> Cohort:
    """Read a cohort from its three input files.

    Visit rows are grouped per patient and sorted ascending by time.
    Same-day duplicate visits are kept but flagged on the cohort so the
    aggregation step can resolve them.
    """
    schema = load_schema(schema_file)
    dyn_names = [f.name for f in schema.dynamic_features]
    static_names = [f.name for f in schema.static_features]

    visits: dict[str, list[Visit]] = {}
    with open(visits_file, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        expected = {"patient_id", "time", *dyn_names}
        got = set(reader.fieldnames or [])
        if got != expected:
            unknown = sorted(got - expected)
            missing = sorted(expected - got)
            raise CohortFormatError(
                f"visits columns mismatch: unknown={unknown} missing={missing}")
        for row_num, row in enumerate(reader, start=2):
            pid = row["patient_id"]
            t = _parse_float(row["time"], row_num, "time")
            vals = np.array([
                math.nan if row[n] == "" else _parse_float(row[n], row_num, n)
                for n in dyn_names])
            visits.setdefault(pid, []).append(Visit(t, vals))

    records: list[PatientRecord] = []
    seen: set[str] = set()
    with open(static_file, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        base_cols = {"patient_id", "event", "event_time"}
        optional = {"delivery_week", "delivery_day"}
        got = set(reader.fieldnames or [])
        expected = base_cols | set(static_names)
        unknown = sorted(got - expected - optional)
        missing = sorted(expected - got)
        if unknown or missing:
            raise CohortFormatError(
                f"static columns mismatch: unknown={unknown} missing={missing}")
        for row_num, row in enumerate(reader, start=2):
            pid = row["patient_id"]
            if pid in seen:
                raise CohortFormatError(f"row {row_num}: duplicate patient '{pid}'")
            seen.add(pid)
            if pid not in visits:
                raise CohortFormatError(f"row {row_num}: patient '{pid}' has no visits")
            static = np.array([
                math.nan if row[n] == "" else _parse_float(row[n], row_num, n)
                for n in static_names])
            event = row["event"] not in ("", "0", "false", "False")
            etime = (None if row["event_time"] == ""
                     else _parse_float(row["event_time"], row_num, "event_time"))
            outcome = Outcome(
                event=event,
                event_time=etime if event else None,
                last_followup_time=None if event else etime,
                delivery_week=(None if row.get("delivery_week", "") == ""
                               else _parse_float(row["delivery_week"], row_num,
                                                 "delivery_week")),
                delivery_day=(None if row.get("delivery_day", "") == ""
                              else _parse_float(row["delivery_day"], row_num,
                                                "delivery_day")),
            )
            vlist = sorted(visits[pid], key=lambda v: v.time)
            records.append(PatientRecord(pid, static, vlist, outcome))

    orphans = set(visits) - seen
    if orphans:
        raise CohortFormatError(
            f"visit rows for patients missing from static file: {sorted(orphans)}")

    dupes = []
    for rec in records:
        times = [v.time for v in rec.visits]
        for t in sorted({t for t in times if times.count(t) > 1}):
            dupes.append((rec.patient_id, t))
        rec.validate(schema)
    return Cohort(schema, records, same_day_duplicates=dupes)


def _fmt(x: float) -> str:
    return "" if math.isnan(x) else repr(float(x))


def save_cohort(cohort: Cohort, visits_file: str | Path,
                static_file: str | Path, schema_file: str | Path):
    """Write a cohort back to the three-file CSV/JSON format.

    Float cells use `repr`, so identical cohorts serialize byte-identically.
    """
    save_schema(cohort.schema, schema_file)
    dyn_names = [f.name for f in cohort.schema.dynamic_features]
    static_names = [f.name for f in cohort.schema.static_features]

    with open(visits_file, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["patient_id", "time", *dyn_names])
        for rec in cohort.records:
            for v in rec.visits:
                w.writerow([rec.patient_id, repr(float(v.time)),
                            *(_fmt(x) for x in v.values)])

    has_delivery = any(r.outcome.delivery_week is not None for r in cohort.records)
    with open(static_file, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        header = ["patient_id", *static_names, "event", "event_time"]
        if has_delivery:
            header += ["delivery_week", "delivery_day"]
        w.writerow(header)
        for rec in cohort.records:
            o = rec.outcome
            etime = o.event_time if o.event else o.last_followup_time
            row = [rec.patient_id, *(_fmt(x) for x in rec.static_values),
                   "1" if o.event else "0",
                   "" if etime is None else repr(float(etime))]
            if has_delivery:
                row += ["" if o.delivery_week is None else repr(float(o.delivery_week)),
                        "" if o.delivery_day is None else repr(float(o.delivery_day))]
            w.writerow(row)
