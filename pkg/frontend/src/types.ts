/** Response bodies of the risk-prediction REST API, mirrored field for
 * field.  The client never recomputes risk or importance; these types
 * carry server values verbatim. */

export interface FeatureInfo {
  name: string;
  kind: 'static' | 'dynamic';
  unit: string;
}

export interface ModelInfo {
  model_hash: string;
  hyper: Record<string, unknown>;
  calibration: Record<string, unknown> | null;
  features: FeatureInfo[];
  meta: Record<string, unknown>;
}

export interface PatientSummary {
  patient_id: string;
  n_visits: number;
  first_time: number;
  last_time: number;
}

export interface VisitValues {
  time: number;
  values: Record<string, number>;
  observed: Record<string, boolean>;
}

export interface PatientDetail {
  patient_id: string;
  static: Record<string, number>;
  static_observed: Record<string, boolean>;
  visits: VisitValues[];
}

export interface TopFeature {
  name: string;
  kind: string;
  value: number;
  unit: string;
  importance: number;
  imputed: boolean;
}

export interface AssessmentVisit {
  time: number;
  raw_risk: number;
  calibrated_risk: number;
  top_features: TopFeature[];
}

export interface Assessment {
  patient_id: string;
  model_hash: string;
  threshold: number | null;
  visits: AssessmentVisit[];
}

export interface PopulationTriple {
  value: number;
  importance: number;
  risk: number;
}

export interface PopulationSummary {
  feature: string;
  unit: string;
  sample_size: number;
  seed: number;
  triples: PopulationTriple[];
}

export interface Narrative {
  patient_id: string;
  visit: number;
  source: 'llm' | 'fallback';
  model_id: string;
  sections: Record<string, string>;
  text: string;
}

export type EventKind =
  | 'list_paging'
  | 'curve_hover'
  | 'cross_view'
  | 'feature_select';

export interface EventRecord {
  session_id: string;
  timestamp: number;
  kind: EventKind;
  payload: Record<string, unknown>;
}
