import type {
  Assessment,
  PatientDetail,
  PopulationSummary,
} from '../src/types.js';

export const fixtureAssessment: Assessment = {
  patient_id: 'synth-0001',
  model_hash: 'abc123',
  threshold: 0.42,
  visits: [
    {
      time: 0.0,
      raw_risk: 0.31,
      calibrated_risk: 0.28,
      top_features: [
        {
          name: 'dyn_00',
          kind: 'dynamic',
          value: 1.25,
          unit: 'mg/dL',
          importance: 0.5,
          imputed: false,
        },
        {
          name: 'dyn_01',
          kind: 'dynamic',
          value: -0.4,
          unit: 'g/L',
          importance: 0.3,
          imputed: true,
        },
        {
          name: 'static_00',
          kind: 'static',
          value: 0.9,
          unit: '%',
          importance: 0.2,
          imputed: false,
        },
      ],
    },
    {
      time: 35.0,
      raw_risk: 0.62,
      calibrated_risk: 0.57,
      top_features: [
        {
          name: 'dyn_01',
          kind: 'dynamic',
          value: 0.8,
          unit: 'g/L',
          importance: 0.6,
          imputed: false,
        },
        {
          name: 'dyn_00',
          kind: 'dynamic',
          value: 1.9,
          unit: 'mg/dL',
          importance: 0.25,
          imputed: false,
        },
        {
          name: 'static_00',
          kind: 'static',
          value: 0.9,
          unit: '%',
          importance: 0.15,
          imputed: false,
        },
      ],
    },
  ],
};

export const fixtureDetail: PatientDetail = {
  patient_id: 'synth-0001',
  static: { static_00: 0.9 },
  static_observed: { static_00: true },
  visits: [
    {
      time: 0.0,
      values: { dyn_00: 1.25, dyn_01: -0.4 },
      observed: { dyn_00: true, dyn_01: false },
    },
    {
      time: 35.0,
      values: { dyn_00: 1.9, dyn_01: 0.8 },
      observed: { dyn_00: true, dyn_01: true },
    },
  ],
};

export const fixturePopulation: PopulationSummary = {
  feature: 'dyn_00',
  unit: 'mg/dL',
  sample_size: 3,
  seed: 0,
  triples: [
    { value: 0.1, importance: 0.2, risk: 0.15 },
    { value: 1.4, importance: 0.5, risk: 0.6 },
    { value: -0.7, importance: 0.1, risk: 0.05 },
  ],
};
