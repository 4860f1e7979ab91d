/** Risk trajectory view model: the calibrated risk curve with per-point
 * tooltips and up to three feature overlays.
 *
 * Pure transform of API bodies.  Tooltips carry the server's top-feature
 * list verbatim and in server order; nothing is recomputed client side.
 */

import type { Assessment, PatientDetail, TopFeature } from '../types.js';

export const MAX_OVERLAYS = 3;
export const MARKER_MIN = 4;
export const MARKER_MAX = 14;

export interface TrajectoryPoint {
  time: number;
  calibrated_risk: number;
  /** Marker radius in px, monotone in the point's top importance. */
  markerSize: number;
  /** The API's top features for this visit, verbatim and in API order. */
  tooltip: TopFeature[];
}

export interface OverlayPoint {
  time: number;
  value: number;
  /** Value mapped onto the secondary [0, 1] axis. */
  normalized: number;
  observed: boolean;
}

export interface Overlay {
  feature: string;
  unit: string;
  points: OverlayPoint[];
}

export interface TrajectoryViewModel {
  patientId: string;
  axisLabel: string;
  threshold: number | null;
  points: TrajectoryPoint[];
  overlays: Overlay[];
}

export type WarnFn = (message: string) => void;

function markerSize(importance: number): number {
  return MARKER_MIN + (MARKER_MAX - MARKER_MIN) * importance;
}

function buildOverlay(detail: PatientDetail, feature: string): Overlay | null {
  if (detail.visits.length === 0) return null;
  if (!(feature in detail.visits[0].values)) return null;
  const values = detail.visits.map((v) => v.values[feature]);
  const lo = Math.min(...values);
  const hi = Math.max(...values);
  const span = hi - lo;
  return {
    feature,
    unit: '',
    points: detail.visits.map((v, i) => ({
      time: v.time,
      value: values[i],
      normalized: span > 0 ? (values[i] - lo) / span : 0.5,
      observed: v.observed[feature],
    })),
  };
}

/** Axis label per prediction task: obstetric timelines are anchored to
 * gestational weeks, everything else to days since the first visit. */
export function timelineLabel(task: string): string {
  return task === 'preterm' ? 'gestational week' : 'days since first visit';
}

export function buildTrajectoryView(
  assessment: Assessment,
  detail: PatientDetail,
  selectedFeatures: readonly string[],
  task = 'mortality',
  warn: WarnFn = (m) => console.warn(m),
): TrajectoryViewModel {
  if (assessment.visits.length === 0) {
    throw new Error('assessment has no visits');
  }
  const points = assessment.visits
    .map((v) => ({
      time: v.time,
      calibrated_risk: v.calibrated_risk,
      markerSize: markerSize(v.top_features[0]?.importance ?? 0),
      tooltip: v.top_features,
    }))
    .sort((a, b) => a.time - b.time);

  const units = new Map<string, string>();
  for (const v of assessment.visits) {
    for (const f of v.top_features) units.set(f.name, f.unit);
  }

  const overlays: Overlay[] = [];
  for (const feature of selectedFeatures) {
    if (overlays.length >= MAX_OVERLAYS) {
      warn(`overlay limit of ${MAX_OVERLAYS} reached, ignoring ${feature}`);
      continue;
    }
    const overlay = buildOverlay(detail, feature);
    if (overlay === null) {
      warn(`unknown feature ${feature} ignored`);
      continue;
    }
    overlay.unit = units.get(feature) ?? '';
    overlays.push(overlay);
  }

  return {
    patientId: assessment.patient_id,
    axisLabel: timelineLabel(task),
    threshold: assessment.threshold,
    points,
    overlays,
  };
}
