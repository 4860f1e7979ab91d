/** Population scatter view: one point per cohort visit (feature value vs
 * risk, importance as point size), with the current patient's latest
 * value highlighted. */

import type { PopulationSummary } from '../types.js';

export const POINT_MIN = 2;
export const POINT_MAX = 10;

export interface ScatterPoint {
  x: number;
  y: number;
  size: number;
  highlighted: boolean;
}

export interface PopulationViewModel {
  feature: string;
  unit: string;
  xLabel: string;
  yLabel: string;
  xRange: [number, number];
  yRange: [number, number];
  points: ScatterPoint[];
}

export interface CurrentPatientPoint {
  value: number;
  risk: number;
}

export function renderPopulationView(
  summary: PopulationSummary,
  current: CurrentPatientPoint,
): PopulationViewModel {
  if (summary.triples.length === 0) {
    throw new Error('population summary has no triples');
  }
  const points: ScatterPoint[] = summary.triples.map((t) => ({
    x: t.value,
    y: t.risk,
    size: POINT_MIN + (POINT_MAX - POINT_MIN) * t.importance,
    highlighted: false,
  }));
  points.push({
    x: current.value,
    y: current.risk,
    size: POINT_MAX,
    highlighted: true,
  });
  const xs = points.map((p) => p.x);
  const ys = points.map((p) => p.y);
  return {
    feature: summary.feature,
    unit: summary.unit,
    xLabel: summary.unit
      ? `${summary.feature} (${summary.unit})`
      : summary.feature,
    yLabel: 'calibrated risk',
    xRange: [Math.min(...xs), Math.max(...xs)],
    yRange: [Math.min(...ys), Math.max(...ys)],
    points,
  };
}
