/** Minimal DOM-free renderers: view models to HTML strings.
 *
 * Keeping rendering as pure string functions lets the whole display
 * layer be exercised without a browser; the app shell just assigns the
 * result to innerHTML.
 */

import type { FeatureListViewModel } from './viewmodels/featureList.js';
import type { PopulationViewModel } from './viewmodels/population.js';
import type {
  TrajectoryPoint,
  TrajectoryViewModel,
} from './viewmodels/trajectory.js';
import type { Narrative } from './types.js';

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;');
}

export function formatValue(x: number): string {
  return Number(x.toPrecision(4)).toString();
}

export function renderTooltip(point: TrajectoryPoint): string {
  const rows = point.tooltip
    .map(
      (f) =>
        `<tr><td>${escapeHtml(f.name)}</td>` +
        `<td>${formatValue(f.value)}${f.unit ? ' ' + escapeHtml(f.unit) : ''}` +
        `${f.imputed ? ' (imputed)' : ''}</td>` +
        `<td>${(f.importance * 100).toFixed(1)}%</td></tr>`,
    )
    .join('');
  return (
    `<div class="tooltip"><div class="tooltip-risk">risk ` +
    `${(point.calibrated_risk * 100).toFixed(1)}%</div>` +
    `<table>${rows}</table></div>`
  );
}

export function renderTrajectory(vm: TrajectoryViewModel): string {
  const markers = vm.points
    .map(
      (p, i) =>
        `<circle data-visit="${i}" cx="${p.time}" ` +
        `cy="${p.calibrated_risk}" r="${p.markerSize.toFixed(2)}"/>`,
    )
    .join('');
  const overlays = vm.overlays
    .map(
      (o) =>
        `<polyline class="overlay" data-feature="${escapeHtml(o.feature)}" ` +
        `points="${o.points.map((p) => `${p.time},${p.normalized}`).join(' ')}"/>`,
    )
    .join('');
  return (
    `<svg class="trajectory" aria-label="${escapeHtml(vm.axisLabel)}">` +
    `${overlays}${markers}</svg>`
  );
}

export function renderFeatureList(vm: FeatureListViewModel): string {
  const groups = vm.groups
    .map((g) => {
      const rows = g.rows
        .map(
          (r) =>
            `<li${r.selected ? ' class="selected"' : ''}>` +
            `${escapeHtml(r.name)}: ${formatValue(r.value)}` +
            `${r.unit ? ' ' + escapeHtml(r.unit) : ''}` +
            `${r.imputed ? ' (imputed)' : ''} ` +
            `(${r.importancePct.toFixed(1)}%)</li>`,
        )
        .join('');
      return `<section><h3>${escapeHtml(g.category)}</h3><ul>${rows}</ul></section>`;
    })
    .join('');
  return `<div class="feature-list">${groups}</div>`;
}

export function renderPopulation(vm: PopulationViewModel): string {
  const points = vm.points
    .map(
      (p) =>
        `<circle${p.highlighted ? ' class="current"' : ''} cx="${p.x}" ` +
        `cy="${p.y}" r="${p.size.toFixed(2)}"/>`,
    )
    .join('');
  return (
    `<svg class="population" aria-label="${escapeHtml(vm.xLabel)} vs ` +
    `${escapeHtml(vm.yLabel)}">${points}</svg>`
  );
}

export function renderNarrative(narrative: Narrative): string {
  const sections = Object.entries(narrative.sections)
    .map(
      ([name, body]) =>
        `<section><h3>${escapeHtml(name)}</h3>` +
        `<p>${escapeHtml(body)}</p></section>`,
    )
    .join('');
  return (
    `<div class="narrative" data-source="${narrative.source}">` +
    `${sections}</div>`
  );
}
