/** Grouped, searchable feature-importance list for one assessed visit.
 *
 * Rows come from the API's top-feature payload verbatim, grouped by
 * feature kind and sorted by importance descending inside each group.
 */

import type { AssessmentVisit } from '../types.js';

export interface FeatureRow {
  name: string;
  value: number;
  unit: string;
  /** Importance as a percentage of the full simplex (0..100). */
  importancePct: number;
  imputed: boolean;
  selected: boolean;
}

export interface FeatureGroup {
  category: string;
  rows: FeatureRow[];
}

export interface FeatureListViewModel {
  search: string;
  groups: FeatureGroup[];
  /** Sum of displayed percentages; <= 100 for any subset of features. */
  displayedPctTotal: number;
}

const CATEGORY_LABELS: Record<string, string> = {
  dynamic: 'Examination results',
  static: 'Demographics',
};

export function buildFeatureListView(
  visit: AssessmentVisit,
  selectedFeatures: readonly string[],
  search = '',
): FeatureListViewModel {
  const needle = search.trim().toLowerCase();
  const selected = new Set(selectedFeatures);
  const byCategory = new Map<string, FeatureRow[]>();
  let total = 0;
  for (const f of visit.top_features) {
    if (needle && !f.name.toLowerCase().includes(needle)) continue;
    const pct = f.importance * 100;
    total += pct;
    const category = CATEGORY_LABELS[f.kind] ?? f.kind;
    const rows = byCategory.get(category) ?? [];
    rows.push({
      name: f.name,
      value: f.value,
      unit: f.unit,
      importancePct: pct,
      imputed: f.imputed,
      selected: selected.has(f.name),
    });
    byCategory.set(category, rows);
  }
  const groups = [...byCategory.entries()]
    .map(([category, rows]) => ({
      category,
      rows: rows.slice().sort((a, b) => b.importancePct - a.importancePct),
    }))
    .sort((a, b) => a.category.localeCompare(b.category));
  return { search, groups, displayedPctTotal: total };
}
