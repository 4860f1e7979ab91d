import { describe, expect, it } from 'vitest';

import { buildFeatureListView } from '../src/viewmodels/featureList.js';
import { fixtureAssessment } from './fixtures.js';

const visit = fixtureAssessment.visits[0];

describe('buildFeatureListView', () => {
  it('matches the snapshot for the fixture visit', () => {
    expect(buildFeatureListView(visit, ['dyn_00'])).toMatchSnapshot();
  });

  it('groups rows by category and sorts by importance descending', () => {
    const vm = buildFeatureListView(visit, []);
    expect(vm.groups.map((g) => g.category)).toEqual([
      'Demographics',
      'Examination results',
    ]);
    for (const group of vm.groups) {
      const pcts = group.rows.map((r) => r.importancePct);
      expect(pcts).toEqual([...pcts].sort((a, b) => b - a));
    }
  });

  it('full feature set sums to 100 percent within tolerance', () => {
    const vm = buildFeatureListView(visit, []);
    expect(vm.displayedPctTotal).toBeCloseTo(100, 1);
  });

  it('any filtered subset sums to at most 100 percent', () => {
    for (const search of ['dyn', 'static', '00', 'zzz']) {
      const vm = buildFeatureListView(visit, [], search);
      expect(vm.displayedPctTotal).toBeLessThanOrEqual(100 + 1e-9);
    }
  });

  it('search filters by substring, case-insensitively', () => {
    const vm = buildFeatureListView(visit, [], 'STATIC');
    const names = vm.groups.flatMap((g) => g.rows.map((r) => r.name));
    expect(names).toEqual(['static_00']);
  });

  it('marks selected features', () => {
    const vm = buildFeatureListView(visit, ['dyn_01']);
    const row = vm.groups
      .flatMap((g) => g.rows)
      .find((r) => r.name === 'dyn_01');
    expect(row?.selected).toBe(true);
    expect(row?.imputed).toBe(true);
  });
});
