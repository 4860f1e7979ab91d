import { describe, expect, it } from 'vitest';

import { renderPopulationView } from '../src/viewmodels/population.js';
import { fixturePopulation } from './fixtures.js';

const current = { value: 1.1, risk: 0.55 };

describe('renderPopulationView', () => {
  it('matches the snapshot for the fixture summary', () => {
    expect(renderPopulationView(fixturePopulation, current)).toMatchSnapshot();
  });

  it('has one point per triple plus the highlighted patient', () => {
    const vm = renderPopulationView(fixturePopulation, current);
    expect(vm.points).toHaveLength(fixturePopulation.triples.length + 1);
    const highlighted = vm.points.filter((p) => p.highlighted);
    expect(highlighted).toHaveLength(1);
    expect(highlighted[0].x).toBe(current.value);
    expect(highlighted[0].y).toBe(current.risk);
  });

  it('point size grows with importance', () => {
    const vm = renderPopulationView(fixturePopulation, current);
    const cohort = vm.points.filter((p) => !p.highlighted);
    const byImportance = fixturePopulation.triples
      .map((t, i) => ({ importance: t.importance, size: cohort[i].size }))
      .sort((a, b) => a.importance - b.importance);
    for (let i = 1; i < byImportance.length; i++) {
      expect(byImportance[i].size).toBeGreaterThan(byImportance[i - 1].size);
    }
  });

  it('axes auto-fit to the min and max of the rendered points', () => {
    const vm = renderPopulationView(fixturePopulation, current);
    for (const p of vm.points) {
      expect(p.x).toBeGreaterThanOrEqual(vm.xRange[0]);
      expect(p.x).toBeLessThanOrEqual(vm.xRange[1]);
      expect(p.y).toBeGreaterThanOrEqual(vm.yRange[0]);
      expect(p.y).toBeLessThanOrEqual(vm.yRange[1]);
    }
    expect(vm.xRange[0]).toBeLessThan(vm.xRange[1]);
  });

  it('rejects an empty summary', () => {
    expect(() =>
      renderPopulationView({ ...fixturePopulation, triples: [] }, current),
    ).toThrow('no triples');
  });
});
