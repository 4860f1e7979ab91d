/** Single-page app shell: loads a patient, keeps the selected-feature
 * set, and re-renders the four panels from fresh view models.
 *
 * All state lives in this controller; the view-model builders and
 * renderers stay pure so every panel can be tested without a browser.
 */

import { ApiClient } from './api.js';
import { InteractionReporter } from './events.js';
import {
  renderFeatureList,
  renderNarrative,
  renderPopulation,
  renderTooltip,
  renderTrajectory,
} from './render.js';
import { buildFeatureListView } from './viewmodels/featureList.js';
import { renderPopulationView } from './viewmodels/population.js';
import { buildTrajectoryView, MAX_OVERLAYS } from './viewmodels/trajectory.js';
import type { Assessment, PatientDetail } from './types.js';

export interface Panels {
  trajectory: { innerHTML: string };
  tooltip: { innerHTML: string };
  featureList: { innerHTML: string };
  population: { innerHTML: string };
  narrative: { innerHTML: string };
}

export class DashboardController {
  private assessment: Assessment | null = null;
  private detail: PatientDetail | null = null;
  private selected: string[] = [];
  private visitIndex = 0;

  constructor(
    private readonly api: ApiClient,
    private readonly reporter: InteractionReporter,
    private readonly panels: Panels,
    private readonly task: string = 'mortality',
  ) {}

  get selectedFeatures(): readonly string[] {
    return this.selected;
  }

  async loadPatient(patientId: string): Promise<void> {
    [this.assessment, this.detail] = await Promise.all([
      this.api.assessment(patientId),
      this.api.patient(patientId),
    ]);
    this.selected = [];
    this.visitIndex = this.assessment.visits.length - 1;
    this.renderAll();
  }

  toggleFeature(name: string): void {
    const idx = this.selected.indexOf(name);
    if (idx >= 0) {
      this.selected.splice(idx, 1);
    } else if (this.selected.length < MAX_OVERLAYS) {
      this.selected.push(name);
    }
    this.reporter.emit('feature_select', { feature: name });
    this.renderAll();
  }

  hoverVisit(index: number): void {
    if (!this.assessment) return;
    this.visitIndex = index;
    this.reporter.hoverStart({ visit: index });
    this.renderAll();
  }

  hoverLeave(): void {
    this.reporter.hoverEnd();
  }

  async showAdvice(): Promise<void> {
    if (!this.assessment) return;
    const narrative = await this.api.advice(
      this.assessment.patient_id,
      this.visitIndex,
    );
    this.panels.narrative.innerHTML = renderNarrative(narrative);
    this.reporter.emit('cross_view', { view: 'narrative' });
  }

  async showPopulation(feature: string): Promise<void> {
    if (!this.assessment || !this.detail) return;
    const summary = await this.api.population(feature);
    const lastVisit = this.detail.visits[this.detail.visits.length - 1];
    const value = lastVisit.values[feature] ?? this.detail.static[feature];
    const risk =
      this.assessment.visits[this.assessment.visits.length - 1].calibrated_risk;
    this.panels.population.innerHTML = renderPopulation(
      renderPopulationView(summary, { value, risk }),
    );
    this.reporter.emit('cross_view', { view: 'population', feature });
  }

  private renderAll(): void {
    if (!this.assessment || !this.detail) return;
    const trajectory = buildTrajectoryView(
      this.assessment,
      this.detail,
      this.selected,
      this.task,
    );
    this.panels.trajectory.innerHTML = renderTrajectory(trajectory);
    this.panels.tooltip.innerHTML = renderTooltip(
      trajectory.points[this.visitIndex],
    );
    this.panels.featureList.innerHTML = renderFeatureList(
      buildFeatureListView(
        this.assessment.visits[this.visitIndex],
        this.selected,
      ),
    );
  }
}
