export { ApiClient, ApiError } from './api.js';
export { DashboardController } from './app.js';
export { InteractionReporter } from './events.js';
export * from './render.js';
export * from './types.js';
export * from './viewmodels/featureList.js';
export * from './viewmodels/population.js';
export * from './viewmodels/trajectory.js';
