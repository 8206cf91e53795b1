/** Fixed metric order shared by every radar chart and form in the app. */
export const METRICS = [
  'user_experienced_data_rate_mbps',
  'latency_ms',
  'mobility_kmph',
  'reliability_percentage',
  'connectivity_density_per_m2',
  'area_traffic_capacity_mbps_per_m2',
  'position_accuracy_cm',
  'peak_data_rate_gbps',
] as const;

export type Metric = (typeof METRICS)[number];

export const METRIC_LABELS: Record<Metric, string> = {
  user_experienced_data_rate_mbps: 'UX data rate (Mbit/s)',
  latency_ms: 'latency (ms)',
  mobility_kmph: 'mobility (km/h)',
  reliability_percentage: 'reliability (%)',
  connectivity_density_per_m2: 'conn. density (/m²)',
  area_traffic_capacity_mbps_per_m2: 'area capacity (Mbit/s/m²)',
  position_accuracy_cm: 'positioning (cm)',
  peak_data_rate_gbps: 'peak data rate (Gbit/s)',
};

export interface MetricBounds {
  min: number;
  max: number;
}

/**
 * Bundled mirror of the default validation ranges, used only for inline form
 * hints. The server remains the authority; the client never computes
 * specification values.
 */
export const DEFAULT_BOUNDS: Record<Metric, MetricBounds> = {
  user_experienced_data_rate_mbps: { min: 1e-6, max: 500 },
  latency_ms: { min: 0.1, max: 10000 },
  mobility_kmph: { min: 1e-6, max: 1000 },
  reliability_percentage: { min: 90, max: 99.99999 },
  connectivity_density_per_m2: { min: 1e-6, max: 100 },
  area_traffic_capacity_mbps_per_m2: { min: 1e-6, max: 50 },
  position_accuracy_cm: { min: 1, max: 100000 },
  peak_data_rate_gbps: { min: 1e-6, max: 200 },
};

export const MAX_NAME_CHARS = 200;
export const MAX_DESCRIPTION_CHARS = 8000;
export const MAX_COMMENT_CHARS = 4000;

declare global {
  interface Window {
    NETSPEC_API_BASE?: string;
  }
}

/** API base URL, injected at deploy time via window.NETSPEC_API_BASE. */
export function apiBase(): string {
  if (typeof window !== 'undefined' && window.NETSPEC_API_BASE) {
    return window.NETSPEC_API_BASE.replace(/\/$/, '');
  }
  return '/api/v1';
}
