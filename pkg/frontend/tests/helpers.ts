import { vi } from 'vitest';

import type { CommunicationProcess, RadarAxes, SpecifyResponse } from '../src/api';
import { METRICS } from '../src/config';

export function jsonResponse(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { 'Content-Type': 'application/json' },
  });
}

export function mockFetch(
  handler: (url: string, init?: RequestInit) => Response | Promise<Response>,
) {
  const spy = vi.fn(async (input: RequestInfo | URL, init?: RequestInit) =>
    handler(String(input), init),
  );
  vi.stubGlobal('fetch', spy);
  return spy;
}

export function makeProcess(name: string, latencyMs = 5): CommunicationProcess {
  return {
    id: `pid-${name}`,
    name,
    description: `${name} description`,
    is_real_time: true,
    direction: 'transmit',
    message_type: 'telemetry',
    specification: { latency_ms: latencyMs },
  };
}

export function makeRadar(values: Partial<Record<string, number>> = {}): RadarAxes {
  const axes: Record<string, number> = {};
  const raw: Record<string, number | null> = {};
  const units: Record<string, string> = {};
  for (const metric of METRICS) {
    axes[metric] = values[metric] ?? 0;
    raw[metric] = values[metric] !== undefined ? 1 : null;
    units[metric] = 'unit';
  }
  return { order: [...METRICS], axes, raw, units };
}

export function makeOutcome(processCount: number): SpecifyResponse {
  const processes = Array.from({ length: processCount }, (_, i) => makeProcess(`process-${i}`));
  return {
    processes,
    radar: processes.map(() => makeRadar({ latency_ms: 0.8 })),
    similar_use_cases: [
      { use_case_id: 'uc-1', similarity: 0.91, rank: 1, name: 'Nearby case', description: 'd' },
    ],
    validation: { valid: true, violations: [] },
    provider_id: 'scripted',
    retry_count: 0,
    audit: 'raw model text',
  };
}

export async function flush(): Promise<void> {
  await new Promise((resolve) => setTimeout(resolve, 0));
  await new Promise((resolve) => setTimeout(resolve, 0));
}
