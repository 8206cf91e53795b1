import { afterEach, describe, expect, it, vi } from 'vitest';

import { METRICS } from '../src/config';
import { specifyView } from '../src/views/specify';
import { flush, jsonResponse, makeOutcome, mockFetch } from './helpers';

function mount(): HTMLElement {
  document.body.innerHTML = '';
  const view = specifyView();
  document.body.appendChild(view);
  return view;
}

function fillAndSubmit(view: HTMLElement, name: string, description: string): void {
  (view.querySelector('[name="name"]') as HTMLInputElement).value = name;
  (view.querySelector('[name="description"]') as HTMLTextAreaElement).value = description;
  (view.querySelector('form') as HTMLFormElement).dispatchEvent(
    new Event('submit', { cancelable: true }),
  );
}

afterEach(() => {
  vi.unstubAllGlobals();
});

describe('specify screen', () => {
  it('renders one radar chart per returned process with the fixed axis order', async () => {
    mockFetch(() => jsonResponse(200, makeOutcome(3)));
    const view = mount();
    fillAndSubmit(view, 'Port logistics', 'Automated container handling.');
    await flush();
    const charts = view.querySelectorAll('svg.radar-chart');
    expect(charts.length).toBe(3);
    for (const chart of charts) {
      const labels = [...chart.querySelectorAll('text.radar-label')].map(
        (node) => (node as SVGTextElement).dataset.metric,
      );
      expect(labels).toEqual([...METRICS]);
    }
    expect(view.querySelectorAll('.similar-card').length).toBe(1);
    expect(view.querySelector('.audit pre')?.textContent).toBe('raw model text');
  });

  it('blocks empty descriptions client-side without any request', async () => {
    const fetchSpy = mockFetch(() => jsonResponse(200, makeOutcome(1)));
    const view = mount();
    fillAndSubmit(view, 'Named', '   ');
    await flush();
    expect(fetchSpy).not.toHaveBeenCalled();
    expect(view.querySelector('[data-field="description"]')?.classList.contains('invalid')).toBe(
      true,
    );
  });

  it('surfaces 502 errors as a banner with the request id', async () => {
    mockFetch(() =>
      jsonResponse(502, {
        status: 502,
        code: 'provider_unavailable',
        message: 'provider outage',
        request_id: 'req-99',
      }),
    );
    const view = mount();
    fillAndSubmit(view, 'Port logistics', 'Automated container handling.');
    await flush();
    const banner = view.querySelector('.error-banner') as HTMLElement;
    expect(banner.dataset.code).toBe('provider_unavailable');
    expect(banner.querySelector('.request-id')?.textContent).toContain('req-99');
  });

  it('offers a retry action on 422 generation failures', async () => {
    const fetchSpy = mockFetch(() =>
      jsonResponse(422, {
        status: 422,
        code: 'generation_unparseable',
        message: 'no JSON in output',
        request_id: 'req-7',
      }),
    );
    const view = mount();
    fillAndSubmit(view, 'Port logistics', 'Automated container handling.');
    await flush();
    const retry = view.querySelector('.retry-button') as HTMLButtonElement;
    expect(retry).not.toBeNull();
    retry.click();
    await flush();
    expect(fetchSpy).toHaveBeenCalledTimes(2);
  });
});
