import { describe, expect, it } from 'vitest';

import { ERROR_CODES, errorBanner, presentError } from '../src/errors';

describe('error presentation', () => {
  it('maps every documented code to a presentation', () => {
    for (const code of ERROR_CODES) {
      const presentation = presentError({ status: 400, code, message: 'm' });
      expect(presentation.title.length).toBeGreaterThan(0);
      expect(presentation.hint.length).toBeGreaterThan(0);
    }
  });

  it('falls back gracefully on unknown codes', () => {
    const presentation = presentError({ status: 500, code: 'mystery', message: 'odd' });
    expect(presentation.title).toBe('Unexpected error');
  });

  it('renders the request id and a retry action for retryable errors', () => {
    let retried = false;
    const banner = errorBanner(
      { status: 502, code: 'provider_unavailable', message: 'down', request_id: 'req-42' },
      () => {
        retried = true;
      },
    );
    expect(banner.dataset.code).toBe('provider_unavailable');
    expect(banner.querySelector('.request-id')?.textContent).toContain('req-42');
    (banner.querySelector('.retry-button') as HTMLButtonElement).click();
    expect(retried).toBe(true);
  });

  it('omits the retry action for non-retryable errors', () => {
    const banner = errorBanner(
      { status: 404, code: 'not_found', message: 'missing', request_id: 'req-1' },
      () => undefined,
    );
    expect(banner.querySelector('.retry-button')).toBeNull();
  });
});
