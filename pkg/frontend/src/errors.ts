import type { ApiErrorBody } from './api';

/** The server's closed error-code set. Keep in sync with the API documentation. */
export const ERROR_CODES = [
  'validation_failed',
  'bad_request',
  'unauthorized',
  'forbidden',
  'not_found',
  'not_published',
  'not_pending',
  'range_conflict',
  'payload_too_large',
  'generation_unparseable',
  'rate_limited',
  'provider_unavailable',
  'internal_error',
] as const;

export type ErrorCode = (typeof ERROR_CODES)[number];

export interface ErrorPresentation {
  title: string;
  hint: string;
  retryable: boolean;
}

function presentKnown(code: ErrorCode): ErrorPresentation {
  switch (code) {
    case 'validation_failed':
      return { title: 'Input not valid', hint: 'Fix the highlighted fields and submit again.', retryable: false };
    case 'bad_request':
      return { title: 'Malformed request', hint: 'The request could not be read. Reload and try again.', retryable: false };
    case 'unauthorized':
      return { title: 'Operator key required', hint: 'This action needs a valid operator key.', retryable: false };
    case 'forbidden':
      return { title: 'Not allowed', hint: 'Only operators can access non-published content.', retryable: false };
    case 'not_found':
      return { title: 'Not found', hint: 'The requested use case does not exist or is not published.', retryable: false };
    case 'not_published':
      return { title: 'Not published yet', hint: 'Votes and comments only apply to published use cases.', retryable: false };
    case 'not_pending':
      return { title: 'Already decided', hint: 'This contribution has already been moderated.', retryable: false };
    case 'range_conflict':
      return { title: 'Range conflict', hint: 'The new ranges would invalidate published use cases.', retryable: false };
    case 'payload_too_large':
      return { title: 'Document too large', hint: 'Documents are limited to 2 MB of text.', retryable: false };
    case 'generation_unparseable':
      return { title: 'Generation failed to parse', hint: 'The model produced unusable output. Retrying often helps.', retryable: true };
    case 'rate_limited':
      return { title: 'Too many requests', hint: 'Wait a minute before generating again.', retryable: true };
    case 'provider_unavailable':
      return { title: 'Provider unavailable', hint: 'The AI provider is unreachable. Try again shortly.', retryable: true };
    case 'internal_error':
      return { title: 'Server error', hint: 'Something went wrong on the server.', retryable: true };
  }
  // Exhaustiveness guard: adding a code to ERROR_CODES without a branch above
  // is a compile-time error.
  return assertNever(code);
}

function assertNever(value: never): never {
  throw new Error(`unhandled error code: ${String(value)}`);
}

export function isKnownCode(code: string): code is ErrorCode {
  return (ERROR_CODES as readonly string[]).includes(code);
}

export function presentError(body: ApiErrorBody): ErrorPresentation {
  if (isKnownCode(body.code)) {
    return presentKnown(body.code);
  }
  return { title: 'Unexpected error', hint: body.message, retryable: false };
}

/** Error banner element with code, message, request id and an optional retry action. */
export function errorBanner(body: ApiErrorBody, onRetry?: () => void): HTMLElement {
  const presentation = presentError(body);
  const banner = document.createElement('div');
  banner.className = 'error-banner';
  banner.dataset.code = body.code;

  const title = document.createElement('strong');
  title.textContent = presentation.title;
  banner.appendChild(title);

  const message = document.createElement('p');
  message.textContent = `${presentation.hint} (${body.message})`;
  banner.appendChild(message);

  if (body.request_id) {
    const requestId = document.createElement('small');
    requestId.className = 'request-id';
    requestId.textContent = `request id: ${body.request_id}`;
    banner.appendChild(requestId);
  }

  if (presentation.retryable && onRetry) {
    const retry = document.createElement('button');
    retry.type = 'button';
    retry.className = 'retry-button';
    retry.textContent = 'Retry';
    retry.addEventListener('click', onRetry);
    banner.appendChild(retry);
  }
  return banner;
}
