import type { ValidationReport } from './api';
import { DEFAULT_BOUNDS, MAX_DESCRIPTION_CHARS, MAX_NAME_CHARS, METRICS, type Metric } from './config';

/**
 * Flatten a server ValidationReport into a field-path -> message map so form
 * inputs (keyed by data-field attributes using the same path grammar, e.g.
 * "processes[0].specification.latency_ms") can show inline errors.
 */
export function mapReportToFields(report: ValidationReport | undefined): Record<string, string> {
  const fields: Record<string, string> = {};
  if (!report) {
    return fields;
  }
  for (const violation of report.violations) {
    const key = violation.path || '_root';
    if (!(key in fields)) {
      fields[key] = violation.detail;
    }
  }
  return fields;
}

/** Pull a ValidationReport out of an error body's details, if one is there. */
export function reportFromDetails(details: unknown): ValidationReport | undefined {
  if (details && typeof details === 'object' && 'violations' in details) {
    return details as ValidationReport;
  }
  return undefined;
}

export interface DraftProcess {
  name: string;
  description: string;
  is_real_time: boolean;
  direction: 'transmit' | 'receive';
  message_type: string;
  specification: Partial<Record<Metric, number>>;
}

export interface DraftUseCase {
  name: string;
  description: string;
  contributor_handle: string;
  processes: DraftProcess[];
}

/**
 * Client-side mirror of the server's validation rules, for instant feedback.
 * The server's report remains authoritative; this only pre-empts round trips.
 */
export function validateDraft(draft: DraftUseCase): Record<string, string> {
  const errors: Record<string, string> = {};
  if (!draft.name.trim()) {
    errors['name'] = 'Name is required.';
  } else if (draft.name.length > MAX_NAME_CHARS) {
    errors['name'] = `Name must be at most ${MAX_NAME_CHARS} characters.`;
  }
  if (!draft.description.trim()) {
    errors['description'] = 'Description is required.';
  } else if (draft.description.length > MAX_DESCRIPTION_CHARS) {
    errors['description'] = `Description must be at most ${MAX_DESCRIPTION_CHARS} characters.`;
  }
  if (!draft.contributor_handle.trim()) {
    errors['contributor_handle'] = 'A contributor handle is required.';
  }
  if (draft.processes.length === 0) {
    errors['processes'] = 'Add at least one communication process.';
  }
  draft.processes.forEach((process, i) => {
    if (!process.name.trim()) {
      errors[`processes[${i}].name`] = 'Process name is required.';
    }
    if (!process.description.trim()) {
      errors[`processes[${i}].description`] = 'Process description is required.';
    }
    if (!process.message_type.trim()) {
      errors[`processes[${i}].message_type`] = 'Message type is required.';
    }
    const set = METRICS.filter((metric) => process.specification[metric] !== undefined);
    if (set.length === 0) {
      errors[`processes[${i}].specification`] = 'Set at least one metric.';
    }
    for (const metric of set) {
      const value = process.specification[metric];
      const bounds = DEFAULT_BOUNDS[metric];
      if (value === undefined || Number.isNaN(value)) {
        errors[`processes[${i}].specification.${metric}`] = 'Enter a number.';
      } else if (value < bounds.min || value > bounds.max) {
        errors[`processes[${i}].specification.${metric}`] =
          `Must be between ${bounds.min} and ${bounds.max}.`;
      }
    }
  });
  return errors;
}

export function hasErrors(errors: Record<string, string>): boolean {
  return Object.keys(errors).length > 0;
}
