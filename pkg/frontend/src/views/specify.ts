import { ApiError, postSpecify, type SpecifyResponse } from '../api';
import { MAX_DESCRIPTION_CHARS, MAX_NAME_CHARS } from '../config';
import { applyFieldErrors, clear, el } from '../dom';
import { errorBanner } from '../errors';
import { renderRadar } from '../radar';

/** Specify screen: description form -> one radar chart per generated process. */
export function specifyView(): HTMLElement {
  const root = el('section', { class: 'specify-view' });
  const form = el('form', { class: 'specify-form' });
  const nameInput = el('input', {
    'data-field': 'name',
    name: 'name',
    placeholder: 'Use case name',
    maxLength: String(MAX_NAME_CHARS),
  });
  const descriptionInput = el('textarea', {
    'data-field': 'description',
    name: 'description',
    placeholder: 'Describe the networked application in a few sentences…',
    maxLength: String(MAX_DESCRIPTION_CHARS),
    rows: '5',
  });
  const submit = el('button', { type: 'submit', class: 'primary' }, 'Generate specification');
  form.append(
    el('label', {}, 'Name', nameInput),
    el('label', {}, 'Description', descriptionInput),
    submit,
  );
  const results = el('div', { class: 'specify-results' });
  root.append(el('h2', {}, 'Specify a use case'), form, results);

  async function run(): Promise<void> {
    const name = nameInput.value.trim();
    const description = descriptionInput.value.trim();
    const clientErrors: Record<string, string> = {};
    if (!name) clientErrors['name'] = 'Name is required.';
    if (!description) clientErrors['description'] = 'Description is required.';
    applyFieldErrors(form, clientErrors);
    if (Object.keys(clientErrors).length > 0) {
      return; // no request leaves the browser on client-side validation failure
    }
    clear(results);
    results.appendChild(el('p', { class: 'loading' }, 'Generating…'));
    try {
      const outcome = await postSpecify({ name, description });
      renderOutcome(results, outcome);
    } catch (error) {
      clear(results);
      if (error instanceof ApiError) {
        results.appendChild(errorBanner(error.body, () => void run()));
      } else {
        throw error;
      }
    }
  }

  form.addEventListener('submit', (event) => {
    event.preventDefault();
    void run();
  });
  return root;
}

export function renderOutcome(container: HTMLElement, outcome: SpecifyResponse): void {
  clear(container);
  const charts = el('div', { class: 'process-grid' });
  outcome.processes.forEach((process, i) => {
    const radar = outcome.radar[i];
    const card = el(
      'article',
      { class: 'process-card', 'data-process-id': process.id },
      el('h3', {}, process.name),
      el(
        'p',
        { class: 'process-meta' },
        `${process.direction} · ${process.is_real_time ? 'real-time' : 'best-effort'} · ${process.message_type}`,
      ),
      el('p', {}, process.description),
    );
    if (radar) {
      card.appendChild(renderRadar(radar, process.name));
    }
    charts.appendChild(card);
  });
  container.appendChild(charts);

  if (!outcome.validation.valid) {
    const warnings = el('div', { class: 'validation-warnings' }, el('strong', {}, 'Validation issues'));
    for (const violation of outcome.validation.violations) {
      warnings.appendChild(el('p', {}, `${violation.path}: ${violation.detail}`));
    }
    container.appendChild(warnings);
  }

  const similar = el('div', { class: 'similar-cards' }, el('h3', {}, 'Similar published use cases'));
  if (outcome.similar_use_cases.length === 0) {
    similar.appendChild(el('p', {}, 'No similar use cases in the knowledge base yet.'));
  }
  for (const hit of outcome.similar_use_cases) {
    similar.appendChild(
      el(
        'a',
        { class: 'similar-card', href: `#/use-case/${hit.use_case_id}` },
        el('strong', {}, hit.name ?? hit.use_case_id),
        el('span', { class: 'similarity' }, ` similarity ${hit.similarity.toFixed(3)} (rank ${hit.rank})`),
      ),
    );
  }
  container.appendChild(similar);

  const audit = el(
    'details',
    { class: 'audit' },
    el('summary', {}, `Raw model output (provider ${outcome.provider_id}, ${outcome.retry_count} retries)`),
    el('pre', {}, outcome.audit),
  );
  container.appendChild(audit);
}
