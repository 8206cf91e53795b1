import { ApiError, contributeUseCase, type ContributionView } from '../api';
import { DEFAULT_BOUNDS, METRIC_LABELS, METRICS, type Metric } from '../config';
import { applyFieldErrors, clear, el } from '../dom';
import { errorBanner } from '../errors';
import {
  hasErrors,
  mapReportToFields,
  reportFromDetails,
  validateDraft,
  type DraftProcess,
  type DraftUseCase,
} from '../validation';

/** Contribute screen: structured editor for a use case and its processes. */
export function contributeView(): HTMLElement {
  const root = el('section', { class: 'contribute-view' }, el('h2', {}, 'Contribute a use case'));
  const form = el('form', { class: 'contribute-form' });
  const nameInput = el('input', { 'data-field': 'name', name: 'name', placeholder: 'Use case name' });
  const descriptionInput = el('textarea', {
    'data-field': 'description',
    name: 'description',
    rows: '4',
    placeholder: 'What does the application do, and what does it connect?',
  });
  const handleInput = el('input', {
    'data-field': 'contributor_handle',
    name: 'contributor_handle',
    placeholder: 'Your handle',
  });
  const processesContainer = el('div', { class: 'process-editors', 'data-field': 'processes' });
  const addProcess = el('button', { type: 'button', class: 'add-process' }, 'Add process');
  addProcess.addEventListener('click', () => {
    processesContainer.appendChild(processEditor(processesContainer.childElementCount));
  });
  const submit = el('button', { type: 'submit', class: 'primary' }, 'Submit for review');
  form.append(
    el('label', {}, 'Name', nameInput),
    el('label', {}, 'Description', descriptionInput),
    el('label', {}, 'Contributor handle', handleInput),
    el('h3', {}, 'Communication processes'),
    processesContainer,
    addProcess,
    submit,
  );
  processesContainer.appendChild(processEditor(0));
  const outcome = el('div', { class: 'contribution-outcome' });
  root.append(form, outcome);

  form.addEventListener('submit', (event) => {
    event.preventDefault();
    void (async () => {
      const draft = collectDraft(form, processesContainer);
      const clientErrors = validateDraft(draft);
      applyFieldErrors(form, clientErrors);
      if (hasErrors(clientErrors)) {
        return;
      }
      clear(outcome);
      try {
        const view = await contributeUseCase({
          name: draft.name,
          description: draft.description,
          contributor_handle: draft.contributor_handle,
          processes: draft.processes.map((p) => ({
            name: p.name,
            description: p.description,
            is_real_time: p.is_real_time,
            direction: p.direction,
            message_type: p.message_type,
            specification: p.specification,
          })),
        });
        renderScreening(outcome, view);
      } catch (error) {
        if (error instanceof ApiError) {
          const report = reportFromDetails(error.body.details);
          if (report) {
            applyFieldErrors(form, mapReportToFields(report));
          }
          outcome.appendChild(errorBanner(error.body));
        } else {
          throw error;
        }
      }
    })();
  });
  return root;
}

function processEditor(index: number): HTMLElement {
  const editor = el('fieldset', { class: 'process-editor', 'data-process-index': String(index) });
  editor.appendChild(el('legend', {}, `Process ${index + 1}`));
  editor.appendChild(
    el('input', {
      'data-field': `processes[${index}].name`,
      'data-role': 'name',
      placeholder: 'Process name',
    }),
  );
  editor.appendChild(
    el('input', {
      'data-field': `processes[${index}].description`,
      'data-role': 'description',
      placeholder: 'What this connection carries',
    }),
  );
  editor.appendChild(
    el('input', {
      'data-field': `processes[${index}].message_type`,
      'data-role': 'message_type',
      placeholder: 'Message type (e.g. sensor point cloud)',
    }),
  );

  const realTime = el('input', { type: 'checkbox', 'data-role': 'is_real_time' });
  editor.appendChild(el('label', { class: 'inline' }, realTime, ' real-time'));

  const direction = el('select', { 'data-role': 'direction', 'data-field': `processes[${index}].direction` });
  direction.append(el('option', { value: 'transmit' }, 'transmit'), el('option', { value: 'receive' }, 'receive'));
  editor.appendChild(el('label', { class: 'inline' }, 'direction ', direction));

  const grid = el('div', { class: 'metric-grid' });
  for (const metric of METRICS) {
    const bounds = DEFAULT_BOUNDS[metric];
    const input = el('input', {
      type: 'number',
      'data-role': `metric:${metric}`,
      'data-field': `processes[${index}].specification.${metric}`,
      placeholder: `${bounds.min} – ${bounds.max}`,
      step: 'any',
    });
    grid.appendChild(el('label', { class: 'metric' }, METRIC_LABELS[metric], input));
  }
  editor.appendChild(grid);
  return editor;
}

export function collectDraft(form: HTMLElement, processesContainer: HTMLElement): DraftUseCase {
  const value = (selector: string): string =>
    (form.querySelector(selector) as HTMLInputElement | HTMLTextAreaElement | null)?.value ?? '';
  const processes: DraftProcess[] = [];
  processesContainer.querySelectorAll<HTMLElement>('.process-editor').forEach((editor) => {
    const role = (name: string) =>
      editor.querySelector<HTMLInputElement>(`[data-role="${name}"]`);
    const specification: Partial<Record<Metric, number>> = {};
    for (const metric of METRICS) {
      const raw = role(`metric:${metric}`)?.value ?? '';
      if (raw.trim() !== '') {
        specification[metric] = Number(raw);
      }
    }
    processes.push({
      name: role('name')?.value ?? '',
      description: role('description')?.value ?? '',
      message_type: role('message_type')?.value ?? '',
      is_real_time: role('is_real_time')?.checked ?? false,
      direction: (editor.querySelector<HTMLSelectElement>('[data-role="direction"]')?.value ??
        'transmit') as DraftProcess['direction'],
      specification,
    });
  });
  return {
    name: value('[name="name"]'),
    description: value('[name="description"]'),
    contributor_handle: value('[name="contributor_handle"]'),
    processes,
  };
}

export function renderScreening(container: HTMLElement, view: ContributionView): void {
  clear(container);
  const panel = el('div', { class: 'screening-panel', 'data-state': view.decision.state });
  panel.appendChild(el('strong', {}, 'Submitted: pending review'));
  panel.appendChild(
    el(
      'p',
      {},
      'A moderator checks every contribution before it joins the public knowledge base.',
    ),
  );
  if (view.screening.duplicate_flag) {
    const warning = el(
      'div',
      { class: 'duplicate-warning' },
      el('strong', {}, 'Possible duplicate'),
      el(
        'p',
        {},
        `Very similar to an existing use case (similarity ${view.screening.max_similarity.toFixed(3)}). `,
      ),
    );
    if (view.screening.nearest_use_case_id) {
      warning.appendChild(
        el('a', { href: `#/use-case/${view.screening.nearest_use_case_id}` }, 'See the nearest match'),
      );
    }
    panel.appendChild(warning);
  }
  container.appendChild(panel);
}
