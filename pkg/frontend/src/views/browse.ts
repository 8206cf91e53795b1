import {
  ApiError,
  castVote,
  getUseCase,
  listUseCases,
  postComment,
  type Tally,
  type UseCaseDetail,
} from '../api';
import { MAX_COMMENT_CHARS } from '../config';
import { clear, el } from '../dom';
import { errorBanner } from '../errors';
import { optimisticVote } from '../optimistic';
import { renderRadar } from '../radar';

const voterHandle = 'web-visitor';
const myVotes = new Map<string, 'up' | 'down'>();

/** Browse screen: paged cards of published use cases. */
export function browseView(): HTMLElement {
  const root = el('section', { class: 'browse-view' }, el('h2', {}, 'Published use cases'));
  const list = el('div', { class: 'use-case-list' });
  root.appendChild(list);
  void (async () => {
    try {
      const page = await listUseCases(1, 50);
      if (page.items.length === 0) {
        list.appendChild(el('p', {}, 'Nothing published yet.'));
      }
      for (const item of page.items) {
        list.appendChild(
          el(
            'a',
            { class: 'use-case-card', href: `#/use-case/${item.id}` },
            el('strong', {}, item.name),
            el('p', {}, item.description.length > 180 ? `${item.description.slice(0, 180)}…` : item.description),
            el(
              'span',
              { class: 'card-meta' },
              `${item.process_count} processes · ▲${item.tally.up} ▼${item.tally.down} · ${item.comment_count} comments`,
            ),
          ),
        );
      }
    } catch (error) {
      if (error instanceof ApiError) {
        list.appendChild(errorBanner(error.body));
      } else {
        throw error;
      }
    }
  })();
  return root;
}

/** Detail screen: processes with radar charts, votes and comments. */
export function detailView(useCaseId: string): HTMLElement {
  const root = el('section', { class: 'detail-view' });
  void (async () => {
    try {
      render(await getUseCase(useCaseId));
    } catch (error) {
      if (error instanceof ApiError) {
        root.appendChild(errorBanner(error.body));
      } else {
        throw error;
      }
    }
  })();

  function render(detail: UseCaseDetail): void {
    clear(root);
    root.append(el('h2', {}, detail.name), el('p', {}, detail.description));
    root.appendChild(voteControls(detail.id, detail.tally));

    const grid = el('div', { class: 'process-grid' });
    detail.processes.forEach((process, i) => {
      const radar = detail.radar[i];
      const card = el(
        'article',
        { class: 'process-card', 'data-process-id': process.id },
        el('h3', {}, process.name),
        el(
          'p',
          { class: 'process-meta' },
          `${process.direction} · ${process.is_real_time ? 'real-time' : 'best-effort'} · ${process.message_type}`,
        ),
      );
      if (radar) {
        card.appendChild(renderRadar(radar, process.name));
      }
      grid.appendChild(card);
    });
    root.appendChild(grid);
    root.appendChild(commentSection(detail));
  }
  return root;
}

export function voteControls(useCaseId: string, initial: Tally): HTMLElement {
  const container = el('div', { class: 'vote-controls' });
  const tallyLabel = el('span', { class: 'tally' });
  let shown = initial;

  function apply(tally: Tally): void {
    shown = tally;
    tallyLabel.textContent = `▲ ${tally.up} ▼ ${tally.down}`;
    tallyLabel.dataset.up = String(tally.up);
    tallyLabel.dataset.down = String(tally.down);
  }
  apply(initial);

  let inflight = false; // debounce: one vote request at a time
  async function vote(value: 'up' | 'down'): Promise<void> {
    if (inflight) {
      return;
    }
    inflight = true;
    const previous = myVotes.get(useCaseId) ?? null;
    try {
      await optimisticVote(shown, value, previous, apply, async () => {
        const response = await castVote(useCaseId, voterHandle, value);
        return response.tally;
      });
      myVotes.set(useCaseId, value);
    } catch (error) {
      if (error instanceof ApiError) {
        container.appendChild(errorBanner(error.body));
      } else {
        throw error;
      }
    } finally {
      inflight = false;
    }
  }

  const upButton = el('button', { type: 'button', class: 'vote-up' }, '▲');
  upButton.addEventListener('click', () => void vote('up'));
  const downButton = el('button', { type: 'button', class: 'vote-down' }, '▼');
  downButton.addEventListener('click', () => void vote('down'));
  container.append(upButton, downButton, tallyLabel);
  return container;
}

function commentSection(detail: UseCaseDetail): HTMLElement {
  const section = el('div', { class: 'comments' }, el('h3', {}, `Comments (${detail.comments.length})`));
  const list = el('ul', { class: 'comment-list' });
  for (const comment of detail.comments) {
    list.appendChild(el('li', {}, el('strong', {}, comment.author_handle), ` ${comment.body}`));
  }
  section.appendChild(list);

  const form = el('form', { class: 'comment-form' });
  const body = el('textarea', { rows: '3', placeholder: 'Add a comment…' });
  const counter = el('span', { class: 'char-counter' }, `0 / ${MAX_COMMENT_CHARS}`);
  const submit = el('button', { type: 'submit' }, 'Comment');
  body.addEventListener('input', () => {
    counter.textContent = `${body.value.length} / ${MAX_COMMENT_CHARS}`;
    submit.disabled = body.value.length === 0 || body.value.length > MAX_COMMENT_CHARS;
  });
  submit.disabled = true;
  form.append(body, counter, submit);
  form.addEventListener('submit', (event) => {
    event.preventDefault();
    void (async () => {
      try {
        await postComment(detail.id, voterHandle, body.value);
        list.appendChild(el('li', {}, el('strong', {}, voterHandle), ` ${body.value}`));
        body.value = '';
        counter.textContent = `0 / ${MAX_COMMENT_CHARS}`;
      } catch (error) {
        if (error instanceof ApiError) {
          form.appendChild(errorBanner(error.body));
        } else {
          throw error;
        }
      }
    })();
  });
  section.appendChild(form);
  return section;
}
