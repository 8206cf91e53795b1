/** Small DOM construction helpers; no framework. */

export function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  ...children: Array<Node | string>
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    if (key === 'class') {
      node.className = value;
    } else if (key.startsWith('data-')) {
      node.setAttribute(key, value);
    } else {
      (node as unknown as Record<string, unknown>)[key] = value;
    }
  }
  node.append(...children);
  return node;
}

export function clear(node: HTMLElement): void {
  while (node.firstChild) {
    node.removeChild(node.firstChild);
  }
}

export function fieldError(message: string): HTMLElement {
  return el('span', { class: 'field-error' }, message);
}

/** Attach inline errors next to inputs carrying matching data-field paths. */
export function applyFieldErrors(root: HTMLElement, errors: Record<string, string>): void {
  root.querySelectorAll('.field-error').forEach((node) => node.remove());
  root.querySelectorAll<HTMLElement>('[data-field]').forEach((input) => {
    const path = input.dataset.field;
    if (path && errors[path]) {
      input.classList.add('invalid');
      input.insertAdjacentElement('afterend', fieldError(errors[path]));
    } else {
      input.classList.remove('invalid');
    }
  });
}
