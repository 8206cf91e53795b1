import { clear, el } from './dom';
import { browseView, detailView } from './views/browse';
import { contributeView } from './views/contribute';
import { specifyView } from './views/specify';

type Route = () => HTMLElement;

function resolveRoute(hash: string): Route {
  const detail = hash.match(/^#\/use-case\/(.+)$/);
  if (detail?.[1]) {
    const id = decodeURIComponent(detail[1]);
    return () => detailView(id);
  }
  if (hash.startsWith('#/browse')) {
    return browseView;
  }
  if (hash.startsWith('#/contribute')) {
    return contributeView;
  }
  return specifyView;
}

export function mountApp(root: HTMLElement): void {
  const nav = el(
    'nav',
    { class: 'top-nav' },
    el('a', { href: '#/' }, 'Specify'),
    el('a', { href: '#/browse' }, 'Browse'),
    el('a', { href: '#/contribute' }, 'Contribute'),
  );
  const outlet = el('main', { class: 'outlet' });
  root.append(el('header', {}, el('h1', {}, '6G use-case specifications'), nav), outlet);

  function render(): void {
    clear(outlet);
    outlet.appendChild(resolveRoute(window.location.hash)());
  }
  window.addEventListener('hashchange', render);
  render();
}
