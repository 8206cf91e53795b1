import type { RadarAxes } from './api';
import { METRICS, METRIC_LABELS, type Metric } from './config';

const SVG_NS = 'http://www.w3.org/2000/svg';
const SIZE = 300;
const CENTER = SIZE / 2;
const RADIUS = 105;

function polar(index: number, count: number, radius: number): [number, number] {
  const angle = (2 * Math.PI * index) / count - Math.PI / 2;
  return [CENTER + radius * Math.cos(angle), CENTER + radius * Math.sin(angle)];
}

/**
 * Render one process's radar chart as an SVG element.
 *
 * Axis values come straight from the server's RadarAxes payload; the client
 * never rescales or recomputes them. Axis order is the fixed ontology order,
 * identical on every screen.
 */
export function renderRadar(radar: RadarAxes, title: string): SVGSVGElement {
  const svg = document.createElementNS(SVG_NS, 'svg');
  svg.setAttribute('viewBox', `0 0 ${SIZE} ${SIZE}`);
  svg.setAttribute('role', 'img');
  svg.classList.add('radar-chart');
  svg.dataset.title = title;

  for (const ring of [0.25, 0.5, 0.75, 1.0]) {
    const polygon = document.createElementNS(SVG_NS, 'polygon');
    polygon.setAttribute(
      'points',
      METRICS.map((_, i) => polar(i, METRICS.length, RADIUS * ring).join(',')).join(' '),
    );
    polygon.classList.add('radar-grid');
    svg.appendChild(polygon);
  }

  METRICS.forEach((metric, i) => {
    const [x, y] = polar(i, METRICS.length, RADIUS);
    const spoke = document.createElementNS(SVG_NS, 'line');
    spoke.setAttribute('x1', String(CENTER));
    spoke.setAttribute('y1', String(CENTER));
    spoke.setAttribute('x2', String(x));
    spoke.setAttribute('y2', String(y));
    spoke.classList.add('radar-spoke');
    svg.appendChild(spoke);

    const [lx, ly] = polar(i, METRICS.length, RADIUS + 16);
    const label = document.createElementNS(SVG_NS, 'text');
    label.setAttribute('x', String(lx));
    label.setAttribute('y', String(ly));
    label.setAttribute('text-anchor', 'middle');
    label.classList.add('radar-label');
    label.dataset.metric = metric;
    label.textContent = METRIC_LABELS[metric];
    svg.appendChild(label);
  });

  const shape = document.createElementNS(SVG_NS, 'polygon');
  shape.setAttribute(
    'points',
    METRICS.map((metric, i) =>
      polar(i, METRICS.length, RADIUS * clamp01(radar.axes[metric] ?? 0)).join(','),
    ).join(' '),
  );
  shape.classList.add('radar-shape');
  svg.appendChild(shape);

  METRICS.forEach((metric, i) => {
    const value = clamp01(radar.axes[metric] ?? 0);
    const [x, y] = polar(i, METRICS.length, RADIUS * value);
    const dot = document.createElementNS(SVG_NS, 'circle');
    dot.setAttribute('cx', String(x));
    dot.setAttribute('cy', String(y));
    dot.setAttribute('r', '3');
    dot.classList.add('radar-point');
    dot.dataset.metric = metric;
    dot.dataset.axis = String(radar.axes[metric] ?? 0);
    const raw = radar.raw[metric];
    const unit = radar.units[metric] ?? '';
    const tooltip = document.createElementNS(SVG_NS, 'title');
    tooltip.textContent =
      raw === null || raw === undefined
        ? `${METRIC_LABELS[metric]}: not constrained`
        : `${METRIC_LABELS[metric]}: ${raw} ${unit}`;
    dot.appendChild(tooltip);
    svg.appendChild(dot);
  });

  return svg;
}

function clamp01(value: number): number {
  return Math.max(0, Math.min(1, value));
}

/** The axis order every chart uses; exported so tests and screens can assert it. */
export function radarAxisOrder(): readonly Metric[] {
  return METRICS;
}
