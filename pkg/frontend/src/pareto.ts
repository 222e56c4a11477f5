import type { Candidate } from "./types.js";

/** Rendering rule only: mark which candidates sit on the Pareto front for
 * the chosen metric pair (maximize-maximize). The gateway's numbers are
 * displayed as-is; this just decides styling. */
export function nondominatedIndices(points: [number, number][]): number[] {
  const keep: number[] = [];
  outer: for (let i = 0; i < points.length; i++) {
    const [xi, yi] = points[i];
    for (let j = 0; j < points.length; j++) {
      if (j === i) continue;
      const [xj, yj] = points[j];
      const geq = xj >= xi && yj >= yi;
      const gt = xj > xi || yj > yi;
      if (geq && gt) continue outer; // dominated
      if (xj === xi && yj === yi && j < i) continue outer; // duplicate
    }
    keep.push(i);
  }
  return keep;
}

export interface ScatterPoint {
  candidateId: string;
  x: number;
  y: number;
  xLo: number;
  xHi: number;
  yLo: number;
  yHi: number;
  onFront: boolean;
}

export function scatterPoints(
  candidates: Candidate[],
  metricX: string,
  metricY: string,
): ScatterPoint[] {
  const usable = candidates.filter(
    (c) => metricX in c.estimates && metricY in c.estimates,
  );
  const coords: [number, number][] = usable.map((c) => [
    c.estimates[metricX],
    c.estimates[metricY],
  ]);
  const front = new Set(nondominatedIndices(coords));
  return usable.map((c, i) => {
    const [xLo, xHi] = c.intervals[metricX] ?? [coords[i][0], coords[i][0]];
    const [yLo, yHi] = c.intervals[metricY] ?? [coords[i][1], coords[i][1]];
    return {
      candidateId: c.id,
      x: coords[i][0],
      y: coords[i][1],
      xLo,
      xHi,
      yLo,
      yHi,
      onFront: front.has(i),
    };
  });
}

const W = 460;
const H = 340;
const PAD = 44;

function scale(lo: number, hi: number, px0: number, px1: number) {
  const span = hi - lo || 1;
  return (v: number) => px0 + ((v - lo) / span) * (px1 - px0);
}

/** Build the metric-vs-metric scatter as an SVG string: front points solid,
 * dominated points greyed, CI whiskers from the interval fields. */
export function scatterSvg(
  points: ScatterPoint[],
  metricX: string,
  metricY: string,
): string {
  if (points.length === 0) {
    return `<svg class="pareto" viewBox="0 0 ${W} ${H}"><text x="${W / 2}" y="${H / 2}" text-anchor="middle">no candidates with both metrics</text></svg>`;
  }
  const xs = points.flatMap((p) => [p.xLo, p.xHi]);
  const ys = points.flatMap((p) => [p.yLo, p.yHi]);
  const sx = scale(Math.min(...xs), Math.max(...xs), PAD, W - PAD / 2);
  const sy = scale(Math.min(...ys), Math.max(...ys), H - PAD, PAD / 2);
  const marks = points
    .map((p) => {
      const cls = p.onFront ? "front" : "dominated";
      const cx = sx(p.x);
      const cy = sy(p.y);
      return (
        `<line class="ci ${cls}" x1="${sx(p.xLo)}" y1="${cy}" x2="${sx(p.xHi)}" y2="${cy}"/>` +
        `<line class="ci ${cls}" x1="${cx}" y1="${sy(p.yLo)}" x2="${cx}" y2="${sy(p.yHi)}"/>` +
        `<circle class="pt ${cls}" data-candidate="${p.candidateId}" cx="${cx}" cy="${cy}" r="${p.onFront ? 6 : 4}"><title>${p.candidateId}: (${p.x.toFixed(4)}, ${p.y.toFixed(4)})</title></circle>`
      );
    })
    .join("");
  return (
    `<svg class="pareto" viewBox="0 0 ${W} ${H}">` +
    `<line class="axis" x1="${PAD}" y1="${H - PAD}" x2="${W - PAD / 2}" y2="${H - PAD}"/>` +
    `<line class="axis" x1="${PAD}" y1="${PAD / 2}" x2="${PAD}" y2="${H - PAD}"/>` +
    `<text class="label" x="${W / 2}" y="${H - 8}" text-anchor="middle">${metricX}</text>` +
    `<text class="label" x="14" y="${H / 2}" text-anchor="middle" transform="rotate(-90 14 ${H / 2})">${metricY}</text>` +
    marks +
    `</svg>`
  );
}
