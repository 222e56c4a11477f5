import type { HealthInfo } from "./types.js";

/** One PSI sample per poll; the view keeps a short in-memory timeline for
 * the sparkline and nothing else (no client-side cache of record). */
export interface PsiSample {
  at: number;
  overall: number;
}

export function pushSample(
  timeline: PsiSample[],
  health: HealthInfo,
  at: number,
  cap = 120,
): PsiSample[] {
  if (!health.drift) return timeline;
  return [...timeline, { at, overall: health.drift.overall_max_psi }].slice(
    -cap,
  );
}

function esc(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

function psiBar(name: string, value: number, threshold = 0.2): string {
  const width = Math.min(100, (value / (threshold * 2)) * 100);
  const cls = value > threshold ? "over" : "ok";
  return (
    `<div class="psi-row"><span class="col">${esc(name)}</span>` +
    `<span class="bar"><span class="fill ${cls}" style="width:${width.toFixed(1)}%"></span></span>` +
    `<span class="val">${value.toFixed(3)}</span></div>`
  );
}

export function renderHealth(
  health: HealthInfo,
  timeline: PsiSample[],
): string {
  const counters = Object.entries(health.counters)
    .map(([k, v]) => `<li>${k}: <b>${v}</b></li>`)
    .join("");
  const psi = health.drift
    ? Object.entries(health.drift.per_column_psi)
        .sort(([, a], [, b]) => b - a)
        .map(([col, v]) => psiBar(col, v))
        .join("")
    : `<p class="muted">no drift baseline yet — train a model first</p>`;
  const spark =
    timeline.length > 1
      ? `<svg class="spark" viewBox="0 0 120 24">` +
        `<polyline fill="none" points="${timeline
          .map((s, i) => {
            const x = (i / (timeline.length - 1)) * 118 + 1;
            const y = 22 - Math.min(1, s.overall / 0.4) * 20;
            return `${x.toFixed(1)},${y.toFixed(1)}`;
          })
          .join(" ")}"/></svg>`
      : "";
  const alerts = health.alerts.length
    ? health.alerts
        .slice()
        .reverse()
        .map(
          (a) =>
            `<li class="alert ${a.severity}"><b>${esc(a.kind)}</b> ` +
            `${esc(JSON.stringify(a.evidence))}</li>`,
        )
        .join("")
    : `<li class="muted">no alerts</li>`;
  return (
    `<section class="health">` +
    `<h2>Health — ${esc(health.use_case)}</h2>` +
    `<p>champion <code>${health.champion ?? "none"}</code>, serving ` +
    `<code>${health.policy_version ?? "–"}</code></p>` +
    `<h3>Join counters <span class="tip" title="Orphans are observations with no matching decision; timeouts are decisions whose outcome never arrived inside the join window.">?</span></h3>` +
    `<ul class="counters">${counters}</ul>` +
    `<h3>Feature drift (PSI) <span class="tip" title="Population stability index vs. the champion's training data; above 0.2 triggers a retrain.">?</span> ${spark}</h3>` +
    psi +
    `<h3>Alerts</h3><ul class="alerts">${alerts}</ul>` +
    `</section>`
  );
}
