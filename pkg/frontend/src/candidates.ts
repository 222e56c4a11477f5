import type { Candidate } from "./types.js";
import { scatterPoints, scatterSvg } from "./pareto.js";

/** Deploy gating mirrors the gateway's rule for the button state only: the
 * request itself still goes through POST /deploy and can come back 409. A
 * candidate whose canary verdict is "promote" (or not yet judged) deploys
 * directly; a rejected one needs a written override reason. */
export function deployEnabled(
  verdict: string | null,
  overrideReason: string,
): boolean {
  if (verdict !== "reject") return true;
  return overrideReason.trim().length > 0;
}

export function needsOverride(verdict: string | null): boolean {
  return verdict === "reject";
}

export interface CandidatesView {
  candidates: Candidate[];
  metricX: string;
  metricY: string;
  selectedId: string | null;
  overrideReason: string;
}

export function metricPairs(candidates: Candidate[]): string[] {
  const names = new Set<string>();
  for (const c of candidates) {
    for (const m of Object.keys(c.estimates)) names.add(m);
  }
  return [...names].sort();
}

export function selected(view: CandidatesView): Candidate | null {
  return view.candidates.find((c) => c.id === view.selectedId) ?? null;
}

function fmt(v: number): string {
  return v.toFixed(4);
}

function esc(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

/** Render the review-and-select screen. All displayed numbers come from the
 * gateway candidate records; the scatter marks nondominated points as a
 * styling rule only. */
export function renderCandidates(view: CandidatesView): string {
  const metrics = metricPairs(view.candidates);
  const [mx, my] =
    metrics.length >= 2 ? [view.metricX, view.metricY] : [metrics[0], metrics[0]];
  const points = scatterPoints(view.candidates, mx, my);
  const rows = view.candidates
    .map((c) => {
      const est = Object.entries(c.estimates)
        .map(([m, v]) => `${esc(m)}=${fmt(v)}`)
        .join(", ");
      const sel = c.id === view.selectedId ? " selected" : "";
      const verdict = c.canary_verdict ?? "–";
      return (
        `<tr class="candidate${sel}" data-candidate="${c.id}">` +
        `<td>${c.id}</td><td>${esc(c.policy_version)}</td>` +
        `<td>${est}</td><td class="verdict-${verdict}">${verdict}</td></tr>`
      );
    })
    .join("");
  const cand = selected(view);
  const dialog = cand ? renderDeployDialog(cand, view.overrideReason) : "";
  return (
    `<section class="candidates">` +
    `<h2>Candidates <span class="tip" title="Each candidate is a tuned policy scored by counterfactual evaluation on logged data — no online traffic was spent.">?</span></h2>` +
    (metrics.length >= 2
      ? `<div class="pair">axes: ${mx} vs ${my}</div>`
      : "") +
    scatterSvg(points, mx, my) +
    `<table><thead><tr><th>id</th><th>policy version</th><th>estimates</th><th>canary</th></tr></thead>` +
    `<tbody>${rows}</tbody></table>` +
    dialog +
    `</section>`
  );
}

export function renderDeployDialog(
  cand: Candidate,
  overrideReason: string,
): string {
  const enabled = deployEnabled(cand.canary_verdict, overrideReason);
  const overrideBox = needsOverride(cand.canary_verdict)
    ? `<label>override reason (required — the gate rejected this candidate):` +
      `<input id="override-reason" value="${esc(overrideReason)}"/></label>`
    : "";
  const intervals = Object.entries(cand.intervals)
    .map(([m, [lo, hi]]) => `<li>${esc(m)}: [${fmt(lo)}, ${fmt(hi)}]</li>`)
    .join("");
  return (
    `<div class="deploy-dialog" data-candidate="${cand.id}">` +
    `<h3>Deploy ${cand.id}</h3>` +
    `<p>policy version <code>${esc(cand.policy_version)}</code>, manifest <code>${cand.manifest_id}</code></p>` +
    (intervals ? `<ul class="intervals">${intervals}</ul>` : "") +
    overrideBox +
    `<button id="deploy-btn"${enabled ? "" : " disabled"}>Deploy</button>` +
    `</div>`
  );
}
