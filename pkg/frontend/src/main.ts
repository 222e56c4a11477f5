import { ApiError, GatewayClient } from "./api.js";
import {
  deployEnabled,
  renderCandidates,
  selected,
  type CandidatesView,
} from "./candidates.js";
import { pushSample, renderHealth, type PsiSample } from "./health.js";
import {
  applySubmitFailure,
  applySubmitSuccess,
  back,
  canAdvance,
  canSubmit,
  initialWizard,
  next,
  prepareSubmit,
  problemMessage,
  problemsFor,
  updateDraft,
  type WizardState,
} from "./wizard.js";

/** Single-user SPA shell: hash routing between the wizard, the candidates
 * review, and the health view; 2s polling for jobs and health. Served by
 * the gateway at /console, so the API lives at the same origin. */

const api = new GatewayClient(
  (window as unknown as { DECLAB_URL?: string }).DECLAB_URL ?? "",
);
const root = document.getElementById("app")!;
const POLL_MS = 2000;

let wizard: WizardState = initialWizard();
let candidatesView: CandidatesView | null = null;
let psiTimeline: PsiSample[] = [];
let pollTimer: number | undefined;

function route(): { view: string; useCase: string } {
  const [, view = "wizard", useCase = ""] = window.location.hash.split("/");
  return { view, useCase };
}

function esc(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

function nav(useCase: string): string {
  const uc = useCase || "your-use-case";
  return (
    `<nav><a href="#/wizard">onboard</a>` +
    `<a href="#/candidates/${uc}">candidates</a>` +
    `<a href="#/health/${uc}">health</a></nav>`
  );
}

// --- wizard -----------------------------------------------------------------

function inline(field: string): string {
  return problemsFor(wizard, field)
    .map((p) => `<p class="problem">${esc(problemMessage(p))}</p>`)
    .join("");
}

function renderWizard(): void {
  if (wizard.submitted) {
    root.innerHTML =
      nav(wizard.createdId ?? "") +
      `<section class="wizard"><h2>Use case created</h2>` +
      `<p>id <code id="created-id">${esc(wizard.createdId ?? "")}</code></p>` +
      `<p>Log decide/observe traffic, then submit a training job to get a first champion.</p></section>`;
    return;
  }
  const d = wizard.draft;
  const banner = wizard.serverError
    ? `<p class="problem banner">${esc(wizard.serverError)}</p>`
    : "";
  const steps: Record<string, string> = {
    decisions:
      `<h2>1 · Decision <span class="tip" title="The set of actions the policy chooses between for every request.">?</span></h2>` +
      `<label>use case id<input id="f-id" value="${esc(d.id)}"/></label>${inline("id")}` +
      `<label>actions (comma-separated)<input id="f-actions" value="${esc(d.actions.join(", "))}"/></label>` +
      `<label>kind<select id="f-kind">` +
      ["binary", "multiclass", "ranking-candidate-set"]
        .map(
          (k) =>
            `<option value="${k}"${k === d.decision_kind ? " selected" : ""}>${k}</option>`,
        )
        .join("") +
      `</select></label>${inline("decision_space")}`,
    metrics:
      `<h2>2 · Metrics <span class="tip" title="Product metrics observed after each decision; delayed + cumulative-discounted metrics are optimized with offline RL.">?</span></h2>` +
      d.metrics
        .map(
          (m, i) =>
            `<div class="metric-row"><input data-metric="${i}" value="${esc(m.name)}"/>` +
            `<select data-metric-timing="${i}">` +
            ["immediate", "delayed"]
              .map(
                (t) =>
                  `<option value="${t}"${t === m.timing ? " selected" : ""}>${t}</option>`,
              )
              .join("") +
            `</select>` +
            `<select data-metric-agg="${i}">` +
            ["mean", "cumulative-discounted"]
              .map(
                (a) =>
                  `<option value="${a}"${a === m.aggregation ? " selected" : ""}>${a}</option>`,
              )
              .join("") +
            `</select></div>`,
        )
        .join("") +
      `<button id="add-metric">add metric</button>${inline("metrics")}`,
    features:
      `<h2>3 · Features <span class="tip" title="Columns logged with every decision; recommended platform features are preselected.">?</span></h2>` +
      d.features
        .map(
          (f, i) =>
            `<div class="feature-row"><label><input type="checkbox" checked data-feature-keep="${i}"/>` +
            `${esc(f.name)} <i>(${f.type}${wizard.recommended.some((r) => r.name === f.name) ? ", recommended" : ""})</i></label></div>`,
        )
        .join("") +
      `<label>add feature (name:type)<input id="f-new-feature" placeholder="age:numeric"/></label>` +
      `<button id="add-feature">add</button>${inline("features")}`,
    review:
      `<h2>4 · Review</h2>` +
      `<pre class="draft">${esc(JSON.stringify(d, null, 2))}</pre>` +
      inline("join_window") +
      inline("retention_days") +
      inline("exploration_epsilon"),
  };
  root.innerHTML =
    nav(d.id) +
    `<section class="wizard">${banner}${steps[wizard.step]}` +
    `<div class="wizard-nav">` +
    (wizard.step !== "decisions" ? `<button id="back">back</button>` : "") +
    (wizard.step !== "review"
      ? `<button id="next"${canAdvance(wizard) ? "" : " disabled"}>next</button>`
      : `<button id="submit"${canSubmit(wizard) ? "" : " disabled"}>create use case</button>`) +
    `</div></section>`;
  wireWizard();
}

function wireWizard(): void {
  const byId = (id: string) => document.getElementById(id);
  byId("f-id")?.addEventListener("change", (e) => {
    wizard = updateDraft(wizard, {
      id: (e.target as HTMLInputElement).value.trim(),
    });
    renderWizard();
  });
  byId("f-actions")?.addEventListener("change", (e) => {
    const actions = (e.target as HTMLInputElement).value
      .split(",")
      .map((a) => a.trim())
      .filter(Boolean);
    wizard = updateDraft(wizard, { actions });
    renderWizard();
  });
  byId("f-kind")?.addEventListener("change", (e) => {
    wizard = updateDraft(wizard, {
      decision_kind: (e.target as HTMLSelectElement)
        .value as typeof wizard.draft.decision_kind,
    });
    renderWizard();
  });
  byId("add-metric")?.addEventListener("click", () => {
    wizard = updateDraft(wizard, {
      metrics: [
        ...wizard.draft.metrics,
        { name: "", direction: "maximize", timing: "immediate", aggregation: "mean" },
      ],
    });
    renderWizard();
  });
  document.querySelectorAll("[data-metric]").forEach((el) =>
    el.addEventListener("change", (e) => {
      const i = Number((el as HTMLElement).dataset.metric);
      const metrics = wizard.draft.metrics.map((m, j) =>
        j === i ? { ...m, name: (e.target as HTMLInputElement).value.trim() } : m,
      );
      wizard = updateDraft(wizard, { metrics });
      renderWizard();
    }),
  );
  byId("add-feature")?.addEventListener("click", () => {
    const raw = (byId("f-new-feature") as HTMLInputElement).value;
    const [name, type = "numeric"] = raw.split(":").map((s) => s.trim());
    if (!name) return;
    wizard = updateDraft(wizard, {
      features: [
        ...wizard.draft.features,
        { name, type: type === "categorical" ? "categorical" : "numeric", required: false },
      ],
    });
    renderWizard();
  });
  byId("back")?.addEventListener("click", () => {
    wizard = back(wizard);
    renderWizard();
  });
  byId("next")?.addEventListener("click", () => {
    wizard = next(wizard);
    renderWizard();
  });
  byId("submit")?.addEventListener("click", () => void submitWizard());
}

async function submitWizard(): Promise<void> {
  const { state, request } = prepareSubmit(wizard);
  wizard = state;
  if (!request) {
    renderWizard(); // invalid: inline problems, no request sent
    return;
  }
  try {
    const out = await api.onboard(request);
    wizard = applySubmitSuccess(wizard, out.id);
  } catch (err) {
    if (err instanceof ApiError) {
      wizard = applySubmitFailure(wizard, err.problems, err.message);
    } else {
      wizard = applySubmitFailure(wizard, [], String(err));
    }
  }
  renderWizard();
}

// --- candidates -------------------------------------------------------------

async function showCandidates(useCase: string): Promise<void> {
  try {
    const candidates = await api.candidates(useCase);
    const metrics = Object.keys(candidates[0]?.estimates ?? {}).sort();
    candidatesView = {
      candidates,
      metricX: metrics[0] ?? "",
      metricY: metrics[1] ?? metrics[0] ?? "",
      selectedId: candidatesView?.selectedId ?? null,
      overrideReason: candidatesView?.overrideReason ?? "",
    };
    root.innerHTML = nav(useCase) + renderCandidates(candidatesView);
    wireCandidates(useCase);
  } catch (err) {
    root.innerHTML =
      nav(useCase) +
      `<section><p class="problem">${esc(err instanceof ApiError ? err.message : String(err))}</p></section>`;
  }
}

function wireCandidates(useCase: string): void {
  document.querySelectorAll("tr.candidate").forEach((row) =>
    row.addEventListener("click", () => {
      if (!candidatesView) return;
      candidatesView = {
        ...candidatesView,
        selectedId: (row as HTMLElement).dataset.candidate ?? null,
        overrideReason: "",
      };
      root.innerHTML = nav(useCase) + renderCandidates(candidatesView);
      wireCandidates(useCase);
    }),
  );
  document.getElementById("override-reason")?.addEventListener("input", (e) => {
    if (!candidatesView) return;
    candidatesView = {
      ...candidatesView,
      overrideReason: (e.target as HTMLInputElement).value,
    };
    const cand = selected(candidatesView);
    const btn = document.getElementById("deploy-btn") as HTMLButtonElement | null;
    if (cand && btn) {
      btn.disabled = !deployEnabled(cand.canary_verdict, candidatesView.overrideReason);
    }
  });
  document.getElementById("deploy-btn")?.addEventListener("click", () => {
    void deploySelected(useCase);
  });
}

async function deploySelected(useCase: string): Promise<void> {
  if (!candidatesView) return;
  const cand = selected(candidatesView);
  if (!cand) return;
  const override = cand.canary_verdict === "reject";
  try {
    await api.deploy(useCase, cand.id, override, candidatesView.overrideReason);
    window.location.hash = `#/health/${useCase}`;
  } catch (err) {
    if (err instanceof ApiError && err.status === 409) {
      // canary rejection: refresh so the verdict renders with override path
      await showCandidates(useCase);
    } else {
      throw err;
    }
  }
}

// --- health -----------------------------------------------------------------

async function showHealth(useCase: string): Promise<void> {
  try {
    const health = await api.health(useCase);
    psiTimeline = pushSample(psiTimeline, health, Date.now());
    root.innerHTML = nav(useCase) + renderHealth(health, psiTimeline);
  } catch (err) {
    root.innerHTML =
      nav(useCase) +
      `<section><p class="problem">${esc(err instanceof ApiError ? err.message : String(err))}</p></section>`;
  }
}

// --- shell ------------------------------------------------------------------

function render(): void {
  if (pollTimer !== undefined) window.clearInterval(pollTimer);
  const { view, useCase } = route();
  if (view === "candidates" && useCase) {
    void showCandidates(useCase);
  } else if (view === "health" && useCase) {
    void showHealth(useCase);
    pollTimer = window.setInterval(() => void showHealth(useCase), POLL_MS);
  } else {
    renderWizard();
  }
}

window.addEventListener("hashchange", render);
render();
