import type {
  Problem,
  RecommendedFeature,
  SpecDraft,
} from "./types.js";
import { emptyDraft, PROBLEM_MESSAGES, validateDraft } from "./validate.js";

/** Multi-step onboarding wizard modeled as a pure state machine: every UI
 * event maps to an action on WizardState, so the whole flow unit-tests
 * without a DOM. Steps follow the owner's mental model: what decision,
 * which metrics, which features. */

export type WizardStep = "decisions" | "metrics" | "features" | "review";

const STEP_ORDER: WizardStep[] = ["decisions", "metrics", "features", "review"];

/** Which declared fields each step owns, for gating step transitions and
 * routing inline errors. */
const STEP_FIELDS: Record<WizardStep, (field: string) => boolean> = {
  decisions: (f) => f === "id" || f === "decision_space",
  metrics: (f) => f === "metrics" || f.startsWith("metrics."),
  features: (f) => f === "features" || f.startsWith("features."),
  review: (f) =>
    f === "join_window" ||
    f === "retention_days" ||
    f === "exploration_epsilon",
};

export interface WizardState {
  step: WizardStep;
  draft: SpecDraft;
  /** recommended features arrive from the gateway and render preselected */
  recommended: RecommendedFeature[];
  problems: Problem[];
  submitted: boolean;
  createdId: string | null;
  serverError: string | null;
}

export function initialWizard(
  recommended: RecommendedFeature[] = [],
): WizardState {
  const draft = emptyDraft();
  // gateway-recommended base features start checked (owners can untick)
  draft.features = recommended.map((f) => ({
    name: f.name,
    type: f.type === "categorical" ? "categorical" : "numeric",
    required: false,
  }));
  return {
    step: "decisions",
    draft,
    recommended,
    problems: [],
    submitted: false,
    createdId: null,
    serverError: null,
  };
}

export function updateDraft(
  state: WizardState,
  patch: Partial<SpecDraft>,
): WizardState {
  const draft = { ...state.draft, ...patch };
  // revalidate live so messages clear as the owner fixes fields
  const problems = state.problems.length ? validateDraft(draft) : [];
  return { ...state, draft, problems };
}

export function stepProblems(state: WizardState): Problem[] {
  return validateDraft(state.draft).filter((p) =>
    STEP_FIELDS[state.step](p.field),
  );
}

export function canAdvance(state: WizardState): boolean {
  return stepProblems(state).length === 0;
}

export function next(state: WizardState): WizardState {
  const blocking = stepProblems(state);
  if (blocking.length > 0) {
    return { ...state, problems: blocking };
  }
  const i = STEP_ORDER.indexOf(state.step);
  if (i === STEP_ORDER.length - 1) return state;
  return { ...state, step: STEP_ORDER[i + 1], problems: [] };
}

export function back(state: WizardState): WizardState {
  const i = STEP_ORDER.indexOf(state.step);
  if (i === 0) return state;
  return { ...state, step: STEP_ORDER[i - 1], problems: [] };
}

/** The wizard cannot submit an invalid spec: an invalid draft just becomes
 * inline problems and no request is attempted. */
export function canSubmit(state: WizardState): boolean {
  return state.step === "review" && validateDraft(state.draft).length === 0;
}

export interface SubmitOutcome {
  state: WizardState;
  /** null when client validation blocked the submit */
  request: SpecDraft | null;
}

export function prepareSubmit(state: WizardState): SubmitOutcome {
  const problems = validateDraft(state.draft);
  if (problems.length > 0) {
    return { state: { ...state, problems }, request: null };
  }
  return { state: { ...state, problems: [] }, request: state.draft };
}

export function applySubmitSuccess(
  state: WizardState,
  id: string,
): WizardState {
  return { ...state, submitted: true, createdId: id, serverError: null };
}

/** Structured 422 bodies land inline next to the offending fields; other
 * failures surface as a banner. */
export function applySubmitFailure(
  state: WizardState,
  problems: Problem[],
  message: string,
): WizardState {
  if (problems.length > 0) {
    return { ...state, problems, serverError: null };
  }
  return { ...state, serverError: message };
}

export function problemMessage(p: Problem): string {
  return PROBLEM_MESSAGES[p.error] ?? p.error;
}

export function problemsFor(state: WizardState, field: string): Problem[] {
  return state.problems.filter(
    (p) => p.field === field || p.field.startsWith(`${field}.`),
  );
}
