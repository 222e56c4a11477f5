import type { Problem, SpecDraft } from "./types.js";

/** Client-side mirror of the gateway's spec validation, so the wizard can
 * block a bad submit and point at the offending field before any request
 * is made. The gateway remains the source of truth; anything it rejects
 * that slipped past this mirror still renders inline from the 422 body. */
export function validateDraft(draft: SpecDraft): Problem[] {
  const problems: Problem[] = [];
  if (!draft.id) {
    problems.push({ field: "id", error: "EmptyId" });
  }
  if (draft.actions.length < 1) {
    problems.push({ field: "decision_space", error: "EmptyDecisionSpace" });
  }
  if (new Set(draft.actions).size !== draft.actions.length) {
    problems.push({ field: "decision_space", error: "DuplicateAction" });
  }
  if (draft.decision_kind === "binary" && draft.actions.length !== 2) {
    problems.push({ field: "decision_space", error: "BinaryNeedsTwoActions" });
  }
  if (draft.metrics.length < 1) {
    problems.push({ field: "metrics", error: "NoMetrics" });
  }
  const metricNames = draft.metrics.map((m) => m.name);
  if (new Set(metricNames).size !== metricNames.length) {
    problems.push({ field: "metrics", error: "DuplicateMetric" });
  }
  for (const m of draft.metrics) {
    if (m.aggregation === "cumulative-discounted" && m.timing !== "delayed") {
      problems.push({
        field: `metrics.${m.name}`,
        error: "CumulativeRequiresDelayed",
      });
    }
  }
  if (!(draft.join_window > 0)) {
    problems.push({ field: "join_window", error: "BadWindow" });
  }
  if (draft.retention_days * 86400.0 < draft.join_window) {
    problems.push({ field: "retention_days", error: "BadWindow" });
  }
  if (!(draft.exploration_epsilon >= 0 && draft.exploration_epsilon <= 1)) {
    problems.push({ field: "exploration_epsilon", error: "BadEpsilon" });
  }
  const columnNames = draft.features.map((c) => c.name);
  if (new Set(columnNames).size !== columnNames.length) {
    problems.push({ field: "features", error: "DuplicateColumn" });
  }
  for (const c of draft.features) {
    if (c.type !== "numeric" && c.type !== "categorical") {
      problems.push({ field: `features.${c.name}`, error: "BadColumnType" });
    }
  }
  return problems;
}

export function emptyDraft(): SpecDraft {
  return {
    id: "",
    actions: [],
    decision_kind: "binary",
    metrics: [],
    features: [],
    join_window: 3600.0,
    retention_days: 35.0,
    exploration_epsilon: 0.05,
  };
}

/** Human wording for each validation error, shown inline next to the
 * field (ML terms get a tooltip in the wizard itself). */
export const PROBLEM_MESSAGES: Record<string, string> = {
  EmptyId: "Give the use case a short identifier.",
  EmptyDecisionSpace: "Add at least one action the policy can take.",
  DuplicateAction: "Actions must be unique.",
  BinaryNeedsTwoActions: "A binary decision needs exactly two actions.",
  NoMetrics: "Add at least one product metric to optimize.",
  DuplicateMetric: "Metric names must be unique.",
  CumulativeRequiresDelayed:
    "Cumulative-discounted metrics must use delayed timing.",
  BadWindow:
    "The join window must be positive and fit inside the retention period.",
  BadEpsilon: "Exploration rate must be between 0 and 1.",
  DuplicateColumn: "Feature names must be unique.",
  BadColumnType: "Feature type must be numeric or categorical.",
};
