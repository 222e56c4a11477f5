/** Gateway wire types. The console renders these verbatim; it performs no
 * computation of record beyond presentation (sorting, marking, scaling). */

export interface MetricDraft {
  name: string;
  direction: "maximize" | "minimize";
  timing: "immediate" | "delayed";
  aggregation: "mean" | "cumulative-discounted";
}

export interface FeatureDraft {
  name: string;
  type: "numeric" | "categorical";
  required: boolean;
}

export interface SpecDraft {
  id: string;
  actions: string[];
  decision_kind: "binary" | "multiclass" | "ranking-candidate-set";
  metrics: MetricDraft[];
  features: FeatureDraft[];
  join_window: number;
  retention_days: number;
  exploration_epsilon: number;
}

export interface Problem {
  field: string;
  error: string;
}

export interface RecommendedFeature {
  name: string;
  type: string;
}

export interface OnboardResponse {
  id: string;
  recommended_features: RecommendedFeature[];
}

export interface UseCaseInfo {
  id: string;
  actions: string[];
  decision_kind: string;
  metrics: { name: string; direction: string; timing: string; aggregation: string }[];
  features: { name: string; type: string; required: boolean }[];
  join_window: number;
  retention_days: number;
  exploration_epsilon: number;
  champion: string | null;
  policy_version: string | null;
}

export interface Candidate {
  id: string;
  policy_version: string;
  estimates: Record<string, number>;
  intervals: Record<string, [number, number]>;
  reward_weights: Record<string, number> | null;
  manifest_id: string;
  canary_verdict: string | null;
  source_job: string;
}

export interface JobInfo {
  id: string;
  use_case: string;
  kind: string;
  status: "queued" | "running" | "done" | "failed";
  result: Record<string, unknown> | null;
  error: string | null;
  created_at: number;
  started_at: number | null;
  finished_at: number | null;
}

export interface Decision {
  decision_id: string;
  action: string;
  propensity: number;
  policy_version: string;
}

export interface HealthInfo {
  use_case: string;
  champion: string | null;
  policy_version: string | null;
  counters: { orphans: number; late: number; timeouts: number; duplicates: number };
  drift: {
    per_column_psi: Record<string, number>;
    overall_max_psi: number;
    alert: boolean;
  } | null;
  alerts: { id: string; kind: string; severity: string; raised_at: number; evidence: Record<string, unknown> }[];
}

export interface DeployResponse {
  champion: string;
  policy_version: string;
  parent: string | null;
}
