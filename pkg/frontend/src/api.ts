import type {
  Candidate,
  Decision,
  DeployResponse,
  HealthInfo,
  JobInfo,
  OnboardResponse,
  Problem,
  SpecDraft,
  UseCaseInfo,
} from "./types.js";

/** Error carrying the gateway's structured body (status + error name, and
 * the per-field problem list for spec validation failures). */
export class ApiError extends Error {
  constructor(
    public status: number,
    public errorName: string,
    public detail: string,
    public problems: Problem[] = [],
  ) {
    super(`${errorName}: ${detail}`);
  }
}

async function parse<T>(resp: Response): Promise<T> {
  const body = await resp.json().catch(() => ({}));
  if (!resp.ok) {
    throw new ApiError(
      resp.status,
      (body as { error?: string }).error ?? "HttpError",
      (body as { detail?: string }).detail ?? resp.statusText,
      (body as { problems?: Problem[] }).problems ?? [],
    );
  }
  return body as T;
}

/** Thin typed client over the gateway HTTP API. Every console action goes
 * through one of these documented calls — there are no hidden endpoints. */
export class GatewayClient {
  constructor(
    private baseUrl: string,
    private fetchFn: typeof fetch = fetch,
  ) {}

  private get(path: string): Promise<Response> {
    return this.fetchFn(`${this.baseUrl}${path}`);
  }

  private post(path: string, body: unknown): Promise<Response> {
    return this.fetchFn(`${this.baseUrl}${path}`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  async onboard(draft: SpecDraft): Promise<OnboardResponse> {
    return parse(await this.post("/v1/usecases", draft));
  }

  async describe(useCase: string): Promise<UseCaseInfo> {
    return parse(await this.get(`/v1/usecases/${useCase}`));
  }

  async decide(
    useCase: string,
    unitId: string,
    features: Record<string, unknown>,
    seed = 0,
  ): Promise<Decision> {
    return parse(
      await this.post(`/v1/usecases/${useCase}/decide`, {
        unit_id: unitId,
        features,
        seed,
      }),
    );
  }

  async observe(
    useCase: string,
    decisionId: string,
    metricValues: Record<string, number>,
  ): Promise<{ ok: boolean }> {
    return parse(
      await this.post(`/v1/usecases/${useCase}/observe`, {
        decision_id: decisionId,
        metric_values: metricValues,
      }),
    );
  }

  async submitJob(
    useCase: string,
    kind: string,
    params: Record<string, unknown>,
  ): Promise<JobInfo> {
    return parse(
      await this.post(`/v1/usecases/${useCase}/jobs`, { kind, params }),
    );
  }

  async job(jobId: string): Promise<JobInfo> {
    return parse(await this.get(`/v1/jobs/${jobId}`));
  }

  async candidates(useCase: string): Promise<Candidate[]> {
    const body = await parse<{ candidates: Candidate[] }>(
      await this.get(`/v1/usecases/${useCase}/candidates`),
    );
    return body.candidates;
  }

  async deploy(
    useCase: string,
    candidateId: string,
    override = false,
    reason = "",
  ): Promise<DeployResponse> {
    return parse(
      await this.post(`/v1/usecases/${useCase}/deploy`, {
        candidate_id: candidateId,
        override,
        reason,
      }),
    );
  }

  async health(useCase: string): Promise<HealthInfo> {
    return parse(await this.get(`/v1/usecases/${useCase}/health`));
  }
}
