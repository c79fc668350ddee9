/** Typed client for the autocomplete service HTTP/JSON API.
 *
 * This is the drafting surface's only connection to the backend: no model
 * files, no checkpoints, no direct imports — just the versioned endpoints.
 */

export type Direction = "forward" | "backward";
export type Extent = "token" | "word" | "phrase" | "span" | "sentence";
export type SamplingStrategy = "greedy" | "top_k" | "temperature";
export type FeedbackAction = "Accepted" | "Rejected" | "Edited";

export interface SamplingBody {
  strategy?: SamplingStrategy;
  top_k?: number;
  temperature?: number;
  max_tokens?: number;
  seed?: number;
}

export interface ConstraintsBody {
  must_include?: string[];
  must_exclude?: string[];
  enforce_antecedent_basis?: boolean;
}

export interface CompleteRequest {
  session_id: string;
  context: string;
  direction: Direction;
  extent?: Extent;
  k?: number;
  lookahead?: number;
  constraints?: ConstraintsBody;
  sampling?: SamplingBody;
}

export interface Candidate {
  candidate_id: string;
  text: string;
  extent: string;
  lm_logprob: number;
  relevancy: number | null;
  score: number;
  rejected_reasons: string[];
}

export interface CompleteResponse {
  session_id: string;
  candidates: Candidate[];
}

export interface BridgeRequest {
  session_id: string;
  left: string;
  right: string;
  window?: number;
  k?: number;
  max_bridge_tokens?: number;
  sampling?: SamplingBody;
}

export interface SessionInfo {
  session_id: string;
  document: string;
  created_at: string;
  history: unknown[];
}

export interface AnnotationEvent {
  ts: string;
  session_id: string;
  context: string;
  candidate: Candidate;
  action: FeedbackAction;
  edited_text: string | null;
  [extra: string]: unknown;
}

export interface HealthInfo {
  status: "ok" | "degraded";
  loaded_checkpoints: string[];
  vocab_hash: string | null;
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/** Raised on any non-2xx response; carries the HTTP status and the
 * service's `detail` message so callers can branch on conflict vs error. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
    readonly path: string,
  ) {
    super(`${path} -> ${status}: ${detail}`);
    this.name = "ApiError";
  }

  /** 409s signal a generation dead end (infeasible constraints, no
   * bridge), which the UI reports inline rather than as a failure. */
  get isConflict(): boolean {
    return this.status === 409;
  }
}

async function errorDetail(response: Response): Promise<string> {
  try {
    const body = (await response.json()) as { detail?: unknown };
    if (typeof body.detail === "string") return body.detail;
    if (body.detail !== undefined) return JSON.stringify(body.detail);
  } catch {
    /* non-JSON error body */
  }
  return response.statusText || "request failed";
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request(path: string, init?: RequestInit): Promise<Response> {
    const response = await this.fetchFn(this.baseUrl + path, init);
    if (!response.ok) {
      throw new ApiError(response.status, await errorDetail(response), path);
    }
    return response;
  }

  private async postJson<T>(path: string, body: unknown): Promise<T> {
    const response = await this.request(path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    return (await response.json()) as T;
  }

  async createSession(): Promise<string> {
    const body = await this.postJson<{ session_id: string }>("/v1/sessions", {});
    return body.session_id;
  }

  async getSession(sessionId: string): Promise<SessionInfo> {
    const response = await this.request(`/v1/sessions/${sessionId}`);
    return (await response.json()) as SessionInfo;
  }

  async complete(request: CompleteRequest): Promise<Candidate[]> {
    const body = await this.postJson<CompleteResponse>("/v1/complete", request);
    return body.candidates;
  }

  async bridge(request: BridgeRequest): Promise<Candidate[]> {
    const body = await this.postJson<CompleteResponse>("/v1/bridge", request);
    return body.candidates;
  }

  async feedback(
    sessionId: string,
    candidateId: string,
    action: FeedbackAction,
    editedText?: string,
  ): Promise<void> {
    await this.request("/v1/feedback", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({
        session_id: sessionId,
        candidate_id: candidateId,
        action,
        edited_text: editedText ?? null,
      }),
    });
  }

  async annotations(since?: string): Promise<AnnotationEvent[]> {
    const query = since ? `?since=${encodeURIComponent(since)}` : "";
    const response = await this.request(`/v1/annotations${query}`);
    const text = await response.text();
    return text
      .split("\n")
      .filter((line) => line.trim().length > 0)
      .map((line) => JSON.parse(line) as AnnotationEvent);
  }

  async health(): Promise<HealthInfo> {
    const response = await this.request("/v1/health");
    return (await response.json()) as HealthInfo;
  }
}
