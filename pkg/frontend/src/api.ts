import type { AnnotationView, InstancePage, SummaryView, TraceView } from "./types.js";

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
    this.name = "ApiError";
  }
}

export interface AnnotationRequest {
  question_id: string;
  category: string;
  note?: string | null;
  annotator?: string;
}

/** Thin typed client over the triage REST endpoints. */
export class TriageApi {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchFn: typeof fetch = (...args) => fetch(...args),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchFn(this.baseUrl + path, init);
    } catch (error) {
      throw new ApiError(0, `API unreachable: ${String(error)}`);
    }
    if (!response.ok) {
      let detail = response.statusText;
      try {
        const body = (await response.json()) as { detail?: unknown };
        if (body && body.detail !== undefined) detail = JSON.stringify(body.detail);
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(response.status, `${path} failed (${response.status}): ${detail}`);
    }
    return (await response.json()) as T;
  }

  listInstances(
    options: {
      errorsOnly?: boolean;
      page?: number;
      size?: number;
      sampleK?: number;
      sampleSeed?: number;
    } = {},
  ): Promise<InstancePage> {
    const params = new URLSearchParams();
    params.set("errors_only", String(options.errorsOnly ?? true));
    params.set("page", String(options.page ?? 1));
    params.set("size", String(options.size ?? 50));
    if (options.sampleK !== undefined) params.set("sample_k", String(options.sampleK));
    if (options.sampleSeed !== undefined) params.set("sample_seed", String(options.sampleSeed));
    return this.request<InstancePage>(`/api/instances?${params.toString()}`);
  }

  getInstance(questionId: string): Promise<TraceView> {
    return this.request<TraceView>(`/api/instances/${encodeURIComponent(questionId)}`);
  }

  submitAnnotation(body: AnnotationRequest): Promise<AnnotationView> {
    return this.request<AnnotationView>("/api/annotations", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  getSummary(): Promise<SummaryView> {
    return this.request<SummaryView>("/api/summary");
  }
}
